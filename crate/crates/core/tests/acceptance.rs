//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any FAIL.

use std::f64::consts::LN_2;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use gelfand::capacity::{
    cesaro_capacity, example2_capacity, gp_capacity, gp_capacity_dm, j_density_extrema, state_at_both_capacity,
    GpOptions, SequenceSpec,
};
use gelfand::coding::{run_experiment, CodingExperiment, CodingSystem, ExperimentReport};
use gelfand::info::{binary_entropy, sample_memoryless_spectrum, spectral_rate_estimate, Histogram, SpectralMode};
use gelfand::mixed::{maximize_mixed_lower_bound, mixture_spectrum_demo, MixtureSpec};
use gelfand::prob::{ChannelKernel, ConditionalPmf, GpPolicy, Pmf};
use gelfand::region::{region_frontier, region_frontier_with, RegionOptions};
use gelfand::rng::{domain, stream_rng};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion(id: usize, name: &str, limit: Duration, check: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = check();
    let elapsed = start.elapsed();
    let pass = out.pass && elapsed <= limit;
    println!(
        "{} criterion {id}: {name} ({:.1}s of {}s) {}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs(),
        out.detail
    );
    pass
}

/// `max_p I(X;Y)` for a binary-input channel by golden-section search over
/// `P(X = 1)`; the mutual information is concave in `p`.
fn binary_input_capacity(w: &[[f64; 2]; 2]) -> f64 {
    let mi = |p: f64| {
        let px = [1.0 - p, p];
        let py: Vec<f64> = (0..2).map(|y| px[0] * w[0][y] + px[1] * w[1][y]).collect();
        let mut total = 0.0;
        for x in 0..2 {
            for y in 0..2 {
                let v = px[x] * w[x][y];
                if v > 0.0 {
                    total += v * (w[x][y] / py[y]).ln();
                }
            }
        }
        total
    };
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, 1.0);
    for _ in 0..200 {
        let (c, d) = (b - g * (b - a), a + g * (b - a));
        if mi(c) < mi(d) {
            a = c;
        } else {
            b = d;
        }
    }
    mi(0.5 * (a + b))
}

fn reduction_identities() -> Outcome {
    let mut worst_bsc: f64 = 0.0;
    for p in [0.0, 0.05, 0.1, 0.25, 0.5] {
        let w = ChannelKernel::state_blind(&ConditionalPmf::bsc(p).unwrap(), 2);
        let c = gp_capacity_dm(&w, &Pmf::new(vec![0.4, 0.6]).unwrap(), 5).unwrap().value;
        worst_bsc = worst_bsc.max((c - (LN_2 - binary_entropy(p))).abs());
    }
    let mut rng = stream_rng(2024, domain::SAMPLE, 1, 0);
    let mut worst_both: f64 = 0.0;
    for _ in 0..100 {
        let w: Vec<[[f64; 2]; 2]> = (0..2)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.gen(), rng.gen());
                [[1.0 - a, a], [b, 1.0 - b]]
            })
            .collect();
        let q = Pmf::bernoulli(rng.gen_range(0.0..1.0)).unwrap();
        let kernel =
            ChannelKernel::new(w.iter().map(|m| m.iter().map(|r| r.to_vec()).collect()).collect()).unwrap();
        let got = state_at_both_capacity(&kernel, &q).unwrap().value;
        let oracle: f64 = (0..2).map(|s| q.get(s) * binary_input_capacity(&w[s])).sum();
        worst_both = worst_both.max((got - oracle).abs());
    }
    Outcome {
        pass: worst_bsc <= 1e-4 && worst_both <= 1e-6,
        detail: format!("max BSC deviation {worst_bsc:.2e}, max two-sided deviation {worst_both:.2e}"),
    }
}

fn j_density_constants() -> Outcome {
    let j = j_density_extrema(1 << 16).unwrap();
    let (lo, hi) = (j.liminf_odd_j, j.limsup_odd_j);
    Outcome {
        pass: (lo - 1.0 / 3.0).abs() <= 0.01 && (hi - 2.0 / 3.0).abs() <= 0.01,
        detail: format!("min {lo:.5}, max {hi:.5}"),
    }
}

fn odd_even_closed_form() -> Outcome {
    let opts = GpOptions::default();
    let mut rng = stream_rng(77, domain::SAMPLE, 3, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let mut q = || rng.gen_range(0.01_f64..0.99);
        let wa = ChannelKernel::binary_symmetric(&[q(), q()]).unwrap();
        let wb = ChannelKernel::binary_symmetric(&[q(), q()]).unwrap();
        let wc = ChannelKernel::binary_symmetric(&[q(), q()]).unwrap();
        let qa = Pmf::bernoulli(q()).unwrap();
        let qb = Pmf::bernoulli(q()).unwrap();
        let closed = example2_capacity(&wa, &wb, &wc, &qa, &qb, &opts).unwrap();
        let seq = SequenceSpec::odd_even(wa, wb, wc, qa, qb).unwrap();
        let r = cesaro_capacity(&seq, 1 << 16, &opts).unwrap();
        worst = worst.max((r.liminf_estimate - closed).abs());
    }
    Outcome {
        pass: worst <= 0.01,
        detail: format!("max |liminf - closed form| {worst:.2e} nats"),
    }
}

fn bsc_system() -> CodingSystem {
    CodingSystem::without_state(&ConditionalPmf::bsc(0.1).unwrap(), &Pmf::uniform(2)).unwrap()
}

fn bsc_run(fraction: f64, n: usize, trials: usize) -> ExperimentReport {
    let capacity = LN_2 - binary_entropy(0.1);
    let exp = CodingExperiment {
        n,
        gamma1: 0.02,
        gamma2: 0.02,
        rate: Some(fraction * capacity),
        trials,
        seed: 4,
        ..CodingExperiment::default()
    };
    run_experiment(&bsc_system(), &exp).unwrap()
}

fn error_bound_behaviour() -> Outcome {
    let reports: Vec<ExperimentReport> = [200, 400, 800].iter().map(|&n| bsc_run(0.7, n, 2000)).collect();
    let mut inversions = 0;
    let mut monotone = true;
    for w in reports.windows(2) {
        if w[1].error.value > w[0].error.value {
            inversions += 1;
            monotone &= w[1].error.lo <= w[0].error.hi;
        }
    }
    monotone &= inversions <= 1;
    let bounds = reports
        .iter()
        .all(|r| r.checks.error_le_rho && r.checks.e3_le_exp && r.checks.e2_not_e1_le_sqrt_pi1);
    let summary: Vec<String> = reports
        .iter()
        .map(|r| format!("n={} err={:.4} rho={:.3}", r.experiment.n, r.error.value, r.rho.total))
        .collect();
    Outcome {
        pass: monotone && bounds,
        detail: format!("{}; monotone {monotone}, bounds {bounds}", summary.join(", ")),
    }
}

fn converse_threshold() -> Outcome {
    let r = bsc_run(1.2, 800, 2000);
    Outcome {
        pass: r.error.value >= 0.9,
        detail: format!("error {:.4} at n = 800", r.error.value),
    }
}

fn bec_mixture() -> MixtureSpec {
    let blind = |c: ConditionalPmf| ChannelKernel::state_blind(&c, 1);
    MixtureSpec::new(
        vec![
            (0.5, blind(ConditionalPmf::bec(1.0 - 0.15 / LN_2).unwrap())),
            (0.5, blind(ConditionalPmf::bec(1.0 - 0.55 / LN_2).unwrap())),
        ],
        vec![(1.0, Pmf::uniform(1))],
    )
    .unwrap()
}

fn uniform_input() -> GpPolicy {
    GpPolicy::identity(ConditionalPmf::new(vec![vec![0.5, 0.5]]).unwrap())
}

fn mixed_spectrum() -> Outcome {
    let s = mixture_spectrum_demo(&bec_mixture(), &uniform_input(), 2000, 10_000, 6).unwrap();
    let hist = Histogram::new(s.samples(), 0.005).unwrap();
    let modes = hist.modes(5, 0.002, 1);
    let mass = Histogram::mass_near(s.samples(), &modes, 0.05);
    let inf = spectral_rate_estimate(&s, SpectralMode::Inf, 0.01).unwrap().value;
    let locations: Vec<String> = modes.iter().map(|m| format!("{:.4}", m.location)).collect();
    Outcome {
        pass: modes.len() == 2 && mass >= 0.95 && (inf - 0.15).abs() <= 0.02,
        detail: format!("modes [{}], mass near modes {mass:.4}, inf estimate {inf:.4}", locations.join(", ")),
    }
}

fn region_systems() -> Vec<(ChannelKernel, Pmf)> {
    let mut rng = stream_rng(31, domain::SAMPLE, 7, 0);
    let mut out = vec![(
        ChannelKernel::new(vec![
            vec![vec![0.9, 0.1], vec![0.1, 0.9]],
            vec![vec![0.2, 0.8], vec![0.8, 0.2]],
        ])
        .unwrap(),
        Pmf::bernoulli(0.3).unwrap(),
    )];
    for _ in 0..2 {
        let w = (0..2)
            .map(|_| {
                (0..2)
                    .map(|_| {
                        let p: f64 = rng.gen();
                        vec![1.0 - p, p]
                    })
                    .collect()
            })
            .collect();
        out.push((ChannelKernel::new(w).unwrap(), Pmf::bernoulli(rng.gen_range(0.2..0.8)).unwrap()));
    }
    out
}

fn region_endpoints() -> Outcome {
    let grid = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, LN_2];
    let mut pass = true;
    let mut parts = Vec::new();
    for (w, s) in region_systems() {
        let f = region_frontier(&w, &s, 5, 4, &grid).unwrap();
        let gp = gp_capacity_dm(&w, &s, 4).unwrap().value;
        let both = state_at_both_capacity(&w, &s).unwrap().value;
        let (r0, rtop) = (f[0].rate, f.last().unwrap().rate);
        let monotone = f.windows(2).all(|p| p[1].rate >= p[0].rate);
        pass &= (r0 - gp).abs() <= 2e-3 && (rtop - both).abs() <= 2e-3 && monotone;
        parts.push(format!("R(0)-GP {:.1e}, R(ln2)-both {:.1e}", r0 - gp, rtop - both));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

/// Serialized results of every randomized library path.
fn fingerprint() -> String {
    let mut parts = Vec::new();
    let (w, s) = region_systems().remove(1);
    let gp = gp_capacity(&w, &s, &GpOptions { seed: 3, ..GpOptions::default() }).unwrap();
    parts.push(serde_json::to_string(&gp).unwrap());
    let mix = MixtureSpec::new(vec![(0.4, w.clone()), (0.6, region_systems().remove(2).0)], vec![(1.0, s.clone())]).unwrap();
    parts.push(serde_json::to_string(&maximize_mixed_lower_bound(&mix, 2).unwrap()).unwrap());
    parts.push(serde_json::to_string(&mixture_spectrum_demo(&bec_mixture(), &uniform_input(), 500, 2000, 9).unwrap()).unwrap());
    let sys = bsc_system();
    parts.push(serde_json::to_string(&sample_memoryless_spectrum(sys.joint_uy(), 300, 2000, 9).unwrap()).unwrap());
    let report = bsc_run(0.7, 200, 300);
    let mut log = Vec::new();
    report.write_trial_csv(&mut log).unwrap();
    parts.push(serde_json::to_string(&report).unwrap());
    parts.push(String::from_utf8(log).unwrap());
    let opts = RegionOptions { seed: 2, ..RegionOptions::default() };
    parts.push(serde_json::to_string(&region_frontier_with(&w, &s, &[0.0, 0.2, LN_2], &opts).unwrap()).unwrap());
    let seq = SequenceSpec::odd_even(
        ChannelKernel::binary_symmetric(&[0.1, 0.3]).unwrap(),
        ChannelKernel::binary_symmetric(&[0.2, 0.05]).unwrap(),
        w,
        Pmf::bernoulli(0.3).unwrap(),
        s,
    )
    .unwrap();
    parts.push(serde_json::to_string(&cesaro_capacity(&seq, 1 << 12, &GpOptions::default()).unwrap()).unwrap());
    parts.join("\n")
}

fn determinism() -> Outcome {
    let runs: Vec<String> = [1, 4, 8]
        .iter()
        .map(|&t| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .unwrap()
                .install(fingerprint)
        })
        .collect();
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    Outcome {
        pass: same,
        detail: format!("{} bytes of output compared across 1, 4 and 8 workers", runs[0].len()),
    }
}

fn main() -> ExitCode {
    let s = Duration::from_secs;
    let results = [
        criterion(1, "reduction identities", s(60), reduction_identities),
        criterion(2, "odd-J density extrema", s(1), j_density_constants),
        criterion(3, "odd/even sequence closed form", s(300), odd_even_closed_form),
        criterion(4, "random-coding error bound", s(1200), error_bound_behaviour),
        criterion(5, "error above capacity", s(600), converse_threshold),
        criterion(6, "bimodal mixed spectrum", s(300), mixed_spectrum),
        criterion(7, "rate-region endpoints", s(900), region_endpoints),
        criterion(8, "determinism across worker counts", s(900), determinism),
    ];
    let failed = results.iter().filter(|&&p| !p).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
