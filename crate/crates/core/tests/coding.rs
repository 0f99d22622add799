use std::f64::consts::LN_2;

use gelfand::coding::{
    decode, encode, estimate_pi, eta, run_experiment, CodeMode, CodeRates, Codebook, CodingExperiment, CodingSystem,
    EncoderSettings, TypicalityThresholds,
};
use gelfand::error::Error;
use gelfand::info::{binary_entropy, DensityTable};
use gelfand::prob::{ChannelKernel, ConditionalPmf, GpPolicy, Pmf, XMap};
use gelfand::rng::{domain, stream_rng};
use rand::Rng;

fn bsc_system(p: f64) -> CodingSystem {
    CodingSystem::without_state(&ConditionalPmf::bsc(p).unwrap(), &Pmf::uniform(2)).unwrap()
}

fn bsc_capacity(p: f64) -> f64 {
    LN_2 - binary_entropy(p)
}

/// Per-letter standard deviation of the `(U, Y)` information density.
fn density_sd(system: &CodingSystem) -> f64 {
    DensityTable::new(system.joint_uy()).unwrap().variance(system.joint_uy()).sqrt()
}

/// A state-dependent system with a stochastic input map, for `eta`.
fn stochastic_system() -> CodingSystem {
    let channel = ChannelKernel::new(vec![
        vec![vec![0.9, 0.1], vec![0.2, 0.8]],
        vec![vec![0.3, 0.7], vec![0.85, 0.15]],
    ])
    .unwrap();
    let u_given_s = ConditionalPmf::new(vec![vec![0.6, 0.4], vec![0.25, 0.75]]).unwrap();
    // Row u * |S| + s.
    let x_map = ConditionalPmf::new(vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.2, 0.8], vec![0.6, 0.4]]).unwrap();
    let policy = GpPolicy::new(u_given_s, XMap::Stochastic(x_map), 2).unwrap();
    CodingSystem::new(channel, Pmf::bernoulli(0.35).unwrap(), policy).unwrap()
}

#[test]
fn pi_at_infinite_thresholds_is_zero() {
    let sys = stochastic_system();
    let th = TypicalityThresholds::new(f64::NEG_INFINITY, f64::INFINITY).unwrap();
    let pi = estimate_pi(&sys, 50, 500, th, 1).unwrap();
    assert_eq!(pi.pi1.value, 0.0);
    assert_eq!(pi.pi2.value, 0.0);
    assert!(estimate_pi(&sys, 50, 0, th, 1).is_err());
}

#[test]
fn pi1_at_the_mutual_information_is_a_median() {
    let sys = bsc_system(0.1);
    let mi = bsc_capacity(0.1);
    let th = TypicalityThresholds::new(mi, f64::INFINITY).unwrap();
    let pi = estimate_pi(&sys, 4000, 10_000, th, 2).unwrap();
    assert!((pi.pi1.value - 0.5).abs() < 0.05, "{}", pi.pi1.value);
    assert!(pi.pi1.lo <= pi.pi1.value && pi.pi1.value <= pi.pi1.hi);
}

#[test]
fn pi1_three_sigma_below_is_small() {
    let sys = bsc_system(0.1);
    let n = 4000;
    let t1 = bsc_capacity(0.1) - 3.0 * density_sd(&sys) / (n as f64).sqrt();
    let th = TypicalityThresholds::new(t1, f64::INFINITY).unwrap();
    let pi = estimate_pi(&sys, n, 10_000, th, 3).unwrap();
    assert!(pi.pi1.value <= 0.01, "{}", pi.pi1.value);
}

#[test]
fn eta_trivial_cases() {
    let sys = stochastic_system();
    let mut rng = stream_rng(4, domain::ETA, 0, 0);
    let u = vec![0, 1, 1, 0, 1];
    let s = vec![1, 0, 1, 1, 0];
    let e = eta(&u, &s, &sys, f64::NEG_INFINITY, 300, &mut rng).unwrap();
    assert_eq!(e.value, 0.0);
    assert!(eta(&u, &s[..3], &sys, 0.0, 10, &mut rng).is_err());
    // Noiseless identity: the density is ln 2 per letter, always above the threshold.
    let clean = bsc_system(0.0);
    let e = eta(&[0, 1, 1, 0, 0, 1], &[0; 6], &clean, LN_2 - 1e-3, 300, &mut rng).unwrap();
    assert_eq!(e.value, 0.0);
}

/// `eta` by summing over every input and output block.
fn eta_by_enumeration(sys: &CodingSystem, u: &[usize], s: &[usize], t1: f64) -> f64 {
    let n = u.len();
    let density = DensityTable::new(sys.joint_uy()).unwrap();
    let channel = sys.channel();
    let x_prob = |u: usize, s: usize, x: usize| sys.policy().x_given_us(u, s, x);
    let mut total = 0.0;
    for xs in 0..1usize << n {
        let px: f64 = (0..n).map(|i| x_prob(u[i], s[i], xs >> i & 1)).product();
        for ys in 0..1usize << n {
            let mut w = px;
            let mut dens = 0.0;
            for i in 0..n {
                let (x, y) = (xs >> i & 1, ys >> i & 1);
                w *= channel.prob(s[i], x, y);
                dens += density.get(u[i], y).unwrap();
            }
            if dens < n as f64 * t1 {
                total += w;
            }
        }
    }
    total
}

#[test]
fn eta_agrees_with_enumeration() {
    let sys = stochastic_system();
    let mut rng = stream_rng(5, domain::TRIAL, 0, 0);
    for _ in 0..4 {
        let n = 8;
        let u: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let s: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let t1 = sys.mi_uy() - 0.01;
        let exact = eta_by_enumeration(&sys, &u, &s, t1);
        let est = eta(&u, &s, &sys, t1, 20_000, &mut rng).unwrap();
        let se = (exact * (1.0 - exact) / 20_000.0).sqrt().max(1e-4);
        assert!((est.value - exact).abs() <= 3.0 * se, "{} vs {exact}", est.value);
    }
}

#[test]
fn subcodebook_sizes() {
    let p_u = [0.5, 0.5];
    let same = Codebook::build(20, CodeRates::new(0.2, 0.2).unwrap(), &p_u, CodeMode::Explicit, 1).unwrap();
    assert_eq!(same.sizes().subcode.exact, Some(1));
    assert_eq!(same.sizes().messages.exact, Some(55));
    let four = CodeRates::new(0.1, 0.1 + 4f64.ln() / 30.0).unwrap();
    let code = Codebook::build(30, four, &p_u, CodeMode::Explicit, 1).unwrap();
    assert_eq!(code.sizes().subcode.exact, Some(4));
}

#[test]
fn codebooks_are_reproducible() {
    let p_u = [0.2, 0.5, 0.3];
    let rates = CodeRates::new(0.15, 0.2).unwrap();
    let a = Codebook::build(40, rates, &p_u, CodeMode::Explicit, 9).unwrap();
    let b = Codebook::build(40, rates, &p_u, CodeMode::Explicit, 9).unwrap();
    let c = Codebook::build(40, rates, &p_u, CodeMode::Explicit, 10).unwrap();
    assert_eq!(a.to_bytes(), b.to_bytes());
    assert_ne!(a.to_bytes(), c.to_bytes());
    let lazy = Codebook::build(40, rates, &p_u, CodeMode::Lazy, 9).unwrap();
    assert_eq!(lazy.word(3, 7, 2), lazy.word(3, 7, 2));
}

#[test]
fn explicit_codebooks_are_capped() {
    let err = Codebook::build(200, CodeRates::new(0.3, 0.35).unwrap(), &[0.5, 0.5], CodeMode::Explicit, 0).unwrap_err();
    match err {
        Error::TooLarge { hint, .. } => assert!(hint.contains("reduce n or rates")),
        e => panic!("unexpected {e}"),
    }
}

fn settings(t1: f64, eta_limit: f64) -> EncoderSettings {
    EncoderSettings {
        t1,
        eta_limit,
        inner_draws: 50,
        scan_limit: 64,
        seed: 0,
    }
}

#[test]
fn encoder_picks_first_covering_codeword() {
    let sys = bsc_system(0.1);
    let mut rng = stream_rng(6, domain::TRIAL, 0, 0);
    let words: Vec<Vec<usize>> = (0..8).map(|_| (0..10).map(|_| rng.gen_range(0..2)).collect()).collect();
    let single = Codebook::from_words(&words, 1, 2).unwrap();
    let s = vec![0; 10];
    let e = encode(&single, &sys, 3, &s, &settings(f64::NEG_INFINITY, 0.0), 0, &mut rng).unwrap();
    assert_eq!((e.index, e.covering_failed), (0, false));
    // With pi1 = 1 the covering limit is 1, so every codeword qualifies.
    let quads = Codebook::from_words(&words, 4, 2).unwrap();
    let e = encode(&quads, &sys, 1, &s, &settings(0.3, 1.0), 0, &mut rng).unwrap();
    assert_eq!((e.index, e.covering_failed, e.scanned), (0, false, 1));
    // Nothing qualifies: fall back to the first codeword and flag it.
    let e = encode(&quads, &sys, 1, &s, &settings(f64::INFINITY, 0.5), 0, &mut rng).unwrap();
    assert_eq!((e.index, e.covering_failed, e.scanned), (0, true, 4));
    // For the noiseless identity channel X = U, so the input is the codeword.
    let clean = bsc_system(0.0);
    let e = encode(&quads, &clean, 1, &s, &settings(0.3, 1.0), 0, &mut rng).unwrap();
    assert_eq!(e.x_block, words[4]);
    assert!(encode(&quads, &sys, 2, &s, &settings(0.3, 1.0), 0, &mut rng).is_err());
}

#[test]
fn decoder_needs_a_unique_message() {
    // Noiseless channel: a codeword is typical exactly when it equals y^n.
    let sys = bsc_system(0.0);
    let t1 = LN_2 - 0.02;
    let mut words: Vec<Vec<usize>> = (0..8).map(|k| (0..6).map(|i| (k >> (i % 3)) & 1).collect()).collect();
    let y = vec![1, 1, 1, 1, 1, 1];
    words.iter_mut().for_each(|w| w[5] = 0);
    let code = Codebook::from_words(&words, 2, 2).unwrap();
    assert_eq!(decode(&code, &sys, &y, t1).unwrap().message, None);
    words[7] = y.clone();
    let code = Codebook::from_words(&words, 2, 2).unwrap();
    let d = decode(&code, &sys, &y, t1).unwrap();
    assert_eq!((d.message, d.typical.clone()), (Some(3), vec![(3, 1)]));
    words[0] = y.clone();
    let code = Codebook::from_words(&words, 2, 2).unwrap();
    assert_eq!(decode(&code, &sys, &y, t1).unwrap().message, None);
}

#[test]
fn noiseless_channel_never_errs() {
    let sys = bsc_system(0.0);
    let exp = CodingExperiment {
        n: 64,
        rate: Some(0.5 * LN_2),
        trials: 1000,
        seed: 7,
        ..Default::default()
    };
    let r = run_experiment(&sys, &exp).unwrap();
    assert_eq!(r.error.successes, 0);
    assert!(r.trials.iter().all(|t| t.ok && !t.e1 && !t.e2 && !t.e3));
}

#[test]
fn explicit_and_lazy_codes_agree_statistically() {
    let sys = bsc_system(0.05);
    let base = CodingExperiment {
        n: 24,
        rate: Some(0.25),
        gamma1: 0.05,
        trials: 1500,
        seed: 8,
        ..Default::default()
    };
    let explicit = run_experiment(&sys, &CodingExperiment { mode: CodeMode::Explicit, ..base }).unwrap();
    let lazy = run_experiment(&sys, &CodingExperiment { mode: CodeMode::Lazy, ..base }).unwrap();
    assert!(explicit.explicit_code && !lazy.explicit_code);
    let se = (explicit.error_std_error.powi(2) + lazy.error_std_error.powi(2)).sqrt();
    assert!(
        (explicit.error.value - lazy.error.value).abs() <= 4.0 * se,
        "{} vs {}",
        explicit.error.value,
        lazy.error.value
    );
    assert!(explicit.e3.value > 0.0 && lazy.e3.value > 0.0);
}

#[test]
fn error_decreases_with_blocklength_below_capacity() {
    let sys = bsc_system(0.1);
    let mut last = 1.0;
    for n in [200, 400, 800] {
        let exp = CodingExperiment {
            n,
            rate: Some(0.7 * bsc_capacity(0.1)),
            trials: 1000,
            seed: 11,
            ..Default::default()
        };
        let r = run_experiment(&sys, &exp).unwrap();
        assert!(r.error.value < last, "n = {n}: {} after {last}", r.error.value);
        assert!(r.checks.error_le_rho && r.checks.e3_le_exp && r.checks.e2_not_e1_le_sqrt_pi1);
        assert!(r.checks.failures_flagged && r.checks.e1_le_bound);
        let failures = r.error.successes;
        assert!(failures <= r.e1.successes + r.e2_not_e1.successes + r.e3.successes);
        assert!(!r.converse.active);
        last = r.error.value;
    }
}

#[test]
fn error_approaches_one_above_capacity() {
    let sys = bsc_system(0.1);
    let exp = CodingExperiment {
        n: 800,
        rate: Some(1.2 * bsc_capacity(0.1)),
        trials: 500,
        seed: 12,
        ..Default::default()
    };
    let r = run_experiment(&sys, &exp).unwrap();
    assert!(r.error.value >= 0.9);
    assert!(r.converse.active && r.converse.holds);
    assert!(r.converse.bound > 0.9);
}

#[test]
fn runs_are_reproducible_and_logged() {
    let sys = stochastic_system();
    let exp = CodingExperiment {
        n: 30,
        gamma1: 0.05,
        gamma2: 0.05,
        rate: Some(0.01),
        trials: 200,
        seed: 13,
        ..Default::default()
    };
    let a = run_experiment(&sys, &exp).unwrap();
    let b = run_experiment(&sys, &exp).unwrap();
    assert_eq!(a, b);
    let mut csv = Vec::new();
    a.write_trial_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("trial,message,L,e1,e2,e3,decoded,ok\n"));
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn oversized_runs_are_refused() {
    let sys = bsc_system(0.1);
    let exp = CodingExperiment {
        n: 1_000_000,
        rate: Some(0.1),
        ..Default::default()
    };
    match run_experiment(&sys, &exp).unwrap_err() {
        Error::TooLarge { bound, .. } => assert_eq!(bound, (1u64 << 30) as f64),
        e => panic!("unexpected {e}"),
    }
}
