//! The four subcommands. Each reads a spec, runs one library computation and
//! writes its results under `--out`.

use std::fs;
use std::io::Write;

use serde::Serialize;

use gelfand::capacity::{
    cesaro_capacity, example2_capacity, gp_capacity, no_state_capacity, state_at_both_capacity,
    CesaroResult, Diagnostics, GpOptions, SequenceSpec,
};
use gelfand::coding::{run_experiment, CodingExperiment, CodingSystem, ExperimentReport, ThresholdSource};
use gelfand::info::{entropy, sample_memoryless_spectrum, Histogram, Mode, SpectrumSummary, DEFAULT_DELTA};
use gelfand::mixed::{maximize_mixed_lower_bound_with, mixed_bound_terms, mixture_spectrum_demo, MixedTerms};
use gelfand::prob::{GpPolicy, Pmf};
use gelfand::region::{region_frontier_with, region_membership, Frontier, RegionOptions};
use gelfand::spec_file::{parse_spec, SpecFile, SpecKind, SpecOptions};

use crate::output::{Header, OutDir};
use crate::{Failure, RunArgs};

/// Histogram bin width in nats.
pub const BIN_WIDTH: f64 = 0.005;
const DEFAULT_HORIZON: usize = 1 << 16;
const DEFAULT_SPECTRUM_N: usize = 2000;
const DEFAULT_DRAWS: usize = 10_000;
/// Mode detection: clusters separated by 5 sparse bins, a bin being sparse
/// below 0.2% of the draws.
const MODE_GAP: usize = 5;
const MODE_SPARSE: f64 = 0.002;
const MODE_RADIUS: f64 = 0.05;

fn load(command: &'static str, args: &RunArgs) -> Result<(SpecFile, OutDir), Failure> {
    let text = fs::read_to_string(&args.spec)
        .map_err(|e| Failure::Validation(format!("cannot read {}: {e}", args.spec.display())))?;
    let spec = parse_spec(&text)?;
    if let Some(d) = args.delta {
        if !(d > 0.0 && d <= 0.5) {
            return Err(Failure::Validation(format!("--delta must lie in (0, 0.5], got {d}")));
        }
    }
    let out = OutDir::create(&args.out, Header::new(command, args, &text))?;
    Ok((spec, out))
}

fn gp_options(opts: &SpecOptions, seed: u64) -> GpOptions {
    let mut g = GpOptions {
        u_size: opts.u_size,
        seed,
        ..GpOptions::default()
    };
    if let Some(r) = opts.restarts {
        g.restarts = r;
    }
    g
}

fn finite(name: &str, v: f64) -> Result<f64, Failure> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Failure::Invariant(format!("{name} is not finite ({v})")))
    }
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum CapacityOut<'a> {
    System {
        capacity_nats: f64,
        state_at_both_nats: f64,
        state_unknown_nats: f64,
        policy: &'a GpPolicy,
        diagnostics: &'a Diagnostics,
    },
    Stateless {
        capacity_nats: f64,
        input: &'a GpPolicy,
        diagnostics: &'a Diagnostics,
    },
    Mixture {
        lower_bound_nats: f64,
        terms: &'a MixedTerms,
        policy: &'a GpPolicy,
        diagnostics: &'a Diagnostics,
    },
    Sequence {
        liminf_estimate_nats: f64,
        analytic_nats: Option<f64>,
        closed_form_nats: Option<f64>,
        window: (usize, usize),
        constituent_capacities: &'a [f64],
        horizon: usize,
    },
}

pub fn capacity(args: &RunArgs) -> Result<String, Failure> {
    let (spec, out) = load("capacity", args)?;
    let gp_opts = gp_options(&spec.options, args.seed);
    let (value, path) = match &spec.kind {
        SpecKind::System { channel, state, .. } => {
            let gp = gp_capacity(channel, state, &gp_opts)?;
            let both = state_at_both_capacity(channel, state)?.value;
            let unknown = no_state_capacity(&channel.averaged(state)?).value;
            let value = finite("capacity", gp.value)?;
            if value > both + 1e-6 {
                return Err(Failure::Invariant(format!(
                    "capacity {value} exceeds the two-sided value {both}"
                )));
            }
            let body = CapacityOut::System {
                capacity_nats: value,
                state_at_both_nats: both,
                state_unknown_nats: unknown,
                policy: &gp.policy,
                diagnostics: &gp.diagnostics,
            };
            (value, out.json("capacity.json", &body)?)
        }
        SpecKind::Stateless { channel, .. } => {
            let c = no_state_capacity(channel);
            let value = finite("capacity", c.value)?;
            let body = CapacityOut::Stateless {
                capacity_nats: value,
                input: &c.policy,
                diagnostics: &c.diagnostics,
            };
            (value, out.json("capacity.json", &body)?)
        }
        SpecKind::Mixture { mixture, .. } => {
            let r = maximize_mixed_lower_bound_with(mixture, &gp_opts)?;
            let terms = mixed_bound_terms(mixture, &r.policy)?;
            let value = finite("mixed lower bound", r.value)?;
            let body = CapacityOut::Mixture {
                lower_bound_nats: value,
                terms: &terms,
                policy: &r.policy,
                diagnostics: &r.diagnostics,
            };
            (value, out.json("capacity.json", &body)?)
        }
        SpecKind::Sequence(seq) => {
            let horizon = args.n.or(spec.options.n_max).unwrap_or(DEFAULT_HORIZON);
            let c: CesaroResult = cesaro_capacity(seq, horizon, &gp_opts)?;
            let closed_form = match seq {
                SequenceSpec::JOddEven {
                    odd_inside,
                    odd_outside,
                    even,
                } => example2_capacity(
                    &odd_inside.channel,
                    &odd_outside.channel,
                    &even.channel,
                    &odd_inside.state,
                    &even.state,
                    &gp_opts,
                )
                .ok(),
                _ => None,
            };
            let value = finite("liminf estimate", c.liminf_estimate)?;
            out.csv("capacity_averages.csv", |w| {
                writeln!(w, "n,average_nats")?;
                for (i, a) in c.partial_averages.iter().enumerate() {
                    writeln!(w, "{},{a}", i + 1)?;
                }
                Ok(())
            })?;
            let body = CapacityOut::Sequence {
                liminf_estimate_nats: value,
                analytic_nats: c.analytic_value,
                closed_form_nats: closed_form,
                window: c.window,
                constituent_capacities: &c.constituent_capacities,
                horizon,
            };
            (value, out.json("capacity.json", &body)?)
        }
    };
    Ok(format!("capacity_nats={value} -> {}", path.display()))
}

/// The Gel'fand-Pinsker policy from the spec, or an optimal one.
fn system_policy(spec: &SpecFile, seed: u64) -> Result<Option<CodingSystem>, Failure> {
    let gp_opts = gp_options(&spec.options, seed);
    Ok(match &spec.kind {
        SpecKind::System { channel, state, policy } => {
            let policy = match policy {
                Some(p) => p.clone(),
                None => gp_capacity(channel, state, &gp_opts)?.policy,
            };
            Some(CodingSystem::new(channel.clone(), state.clone(), policy)?)
        }
        SpecKind::Stateless { channel, input } => {
            let input: Pmf = match input {
                Some(p) => p.clone(),
                None => no_state_capacity(channel).policy.u_given_s().row(0).clone(),
            };
            Some(CodingSystem::without_state(channel, &input)?)
        }
        _ => None,
    })
}

#[derive(Serialize)]
struct SpectrumOut<'a> {
    summary: &'a SpectrumSummary,
    bin_width_nats: f64,
    modes: &'a [Mode],
    /// Fraction of draws within `mode_radius_nats` of a detected mode.
    mass_near_modes: f64,
    mode_radius_nats: f64,
    /// `I(U;Y)` of each channel/state component.
    component_mutual_informations: Vec<f64>,
}

pub fn spectrum(args: &RunArgs) -> Result<String, Failure> {
    let (spec, out) = load("spectrum", args)?;
    let n = args.n.unwrap_or(DEFAULT_SPECTRUM_N);
    let draws = args.draws.unwrap_or(DEFAULT_DRAWS);
    let delta = args.delta.unwrap_or(DEFAULT_DELTA);
    if draws == 0 {
        return Err(Failure::Validation("--draws must be positive".into()));
    }
    if n == 0 {
        return Err(Failure::Validation("--n must be positive".into()));
    }
    let (samples, mis) = match &spec.kind {
        SpecKind::Mixture { mixture, policy } => {
            let policy = match policy {
                Some(p) => p.clone(),
                None => maximize_mixed_lower_bound_with(mixture, &gp_options(&spec.options, args.seed))?.policy,
            };
            let terms = mixed_bound_terms(mixture, &policy)?;
            let samples = mixture_spectrum_demo(mixture, &policy, n, draws, args.seed)?;
            (samples, terms.packing.into_iter().flatten().collect())
        }
        SpecKind::Sequence(_) => {
            return Err(Failure::Validation(
                "spectrum takes a system, stateless or mixture spec".into(),
            ))
        }
        _ => {
            let system = system_policy(&spec, args.seed)?.expect("single system");
            let samples = sample_memoryless_spectrum(system.joint_uy(), n, draws, args.seed)?;
            (samples, vec![system.mi_uy()])
        }
    };
    let summary = samples.summary(delta)?;
    let hist = Histogram::new(samples.samples(), BIN_WIDTH)?;
    let modes = hist.modes(MODE_GAP, MODE_SPARSE, 1);
    let body = SpectrumOut {
        summary: &summary,
        bin_width_nats: BIN_WIDTH,
        modes: &modes,
        mass_near_modes: Histogram::mass_near(samples.samples(), &modes, MODE_RADIUS),
        mode_radius_nats: MODE_RADIUS,
        component_mutual_informations: mis,
    };
    out.csv("spectrum_histogram.csv", |w| hist.write_csv(w))?;
    let path = out.json("spectrum_summary.json", &body)?;
    Ok(format!(
        "inf_rate={} sup_rate={} modes={} -> {}",
        summary.inf_rate,
        summary.sup_rate,
        modes.len(),
        path.display()
    ))
}

#[derive(Serialize)]
struct Trend {
    blocklengths: Vec<usize>,
    errors: Vec<f64>,
    std_errors: Vec<f64>,
    /// Errors are non-decreasing in `n` up to three standard errors and end
    /// no lower than they start.
    error_to_one_trend: bool,
}

#[derive(Serialize)]
struct SimulateOut<'a> {
    mutual_information_uy: f64,
    mutual_information_us: f64,
    /// Empirical error is at most `rho_n` plus three standard errors.
    error_within_rho: bool,
    report: &'a ExperimentReport,
    /// Shorter blocklengths, run only above the converse threshold.
    converse_trend: Option<Trend>,
}

pub fn simulate(args: &RunArgs) -> Result<String, Failure> {
    let (spec, out) = load("simulate", args)?;
    let system = system_policy(&spec, args.seed)?
        .ok_or_else(|| Failure::Validation("simulate takes a system or stateless spec".into()))?;
    let o = &spec.options;
    let defaults = CodingExperiment::default();
    let rate = match (o.rate, o.rate_fraction) {
        (Some(_), Some(_)) => {
            return Err(Failure::Validation("options: give rate or rate_fraction, not both".into()))
        }
        (Some(r), None) => Some(r),
        (None, Some(f)) => Some(f * system.mi_uy()),
        (None, None) => None,
    };
    let exp = CodingExperiment {
        n: args.n.unwrap_or(defaults.n),
        gamma1: o.gamma1.unwrap_or(defaults.gamma1),
        gamma2: o.gamma2.unwrap_or(defaults.gamma2),
        rate,
        seed: args.seed,
        trials: args.trials.unwrap_or(defaults.trials),
        inner_draws: o.inner_draws.unwrap_or(defaults.inner_draws),
        pi_draws: args.draws.or(o.pi_draws).unwrap_or(defaults.pi_draws),
        thresholds: match args.delta {
            Some(delta) => ThresholdSource::Quantile { delta },
            None => ThresholdSource::SingleLetter,
        },
        ..defaults
    };
    let report = run_experiment(&system, &exp)?;
    let converse_trend = if report.converse.active {
        let mut ns: Vec<usize> = [exp.n / 4, exp.n / 2].into_iter().filter(|&m| m > 0).collect();
        ns.dedup();
        let mut runs = Vec::new();
        for &m in &ns {
            runs.push(run_experiment(&system, &CodingExperiment { n: m, ..exp })?);
        }
        let mut blocklengths = ns;
        blocklengths.push(exp.n);
        let errors: Vec<f64> = runs.iter().chain([&report]).map(|r| r.error.value).collect();
        let std_errors: Vec<f64> = runs.iter().chain([&report]).map(|r| r.error_std_error).collect();
        let rising = (1..errors.len()).all(|i| {
            let slack = 3.0 * (std_errors[i].powi(2) + std_errors[i - 1].powi(2)).sqrt();
            errors[i] >= errors[i - 1] - slack
        });
        Some(Trend {
            error_to_one_trend: rising && errors.last() >= errors.first(),
            blocklengths,
            errors,
            std_errors,
        })
    } else {
        None
    };
    out.csv("simulate_trials.csv", |w| report.write_trial_csv(w))?;
    let body = SimulateOut {
        mutual_information_uy: system.mi_uy(),
        mutual_information_us: system.mi_us(),
        error_within_rho: report.checks.error_le_rho,
        report: &report,
        converse_trend,
    };
    let path = out.json("simulate_summary.json", &body)?;
    if !report.checks.failures_flagged {
        return Err(Failure::Invariant("a failed trial carries no error event".into()));
    }
    Ok(format!(
        "error={} rho_n={} -> {}",
        report.error.value,
        report.rho.total,
        path.display()
    ))
}

pub fn region(args: &RunArgs) -> Result<String, Failure> {
    let (spec, out) = load("region", args)?;
    let SpecKind::System { channel, state, .. } = &spec.kind else {
        return Err(Failure::Validation("region takes a system spec".into()));
    };
    let o = &spec.options;
    let grid = match &o.rd_grid {
        Some(g) => g.clone(),
        None => {
            let top = entropy(state.probs());
            (0..=10).map(|i| top * i as f64 / 10.0).collect()
        }
    };
    let mut opts = RegionOptions {
        v_size: o.v_size,
        u_size: o.u_size,
        seed: args.seed,
        ..RegionOptions::default()
    };
    if let Some(r) = o.restarts {
        opts.restarts = r;
    }
    let frontier: Frontier = region_frontier_with(channel, state, &grid, &opts)?;
    for p in &frontier.points {
        if !region_membership(p, channel, state)? {
            return Err(Failure::Invariant(format!(
                "frontier point ({}, {}) is not achieved by its own policy",
                p.rate, p.rate_d
            )));
        }
    }
    out.csv("region_frontier.csv", |w| {
        writeln!(w, "r_d_nats,r_nats")?;
        for p in &frontier.points {
            writeln!(w, "{},{}", p.rate_d, p.rate)?;
        }
        Ok(())
    })?;
    let path = out.json("region_policies.json", &frontier)?;
    let top = frontier.points.iter().map(|p| p.rate).fold(0.0, f64::max);
    Ok(format!("max_rate={top} knee={:?} -> {}", frontier.knee, path.display()))
}

