//! End-to-end simulation of the random Gel'fand-Pinsker code: covering
//! encoder, threshold decoder, and the error bounds that accompany them.

mod codebook;
mod pi;

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use codebook::{
    decode, encode, CodeMode, CodeRates, CodeSizes, Codebook, Count, Decoded, Encoded, EncoderSettings, MAX_CODEWORDS,
    MAX_TAIL_ATOMS, MAX_WORK,
};
pub use pi::{estimate_pi, eta, EtaEstimate, PiEstimate, Proportion, TypicalityThresholds, Z95};

use codebook::{compositions, ln_none, ln_typical_tail};
use pi::{in_t1, LetterDensity};

use crate::error::{Error, Result};
use crate::info::{mi_dense, sample_memoryless_spectrum, spectral_rate_estimate, DensityTable, SpectralMode};
use crate::prob::{compose_joint, Axis, ChannelKernel, ConditionalPmf, GpPolicy, Pmf, SystemSampler, Table};
use crate::rng::{domain, stream_rng};

/// A memoryless state-dependent channel together with the coding policy
/// `P_{U|S}` and input map, plus the per-letter quantities the code needs.
#[derive(Debug, Clone)]
pub struct CodingSystem {
    channel: ChannelKernel,
    state: Pmf,
    policy: GpPolicy,
    p_u: Vec<f64>,
    joint_uy: Table<f64>,
    joint_us: Table<f64>,
    pub(crate) density_uy: LetterDensity,
    pub(crate) density_us: LetterDensity,
    pub(crate) sampler: SystemSampler,
}

fn letter_density(joint: &Table<f64>) -> Result<LetterDensity> {
    let table = DensityTable::new(joint)?;
    Ok(LetterDensity {
        values: table.values().iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
    })
}

impl CodingSystem {
    pub fn new(channel: ChannelKernel, state: Pmf, policy: GpPolicy) -> Result<Self> {
        let joint = compose_joint(&state, &policy, &channel)?;
        let joint_uy = joint.marginal(&[Axis::U, Axis::Y]);
        let joint_us = joint.marginal(&[Axis::U, Axis::S]);
        let p_u = joint.marginal(&[Axis::U]).data().to_vec();
        Ok(CodingSystem {
            sampler: SystemSampler::new(&state, &policy, &channel)?,
            density_uy: letter_density(&joint_uy)?,
            density_us: letter_density(&joint_us)?,
            channel,
            state,
            policy,
            p_u,
            joint_uy,
            joint_us,
        })
    }

    /// A channel without state, used with input law `input` and `U = X`.
    pub fn without_state(channel: &ConditionalPmf, input: &Pmf) -> Result<Self> {
        let kernel = ChannelKernel::state_blind(channel, 1);
        let policy = GpPolicy::identity(ConditionalPmf::from_rows(vec![input.clone()])?);
        Self::new(kernel, Pmf::point(1, 0), policy)
    }

    pub fn channel(&self) -> &ChannelKernel {
        &self.channel
    }

    pub fn state(&self) -> &Pmf {
        &self.state
    }

    pub fn policy(&self) -> &GpPolicy {
        &self.policy
    }

    /// Codeword letter law `P_U`.
    pub fn p_u(&self) -> &[f64] {
        &self.p_u
    }

    pub fn n_s(&self) -> usize {
        self.state.len()
    }

    pub fn n_u(&self) -> usize {
        self.policy.n_u()
    }

    pub fn n_y(&self) -> usize {
        self.channel.n_y()
    }

    /// Joint law of `(U, Y)` as a `[u][y]` table.
    pub fn joint_uy(&self) -> &Table<f64> {
        &self.joint_uy
    }

    /// Joint law of `(U, S)` as a `[u][s]` table.
    pub fn joint_us(&self) -> &Table<f64> {
        &self.joint_us
    }

    pub fn mi_uy(&self) -> f64 {
        mi_dense(self.joint_uy.data(), self.n_u(), self.n_y())
    }

    pub fn mi_us(&self) -> f64 {
        mi_dense(self.joint_us.data(), self.n_u(), self.n_s())
    }
}

/// How the spectral rates behind the thresholds are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ThresholdSource {
    /// Single-letter mutual informations (exact for memoryless systems).
    SingleLetter,
    /// Empirical `delta`-quantiles of the block densities at the experiment's `n`.
    Quantile { delta: f64 },
}

/// Parameters of a coding experiment. `None` rates take their defaults:
/// `R = I_inf(U;Y) - 2 g1 - (I_sup(U;S) + 2 g2)` and `R~ = I_inf(U;Y) - 2 g1`;
/// with `R` given, `R~ = R + I_sup(U;S) + 2 g2`, which keeps the
/// subcodebook rate at `I_sup(U;S) + 2 g2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CodingExperiment {
    pub n: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub rate: Option<f64>,
    pub rate_tilde: Option<f64>,
    pub seed: u64,
    pub trials: usize,
    /// Inner Monte Carlo draws per `eta` estimate.
    pub inner_draws: usize,
    /// Draws for `pi1`, `pi2`, spectral quantiles and the converse bound.
    pub pi_draws: usize,
    pub thresholds: ThresholdSource,
    pub mode: CodeMode,
    /// Lazy codes scan at most this many codewords per subcodebook.
    pub scan_limit: u64,
}

impl Default for CodingExperiment {
    fn default() -> Self {
        CodingExperiment {
            n: 200,
            gamma1: 0.02,
            gamma2: 0.02,
            rate: None,
            rate_tilde: None,
            seed: 0,
            trials: 1000,
            inner_draws: 200,
            pi_draws: 10_000,
            thresholds: ThresholdSource::SingleLetter,
            mode: CodeMode::Auto,
            scan_limit: 4096,
        }
    }
}

/// One end-to-end transmission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub message: u64,
    /// Codeword index chosen within the message's subcodebook.
    pub index: u64,
    /// No codeword of the subcodebook passed the covering test.
    pub e1: bool,
    /// The transmitted codeword is not jointly typical with the output.
    pub e2: bool,
    /// Some codeword outside the subcodebook is jointly typical with the output.
    pub e3: bool,
    pub decoded: Option<u64>,
    pub ok: bool,
}

/// Terms of `rho_n = 2 pi1^(1/2) + pi2 + exp(-exp(n g2)) + exp(-n g1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoTerms {
    pub eta_term: f64,
    pub pi2: f64,
    pub covering_term: f64,
    pub packing_term: f64,
    pub total: f64,
}

impl RhoTerms {
    pub fn new(pi1: f64, pi2: f64, n: usize, gamma1: f64, gamma2: f64) -> Self {
        let nf = n as f64;
        let eta_term = 2.0 * pi1.sqrt();
        let covering_term = (-(nf * gamma2).exp()).exp();
        let packing_term = (-nf * gamma1).exp();
        RhoTerms {
            eta_term,
            pi2,
            covering_term,
            packing_term,
            total: eta_term + pi2 + covering_term + packing_term,
        }
    }
}

/// Comparison of the empirical error with the Verdu-Han lower bound
/// `P((1/n) i(U^n; Y^n) <= R - g1) - exp(-n g1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConverseCheck {
    /// `R` exceeds the spectral inf-rate plus `2 g1`.
    pub active: bool,
    pub density_below: Proportion,
    pub bound: f64,
    /// Empirical error is at least the bound minus three standard errors.
    pub holds: bool,
}

/// Bound checks, each at three empirical standard errors of slack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundChecks {
    pub error_le_rho: bool,
    pub e1_le_bound: bool,
    pub e2_not_e1_le_sqrt_pi1: bool,
    pub e3_le_exp: bool,
    /// Every failed trial carries at least one of the three flags.
    pub failures_flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: CodingExperiment,
    pub rates: CodeRates,
    pub sizes: CodeSizes,
    pub explicit_code: bool,
    pub inf_rate_uy: f64,
    pub sup_rate_us: f64,
    pub thresholds: TypicalityThresholds,
    pub pi: PiEstimate,
    pub rho: RhoTerms,
    pub error: Proportion,
    /// Standard error of the empirical error probability.
    pub error_std_error: f64,
    pub e1: Proportion,
    pub e2_not_e1: Proportion,
    pub e3: Proportion,
    pub checks: BoundChecks,
    pub converse: ConverseCheck,
    /// Largest standard error of any `eta` estimate made by the encoder.
    pub eta_std_error_max: f64,
    pub work_estimate: f64,
    #[serde(skip)]
    pub trials: Vec<TrialRecord>,
}

impl ExperimentReport {
    /// Trial log: `trial,message,L,e1,e2,e3,decoded,ok`; failures decode to an empty field.
    pub fn write_trial_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "trial,message,L,e1,e2,e3,decoded,ok")?;
        for t in &self.trials {
            let decoded = t.decoded.map(|m| m.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                t.trial, t.message, t.index, t.e1 as u8, t.e2 as u8, t.e3 as u8, decoded, t.ok as u8
            )?;
        }
        Ok(())
    }
}

/// Resolved rates and thresholds of an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedRates {
    pub inf_rate_uy: f64,
    pub sup_rate_us: f64,
    pub thresholds: TypicalityThresholds,
    pub rates: CodeRates,
}

/// Spectral rates, thresholds and code rates for an experiment.
pub fn resolve_rates(system: &CodingSystem, exp: &CodingExperiment) -> Result<ResolvedRates> {
    if !(exp.gamma1 >= 0.0 && exp.gamma2 >= 0.0) {
        return Err(Error::InvalidArgument("slacks gamma1, gamma2 must be non-negative".into()));
    }
    let (inf_uy, sup_us) = match exp.thresholds {
        ThresholdSource::SingleLetter => (system.mi_uy(), system.mi_us()),
        ThresholdSource::Quantile { delta } => {
            let uy = sample_memoryless_spectrum(system.joint_uy(), exp.n, exp.pi_draws, exp.seed)?;
            let us = sample_memoryless_spectrum(system.joint_us(), exp.n, exp.pi_draws, exp.seed ^ 1)?;
            (
                spectral_rate_estimate(&uy, SpectralMode::Inf, delta)?.value,
                spectral_rate_estimate(&us, SpectralMode::Sup, delta)?.value,
            )
        }
    };
    let thresholds = TypicalityThresholds::new(inf_uy - exp.gamma1, sup_us + exp.gamma2)?;
    let (rate, rate_tilde) = match (exp.rate, exp.rate_tilde) {
        (Some(r), Some(rt)) => (r, rt),
        (Some(r), None) => (r, r + sup_us + 2.0 * exp.gamma2),
        (None, rt) => {
            let rt_default = inf_uy - 2.0 * exp.gamma1;
            let rt = rt.unwrap_or(rt_default);
            (rt - (sup_us + 2.0 * exp.gamma2), rt)
        }
    };
    if rate < 0.0 {
        return Err(Error::Precondition(format!(
            "message rate {rate:.6} is negative: the slacks exceed the information available"
        )));
    }
    Ok(ResolvedRates {
        inf_rate_uy: inf_uy,
        sup_rate_us: sup_us,
        thresholds,
        rates: CodeRates::new(rate, rate_tilde)?,
    })
}

/// Estimated letter operations of a run, used by the desk-scale guard.
pub fn work_estimate(system: &CodingSystem, exp: &CodingExperiment, sizes: &CodeSizes, explicit: bool) -> f64 {
    let n = exp.n as f64;
    let trials = exp.trials as f64;
    let per_trial = if explicit {
        // Decoding scans the whole code.
        (sizes.ln_total().exp() + exp.inner_draws as f64 + 2.0) * n
    } else {
        let n_y = system.n_y();
        let groups = compositions(exp.n.div_ceil(n_y), system.n_u()).powi(n_y as i32 - 1).max(1.0);
        (exp.inner_draws as f64 + 2.0) * n + groups
    };
    per_trial * trials + exp.pi_draws as f64 * n
}

/// Runs `trials` sealed transmissions: sample `S^n`, encode, pass through
/// the channel, decode. Reports the empirical average error with the
/// `rho_n` bound, the per-event accounting, and the converse comparison.
pub fn run_experiment(system: &CodingSystem, exp: &CodingExperiment) -> Result<ExperimentReport> {
    if exp.trials == 0 {
        return Err(Error::Budget("at least one trial is required".into()));
    }
    if exp.pi_draws == 0 || exp.inner_draws == 0 {
        return Err(Error::Budget("pi and eta estimates need at least one draw".into()));
    }
    let resolved = resolve_rates(system, exp)?;
    let sizes = CodeSizes::new(exp.n, resolved.rates)?;
    let explicit_fits = sizes
        .messages
        .exact
        .zip(sizes.subcode.exact)
        .and_then(|(m, l)| m.checked_mul(l))
        .is_some_and(|t| t as f64 <= MAX_CODEWORDS);
    let explicit = match exp.mode {
        CodeMode::Explicit => true,
        CodeMode::Lazy => false,
        CodeMode::Auto => explicit_fits && work_estimate(system, exp, &sizes, true) <= MAX_WORK,
    };
    let work = work_estimate(system, exp, &sizes, explicit);
    if work > MAX_WORK {
        return Err(Error::TooLarge {
            work,
            bound: MAX_WORK,
            hint: "reduce n, trials, draws or rates".into(),
        });
    }
    let code = Codebook::build(exp.n, resolved.rates, system.p_u(), exp.mode_for(explicit), exp.seed)?;
    let pi = estimate_pi(system, exp.n, exp.pi_draws, resolved.thresholds, exp.seed)?;
    let settings = EncoderSettings {
        t1: resolved.thresholds.t1,
        eta_limit: pi.pi1.value.sqrt(),
        inner_draws: exp.inner_draws,
        scan_limit: exp.scan_limit,
        seed: exp.seed,
    };
    let outcomes: Vec<(TrialRecord, f64)> = (0..exp.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(system, &code, &settings, exp, t))
        .collect::<Result<_>>()?;
    let eta_std_error_max = outcomes.iter().map(|o| o.1).fold(0.0, f64::max);
    let trials: Vec<TrialRecord> = outcomes.into_iter().map(|o| o.0).collect();
    let count = |f: &dyn Fn(&TrialRecord) -> bool| trials.iter().filter(|t| f(t)).count() as u64;
    let total = trials.len() as u64;
    let error = Proportion::wilson(count(&|t| !t.ok), total);
    let e1 = Proportion::wilson(count(&|t| t.e1), total);
    let e2_not_e1 = Proportion::wilson(count(&|t| t.e2 && !t.e1), total);
    let e3 = Proportion::wilson(count(&|t| t.e3), total);
    let rho = RhoTerms::new(pi.pi1.value, pi.pi2.value, exp.n, exp.gamma1, exp.gamma2);
    let slack = |p: &Proportion| 3.0 * p.std_error();
    let checks = BoundChecks {
        error_le_rho: error.value <= rho.total + slack(&error),
        e1_le_bound: e1.value <= pi.pi1.value.sqrt() + pi.pi2.value + rho.covering_term + slack(&e1),
        e2_not_e1_le_sqrt_pi1: e2_not_e1.value <= pi.pi1.value.sqrt() + slack(&e2_not_e1),
        e3_le_exp: e3.value <= rho.packing_term + slack(&e3),
        failures_flagged: trials.iter().all(|t| t.ok || t.e1 || t.e2 || t.e3),
    };
    let converse = converse_check(system, exp, &resolved, &error)?;
    Ok(ExperimentReport {
        experiment: *exp,
        rates: resolved.rates,
        sizes,
        explicit_code: code.is_explicit(),
        inf_rate_uy: resolved.inf_rate_uy,
        sup_rate_us: resolved.sup_rate_us,
        thresholds: resolved.thresholds,
        pi,
        rho,
        error_std_error: error.std_error(),
        error,
        e1,
        e2_not_e1,
        e3,
        checks,
        converse,
        eta_std_error_max,
        work_estimate: work,
        trials,
    })
}

impl CodingExperiment {
    fn mode_for(&self, explicit: bool) -> CodeMode {
        if explicit {
            CodeMode::Explicit
        } else {
            CodeMode::Lazy
        }
    }
}

fn converse_check(
    system: &CodingSystem,
    exp: &CodingExperiment,
    resolved: &ResolvedRates,
    error: &Proportion,
) -> Result<ConverseCheck> {
    let r = resolved.rates.rate;
    let spectrum = sample_memoryless_spectrum(system.joint_uy(), exp.n, exp.pi_draws, exp.seed)?;
    let level = r - exp.gamma1;
    let below = spectrum.samples().iter().filter(|&&v| v <= level).count() as u64 + spectrum.neg_inf();
    let density_below = Proportion::wilson(below, spectrum.count() as u64);
    let bound = density_below.value - (-(exp.n as f64) * exp.gamma1).exp();
    Ok(ConverseCheck {
        active: r > resolved.inf_rate_uy + 2.0 * exp.gamma1,
        density_below,
        bound,
        holds: error.value >= bound - 3.0 * error.std_error(),
    })
}

/// Uniform label among the `M - 1` messages other than `m`.
fn other_message<R: Rng + ?Sized>(messages: &Count, m: u64, rng: &mut R) -> u64 {
    match messages.exact {
        Some(mm) => {
            let r = rng.gen_range(0..mm - 1);
            r + u64::from(r >= m)
        }
        None => loop {
            let r = rng.gen::<u64>();
            if r != m {
                return r;
            }
        },
    }
}

fn run_trial(
    system: &CodingSystem,
    code: &Codebook,
    settings: &EncoderSettings,
    exp: &CodingExperiment,
    t: u64,
) -> Result<(TrialRecord, f64)> {
    let sizes = code.sizes();
    let (n, n_y) = (exp.n, system.n_y());
    let t1 = settings.t1;
    let mut rng = stream_rng(exp.seed, domain::TRIAL, t, 0);
    // Messages beyond 2^63 are labelled by a uniform 64-bit draw.
    let m = match sizes.messages.exact {
        Some(mm) => rng.gen_range(0..mm),
        None => rng.gen::<u64>(),
    };
    let s_block: Vec<usize> = (0..n).map(|_| system.sampler.state(&mut rng)).collect();
    let enc = encode(code, system, m, &s_block, settings, t, &mut rng)?;
    let y_block: Vec<usize> = enc
        .x_block
        .iter()
        .zip(&s_block)
        .map(|(&x, &s)| system.sampler.output(x, s, &mut rng))
        .collect();
    let typical = |j: u64| {
        let word = code.word(t, m, j);
        let mut counts = vec![0u32; system.n_u() * n_y];
        for (&u, &y) in word.iter().zip(&y_block) {
            counts[u as usize * n_y + y] += 1;
        }
        in_t1(system, &counts, n, t1)
    };
    let e2 = !typical(enc.index);
    let (decoded, e3) = if code.is_explicit() {
        let d = decode(code, system, &y_block, t1)?;
        (d.message, d.typical.iter().any(|&(mm, _)| mm != m))
    } else {
        // Codewords the encoder drew are checked directly; all others are
        // independent of y^n and enter through the exact typicality tail.
        let own_seen = (0..enc.scanned).any(&typical);
        let mut y_counts = vec![0usize; n_y];
        for &y in &y_block {
            y_counts[y] += 1;
        }
        let ln_p = ln_typical_tail(&system.density_uy, system.p_u(), &y_counts, n as f64 * t1)?;
        let own_unseen = sizes.subcode.approx() - enc.scanned as f64;
        let ln_own_unseen = if own_unseen > 0.0 { own_unseen.ln() } else { f64::NEG_INFINITY };
        let ln_others = match sizes.messages.exact {
            Some(1) => f64::NEG_INFINITY,
            Some(mm) => sizes.subcode.ln + ((mm - 1) as f64).ln(),
            None => sizes.ln_total(),
        };
        let own_hit = own_seen || rng.gen::<f64>() >= ln_none(ln_own_unseen, ln_p).exp();
        let p_none = ln_none(ln_others, ln_p).exp();
        let u: f64 = rng.gen();
        let others = if u < p_none {
            0
        } else {
            // P(exactly one) = N p (1 - p)^(N - 1).
            let ln_one = ln_others + ln_p + ln_none(ln_others, ln_p) - (-ln_p.exp()).ln_1p();
            if u < p_none + ln_one.exp() {
                1
            } else {
                2
            }
        };
        let decoded = match (own_hit, others) {
            (true, 0) => Some(m),
            (false, 1) => Some(other_message(&sizes.messages, m, &mut rng)),
            // Two or more foreign hits almost surely span several messages.
            _ => None,
        };
        (decoded, others > 0)
    };
    let record = TrialRecord {
        trial: t,
        message: m,
        index: enc.index,
        e1: enc.covering_failed,
        e2,
        e3,
        decoded,
        ok: decoded == Some(m),
    };
    Ok((record, enc.eta_std_error))
}
