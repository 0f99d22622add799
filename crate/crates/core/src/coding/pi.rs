//! Typicality probabilities of the random-coding argument: `pi_1`, `pi_2`
//! and the per-codeword quantity `eta`.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::CodingSystem;
use crate::error::{Error, Result};
use crate::rng::{domain, stream_rng};

/// Two-sided 95% normal quantile used for every reported interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// An empirical frequency with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Proportion {
    pub fn wilson(successes: u64, trials: u64) -> Self {
        assert!(trials > 0 && successes <= trials);
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = Z95 * Z95;
        let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
        let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
        Proportion {
            successes,
            trials,
            value: p,
            lo: (centre - half).max(0.0),
            hi: (centre + half).min(1.0),
        }
    }

    /// Plug-in standard error `sqrt(p (1 - p) / trials)`.
    pub fn std_error(&self) -> f64 {
        (self.value * (1.0 - self.value) / self.trials as f64).sqrt()
    }
}

/// Per-letter thresholds (nats) of the typical sets: `T1` keeps pairs with
/// `(1/n) i(u; y) >= t1`, `T2` keeps pairs with `(1/n) i(u; s) <= t2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypicalityThresholds {
    pub t1: f64,
    pub t2: f64,
}

impl TypicalityThresholds {
    pub fn new(t1: f64, t2: f64) -> Result<Self> {
        if t1.is_nan() || t2.is_nan() {
            return Err(Error::InvalidArgument("typicality thresholds must not be NaN".into()));
        }
        Ok(TypicalityThresholds { t1, t2 })
    }
}

/// Per-letter information densities `ln P(a|b)/P(a)` laid out `[b][a]`,
/// with `-inf` wherever a pair cannot be explained by the system.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LetterDensity {
    pub values: Vec<f64>,
}

impl LetterDensity {
    /// `sum_{b,a} counts[b][a] * i(b; a)` in a fixed order.
    pub fn block_sum(&self, counts: &[u32]) -> f64 {
        let mut acc = 0.0;
        for (&c, &v) in counts.iter().zip(&self.values) {
            if c > 0 {
                if v == f64::NEG_INFINITY {
                    return v;
                }
                acc += c as f64 * v;
            }
        }
        acc
    }
}

/// Whether a block with joint type `counts` over `(u, y)` lies in `T1`.
pub(crate) fn in_t1(system: &CodingSystem, counts: &[u32], n: usize, t1: f64) -> bool {
    system.density_uy.block_sum(counts) >= n as f64 * t1
}

/// Monte Carlo estimates of `pi1 = P((U^n, Y^n) not in T1)` and
/// `pi2 = P((U^n, S^n) not in T2)` under the memoryless system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiEstimate {
    pub pi1: Proportion,
    pub pi2: Proportion,
}

pub fn estimate_pi(
    system: &CodingSystem,
    n: usize,
    draws: usize,
    thresholds: TypicalityThresholds,
    seed: u64,
) -> Result<PiEstimate> {
    if draws == 0 {
        return Err(Error::Budget("pi estimation needs at least one draw".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be positive".into()));
    }
    let (n_u, n_y, n_s) = (system.n_u(), system.n_y(), system.n_s());
    let outcomes: Vec<(bool, bool)> = (0..draws as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, domain::PI, k, 0);
            let mut uy = vec![0u32; n_u * n_y];
            let mut us = vec![0u32; n_u * n_s];
            for _ in 0..n {
                let (s, u, _, y) = system.sampler.letter(&mut rng);
                uy[u * n_y + y] += 1;
                us[u * n_s + s] += 1;
            }
            let out1 = !in_t1(system, &uy, n, thresholds.t1);
            let out2 = !(system.density_us.block_sum(&us) <= n as f64 * thresholds.t2);
            (out1, out2)
        })
        .collect();
    let c1 = outcomes.iter().filter(|o| o.0).count() as u64;
    let c2 = outcomes.iter().filter(|o| o.1).count() as u64;
    Ok(PiEstimate {
        pi1: Proportion::wilson(c1, draws as u64),
        pi2: Proportion::wilson(c2, draws as u64),
    })
}

/// Monte Carlo estimate of `eta(u^n, s^n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaEstimate {
    pub value: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Estimates `eta(u^n, s^n) = P((u^n, Y^n) not in T1 | u^n, s^n)` by drawing
/// `X^n ~ P_{X|U,S}` letter by letter, passing it through the channel and
/// testing `T1` membership.
pub fn eta<R: Rng + ?Sized>(
    u_block: &[usize],
    s_block: &[usize],
    system: &CodingSystem,
    t1: f64,
    inner_draws: usize,
    rng: &mut R,
) -> Result<EtaEstimate> {
    let n = u_block.len();
    if s_block.len() != n {
        return Err(Error::Dimension(format!(
            "codeword has {n} letters, state block has {}",
            s_block.len()
        )));
    }
    if u_block.iter().any(|&u| u >= system.n_u()) || s_block.iter().any(|&s| s >= system.n_s()) {
        return Err(Error::Dimension("block symbol outside its alphabet".into()));
    }
    if inner_draws == 0 {
        return Err(Error::Budget("eta needs at least one inner draw".into()));
    }
    let n_y = system.n_y();
    let mut misses = 0usize;
    let mut counts = vec![0u32; system.n_u() * n_y];
    for _ in 0..inner_draws {
        counts.iter_mut().for_each(|c| *c = 0);
        for (&u, &s) in u_block.iter().zip(s_block) {
            let x = system.sampler.input(u, s, rng);
            let y = system.sampler.output(x, s, rng);
            counts[u * n_y + y] += 1;
        }
        if !in_t1(system, &counts, n, t1) {
            misses += 1;
        }
    }
    let value = misses as f64 / inner_draws as f64;
    Ok(EtaEstimate {
        value,
        std_error: (value * (1.0 - value) / inner_draws as f64).sqrt(),
        draws: inner_draws,
    })
}
