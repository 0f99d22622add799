use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::DensityTable;
use crate::error::{Error, Result};
use crate::prob::{Categorical, Table};
use crate::rng::{domain, stream_rng};

/// Default exceedance mass for quantile-based spectral rates.
pub const DEFAULT_DELTA: f64 = 0.01;

/// Draws of a normalized block information density `(1/n) ln[P(a^n|b^n)/P(a^n)]`.
///
/// Infinite draws are kept out of `samples` and counted separately; they
/// still take part in quantile extraction at the ends of the order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSamples {
    samples: Vec<f64>,
    neg_inf: u64,
    pos_inf: u64,
    n: usize,
    seed: u64,
}

impl SpectrumSamples {
    /// Wraps raw draws in draw order; NaN draws are rejected.
    pub fn new(draws: Vec<f64>, n: usize, seed: u64) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Budget("spectrum needs at least one draw".into()));
        }
        let mut samples = Vec::with_capacity(draws.len());
        let (mut neg_inf, mut pos_inf) = (0, 0);
        for v in draws {
            if v.is_nan() {
                return Err(Error::InvalidArgument("NaN information density draw".into()));
            } else if v == f64::NEG_INFINITY {
                neg_inf += 1;
            } else if v == f64::INFINITY {
                pos_inf += 1;
            } else {
                samples.push(v);
            }
        }
        Ok(SpectrumSamples {
            samples,
            neg_inf,
            pos_inf,
            n,
            seed,
        })
    }

    /// Finite draws, in draw order.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn count(&self) -> usize {
        self.samples.len() + (self.neg_inf + self.pos_inf) as usize
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn neg_inf(&self) -> u64 {
        self.neg_inf
    }

    pub fn pos_inf(&self) -> u64 {
        self.pos_inf
    }

    /// Finite draws in ascending order.
    pub fn sorted(&self) -> Vec<f64> {
        let mut v = self.samples.clone();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Value of the `k`-th smallest draw (1-based), counting infinite draws.
    fn order_statistic(&self, sorted: &[f64], k: usize) -> f64 {
        let lo = self.neg_inf as usize;
        if k <= lo {
            f64::NEG_INFINITY
        } else if k - lo <= sorted.len() {
            sorted[k - lo - 1]
        } else {
            f64::INFINITY
        }
    }

    pub fn mean(&self) -> f64 {
        if self.neg_inf > 0 && self.pos_inf == 0 {
            return f64::NEG_INFINITY;
        }
        if self.pos_inf > 0 && self.neg_inf == 0 {
            return f64::INFINITY;
        }
        self.samples.iter().sum::<f64>() / self.samples.len().max(1) as f64
    }

    pub fn summary(&self, delta: f64) -> Result<SpectrumSummary> {
        let sorted = self.sorted();
        let count = self.count();
        Ok(SpectrumSummary {
            n: self.n,
            count,
            seed: self.seed,
            delta,
            min: self.order_statistic(&sorted, 1),
            inf_rate: spectral_rate_estimate(self, SpectralMode::Inf, delta)?.value,
            median: self.order_statistic(&sorted, count.div_ceil(2)),
            sup_rate: spectral_rate_estimate(self, SpectralMode::Sup, delta)?.value,
            max: self.order_statistic(&sorted, count),
            mean: self.mean(),
            neg_inf: self.neg_inf,
            pos_inf: self.pos_inf,
        })
    }

    pub fn histogram(&self, bin_width: f64) -> Result<Histogram> {
        Histogram::new(&self.samples, bin_width)
    }

    /// CSV with a `#` metadata line, a `density_nats` header and one draw per row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "# n={},count={},seed={},neg_inf={},pos_inf={}",
            self.n,
            self.count(),
            self.seed,
            self.neg_inf,
            self.pos_inf
        )?;
        writeln!(w, "density_nats")?;
        for v in &self.samples {
            writeln!(w, "{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectralMode {
    /// Lower tail: the `delta`-quantile.
    Inf,
    /// Upper tail: the `(1 - delta)`-quantile.
    Sup,
}

/// A spectral rate estimate together with the exceedance mass it used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub mode: SpectralMode,
    pub delta: f64,
    pub count: usize,
}

/// Quantile surrogate for the spectral inf/sup rates.
///
/// Inf mode returns the order statistic at rank `ceil(delta * count)`, sup mode
/// the one at rank `ceil((1 - delta) * count)`.
pub fn spectral_rate_estimate(samples: &SpectrumSamples, mode: SpectralMode, delta: f64) -> Result<SpectralEstimate> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 0.5], got {delta}")));
    }
    let count = samples.count();
    // Small slack so that e.g. 0.01 * 100 is treated as exactly 1.
    const SLACK: f64 = 1e-9;
    if (count as f64) * delta < 1.0 - SLACK {
        return Err(Error::Budget(format!(
            "{count} draws are too few for delta = {delta} (need at least {})",
            (1.0 / delta).ceil()
        )));
    }
    let rank = match mode {
        SpectralMode::Inf => (delta * count as f64 - SLACK).ceil(),
        SpectralMode::Sup => ((1.0 - delta) * count as f64 - SLACK).ceil(),
    } as usize;
    let sorted = samples.sorted();
    Ok(SpectralEstimate {
        value: samples.order_statistic(&sorted, rank.clamp(1, count)),
        mode,
        delta,
        count,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub n: usize,
    pub count: usize,
    pub seed: u64,
    pub delta: f64,
    pub min: f64,
    pub inf_rate: f64,
    pub median: f64,
    pub sup_rate: f64,
    pub max: f64,
    pub mean: f64,
    pub neg_inf: u64,
    pub pos_inf: u64,
}

/// Draws `(1/n) sum_i d(a_i, b_i)` with letters i.i.d. from `joint`.
///
/// Draw `k` uses its own random stream, so the result does not depend on how
/// the draws are scheduled across threads.
pub fn sample_memoryless_spectrum(joint: &Table<f64>, n: usize, draws: usize, seed: u64) -> Result<SpectrumSamples> {
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be positive".into()));
    }
    if draws == 0 {
        return Err(Error::Budget("zero draws requested".into()));
    }
    let density = DensityTable::new(joint)?;
    let letters = Categorical::new(joint.data());
    let table: Vec<f64> = density.values().iter().map(|v| v.unwrap_or(f64::NAN)).collect();
    let out: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(seed, domain::SPECTRUM, k, 0);
            let mut acc = 0.0;
            for _ in 0..n {
                acc += table[letters.sample(&mut rng)];
            }
            acc / n as f64
        })
        .collect();
    // Letters are drawn from the joint itself, so an undefined density would
    // mean a zero-mass letter was produced.
    if out.iter().any(|v| v.is_nan()) {
        return Err(Error::Precondition("an undefined density entry was drawn".into()));
    }
    SpectrumSamples::new(out, n, seed)
}

/// Fixed-width histogram anchored at multiples of the bin width.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Index of the first bin: bin `i` covers `[(first + i) w, (first + i + 1) w)`.
    pub first_bin: i64,
    pub counts: Vec<u64>,
    pub total: u64,
}

/// A local concentration of histogram mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Mode {
    pub location: f64,
    /// Fraction of all samples in this mode's cluster.
    pub mass: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Histogram {
    pub fn new(samples: &[f64], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(Error::InvalidArgument("bin width must be positive".into()));
        }
        let finite: Vec<f64> = samples.iter().copied().filter(|v| v.is_finite()).collect();
        if finite.is_empty() {
            return Err(Error::Budget("histogram of no finite samples".into()));
        }
        let bin = |v: f64| (v / bin_width).floor() as i64;
        let lo = finite.iter().map(|&v| bin(v)).min().unwrap();
        let hi = finite.iter().map(|&v| bin(v)).max().unwrap();
        let mut counts = vec![0u64; (hi - lo + 1) as usize];
        for &v in &finite {
            counts[(bin(v) - lo) as usize] += 1;
        }
        Ok(Histogram {
            bin_width,
            first_bin: lo,
            total: finite.len() as u64,
            counts,
        })
    }

    pub fn bin_lo(&self, i: usize) -> f64 {
        (self.first_bin + i as i64) as f64 * self.bin_width
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.bin_lo(i) + 0.5 * self.bin_width
    }

    /// Clusters of occupied bins separated by at least `min_gap` sparse bins.
    ///
    /// A bin is sparse when it holds at most `sparse_fraction` of all samples.
    /// Each cluster's mode is the centre of its densest `2 * smooth + 1`-bin
    /// window, which steadies the peak against per-bin noise.
    pub fn modes(&self, min_gap: usize, sparse_fraction: f64, smooth: usize) -> Vec<Mode> {
        let sparse = |c: u64| (c as f64) <= sparse_fraction * self.total as f64;
        let mut clusters: Vec<(usize, usize)> = Vec::new();
        let mut gap = usize::MAX;
        for (i, &c) in self.counts.iter().enumerate() {
            if sparse(c) {
                gap = gap.saturating_add(1);
                continue;
            }
            match clusters.last_mut() {
                Some((_, end)) if gap < min_gap => *end = i,
                _ => clusters.push((i, i)),
            }
            gap = 0;
        }
        clusters
            .into_iter()
            .map(|(a, b)| {
                let window = |i: usize| -> u64 {
                    let lo = i.saturating_sub(smooth).max(a);
                    let hi = (i + smooth).min(b);
                    self.counts[lo..=hi].iter().sum()
                };
                let peak = (a..=b).fold(a, |best, i| if window(i) > window(best) { i } else { best });
                let mass: u64 = self.counts[a..=b].iter().sum();
                Mode {
                    location: self.bin_center(peak),
                    mass: mass as f64 / self.total as f64,
                    lo: self.bin_lo(a),
                    hi: self.bin_lo(b) + self.bin_width,
                }
            })
            .collect()
    }

    /// Fraction of `samples` lying within `radius` of some mode location.
    pub fn mass_near(samples: &[f64], modes: &[Mode], radius: f64) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let near = samples
            .iter()
            .filter(|&&v| modes.iter().any(|m| (v - m.location).abs() <= radius))
            .count();
        near as f64 / samples.len() as f64
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_lo_nats,bin_hi_nats,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{},{}", self.bin_lo(i), self.bin_lo(i) + self.bin_width, c)?;
        }
        Ok(())
    }
}
