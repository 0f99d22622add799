use rand::Rng;

use super::{ChannelKernel, ConditionalPmf, GpPolicy, Pmf, XMap};
use crate::error::{Error, Result};
use crate::rng::{domain, stream_rng};
use crate::scalar::Real;

/// Inverse-CDF sampler over `0..len`.
///
/// Zero-probability symbols are never returned: the cumulative table is
/// searched for the first entry strictly above the uniform draw, and every
/// entry from the last positive symbol onward is pinned to exactly 1.
#[derive(Debug, Clone)]
pub struct Categorical {
    cdf: Vec<f64>,
}

impl Categorical {
    pub fn new<T: Real>(probs: &[T]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p.as_f64();
                acc
            })
            .collect();
        let last = probs.iter().rposition(|p| *p > T::zero()).unwrap_or(0);
        for c in &mut cdf[last..] {
            *c = 1.0;
        }
        Categorical { cdf }
    }

    pub fn from_pmf<T: Real>(pmf: &Pmf<T>) -> Self {
        Self::new(pmf.probs())
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1)
    }
}

/// `n` i.i.d. draws from `pmf`; deterministic in `seed`.
pub fn sample_iid<T: Real>(pmf: &Pmf<T>, n: usize, seed: u64) -> Vec<usize> {
    let cat = Categorical::from_pmf(pmf);
    let mut rng = stream_rng(seed, domain::SAMPLE, 0, 0);
    (0..n).map(|_| cat.sample(&mut rng)).collect()
}

/// One draw from `kernel(. | inputs[i])` per input symbol.
pub fn sample_conditional<T: Real>(kernel: &ConditionalPmf<T>, inputs: &[usize], seed: u64) -> Result<Vec<usize>> {
    if let Some(&c) = inputs.iter().find(|&&c| c >= kernel.n_cond()) {
        return Err(Error::InvalidArgument(format!("condition symbol {c} out of range")));
    }
    let rows: Vec<Categorical> = kernel.rows().iter().map(Categorical::from_pmf).collect();
    let mut rng = stream_rng(seed, domain::SAMPLE, 1, 0);
    Ok(inputs.iter().map(|&c| rows[c].sample(&mut rng)).collect())
}

/// Channel outputs for input and state sequences of equal length.
pub fn sample_channel<T: Real>(channel: &ChannelKernel<T>, xs: &[usize], ss: &[usize], seed: u64) -> Result<Vec<usize>> {
    if xs.len() != ss.len() {
        return Err(Error::Dimension("input and state sequences differ in length".into()));
    }
    if xs.iter().any(|&x| x >= channel.n_x()) || ss.iter().any(|&s| s >= channel.n_s()) {
        return Err(Error::InvalidArgument("input or state symbol out of range".into()));
    }
    let sampler = ChannelSampler::new(channel);
    let mut rng = stream_rng(seed, domain::SAMPLE, 2, 0);
    Ok(xs.iter().zip(ss).map(|(&x, &s)| sampler.sample(x, s, &mut rng)).collect())
}

#[derive(Debug, Clone)]
struct ChannelSampler {
    n_x: usize,
    rows: Vec<Categorical>,
}

impl ChannelSampler {
    fn new<T: Real>(channel: &ChannelKernel<T>) -> Self {
        let rows = (0..channel.n_s())
            .flat_map(|s| (0..channel.n_x()).map(move |x| (s, x)))
            .map(|(s, x)| Categorical::new(channel.row(s, x)))
            .collect();
        ChannelSampler { n_x: channel.n_x(), rows }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, x: usize, s: usize, rng: &mut R) -> usize {
        self.rows[s * self.n_x + x].sample(rng)
    }
}

/// Per-letter sampler for the memoryless system `S -> U -> X -> Y`.
#[derive(Debug, Clone)]
pub struct SystemSampler {
    n_s: usize,
    state: Categorical,
    u_rows: Vec<Categorical>,
    x_map: XSampler,
    channel: ChannelSampler,
}

#[derive(Debug, Clone)]
enum XSampler {
    Deterministic(Vec<Vec<usize>>),
    Stochastic(Vec<Categorical>),
}

impl SystemSampler {
    pub fn new<T: Real>(state: &Pmf<T>, policy: &GpPolicy<T>, channel: &ChannelKernel<T>) -> Result<Self> {
        // Composition performs every dimension check.
        super::compose_joint(state, policy, channel)?;
        let x_map = match policy.x_map() {
            XMap::Deterministic(g) => XSampler::Deterministic(g.clone()),
            XMap::Stochastic(c) => XSampler::Stochastic(c.rows().iter().map(Categorical::from_pmf).collect()),
        };
        Ok(SystemSampler {
            n_s: state.len(),
            state: Categorical::from_pmf(state),
            u_rows: policy.u_given_s().rows().iter().map(Categorical::from_pmf).collect(),
            x_map,
            channel: ChannelSampler::new(channel),
        })
    }

    #[inline]
    pub fn state<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.state.sample(rng)
    }

    #[inline]
    pub fn aux<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> usize {
        self.u_rows[s].sample(rng)
    }

    #[inline]
    pub fn input<R: Rng + ?Sized>(&self, u: usize, s: usize, rng: &mut R) -> usize {
        match &self.x_map {
            XSampler::Deterministic(g) => g[u][s],
            XSampler::Stochastic(rows) => rows[u * self.n_s + s].sample(rng),
        }
    }

    #[inline]
    pub fn output<R: Rng + ?Sized>(&self, x: usize, s: usize, rng: &mut R) -> usize {
        self.channel.sample(x, s, rng)
    }

    /// One letter `(s, u, x, y)` of the memoryless system.
    #[inline]
    pub fn letter<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize, usize, usize) {
        let s = self.state(rng);
        let u = self.aux(s, rng);
        let x = self.input(u, s, rng);
        let y = self.output(x, s, rng);
        (s, u, x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_pmf_is_constant() {
        let p = Pmf::<f64>::point(4, 2);
        assert!(sample_iid(&p, 1000, 7).iter().all(|&s| s == 2));
    }

    #[test]
    fn zero_mass_symbols_never_drawn() {
        let p = Pmf::new(vec![0.0, 0.5, 0.0, 0.5, 0.0]).unwrap();
        let xs = sample_iid(&p, 20_000, 3);
        assert!(xs.iter().all(|&s| s == 1 || s == 3));
    }

    #[test]
    fn same_seed_same_sequence() {
        let p = Pmf::new(vec![0.2, 0.3, 0.5]).unwrap();
        assert_eq!(sample_iid(&p, 500, 11), sample_iid(&p, 500, 11));
        assert_ne!(sample_iid(&p, 500, 11), sample_iid(&p, 500, 12));
    }

    #[test]
    fn channel_sampling_checks_lengths() {
        let w = ChannelKernel::binary_symmetric(&[0.0, 1.0]).unwrap();
        assert!(sample_channel(&w, &[0, 1], &[0], 1).is_err());
        let y = sample_channel(&w, &[0, 1, 0, 1], &[0, 0, 1, 1], 1).unwrap();
        assert_eq!(y, vec![0, 1, 1, 0]);
    }
}
