//! Mixed channels and mixed states: the worst-pair lower bound and a Monte
//! Carlo view of the mixture's information spectrum.

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{search, CapacityResult, Factory, GpOptions, KernelFn, Shape};
use crate::error::{Error, Result};
use crate::info::{mi_dense, SpectrumSamples, DEFAULT_DELTA};
use crate::optimize::{axis, AscentOptions, EntropySystem, Layout, Objective};
use crate::prob::{compose_joint, lex_cmp, Axis, Categorical, ChannelKernel, GpPolicy, Pmf, SystemSampler};
use crate::rng::{domain, stream_rng};
use crate::scalar::Real;

/// Largest missing weight mass accepted as a truncated countable tail.
pub const MAX_TAIL: f64 = 1e-9;

/// Finite mixtures `sum_k a_k W_k` of channels and `sum_l b_l P_{S_l}` of
/// memoryless state laws.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec<T: Real = f64> {
    channels: Vec<(T, ChannelKernel<T>)>,
    states: Vec<(T, Pmf<T>)>,
    tail: (T, T),
}

fn check_weights<T: Real>(weights: &[T], key: &str) -> Result<(Vec<T>, T)> {
    if weights.is_empty() {
        return Err(Error::pmf(key, "no components"));
    }
    let mut total = T::zero();
    for (i, &w) in weights.iter().enumerate() {
        if !w.is_finite() || w < T::zero() {
            return Err(Error::pmf(format!("{key}[{i}].weight"), format!("invalid weight {w}")));
        }
        total = total + w;
    }
    if total > T::one() + T::norm_tol() {
        return Err(Error::pmf(key, format!("weights sum to {total}, more than 1")));
    }
    let tail = (T::one() - total).max(T::zero());
    if tail > T::lit(MAX_TAIL).max(T::norm_tol()) {
        return Err(Error::pmf(
            key,
            format!("weights sum to {total}; a missing tail above {MAX_TAIL} is not accepted"),
        ));
    }
    if total <= T::zero() {
        return Err(Error::pmf(key, "all weights are zero"));
    }
    Ok((weights.iter().map(|&w| w / total).collect(), tail))
}

/// Sorts components into a canonical order and merges identical ones, so
/// that listing order and duplication never affect any result.
fn canonical<T: Real, C: Clone>(weights: Vec<T>, items: Vec<C>, flat: impl Fn(&C) -> Vec<f64>) -> Vec<(T, C)> {
    let mut comps: Vec<(Vec<f64>, T, C)> = weights
        .into_iter()
        .zip(items)
        .filter(|(w, _)| *w > T::zero())
        .map(|(w, c)| (flat(&c), w, c))
        .collect();
    comps.sort_by(|a, b| lex_cmp(&a.0, &b.0).then(a.1.as_f64().total_cmp(&b.1.as_f64())));
    let mut out: Vec<(Vec<f64>, T, C)> = Vec::new();
    for (key, w, c) in comps {
        match out.last_mut() {
            Some(last) if last.0 == key => last.1 = last.1 + w,
            _ => out.push((key, w, c)),
        }
    }
    out.into_iter().map(|(_, w, c)| (w, c)).collect()
}

impl<T: Real> MixtureSpec<T> {
    /// Validates weights and shapes. A weight deficit of at most [`MAX_TAIL`]
    /// is read as a truncated countable tail and the weights are rescaled.
    /// Components are stored without zero weights, merged when identical, and
    /// in a canonical order.
    pub fn new(channels: Vec<(T, ChannelKernel<T>)>, states: Vec<(T, Pmf<T>)>) -> Result<Self> {
        let (cw, ctail) = check_weights(&channels.iter().map(|c| c.0).collect::<Vec<_>>(), "channel_mixture")?;
        let (sw, stail) = check_weights(&states.iter().map(|s| s.0).collect::<Vec<_>>(), "state_mixture")?;
        let first = &channels[0].1;
        for (k, (_, w)) in channels.iter().enumerate() {
            if (w.n_s(), w.n_x(), w.n_y()) != (first.n_s(), first.n_x(), first.n_y()) {
                return Err(Error::Dimension(format!("channel_mixture[{k}] has a different shape")));
            }
        }
        for (l, (_, p)) in states.iter().enumerate() {
            if p.len() != first.n_s() {
                return Err(Error::Dimension(format!(
                    "state_mixture[{l}] has {} symbols, channels have {} states",
                    p.len(),
                    first.n_s()
                )));
            }
        }
        let flat_channel = |w: &ChannelKernel<T>| -> Vec<f64> {
            (0..w.n_s())
                .flat_map(|s| (0..w.n_x()).map(move |x| (s, x)))
                .flat_map(|(s, x)| w.row(s, x).iter().map(|p| p.as_f64()).collect::<Vec<_>>())
                .collect()
        };
        let flat_state = |p: &Pmf<T>| -> Vec<f64> { p.probs().iter().map(|p| p.as_f64()).collect() };
        Ok(MixtureSpec {
            channels: canonical(cw, channels.into_iter().map(|c| c.1).collect(), flat_channel),
            states: canonical(sw, states.into_iter().map(|s| s.1).collect(), flat_state),
            tail: (ctail, stail),
        })
    }

    /// The degenerate mixture with one channel and one state law.
    pub fn single(channel: ChannelKernel<T>, state: Pmf<T>) -> Result<Self> {
        Self::new(vec![(T::one(), channel)], vec![(T::one(), state)])
    }

    pub fn channels(&self) -> &[(T, ChannelKernel<T>)] {
        &self.channels
    }

    pub fn states(&self) -> &[(T, Pmf<T>)] {
        &self.states
    }

    /// Weight mass dropped from the channel and state lists before rescaling.
    pub fn truncated_tail(&self) -> (T, T) {
        self.tail
    }

    fn shape(&self) -> (usize, usize, usize) {
        let w = &self.channels[0].1;
        (w.n_s(), w.n_x(), w.n_y())
    }

    fn active_channels(&self) -> impl Iterator<Item = &ChannelKernel<T>> {
        self.channels.iter().map(|c| &c.1)
    }

    fn active_states(&self) -> impl Iterator<Item = &Pmf<T>> {
        self.states.iter().map(|s| &s.1)
    }
}

/// Per-component information terms of a fixed policy.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real + Serialize")]
pub struct MixedTerms<T: Real = f64> {
    /// `packing[k][l] = I(U_l; Y_kl)` over supported components.
    pub packing: Vec<Vec<T>>,
    /// `covering[l] = I(U_l; S_l)`.
    pub covering: Vec<T>,
}

impl<T: Real> MixedTerms<T> {
    pub fn bound(&self) -> T {
        let min = self.packing.iter().flatten().copied().fold(T::infinity(), T::min);
        let max = self.covering.iter().copied().fold(T::neg_infinity(), T::max);
        min - max
    }
}

pub fn mixed_bound_terms<T: Real>(mix: &MixtureSpec<T>, policy: &GpPolicy<T>) -> Result<MixedTerms<T>> {
    let mut covering = Vec::new();
    for state in mix.active_states() {
        let j = compose_joint(state, policy, &mix.channels[0].1)?;
        let us = j.marginal(&[Axis::U, Axis::S]);
        covering.push(mi_dense(us.data(), us.dims()[0], us.dims()[1]));
    }
    let packing = mix
        .active_channels()
        .map(|w| {
            mix.active_states()
                .map(|state| {
                    let j = compose_joint(state, policy, w)?;
                    let uy = j.marginal(&[Axis::U, Axis::Y]);
                    Ok(mi_dense(uy.data(), uy.dims()[0], uy.dims()[1]))
                })
                .collect::<Result<Vec<T>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MixedTerms { packing, covering })
}

/// `min_{k,l} I(U_l; Y_kl) - max_l I(U_l; S_l)` for a fixed policy.
pub fn mixed_lower_bound<T: Real>(mix: &MixtureSpec<T>, policy: &GpPolicy<T>) -> Result<T> {
    mixed_bound_terms(mix, policy).map(|t| t.bound())
}

const STAGE_ITERS: usize = 100;
const STAGE_GAP: f64 = 1e-10;

/// Worst-packing minus worst-covering objective, optionally smoothed with
/// log-sum-exp at temperature `tau` (`tau = 0` is the exact objective).
struct MixedObjective<T: Real> {
    packing: Vec<EntropySystem<T>>,
    covering: Vec<EntropySystem<T>>,
    tau: T,
    scale: Vec<T>,
}

const PACKING: [(u8, f64); 3] = [(axis::U, 1.0), (axis::Y, 1.0), (axis::U | axis::Y, -1.0)];
const COVERING: [(u8, f64); 3] = [(axis::U, 1.0), (axis::S, 1.0), (axis::U | axis::S, -1.0)];

fn terms<T: Real>(t: &[(u8, f64)]) -> Vec<(u8, T)> {
    t.iter().map(|&(m, c)| (m, T::lit(c))).collect()
}

/// Weights of a soft extremum: hard `argext` when `tau = 0`.
fn soft_weights<T: Real>(values: &[T], tau: T, sign: T) -> (T, Vec<T>) {
    // sign = -1 for a minimum, +1 for a maximum.
    let ext = values
        .iter()
        .map(|&v| sign * v)
        .fold(T::neg_infinity(), T::max);
    if tau <= T::zero() {
        let i = values.iter().position(|&v| sign * v == ext).unwrap();
        let mut w = vec![T::zero(); values.len()];
        w[i] = T::one();
        return (sign * ext, w);
    }
    let e: Vec<T> = values.iter().map(|&v| ((sign * v - ext) / tau).exp()).collect();
    let z: T = e.iter().copied().sum();
    (sign * (ext + tau * z.ln()), e.into_iter().map(|x| x / z).collect())
}

impl<T: Real> MixedObjective<T> {
    fn eval(&self, q: &[T], grad: bool) -> (T, Option<Vec<T>>) {
        let pt = terms::<T>(&PACKING);
        let ct = terms::<T>(&COVERING);
        let run = |systems: &[EntropySystem<T>], t: &[(u8, T)]| -> Vec<(T, Option<Vec<T>>)> {
            systems
                .iter()
                .map(|s| {
                    if grad {
                        let (v, g) = s.value_grad(q, t);
                        (v, Some(g))
                    } else {
                        (s.value(q, t), None)
                    }
                })
                .collect()
        };
        let p = run(&self.packing, &pt);
        let c = run(&self.covering, &ct);
        let (pv, pw) = soft_weights(&p.iter().map(|x| x.0).collect::<Vec<_>>(), self.tau, -T::one());
        let (cv, cw) = soft_weights(&c.iter().map(|x| x.0).collect::<Vec<_>>(), self.tau, T::one());
        let value = pv - cv;
        if !grad {
            return (value, None);
        }
        let mut g = vec![T::zero(); q.len()];
        for ((_, gi), &w) in p.iter().zip(&pw) {
            for (a, &b) in g.iter_mut().zip(gi.as_ref().unwrap()) {
                *a = *a + w * b;
            }
        }
        for ((_, gi), &w) in c.iter().zip(&cw) {
            for (a, &b) in g.iter_mut().zip(gi.as_ref().unwrap()) {
                *a = *a - w * b;
            }
        }
        (value, Some(g))
    }
}

impl<T: Real> Objective<T> for MixedObjective<T> {
    fn rows(&self) -> usize {
        self.covering[0].layout().ns
    }
    fn width(&self) -> usize {
        self.covering[0].layout().actions()
    }
    fn value(&self, q: &[T]) -> T {
        self.eval(q, false).0
    }
    fn value_grad(&self, q: &[T]) -> (T, Vec<T>) {
        let (v, g) = self.eval(q, true);
        (v, g.unwrap())
    }
    fn row_scale(&self, row: usize) -> T {
        self.scale[row]
    }
    fn exact_value(&self, q: &[T]) -> T {
        MixedObjective {
            packing: self.packing.clone(),
            covering: self.covering.clone(),
            tau: T::zero(),
            scale: Vec::new(),
        }
        .eval(q, false)
        .0
    }
    fn tuning(&self, base: AscentOptions) -> AscentOptions {
        if self.packing.len() == 1 && self.covering.len() == 1 {
            return base;
        }
        // Smoothed stages only need to hand a good iterate to the next one;
        // the exact stage is non-smooth at ties, where the stationarity gap
        // does not vanish, so it is run for a short polish.
        AscentOptions {
            max_iter: base.max_iter.min(STAGE_ITERS),
            gap_tol: base.gap_tol.max(STAGE_GAP),
            ..base
        }
    }
}

struct MixedFactory<'a, T: Real> {
    mix: &'a MixtureSpec<T>,
}

impl<T: Real> Factory<T> for MixedFactory<'_, T> {
    fn stages(&self, layout: Layout, kernel: &KernelFn<'_, T>) -> Vec<Box<dyn Objective<T> + '_>> {
        let pm: Vec<u8> = PACKING.iter().map(|t| t.0).collect();
        let cm: Vec<u8> = COVERING.iter().map(|t| t.0).collect();
        let kernels: Vec<Vec<T>> = self.mix.active_channels().map(kernel).collect();
        let states: Vec<&Pmf<T>> = self.mix.active_states().collect();
        let packing: Vec<EntropySystem<T>> = kernels
            .iter()
            .flat_map(|k| states.iter().map(move |s| (k, s)))
            .map(|(k, s)| EntropySystem::new(layout, s.probs().to_vec(), k.clone(), &pm))
            .collect();
        let covering: Vec<EntropySystem<T>> = states
            .iter()
            .map(|s| EntropySystem::new(layout, s.probs().to_vec(), kernels[0].clone(), &cm))
            .collect();
        let mut scale = vec![T::zero(); layout.ns];
        for (w, s) in self.mix.states.iter() {
            for (acc, &p) in scale.iter_mut().zip(s.probs()) {
                *acc = *acc + *w * p;
            }
        }
        let taus: &[f64] = if packing.len() == 1 && covering.len() == 1 {
            &[0.0]
        } else {
            &[1e-3, 1e-5, 0.0]
        };
        taus.iter()
            .map(|&tau| {
                Box::new(MixedObjective {
                    packing: packing.clone(),
                    covering: covering.clone(),
                    tau: T::lit(tau),
                    scale: scale.clone(),
                }) as Box<dyn Objective<T>>
            })
            .collect()
    }

    fn repeats_matter(&self) -> bool {
        // With several components the merge argument that rules out repeated
        // strategies does not apply, so multisets are searched.
        self.mix.active_channels().count() > 1 || self.mix.active_states().count() > 1
    }

    fn screens(&self) -> bool {
        self.repeats_matter()
    }
}

/// Maximizes the mixed lower bound over policies with `|U| = u_size`.
pub fn maximize_mixed_lower_bound<T: Real>(mix: &MixtureSpec<T>, u_size: usize) -> Result<CapacityResult<T>> {
    maximize_mixed_lower_bound_with(
        mix,
        &GpOptions {
            u_size: Some(u_size),
            ..GpOptions::default()
        },
    )
}

/// As [`maximize_mixed_lower_bound`], with explicit search settings. The
/// result is flagged as a lower bound.
pub fn maximize_mixed_lower_bound_with<T: Real>(mix: &MixtureSpec<T>, opts: &GpOptions) -> Result<CapacityResult<T>> {
    let (n_s, n_x, n_y) = mix.shape();
    let shape = Shape {
        n_s,
        n_x,
        n_y,
        u_size: opts.u_size.unwrap_or(n_x * n_s + 1),
    };
    search(&MixedFactory { mix }, shape, opts, true)
}

/// Samples of `(1/n) ln[P(y^n | u^n) / P(y^n)]` under the mixture laws.
///
/// Each draw picks a channel component and a state component by weight,
/// generates an `n`-block from that pair, and evaluates the exact block
/// density of the mixture (a log-sum-exp over component product laws,
/// computed from the joint type of the block).
pub fn mixture_spectrum_demo(
    mix: &MixtureSpec<f64>,
    policy: &GpPolicy<f64>,
    n: usize,
    draws: usize,
    seed: u64,
) -> Result<SpectrumSamples> {
    if n == 0 {
        return Err(Error::InvalidArgument("blocklength must be positive".into()));
    }
    let min_draws = (1.0 / DEFAULT_DELTA).ceil() as usize;
    if draws < min_draws {
        return Err(Error::Budget(format!(
            "{draws} draws are too few for a delta = {DEFAULT_DELTA} quantile (need at least {min_draws})"
        )));
    }
    let (nu, ny) = (policy.n_u(), mix.shape().2);
    let samplers = mix
        .channels
        .iter()
        .map(|(_, w)| {
            mix.states
                .iter()
                .map(|(_, s)| SystemSampler::new(s, policy, w))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    // Per-letter log-laws of (U, Y) for every pair and of U for every state component.
    let mut log_uy = Vec::new();
    let mut log_weight_pairs = Vec::new();
    for (a, w) in &mix.channels {
        for (b, s) in &mix.states {
            let j = compose_joint(s, policy, w)?;
            log_uy.push(j.marginal(&[Axis::U, Axis::Y]).data().iter().map(|p| p.ln()).collect::<Vec<f64>>());
            log_weight_pairs.push((a * b).ln());
        }
    }
    let log_u: Vec<Vec<f64>> = mix
        .states
        .iter()
        .map(|(_, s)| {
            let j = compose_joint(s, policy, &mix.channels[0].1)?;
            Ok(j.marginal(&[Axis::U]).data().iter().map(|p| p.ln()).collect())
        })
        .collect::<Result<_>>()?;
    let log_y: Vec<Vec<f64>> = log_uy
        .iter()
        .map(|t| {
            (0..ny)
                .map(|y| (0..nu).map(|u| t[u * ny + y].exp()).sum::<f64>().ln())
                .collect()
        })
        .collect();
    let log_state_weights: Vec<f64> = mix.states.iter().map(|s| s.0.ln()).collect();
    let pick_channel = Categorical::new(&mix.channels.iter().map(|c| c.0).collect::<Vec<_>>());
    let pick_state = Categorical::new(&mix.states.iter().map(|s| s.0).collect::<Vec<_>>());
    let draws: Vec<f64> = (0..draws as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream_rng(seed, domain::MIXTURE, t, 0);
            let k = pick_channel.sample(&mut rng);
            let l = pick_state.sample(&mut rng);
            let sampler = &samplers[k][l];
            let mut counts = vec![0u32; nu * ny];
            for _ in 0..n {
                let (_, u, _, y) = sampler.letter(&mut rng);
                counts[u * ny + y] += 1;
            }
            let cu: Vec<u32> = (0..nu).map(|u| counts[u * ny..(u + 1) * ny].iter().sum()).collect();
            let cy: Vec<u32> = (0..ny).map(|y| (0..nu).map(|u| counts[u * ny + y]).sum()).collect();
            let dot = |c: &[u32], logp: &[f64]| -> f64 {
                c.iter()
                    .zip(logp)
                    .filter(|(&c, _)| c > 0)
                    .map(|(&c, &lp)| c as f64 * lp)
                    .sum()
            };
            let joint = log_sum_exp(log_uy.iter().zip(&log_weight_pairs).map(|(t, w)| w + dot(&counts, t)));
            let out = log_sum_exp(log_y.iter().zip(&log_weight_pairs).map(|(t, w)| w + dot(&cy, t)));
            let inp = log_sum_exp(log_u.iter().zip(&log_state_weights).map(|(t, w)| w + dot(&cu, t)));
            (joint - inp - out) / n as f64
        })
        .collect();
    SpectrumSamples::new(draws, n, seed)
}

fn log_sum_exp(terms: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = terms.collect();
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
