//! Single-letter capacities: Gel'fand-Pinsker, stateless, state known at both
//! ends, and Cesàro averages over structured non-stationary sequences.

mod search;
mod sequence;

pub use sequence::{
    cesaro_capacity, example2_capacity, g_combine, g_of_q, in_j, j_density_extrema, CesaroResult, JDensity,
    SequenceSpec, StationarySystem,
};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::info::mi_dense;
use crate::optimize::{axis, Combination, EntropySystem, Layout, Objective};
use crate::prob::{compose_joint, Axis, ChannelKernel, ConditionalPmf, GpPolicy, Pmf};
use crate::scalar::Real;

pub(crate) use search::{classes, search, strategies, Factory, KernelFn, Shape};

/// How a capacity value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BlahutArimoto,
    PerStateBlahutArimoto,
    /// Every canonical deterministic input map was searched.
    ExhaustiveG,
    /// The input map was relaxed to a stochastic one and rounded.
    RelaxedG,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub method: Method,
    /// Random restarts run in total.
    pub restarts: usize,
    /// Inner iterations summed over all restarts.
    pub iterations: usize,
    /// Objective gap between the best and second-best restart.
    pub best_gap: f64,
    /// Number of deterministic maps `U x S -> X` for the requested `|U|`.
    pub g_functions: f64,
    /// Canonical map classes actually searched.
    pub g_classes: u64,
    /// Relaxed optimum minus the value after rounding to a deterministic map.
    pub rounding_gap: Option<f64>,
    pub warning: Option<String>,
    /// The value is a lower bound rather than a capacity.
    pub lower_bound: bool,
}

impl Diagnostics {
    pub(crate) fn closed(method: Method, iterations: usize) -> Self {
        Diagnostics {
            method,
            restarts: 0,
            iterations,
            best_gap: 0.0,
            g_functions: 0.0,
            g_classes: 0,
            rounding_gap: None,
            warning: None,
            lower_bound: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real + Serialize")]
pub struct CapacityResult<T: Real = f64> {
    pub value: T,
    pub policy: GpPolicy<T>,
    pub diagnostics: Diagnostics,
}

/// Search settings for [`gp_capacity`].
#[derive(Debug, Clone, PartialEq)]
pub struct GpOptions {
    /// Auxiliary alphabet size; `None` uses `|X||S| + 1`.
    pub u_size: Option<usize>,
    /// Random restarts per map class.
    pub restarts: usize,
    pub seed: u64,
    /// Largest number of map classes searched exhaustively.
    pub max_classes: u64,
    /// Largest `|S|` and `|X|` searched exhaustively.
    pub max_alphabet: usize,
    pub max_iter: usize,
}

impl Default for GpOptions {
    fn default() -> Self {
        GpOptions {
            u_size: None,
            restarts: 50,
            seed: 0,
            max_classes: 1_000_000,
            max_alphabet: 4,
            max_iter: 5000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlahutArimoto<T: Real = f64> {
    pub value: T,
    pub input: Pmf<T>,
    pub upper_bound: T,
    pub iterations: usize,
}

/// Blahut-Arimoto iteration, stopped when the standard upper and lower
/// capacity bounds are within the scalar's normalization tolerance.
pub fn blahut_arimoto<T: Real>(channel: &ConditionalPmf<T>) -> BlahutArimoto<T> {
    let (nx, ny) = (channel.n_cond(), channel.n_out());
    let mut p = vec![T::one() / T::from_usize(nx).unwrap(); nx];
    let tol = T::norm_tol();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut qy = vec![T::zero(); ny];
        for (x, &px) in p.iter().enumerate() {
            for (q, &w) in qy.iter_mut().zip(channel.row(x).probs()) {
                *q = *q + px * w;
            }
        }
        let d: Vec<T> = (0..nx)
            .map(|x| {
                channel
                    .row(x)
                    .probs()
                    .iter()
                    .zip(&qy)
                    .filter(|(w, _)| **w > T::zero())
                    .map(|(&w, &q)| w * (w / q).ln())
                    .sum()
            })
            .collect();
        let lower: T = p.iter().zip(&d).map(|(&px, &dx)| px * dx).sum();
        let upper = d.iter().copied().fold(T::neg_infinity(), T::max);
        if upper - lower <= tol || iterations >= 200_000 {
            return BlahutArimoto {
                value: lower.max(T::zero()),
                input: Pmf::from_vec_unchecked(p),
                upper_bound: upper,
                iterations,
            };
        }
        let base = upper;
        let mut total = T::zero();
        for (px, &dx) in p.iter_mut().zip(&d) {
            *px = *px * (dx - base).exp();
            total = total + *px;
        }
        for px in p.iter_mut() {
            *px = *px / total;
        }
    }
}

/// Capacity of a channel without state.
pub fn no_state_capacity<T: Real>(channel: &ConditionalPmf<T>) -> CapacityResult<T> {
    let ba = blahut_arimoto(channel);
    let u_given_s = ConditionalPmf::from_rows(vec![ba.input.clone()]).expect("one row");
    CapacityResult {
        value: ba.value,
        policy: GpPolicy::identity(u_given_s),
        diagnostics: Diagnostics::closed(Method::BlahutArimoto, ba.iterations),
    }
}

/// Capacity with the state known to encoder and decoder: `sum_s P_S(s) C(W_s)`.
pub fn state_at_both_capacity<T: Real>(channel: &ChannelKernel<T>, state: &Pmf<T>) -> Result<CapacityResult<T>> {
    check_state(channel, state)?;
    let mut value = T::zero();
    let mut rows = Vec::with_capacity(channel.n_s());
    let mut iterations = 0;
    for s in 0..channel.n_s() {
        let ba = blahut_arimoto(&channel.state_slice(s));
        value = value + state.get(s) * ba.value;
        iterations += ba.iterations;
        rows.push(ba.input);
    }
    Ok(CapacityResult {
        value,
        policy: GpPolicy::identity(ConditionalPmf::from_rows(rows)?),
        diagnostics: Diagnostics::closed(Method::PerStateBlahutArimoto, iterations),
    })
}

/// `I(U; Y) - I(U; S)` of a fixed policy.
pub fn gp_objective<T: Real>(channel: &ChannelKernel<T>, state: &Pmf<T>, policy: &GpPolicy<T>) -> Result<T> {
    let j = compose_joint(state, policy, channel)?;
    let uy = j.marginal(&[Axis::U, Axis::Y]);
    let us = j.marginal(&[Axis::U, Axis::S]);
    Ok(mi_dense(uy.data(), uy.dims()[0], uy.dims()[1]) - mi_dense(us.data(), us.dims()[0], us.dims()[1]))
}

/// Gel'fand-Pinsker capacity with `|U| = u_size` and default search settings.
pub fn gp_capacity_dm<T: Real>(channel: &ChannelKernel<T>, state: &Pmf<T>, u_size: usize) -> Result<CapacityResult<T>> {
    gp_capacity(
        channel,
        state,
        &GpOptions {
            u_size: Some(u_size),
            ..GpOptions::default()
        },
    )
}

pub(crate) fn check_state<T: Real>(channel: &ChannelKernel<T>, state: &Pmf<T>) -> Result<()> {
    if state.len() != channel.n_s() {
        return Err(Error::Dimension(format!(
            "state pmf has {} symbols, channel has {} states",
            state.len(),
            channel.n_s()
        )));
    }
    Ok(())
}

/// Entropy combination `H(Y) - H(U,Y) + H(U,S) - H(S) = I(U;Y) - I(U;S)`.
pub(crate) fn gp_terms<T: Real>() -> Vec<(u8, T)> {
    vec![
        (axis::Y, T::one()),
        (axis::U | axis::Y, -T::one()),
        (axis::U | axis::S, T::one()),
        (axis::S, -T::one()),
    ]
}

struct GpFactory<'a, T: Real> {
    channel: &'a ChannelKernel<T>,
    state: &'a Pmf<T>,
}

impl<T: Real> Factory<T> for GpFactory<'_, T> {
    fn stages(&self, layout: Layout, kernel: &KernelFn<'_, T>) -> Vec<Box<dyn Objective<T> + '_>> {
        let terms = gp_terms();
        let masks: Vec<u8> = terms.iter().map(|t| t.0).collect();
        let system = EntropySystem::new(layout, self.state.probs().to_vec(), kernel(self.channel), &masks);
        vec![Box::new(Combination { system, terms })]
    }
}

/// Maximizes `I(U;Y) - I(U;S)` over `P_{U|S}` and a deterministic map
/// `g: U x S -> X`.
///
/// Maps are searched up to relabelling of `U`: only the set of distinct
/// strategies `g(u, .)` matters, and repeating a strategy never helps, so the
/// search runs over strategy sets of size `min(|U|, |X|^|S|)`. When that is
/// too many sets, the map is relaxed to a stochastic one and rounded.
pub fn gp_capacity<T: Real>(channel: &ChannelKernel<T>, state: &Pmf<T>, opts: &GpOptions) -> Result<CapacityResult<T>> {
    check_state(channel, state)?;
    let shape = Shape {
        n_s: channel.n_s(),
        n_x: channel.n_x(),
        n_y: channel.n_y(),
        u_size: opts.u_size.unwrap_or(channel.n_x() * channel.n_s() + 1),
    };
    search(&GpFactory { channel, state }, shape, opts, false)
}
