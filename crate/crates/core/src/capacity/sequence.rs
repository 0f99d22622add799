use serde::Serialize;

use super::{gp_capacity, GpOptions};
use crate::error::{Error, Result};
use crate::prob::{ChannelKernel, Pmf};
use crate::scalar::Real;

/// Membership in `J = [2, 3] u [8, 15] u [32, 63] u ...`, i.e. indices whose
/// binary length is even (`floor(log2 i)` odd).
pub fn in_j(i: u64) -> bool {
    i >= 1 && (63 - i.leading_zeros()) % 2 == 1
}

/// A stationary memoryless channel with its state law.
#[derive(Debug, Clone, PartialEq)]
pub struct StationarySystem<T: Real = f64> {
    pub channel: ChannelKernel<T>,
    pub state: Pmf<T>,
}

impl<T: Real> StationarySystem<T> {
    pub fn new(channel: ChannelKernel<T>, state: Pmf<T>) -> Result<Self> {
        if channel.n_s() != state.len() {
            return Err(Error::Dimension(format!(
                "state pmf has {} symbols, channel has {} states",
                state.len(),
                channel.n_s()
            )));
        }
        Ok(StationarySystem { channel, state })
    }
}

/// A memoryless, possibly non-stationary, channel-and-state sequence indexed
/// from `i = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum SequenceSpec<T: Real = f64> {
    Stationary(StationarySystem<T>),
    /// `inside` at indices in `J`, `outside` elsewhere.
    JBlocks {
        inside: StationarySystem<T>,
        outside: StationarySystem<T>,
    },
    /// Odd indices follow the `J` rule, even indices use `even`.
    JOddEven {
        odd_inside: StationarySystem<T>,
        odd_outside: StationarySystem<T>,
        even: StationarySystem<T>,
    },
    /// `systems[(i - 1) mod p]` at index `i`.
    Periodic(Vec<StationarySystem<T>>),
}

impl<T: Real> SequenceSpec<T> {
    /// Odd indices use `wa` (in `J`) or `wb` with state `qa`; even indices use
    /// `wc` with state `qb`.
    pub fn odd_even(
        wa: ChannelKernel<T>,
        wb: ChannelKernel<T>,
        wc: ChannelKernel<T>,
        qa: Pmf<T>,
        qb: Pmf<T>,
    ) -> Result<Self> {
        Ok(SequenceSpec::JOddEven {
            odd_inside: StationarySystem::new(wa, qa.clone())?,
            odd_outside: StationarySystem::new(wb, qa)?,
            even: StationarySystem::new(wc, qb)?,
        })
    }

    pub fn constituents(&self) -> Vec<&StationarySystem<T>> {
        match self {
            SequenceSpec::Stationary(s) => vec![s],
            SequenceSpec::JBlocks { inside, outside } => vec![inside, outside],
            SequenceSpec::JOddEven {
                odd_inside,
                odd_outside,
                even,
            } => vec![odd_inside, odd_outside, even],
            SequenceSpec::Periodic(v) => v.iter().collect(),
        }
    }

    /// Constituent used at index `i >= 1`.
    pub fn constituent_at(&self, i: u64) -> usize {
        match self {
            SequenceSpec::Stationary(_) => 0,
            SequenceSpec::JBlocks { .. } => usize::from(!in_j(i)),
            SequenceSpec::JOddEven { .. } => {
                if i % 2 == 0 {
                    2
                } else {
                    usize::from(!in_j(i))
                }
            }
            SequenceSpec::Periodic(v) => ((i - 1) % v.len() as u64) as usize,
        }
    }

    /// Closed-form liminf of the running averages given constituent capacities.
    fn analytic(&self, caps: &[T]) -> T {
        match self {
            SequenceSpec::Stationary(_) => caps[0],
            SequenceSpec::JBlocks { .. } => g_combine(caps[0], caps[1]),
            SequenceSpec::JOddEven { .. } => (g_combine(caps[0], caps[1]) + caps[2]) / T::lit(2.0),
            SequenceSpec::Periodic(_) => caps.iter().copied().sum::<T>() / T::from_usize(caps.len()).unwrap(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real + Serialize")]
pub struct CesaroResult<T: Real = f64> {
    /// Entry `n - 1` holds `(1/n) sum_{i <= n} C(W_i, P_{S_i})`.
    pub partial_averages: Vec<T>,
    /// Minimum of the running averages over `window`.
    pub liminf_estimate: T,
    pub analytic_value: Option<T>,
    pub constituent_capacities: Vec<T>,
    /// Inclusive range of `n` the liminf surrogate is taken over.
    pub window: (usize, usize),
}

/// Running averages of per-index capacities and their liminf over the final
/// dyadic window `[n_max / 2, n_max]`.
pub fn cesaro_capacity<T: Real>(seq: &SequenceSpec<T>, n_max: usize, opts: &GpOptions) -> Result<CesaroResult<T>> {
    if n_max < 4 {
        return Err(Error::InvalidArgument(format!("horizon must be at least 4, got {n_max}")));
    }
    if let SequenceSpec::Periodic(v) = seq {
        if v.is_empty() {
            return Err(Error::InvalidArgument("periodic sequence without systems".into()));
        }
    }
    let caps = seq
        .constituents()
        .into_iter()
        .map(|c| gp_capacity(&c.channel, &c.state, opts).map(|r| r.value))
        .collect::<Result<Vec<T>>>()?;
    let mut counts = vec![0usize; caps.len()];
    let partial_averages: Vec<T> = (1..=n_max as u64)
        .map(|i| {
            counts[seq.constituent_at(i)] += 1;
            let total: T = counts
                .iter()
                .zip(&caps)
                .map(|(&c, &v)| T::from_usize(c).unwrap() * v)
                .sum();
            total / T::from_u64(i).unwrap()
        })
        .collect();
    let window = (n_max / 2, n_max);
    let liminf_estimate = partial_averages[window.0 - 1..]
        .iter()
        .copied()
        .fold(T::infinity(), T::min);
    Ok(CesaroResult {
        partial_averages,
        liminf_estimate,
        analytic_value: Some(seq.analytic(&caps)),
        constituent_capacities: caps,
        window,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JDensity {
    /// Minimum of `(2/n)|O_n n J|` over `window`.
    pub liminf_odd_j: f64,
    /// Maximum of `(2/n)|O_n n J|` over `window`.
    pub limsup_odd_j: f64,
    /// Entry `n - 1` holds `(2/n)|O_n n J|` where `O_n` are the odd numbers up to `n`.
    pub partials: Vec<f64>,
    /// Inclusive tail range the extrema are taken over.
    pub window: (usize, usize),
    /// Values at the dyadic block endpoints `2^j - 1` and `2^j` inside the window.
    pub dyadic: Vec<(usize, f64)>,
}

/// Exact running density of odd members of `J`, with its extrema over the tail
/// `[2^ceil(j/2), n_max]` where `j = floor(log2 n_max)`.
pub fn j_density_extrema(n_max: usize) -> Result<JDensity> {
    if n_max < 1 << 10 {
        return Err(Error::InvalidArgument(format!("horizon must be at least 2^10, got {n_max}")));
    }
    let mut hits = 0u64;
    let partials: Vec<f64> = (1..=n_max as u64)
        .map(|n| {
            if n % 2 == 1 && in_j(n) {
                hits += 1;
            }
            2.0 * hits as f64 / n as f64
        })
        .collect();
    let j = 63 - (n_max as u64).leading_zeros();
    let lo = 1usize << j.div_ceil(2);
    let tail = &partials[lo - 1..];
    let dyadic = (0..=j)
        .flat_map(|k| [(1usize << k) - 1, 1usize << k])
        .filter(|&n| n >= lo && n <= n_max)
        .map(|n| (n, partials[n - 1]))
        .collect();
    Ok(JDensity {
        liminf_odd_j: tail.iter().copied().fold(f64::INFINITY, f64::min),
        limsup_odd_j: tail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        window: (lo, n_max),
        dyadic,
        partials,
    })
}

/// `(2/3) min(a, b) + (1/3) max(a, b)`.
pub fn g_combine<T: Real>(a: T, b: T) -> T {
    (T::lit(2.0) * a.min(b) + a.max(b)) / T::lit(3.0)
}

/// The combination above applied to `C(W_a, Q)` and `C(W_b, Q)`.
pub fn g_of_q<T: Real>(wa: &ChannelKernel<T>, wb: &ChannelKernel<T>, q: &Pmf<T>, opts: &GpOptions) -> Result<T> {
    let ca = gp_capacity(wa, q, opts)?.value;
    let cb = gp_capacity(wb, q, opts)?.value;
    Ok(g_combine(ca, cb))
}

fn require_binary_symmetric<T: Real>(w: &ChannelKernel<T>, name: &str) -> Result<()> {
    if w.n_s() != 2 || w.n_x() != 2 || w.n_y() != 2 {
        return Err(Error::Precondition(format!("{name} must be binary in state, input and output")));
    }
    let tol = T::lit(1e-12);
    for s in 0..2 {
        if (w.prob(s, 0, 1) - w.prob(s, 1, 0)).abs() > tol {
            return Err(Error::Precondition(format!(
                "{name} is not a binary symmetric channel in state {s}"
            )));
        }
    }
    Ok(())
}

/// `(1/2)[G(Q_a) + C(W_c, Q_b)]` for the odd/even sequence whose odd-index
/// channels are state-wise binary symmetric.
pub fn example2_capacity<T: Real>(
    wa: &ChannelKernel<T>,
    wb: &ChannelKernel<T>,
    wc: &ChannelKernel<T>,
    qa: &Pmf<T>,
    qb: &Pmf<T>,
    opts: &GpOptions,
) -> Result<T> {
    require_binary_symmetric(wa, "W_a")?;
    require_binary_symmetric(wb, "W_b")?;
    if wc.n_s() != 2 || wc.n_x() != 2 || wc.n_y() != 2 {
        return Err(Error::Precondition("W_c must be binary in state, input and output".into()));
    }
    let g = g_of_q(wa, wb, qa, opts)?;
    let c = gp_capacity(wc, qb, opts)?.value;
    Ok((g + c) / T::lit(2.0))
}
