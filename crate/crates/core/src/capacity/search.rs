//! Multi-start search over `P_{U|S}` and deterministic input maps, shared by
//! every optimizer whose decision variable is a Gel'fand-Pinsker policy.

use rayon::prelude::*;

use super::{CapacityResult, Diagnostics, GpOptions, Method};
use crate::error::{Error, Result};
use crate::optimize::{ascend, random_rows, AscentOptions, Layout, Objective};
use crate::prob::{lex_cmp, ChannelKernel, ConditionalPmf, GpPolicy, Pmf};
use crate::rng::{domain, stream_rng};
use crate::scalar::Real;

/// Maps a channel to the action kernel `K(y | a, s)` of the current layout.
pub(crate) type KernelFn<'k, T> = dyn Fn(&ChannelKernel<T>) -> Vec<T> + Sync + 'k;

/// Builds the objective for a given action layout.
pub(crate) trait Factory<T: Real>: Sync {
    /// Continuation stages, run in order from each start; the last stage is
    /// the exact objective whose value is reported.
    fn stages(&self, layout: Layout, kernel: &KernelFn<'_, T>) -> Vec<Box<dyn Objective<T> + '_>>;

    /// Whether repeating a strategy can help, so multisets must be searched.
    fn repeats_matter(&self) -> bool {
        false
    }

    /// Whether stages run with a reduced per-restart budget, in which case
    /// the best few candidates are re-run with the full budget.
    fn screens(&self) -> bool {
        false
    }
}

/// Candidates re-run with the full budget after a screening pass.
const POLISHED: usize = 8;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Shape {
    pub n_s: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub u_size: usize,
}

/// All maps `S -> X`, as input symbols indexed by state.
pub(crate) fn strategies(n_s: usize, n_x: usize) -> Vec<Vec<usize>> {
    let count = n_x.pow(n_s as u32);
    (0..count)
        .map(|mut j| {
            (0..n_s)
                .map(|_| {
                    let x = j % n_x;
                    j /= n_x;
                    x
                })
                .collect()
        })
        .collect()
}

fn binomial(n: f64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i as f64) / (i + 1) as f64)
}

/// `k`-subsets of `0..n` (or size-`k` multisets when `repeat`) in lexicographic order.
pub(crate) fn classes(n: usize, k: usize, repeat: bool) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut c: Vec<usize> = if repeat { vec![0; k] } else { (0..k).collect() };
    let top = |i: usize| if repeat { n - 1 } else { n - k + i };
    loop {
        out.push(c.clone());
        let Some(i) = (0..k).rev().find(|&i| c[i] < top(i)) else {
            return out;
        };
        c[i] += 1;
        for j in i + 1..k {
            c[j] = if repeat { c[i] } else { c[j - 1] + 1 };
        }
    }
}

/// Kernel `K(y | u, s) = W(y | strategy_u(s), s)`.
fn strategy_kernel<T: Real>(channel: &ChannelKernel<T>, strategies: &[&[usize]]) -> Vec<T> {
    let mut k = Vec::with_capacity(channel.n_s() * strategies.len() * channel.n_y());
    for s in 0..channel.n_s() {
        for strat in strategies {
            k.extend_from_slice(channel.row(s, strat[s]));
        }
    }
    k
}

/// Kernel of the relaxed problem over `(u, x)` pairs: `K(y | u, x, s) = W(y | x, s)`.
fn relaxed_kernel<T: Real>(channel: &ChannelKernel<T>, u_size: usize) -> Vec<T> {
    let mut k = Vec::with_capacity(channel.n_s() * u_size * channel.n_x() * channel.n_y());
    for s in 0..channel.n_s() {
        for _ in 0..u_size {
            for x in 0..channel.n_x() {
                k.extend_from_slice(channel.row(s, x));
            }
        }
    }
    k
}

#[derive(Debug, Clone)]
struct Candidate<T: Real> {
    value: T,
    policy: GpPolicy<T>,
    iterations: usize,
}

/// Best candidate by value; near-ties go to the lexicographically smaller
/// flattened policy. Also returns the best-to-runner-up gap.
fn select_best<T: Real>(cands: Vec<Candidate<T>>) -> (Candidate<T>, f64) {
    let mut values: Vec<f64> = cands.iter().map(|c| c.value.as_f64()).collect();
    values.sort_by(|a, b| b.total_cmp(a));
    let gap = if values.len() > 1 { values[0] - values[1] } else { 0.0 };
    let tie = 1e-12;
    let best = cands
        .into_iter()
        .reduce(|best, c| {
            let (b, v) = (best.value.as_f64(), c.value.as_f64());
            if v > b + tie
                || ((v - b).abs() <= tie && lex_cmp(&c.policy.flattened(), &best.policy.flattened()).is_lt())
            {
                c
            } else {
                best
            }
        })
        .expect("at least one candidate");
    (best, gap)
}

/// Deterministic policy from `q(u|s)` rows (`[s][u]`) and strategies, padded
/// to `u_size` auxiliary symbols.
fn policy_from_rows<T: Real>(q: &[T], strategies: &[&[usize]], shape: Shape) -> GpPolicy<T> {
    let m = strategies.len();
    let rows = (0..shape.n_s)
        .map(|s| {
            let mut row: Vec<T> = q[s * m..(s + 1) * m].to_vec();
            row.resize(shape.u_size, T::zero());
            Pmf::from_vec_unchecked(row)
        })
        .collect();
    let mut g: Vec<Vec<usize>> = strategies.iter().map(|st| st.to_vec()).collect();
    g.resize(shape.u_size, vec![0; shape.n_s]);
    GpPolicy::deterministic(ConditionalPmf::from_rows(rows).expect("rows"), g, shape.n_x).expect("valid map")
}

fn run_stages<T: Real>(
    stages: &[Box<dyn Objective<T> + '_>],
    mut q: Vec<T>,
    ascent: AscentOptions,
    full: bool,
) -> (T, Vec<T>, usize) {
    let mut iterations = 0;
    let mut value = T::zero();
    for stage in stages {
        let opts = if full { ascent } else { stage.tuning(ascent) };
        let a = ascend(stage.as_ref(), q, opts);
        iterations += a.iterations;
        value = stage.exact_value(&a.q);
        q = a.q;
    }
    (value, q, iterations)
}

/// Multi-start maximization over canonical map classes, or over a relaxed
/// stochastic map when there are too many classes.
pub(crate) fn search<T: Real, F: Factory<T>>(
    factory: &F,
    shape: Shape,
    opts: &GpOptions,
    lower_bound: bool,
) -> Result<CapacityResult<T>> {
    if shape.u_size == 0 {
        return Err(Error::InvalidArgument("auxiliary alphabet size must be at least 1".into()));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument("at least one restart is required".into()));
    }
    let (n_s, n_x) = (shape.n_s, shape.n_x);
    let n_strat = (n_x as f64).powi(n_s as i32);
    let g_functions = (n_x as f64).powf((shape.u_size * n_s) as f64);
    let small = n_s <= opts.max_alphabet && n_x <= opts.max_alphabet;
    let repeat = factory.repeats_matter();
    let (m, count) = if repeat {
        (shape.u_size, binomial(n_strat + shape.u_size as f64 - 1.0, shape.u_size as u64))
    } else {
        let m = (shape.u_size as f64).min(n_strat) as usize;
        (m, binomial(n_strat, m as u64))
    };
    let mut result = if small && count <= opts.max_classes as f64 {
        exhaustive(factory, shape, opts, m, repeat)
    } else {
        relaxed(factory, shape, opts)
    };
    result.diagnostics.g_functions = g_functions;
    result.diagnostics.lower_bound = lower_bound;
    Ok(result)
}

fn ascent_options(opts: &GpOptions) -> AscentOptions {
    AscentOptions {
        max_iter: opts.max_iter,
        ..AscentOptions::default()
    }
}

fn exhaustive<T: Real, F: Factory<T>>(
    factory: &F,
    shape: Shape,
    opts: &GpOptions,
    m: usize,
    repeat: bool,
) -> CapacityResult<T> {
    let all = strategies(shape.n_s, shape.n_x);
    let classes = classes(all.len(), m, repeat);
    let layout = Layout {
        ns: shape.n_s,
        nv: 1,
        nu: m,
        nx: 1,
        ny: shape.n_y,
    };
    let ascent = ascent_options(opts);
    let class_strats = |c: usize| -> Vec<&[usize]> { classes[c].iter().map(|&i| all[i].as_slice()).collect() };
    let runs: Vec<(usize, T, Vec<T>, usize)> = (0..classes.len())
        .into_par_iter()
        .flat_map_iter(|c| {
            let strats = class_strats(c);
            let kernel = |ch: &ChannelKernel<T>| strategy_kernel(ch, &strats);
            let stages = factory.stages(layout, &kernel);
            (0..opts.restarts)
                .map(|r| {
                    let mut rng = stream_rng(opts.seed, domain::RESTART, c as u64, r as u64);
                    let q0 = random_rows(shape.n_s, m, &mut rng);
                    let (value, q, iterations) = run_stages(&stages, q0, ascent, false);
                    (c, value, q, iterations)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut runs = runs;
    let mut extra = 0;
    if factory.screens() {
        let mut order: Vec<usize> = (0..runs.len()).collect();
        order.sort_by(|&a, &b| runs[b].1.as_f64().total_cmp(&runs[a].1.as_f64()));
        let polished: Vec<(usize, (T, Vec<T>, usize))> = order
            .into_par_iter()
            .take(POLISHED)
            .map(|i| {
                let strats = class_strats(runs[i].0);
                let kernel = |ch: &ChannelKernel<T>| strategy_kernel(ch, &strats);
                let stages = factory.stages(layout, &kernel);
                (i, run_stages(&stages, runs[i].2.clone(), ascent, true))
            })
            .collect();
        for (i, (value, q, iterations)) in polished {
            extra += iterations;
            if value > runs[i].1 {
                runs[i].1 = value;
                runs[i].2 = q;
            }
        }
    }
    let cands: Vec<Candidate<T>> = runs
        .into_iter()
        .map(|(c, value, q, iterations)| Candidate {
            value,
            policy: policy_from_rows(&q, &class_strats(c), shape),
            iterations,
        })
        .collect();
    finish(cands, shape, extra, Method::ExhaustiveG, classes.len() as u64, None, None)
}

/// Merges restart outcomes; a non-positive best yields the trivial policy,
/// which always achieves zero.
fn finish<T: Real>(
    cands: Vec<Candidate<T>>,
    shape: Shape,
    extra_iterations: usize,
    method: Method,
    g_classes: u64,
    rounding_gap: Option<f64>,
    warning: Option<String>,
) -> CapacityResult<T> {
    let restarts = cands.len();
    let iterations = extra_iterations + cands.iter().map(|c| c.iterations).sum::<usize>();
    let (best, best_gap) = select_best(cands);
    let diagnostics = Diagnostics {
        method,
        restarts,
        iterations,
        best_gap,
        g_functions: 0.0,
        g_classes,
        rounding_gap,
        warning,
        lower_bound: false,
    };
    if best.value > T::zero() {
        return CapacityResult {
            value: best.value,
            policy: best.policy,
            diagnostics,
        };
    }
    let zero = vec![0usize; shape.n_s];
    CapacityResult {
        value: T::zero(),
        policy: policy_from_rows(&vec![T::one(); shape.n_s], &[zero.as_slice()], shape),
        diagnostics,
    }
}

fn relaxed<T: Real, F: Factory<T>>(factory: &F, shape: Shape, opts: &GpOptions) -> CapacityResult<T> {
    let (n_s, n_x, u_size) = (shape.n_s, shape.n_x, shape.u_size);
    let ascent = ascent_options(opts);
    let layout = Layout {
        ns: n_s,
        nv: 1,
        nu: u_size,
        nx: n_x,
        ny: shape.n_y,
    };
    let kernel = |ch: &ChannelKernel<T>| relaxed_kernel(ch, u_size);
    let stages = factory.stages(layout, &kernel);
    let width = u_size * n_x;
    let runs: Vec<(T, Vec<T>, usize)> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(opts.seed, domain::RESTART, u64::MAX, r as u64);
            run_stages(&stages, random_rows(n_s, width, &mut rng), ascent, false)
        })
        .collect();
    let relaxed_iters = runs.iter().map(|r| r.2).sum();
    let (relaxed_value, qr, _) = runs
        .into_iter()
        .reduce(|best, r| if r.0 > best.0 { r } else { best })
        .expect("restarts > 0");
    // Round: each (u, s) keeps its most likely input; U keeps its marginal.
    let cell = |s: usize, u: usize| &qr[s * width + u * n_x..s * width + (u + 1) * n_x];
    let strats: Vec<Vec<usize>> = (0..u_size)
        .map(|u| {
            (0..n_s)
                .map(|s| {
                    let row = cell(s, u);
                    (0..n_x).fold(0, |b, x| if row[x] > row[b] { x } else { b })
                })
                .collect()
        })
        .collect();
    let q_rounded: Vec<T> = (0..n_s)
        .flat_map(|s| (0..u_size).map(move |u| (s, u)))
        .map(|(s, u)| cell(s, u).iter().copied().sum())
        .collect();
    let strat_refs: Vec<&[usize]> = strats.iter().map(Vec::as_slice).collect();
    let fixed_layout = Layout { nx: 1, ..layout };
    let fixed_kernel = |ch: &ChannelKernel<T>| strategy_kernel(ch, &strat_refs);
    let fixed = factory.stages(fixed_layout, &fixed_kernel);
    let rounded_value = fixed.last().expect("at least one stage").value(&q_rounded);
    let starts: Vec<Vec<T>> = std::iter::once(q_rounded)
        .chain((0..opts.restarts).map(|r| {
            let mut rng = stream_rng(opts.seed, domain::RESTART, u64::MAX - 1, r as u64);
            random_rows(n_s, u_size, &mut rng)
        }))
        .collect();
    let cands: Vec<Candidate<T>> = starts
        .into_par_iter()
        .map(|q0| {
            let (value, q, iterations) = run_stages(&fixed, q0, ascent, false);
            Candidate {
                value,
                policy: policy_from_rows(&q, &strat_refs, shape),
                iterations,
            }
        })
        .collect();
    let mut out = finish(
        cands,
        shape,
        relaxed_iters,
        Method::RelaxedG,
        1,
        Some((relaxed_value - rounded_value).as_f64()),
        Some(format!(
            "alphabets |S| = {n_s}, |X| = {n_x}, |U| = {u_size} are too large for exhaustive map search; \
             used a relaxed stochastic map rounded to a deterministic one"
        )),
    );
    out.diagnostics.restarts += opts.restarts;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_enumeration() {
        assert_eq!(classes(4, 2, false).len(), 6);
        assert_eq!(classes(4, 2, false)[0], vec![0, 1]);
        assert_eq!(classes(4, 2, false)[5], vec![2, 3]);
        assert_eq!(classes(3, 3, false), vec![vec![0, 1, 2]]);
        // Multisets: C(n + k - 1, k).
        assert_eq!(classes(4, 5, true).len(), 56);
        assert_eq!(classes(2, 2, true), vec![vec![0, 0], vec![0, 1], vec![1, 1]]);
        assert_eq!(binomial(8.0, 7), 8.0);
        assert_eq!(binomial(8.0, 5), 56.0);
    }

    #[test]
    fn strategies_enumerate_all_maps() {
        let s = strategies(2, 3);
        assert_eq!(s.len(), 9);
        assert_eq!(s[5], vec![2, 1]);
    }
}
