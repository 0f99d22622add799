//! Rate region with coded state information at the decoder: pairs
//! `(R, R_d)` with `R <= I(U;Y|V) - I(U;S|V)` and `R_d >= I(V;S) - I(V;Y)`.

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::{blahut_arimoto, classes, gp_capacity, strategies, GpOptions};
use crate::error::{Error, Result};
use crate::info::entropy;
use crate::optimize::{ascend, axis, random_rows, AscentOptions, EntropySystem, Layout, Objective};
use crate::prob::{ChannelKernel, ConditionalPmf, Pmf, XMap};
use crate::rng::{domain, stream_rng};
use crate::scalar::Real;

/// Slack used by membership tests and by the feasibility re-check.
pub const MEMBERSHIP_SLACK: f64 = 1e-9;
/// Consecutive frontier gains below this count as saturated.
pub const SATURATION_TOL: f64 = 1e-4;

/// `P_{V|S}`, `P_{U|V,S}` (row `v |S| + s`) and a map `g[u][v][s] -> x`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real + Serialize")]
pub struct RegionPolicy<T: Real = f64> {
    v_given_s: ConditionalPmf<T>,
    u_given_vs: ConditionalPmf<T>,
    g: Vec<Vec<Vec<usize>>>,
    n_x: usize,
}

impl<T: Real> RegionPolicy<T> {
    pub fn new(
        v_given_s: ConditionalPmf<T>,
        u_given_vs: ConditionalPmf<T>,
        g: Vec<Vec<Vec<usize>>>,
        n_x: usize,
    ) -> Result<Self> {
        let (n_s, n_v) = (v_given_s.n_cond(), v_given_s.n_out());
        let n_u = u_given_vs.n_out();
        if u_given_vs.n_cond() != n_v * n_s {
            return Err(Error::Dimension(format!(
                "P(U|V,S) has {} rows, expected |V||S| = {}",
                u_given_vs.n_cond(),
                n_v * n_s
            )));
        }
        if g.len() != n_u || g.iter().any(|gv| gv.len() != n_v || gv.iter().any(|gs| gs.len() != n_s)) {
            return Err(Error::Dimension("map g must be indexed [u][v][s]".into()));
        }
        if g.iter().flatten().flatten().any(|&x| x >= n_x) {
            return Err(Error::InvalidArgument(format!("map g produces an input outside 0..{n_x}")));
        }
        Ok(RegionPolicy {
            v_given_s,
            u_given_vs,
            g,
            n_x,
        })
    }

    /// `V` and `U` both constant.
    pub fn trivial(n_s: usize, x: usize, n_x: usize) -> Self {
        let one = |rows: usize| ConditionalPmf::from_rows(vec![Pmf::point(1, 0); rows]).expect("point rows");
        RegionPolicy::new(one(n_s), one(n_s), vec![vec![vec![x; n_s]]], n_x).expect("valid trivial policy")
    }

    pub fn v_given_s(&self) -> &ConditionalPmf<T> {
        &self.v_given_s
    }

    pub fn u_given_vs(&self) -> &ConditionalPmf<T> {
        &self.u_given_vs
    }

    pub fn map(&self) -> &[Vec<Vec<usize>>] {
        &self.g
    }

    pub fn n_v(&self) -> usize {
        self.v_given_s.n_out()
    }

    pub fn n_u(&self) -> usize {
        self.u_given_vs.n_out()
    }
}

/// Exact rate terms of a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionRates<T: Real = f64> {
    /// `I(U;Y|V) - I(U;S|V)`.
    pub rate: T,
    /// `I(V;S) - I(V;Y)`.
    pub rate_d: T,
}

/// Computes both rate terms from the joint law of `(S, V, U, Y)`.
pub fn region_rates<T: Real>(policy: &RegionPolicy<T>, channel: &ChannelKernel<T>, state: &Pmf<T>) -> Result<RegionRates<T>> {
    let (n_s, n_v, n_u, n_y) = (state.len(), policy.n_v(), policy.n_u(), channel.n_y());
    if policy.v_given_s.n_cond() != n_s || channel.n_s() != n_s || policy.n_x != channel.n_x() {
        return Err(Error::Dimension("policy, channel and state disagree on alphabets".into()));
    }
    let mut p = vec![T::zero(); n_s * n_v * n_u * n_y];
    for s in 0..n_s {
        for v in 0..n_v {
            let pv = state.get(s) * policy.v_given_s.prob(s, v);
            for u in 0..n_u {
                let pu = pv * policy.u_given_vs.prob(v * n_s + s, u);
                let row = channel.row(s, policy.g[u][v][s]);
                for y in 0..n_y {
                    p[((s * n_v + v) * n_u + u) * n_y + y] = pu * row[y];
                }
            }
        }
    }
    let dims = [n_s, n_v, n_u, n_y];
    let h = |keep: [bool; 4]| -> T {
        let strides: Vec<usize> = (0..4).map(|k| if keep[k] { dims[k] } else { 1 }).collect();
        let size: usize = strides.iter().product();
        let mut m = vec![T::zero(); size];
        for (i, &v) in p.iter().enumerate() {
            let idx = [i / (n_v * n_u * n_y), i / (n_u * n_y) % n_v, i / n_y % n_u, i % n_y];
            let o = (0..4).fold(0, |acc, k| acc * strides[k] + if keep[k] { idx[k] } else { 0 });
            m[o] = m[o] + v;
        }
        entropy(&m)
    };
    // Coordinates (s, v, u, y).
    let (hv, hs, hy) = (h([false, true, false, false]), h([true, false, false, false]), h([false, false, false, true]));
    let (hvs, hvy) = (h([true, true, false, false]), h([false, true, false, true]));
    let (huv, huvs, huvy) = (h([false, true, true, false]), h([true, true, true, false]), h([false, true, true, true]));
    let i_uy_v = huv + hvy - huvy - hv;
    let i_us_v = huv + hvs - huvs - hv;
    let i_vs = hv + hs - hvs;
    let i_vy = hv + hy - hvy;
    Ok(RegionRates {
        rate: i_uy_v - i_us_v,
        rate_d: i_vs - i_vy,
    })
}

/// One frontier point with the policy achieving it.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real + Serialize")]
pub struct RegionPoint<T: Real = f64> {
    pub rate: T,
    pub rate_d: T,
    pub policy: RegionPolicy<T>,
}

/// Whether `(R, R_d)` is achieved by the point's own policy:
/// `R <= I(U;Y|V) - I(U;S|V)` and `R_d >= I(V;S) - I(V;Y)`, each up to
/// [`MEMBERSHIP_SLACK`].
pub fn region_membership<T: Real>(point: &RegionPoint<T>, channel: &ChannelKernel<T>, state: &Pmf<T>) -> Result<bool> {
    let r = region_rates(&point.policy, channel, state)?;
    let slack = T::lit(MEMBERSHIP_SLACK);
    Ok(point.rate >= -slack
        && point.rate_d >= -slack
        && r.rate - point.rate >= -slack
        && point.rate_d - r.rate_d >= -slack)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionOptions {
    /// `|V|`; defaults to `|X||S| + 1`.
    pub v_size: Option<usize>,
    /// `|U|` per value of `V`; defaults to `|X|^|S|`, every strategy `S -> X`.
    pub u_size: Option<usize>,
    /// Random starts per grid point, besides the `V` constant and `V = S` starts.
    pub restarts: usize,
    pub seed: u64,
    /// Increasing penalty weights on constraint violation.
    pub penalties: Vec<f64>,
    pub max_iter: usize,
}

impl Default for RegionOptions {
    fn default() -> Self {
        RegionOptions {
            v_size: None,
            u_size: None,
            restarts: 6,
            seed: 0,
            penalties: vec![1.0, 10.0, 100.0, 1e3, 1e4],
            max_iter: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real + Serialize")]
pub struct Frontier<T: Real = f64> {
    /// One point per grid value, `R` non-decreasing in `R_d`.
    pub points: Vec<RegionPoint<T>>,
    /// First grid index after which `R` gains less than [`SATURATION_TOL`].
    pub knee: Option<usize>,
    pub v_size: usize,
    pub u_size: usize,
    /// Cardinality bounds `|V| <= |X||S| + 1`, `|U| <= |X||S|(|X||S| + 1)`.
    pub v_bound: usize,
    pub u_bound: usize,
}

/// `R` maximized for each `R_d` in the grid, with default options.
pub fn region_frontier<T: Real>(
    channel: &ChannelKernel<T>,
    state: &Pmf<T>,
    v_size: usize,
    u_size: usize,
    rd_grid: &[T],
) -> Result<Vec<RegionPoint<T>>> {
    let opts = RegionOptions {
        v_size: Some(v_size),
        u_size: Some(u_size),
        ..RegionOptions::default()
    };
    region_frontier_with(channel, state, rd_grid, &opts).map(|f| f.points)
}

/// Objective `I(U;Y|V) - I(U;S|V) - lambda max(0, I(V;S) - I(V;Y) - target)`.
struct Penalized<T: Real> {
    system: EntropySystem<T>,
    lambda: T,
    target: T,
}

fn rate_terms<T: Real>() -> [(u8, T); 4] {
    [
        (axis::V | axis::Y, T::one()),
        (axis::U | axis::V | axis::Y, -T::one()),
        (axis::V | axis::S, -T::one()),
        (axis::U | axis::V | axis::S, T::one()),
    ]
}

fn constraint_terms<T: Real>() -> [(u8, T); 4] {
    [
        (axis::S, T::one()),
        (axis::V | axis::S, -T::one()),
        (axis::Y, -T::one()),
        (axis::V | axis::Y, T::one()),
    ]
}

impl<T: Real> Objective<T> for Penalized<T> {
    fn rows(&self) -> usize {
        self.system.layout().ns
    }
    fn width(&self) -> usize {
        self.system.layout().actions()
    }
    fn value(&self, q: &[T]) -> T {
        let f = self.system.value(q, &rate_terms());
        let c = self.system.value(q, &constraint_terms());
        f - self.lambda * (c - self.target).max(T::zero())
    }
    fn value_grad(&self, q: &[T]) -> (T, Vec<T>) {
        let (f, mut g) = self.system.value_grad(q, &rate_terms());
        let (c, gc) = self.system.value_grad(q, &constraint_terms());
        if c > self.target {
            for (a, b) in g.iter_mut().zip(gc) {
                *a = *a - self.lambda * b;
            }
        }
        (f - self.lambda * (c - self.target).max(T::zero()), g)
    }
    fn row_scale(&self, row: usize) -> T {
        self.system.state()[row]
    }
}

/// Aims the penalty slightly inside the constraint so that the exact
/// feasibility re-check passes.
const TARGET_MARGIN: f64 = 1e-8;

/// Maximizes `I(U;Y|V) - I(U;S|V)` subject to `I(V;S) - I(V;Y) <= R_d` for
/// each grid value, by an increasing penalty sweep from several starts
/// (`V` constant at the Gel'fand-Pinsker optimum, `V = S` at the per-state
/// optimum, and random laws). Infeasible outcomes are discarded and the
/// frontier is made monotone by carrying better policies forward.
pub fn region_frontier_with<T: Real>(
    channel: &ChannelKernel<T>,
    state: &Pmf<T>,
    rd_grid: &[T],
    opts: &RegionOptions,
) -> Result<Frontier<T>> {
    let (n_s, n_x, n_y) = (channel.n_s(), channel.n_x(), channel.n_y());
    if state.len() != n_s {
        return Err(Error::Dimension(format!("state has {} symbols, channel has {n_s} states", state.len())));
    }
    if let Some(bad) = rd_grid.iter().find(|r| !(**r >= T::zero()) || !r.is_finite()) {
        return Err(Error::InvalidArgument(format!("infeasible grid point R_d = {bad}: must be finite and >= 0")));
    }
    if opts.penalties.is_empty() || opts.penalties.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::InvalidArgument("penalty weights must be positive".into()));
    }
    let v_bound = n_x * n_s + 1;
    let u_bound = n_x * n_s * (n_x * n_s + 1);
    let all = strategies(n_s, n_x);
    let v_size = opts.v_size.unwrap_or(v_bound);
    let u_size = opts.u_size.unwrap_or(all.len());
    if v_size == 0 || u_size == 0 {
        return Err(Error::InvalidArgument("auxiliary alphabets must be non-empty".into()));
    }
    if v_size > v_bound || u_size > u_bound {
        return Err(Error::InvalidArgument(format!(
            "|V| = {v_size}, |U| = {u_size} exceed the bounds {v_bound}, {u_bound}"
        )));
    }
    // Per value of V, U ranges over a set of distinct strategies; with all
    // strategies available nothing is lost, otherwise every subset shared
    // across V is tried.
    let m = u_size.min(all.len());
    let class_list = classes(all.len(), m, false);
    let layout = Layout {
        ns: n_s,
        nv: v_size,
        nu: m,
        nx: 1,
        ny: n_y,
    };
    let width = v_size * m;
    let gp = gp_capacity(
        channel,
        state,
        &GpOptions {
            u_size: Some(m),
            seed: opts.seed,
            ..GpOptions::default()
        },
    )?;
    let per_state: Vec<Pmf<T>> = (0..n_s).map(|s| blahut_arimoto(&channel.state_slice(s)).input).collect();
    let ascent = AscentOptions {
        max_iter: opts.max_iter,
        ..AscentOptions::default()
    };
    let masks: Vec<u8> = rate_terms::<T>()
        .iter()
        .chain(constraint_terms::<T>().iter())
        .map(|t| t.0)
        .collect();

    struct Job<T: Real> {
        grid: usize,
        class: usize,
        start: Vec<T>,
        optimize: bool,
    }
    let mut jobs = Vec::new();
    for (c, class) in class_list.iter().enumerate() {
        let mut starts: Vec<(Vec<T>, bool)> = Vec::new();
        // V constant, U as in the Gel'fand-Pinsker optimum.
        if let XMap::Deterministic(g) = gp.policy.x_map() {
            let mut q = vec![T::zero(); n_s * width];
            let mut ok = true;
            for (u, strat) in g.iter().enumerate() {
                match class.iter().position(|&k| all[k] == *strat) {
                    Some(j) => {
                        for s in 0..n_s {
                            q[s * width + j] = q[s * width + j] + gp.policy.u_given_s().prob(s, u);
                        }
                    }
                    None => ok &= (0..n_s).all(|s| gp.policy.u_given_s().prob(s, u) == T::zero()),
                }
            }
            if ok {
                starts.push((q, false));
            }
        }
        // V = S, U the constant strategy drawn from the per-state optimal input.
        if v_size >= n_s {
            let mut q = vec![T::zero(); n_s * width];
            let mut ok = true;
            for s in 0..n_s {
                for x in 0..n_x {
                    let p = per_state[s].get(x);
                    match class.iter().position(|&k| all[k].iter().all(|&xs| xs == x)) {
                        Some(j) => q[s * width + s * m + j] = q[s * width + s * m + j] + p,
                        None => ok &= p == T::zero(),
                    }
                }
            }
            if ok {
                starts.push((q, false));
            }
        }
        // Optimized copies of the structured starts, nudged off the faces of
        // the simplex so that every coordinate can move.
        let nudged: Vec<(Vec<T>, bool)> = starts
            .iter()
            .map(|(q, _)| {
                let eps = T::lit(1e-4);
                let uni = T::one() / T::from_usize(width).unwrap();
                (q.iter().map(|&v| (T::one() - eps) * v + eps * uni).collect(), true)
            })
            .collect();
        starts.extend(nudged);
        for r in 0..opts.restarts {
            let mut rng = stream_rng(opts.seed, domain::REGION, c as u64, r as u64);
            starts.push((random_rows(n_s, width, &mut rng), true));
        }
        for grid in 0..rd_grid.len() {
            for (start, optimize) in &starts {
                jobs.push(Job {
                    grid,
                    class: c,
                    start: start.clone(),
                    optimize: *optimize,
                });
            }
        }
    }

    let kernel_for = |class: &[usize]| -> Vec<T> {
        let mut k = Vec::with_capacity(n_s * width * n_y);
        for s in 0..n_s {
            for _v in 0..v_size {
                for &j in class {
                    k.extend_from_slice(channel.row(s, all[j][s]));
                }
            }
        }
        k
    };
    let outcomes: Vec<Option<(usize, T, RegionPolicy<T>)>> = jobs
        .into_par_iter()
        .map(|job| {
            let class = &class_list[job.class];
            let rd = rd_grid[job.grid];
            let system = EntropySystem::new(layout, state.probs().to_vec(), kernel_for(class), &masks);
            let mut q = job.start;
            if job.optimize {
                for &lambda in &opts.penalties {
                    let obj = Penalized {
                        system: system.clone(),
                        lambda: T::lit(lambda),
                        target: rd - T::lit(TARGET_MARGIN),
                    };
                    q = ascend(&obj, q, ascent).q;
                }
            }
            let policy = policy_from_q(&q, class, &all, n_s, v_size, m, n_x);
            let rates = region_rates(&policy, channel, state).ok()?;
            (rates.rate_d <= rd + T::lit(MEMBERSHIP_SLACK)).then_some((job.grid, rates.rate, policy))
        })
        .collect();

    let mut best: Vec<Option<(T, RegionPolicy<T>)>> = vec![None; rd_grid.len()];
    for (grid, rate, policy) in outcomes.into_iter().flatten() {
        let better = match &best[grid] {
            None => true,
            Some((b, bp)) => {
                rate > *b + T::lit(1e-12)
                    || ((rate - *b).abs() <= T::lit(1e-12) && policy_key(&policy) < policy_key(bp))
            }
        };
        if better {
            best[grid] = Some((rate, policy));
        }
    }
    // Grid points in increasing R_d order; a policy feasible at a smaller
    // R_d stays feasible at a larger one.
    let mut order: Vec<usize> = (0..rd_grid.len()).collect();
    order.sort_by(|&a, &b| rd_grid[a].as_f64().total_cmp(&rd_grid[b].as_f64()));
    let mut carried: Option<(T, RegionPolicy<T>)> = None;
    let mut points: Vec<Option<RegionPoint<T>>> = vec![None; rd_grid.len()];
    for &i in &order {
        let own = best[i].take().unwrap_or_else(|| (T::zero(), RegionPolicy::trivial(n_s, 0, n_x)));
        let pick = match carried.take() {
            Some(prev) if prev.0 > own.0 => prev,
            _ => own,
        };
        points[i] = Some(RegionPoint {
            rate: pick.0.max(T::zero()),
            rate_d: rd_grid[i],
            policy: pick.1.clone(),
        });
        carried = Some(pick);
    }
    let points: Vec<RegionPoint<T>> = points.into_iter().map(|p| p.expect("every grid point")).collect();
    let sorted_rates: Vec<T> = order.iter().map(|&i| points[i].rate).collect();
    let knee = sorted_rates.last().and_then(|&top| {
        sorted_rates
            .iter()
            .position(|&r| (top - r).as_f64() < SATURATION_TOL)
            .map(|k| order[k])
    });
    Ok(Frontier {
        points,
        knee,
        v_size,
        u_size: m,
        v_bound,
        u_bound,
    })
}

fn policy_key<T: Real>(p: &RegionPolicy<T>) -> Vec<f64> {
    p.v_given_s
        .rows()
        .iter()
        .chain(p.u_given_vs.rows())
        .flat_map(|r| r.probs().iter().map(|v| v.as_f64()))
        .collect()
}

fn policy_from_q<T: Real>(
    q: &[T],
    class: &[usize],
    all: &[Vec<usize>],
    n_s: usize,
    n_v: usize,
    m: usize,
    n_x: usize,
) -> RegionPolicy<T> {
    let width = n_v * m;
    let mut v_rows = Vec::with_capacity(n_s);
    let mut u_rows = vec![Pmf::point(m, 0); n_v * n_s];
    for s in 0..n_s {
        let row = &q[s * width..(s + 1) * width];
        let pv: Vec<T> = (0..n_v).map(|v| row[v * m..(v + 1) * m].iter().copied().sum()).collect();
        let total: T = pv.iter().copied().sum();
        v_rows.push(Pmf::from_vec_unchecked(pv.iter().map(|&p| p / total).collect()));
        for v in 0..n_v {
            if pv[v] > T::zero() {
                let r: Vec<T> = row[v * m..(v + 1) * m].iter().map(|&p| p / pv[v]).collect();
                u_rows[v * n_s + s] = Pmf::from_vec_unchecked(r);
            }
        }
    }
    let g = class.iter().map(|&j| vec![all[j].clone(); n_v]).collect();
    RegionPolicy::new(
        ConditionalPmf::from_rows(v_rows).expect("rows"),
        ConditionalPmf::from_rows(u_rows).expect("rows"),
        g,
        n_x,
    )
    .expect("valid region policy")
}
