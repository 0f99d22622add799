//! Mirror (entropic) gradient ascent over products of probability simplices, and the
//! entropy-combination objectives every capacity-style optimizer reduces to.
//!
//! The decision variable is a conditional law `q(a | s)` stored row-major with
//! one simplex row per state symbol. The induced joint is
//! `p(s, a, y) = P_S(s) q(a | s) K(y | a, s)` where the action `a` is a
//! flattened triple `(v, u, x)`.

use crate::scalar::{ln_floor, xlnx, Real};

/// Bit flags naming the coordinates an entropy term keeps.
pub(crate) mod axis {
    pub const S: u8 = 1;
    pub const V: u8 = 2;
    pub const U: u8 = 4;
    pub const Y: u8 = 16;
}

/// Alphabet sizes of the coordinates `(s, v, u, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Layout {
    pub ns: usize,
    pub nv: usize,
    pub nu: usize,
    pub nx: usize,
    pub ny: usize,
}

impl Layout {
    pub fn actions(&self) -> usize {
        self.nv * self.nu * self.nx
    }

    fn cells(&self) -> usize {
        self.ns * self.actions() * self.ny
    }

    fn sizes(&self) -> [usize; 5] {
        [self.ns, self.nv, self.nu, self.nx, self.ny]
    }
}

/// A memoryless system with a free action law and fixed everything else.
#[derive(Debug, Clone)]
pub(crate) struct EntropySystem<T: Real> {
    layout: Layout,
    ps: Vec<T>,
    /// `K(y | a, s)` stored as `[s][a][y]`.
    kernel: Vec<T>,
    /// For each entropy mask in use: cell -> marginal index, and marginal size.
    maps: Vec<(u8, Vec<u32>, usize)>,
}

impl<T: Real> EntropySystem<T> {
    pub fn new(layout: Layout, ps: Vec<T>, kernel: Vec<T>, masks: &[u8]) -> Self {
        assert_eq!(ps.len(), layout.ns);
        assert_eq!(kernel.len(), layout.cells());
        let sizes = layout.sizes();
        let mut maps = Vec::new();
        for &mask in masks {
            if maps.iter().any(|(m, _, _)| *m == mask) {
                continue;
            }
            let size: usize = (0..5).filter(|k| mask & (1 << k) != 0).map(|k| sizes[k]).product();
            let mut map = Vec::with_capacity(layout.cells());
            let mut idx = [0usize; 5];
            for _ in 0..layout.cells() {
                let o = (0..5)
                    .filter(|k| mask & (1 << k) != 0)
                    .fold(0, |acc, k| acc * sizes[k] + idx[k]);
                map.push(o as u32);
                for k in (0..5).rev() {
                    idx[k] += 1;
                    if idx[k] < sizes[k] {
                        break;
                    }
                    idx[k] = 0;
                }
            }
            maps.push((mask, map, size));
        }
        EntropySystem { layout, ps, kernel, maps }
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn state(&self) -> &[T] {
        &self.ps
    }

    fn joint(&self, q: &[T]) -> Vec<T> {
        let ny = self.layout.ny;
        let mut p = Vec::with_capacity(self.layout.cells());
        for (sa, &qa) in q.iter().enumerate() {
            let w = self.ps[sa / self.layout.actions()] * qa;
            p.extend(self.kernel[sa * ny..(sa + 1) * ny].iter().map(|&k| w * k));
        }
        p
    }

    fn marginal(&self, which: usize, p: &[T]) -> Vec<T> {
        let (_, map, size) = &self.maps[which];
        let mut m = vec![T::zero(); *size];
        for (&v, &o) in p.iter().zip(map) {
            m[o as usize] = m[o as usize] + v;
        }
        m
    }

    fn slot(&self, mask: u8) -> usize {
        self.maps
            .iter()
            .position(|(m, _, _)| *m == mask)
            .expect("entropy mask registered at construction")
    }

    /// `sum_B c_B H(B)` for the joint induced by `q`.
    pub fn value(&self, q: &[T], terms: &[(u8, T)]) -> T {
        let p = self.joint(q);
        terms
            .iter()
            .map(|&(mask, c)| {
                let m = self.marginal(self.slot(mask), &p);
                -c * m.iter().map(|&v| xlnx(v)).sum::<T>()
            })
            .sum()
    }

    /// Value and gradient with respect to `q`.
    pub fn value_grad(&self, q: &[T], terms: &[(u8, T)]) -> (T, Vec<T>) {
        let p = self.joint(q);
        let ny = self.layout.ny;
        let mut value = T::zero();
        // Per-cell derivative of the combination with respect to p(cell).
        let mut dp = vec![T::zero(); p.len()];
        for &(mask, c) in terms {
            let slot = self.slot(mask);
            let m = self.marginal(slot, &p);
            value = value - c * m.iter().map(|&v| xlnx(v)).sum::<T>();
            let logs: Vec<T> = m.iter().map(|&v| ln_floor(v) + T::one()).collect();
            for (d, &o) in dp.iter_mut().zip(&self.maps[slot].1) {
                *d = *d - c * logs[o as usize];
            }
        }
        let grad = (0..q.len())
            .map(|sa| {
                let ps = self.ps[sa / self.layout.actions()];
                let k = &self.kernel[sa * ny..(sa + 1) * ny];
                ps * k.iter().zip(&dp[sa * ny..(sa + 1) * ny]).map(|(&k, &d)| k * d).sum::<T>()
            })
            .collect();
        (value, grad)
    }
}

/// Fixed entropy combination over one system.
pub(crate) struct Combination<T: Real> {
    pub system: EntropySystem<T>,
    pub terms: Vec<(u8, T)>,
}

impl<T: Real> Objective<T> for Combination<T> {
    fn rows(&self) -> usize {
        self.system.layout().ns
    }
    fn width(&self) -> usize {
        self.system.layout().actions()
    }
    fn value(&self, q: &[T]) -> T {
        self.system.value(q, &self.terms)
    }
    fn value_grad(&self, q: &[T]) -> (T, Vec<T>) {
        self.system.value_grad(q, &self.terms)
    }
    fn row_scale(&self, row: usize) -> T {
        self.system.state()[row]
    }
}

/// A smooth (or subdifferentiable) objective over a product of simplices.
pub(crate) trait Objective<T: Real>: Sync {
    fn rows(&self) -> usize;
    fn width(&self) -> usize;
    fn value(&self, q: &[T]) -> T;
    fn value_grad(&self, q: &[T]) -> (T, Vec<T>);
    /// Diagonal preconditioner: gradient rows are divided by this weight.
    fn row_scale(&self, row: usize) -> T;
    /// Value reported for the iterate this stage ends at; smoothed
    /// objectives report the quantity they approximate.
    fn exact_value(&self, q: &[T]) -> T {
        self.value(q)
    }
    /// Stage-specific stopping rule derived from the caller's settings.
    fn tuning(&self, base: AscentOptions) -> AscentOptions {
        base
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AscentOptions {
    pub max_iter: usize,
    /// Relative improvement below which an accepted step counts as stalled.
    pub stall_tol: f64,
    /// Stationarity gap at which the ascent stops.
    pub gap_tol: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            max_iter: 5000,
            stall_tol: 1e-15,
            gap_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Ascent<T: Real> {
    pub q: Vec<T>,
    pub iterations: usize,
}

/// Frank-Wolfe gap `sum_r (max_i g_ri - <q_r, g_r>)`; zero exactly at
/// first-order stationary points of the simplex-constrained problem.
fn stationarity_gap<T: Real>(q: &[T], g: &[T], width: usize) -> T {
    q.chunks(width)
        .zip(g.chunks(width))
        .map(|(qr, gr)| {
            let top = gr.iter().copied().fold(T::neg_infinity(), T::max);
            let avg: T = qr.iter().zip(gr).map(|(&a, &b)| a * b).sum();
            top - avg
        })
        .sum()
}

/// Armijo-backtracked gradient ascent with step halving and doubling.
///
/// Steps are taken in the entropic geometry of the simplex: a row moves to
/// `q_i exp(t g_i) / Z`, the Bregman (KL) projection of the gradient step.
/// Near faces of the simplex this is far better conditioned than the
/// Euclidean step for entropy-type objectives.
pub(crate) fn ascend<T: Real, O: Objective<T> + ?Sized>(obj: &O, q0: Vec<T>, opts: AscentOptions) -> Ascent<T> {
    let (rows, width) = (obj.rows(), obj.width());
    debug_assert_eq!(q0.len(), rows * width);
    let scales: Vec<T> = (0..rows)
        .map(|r| obj.row_scale(r).max(T::lit(1e-3)))
        .collect();
    let mut q = q0;
    let (mut f, mut g) = obj.value_grad(&q);
    let mut step = T::one();
    let min_step = T::lit(1e-14);
    let max_step = T::lit(1e8);
    let stall_tol = T::lit(opts.stall_tol).max(T::epsilon());
    let gap_tol = T::lit(opts.gap_tol).max(T::epsilon());
    let mut stalls = 0;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if stationarity_gap(&q, &g, width) <= gap_tol {
            break;
        }
        iterations += 1;
        let mut accepted = None;
        while step >= min_step {
            let mut cand = q.clone();
            for r in 0..rows {
                let row = &mut cand[r * width..(r + 1) * width];
                let gr = &g[r * width..(r + 1) * width];
                let top = gr.iter().copied().fold(T::neg_infinity(), T::max);
                let t = step / scales[r];
                let mut total = T::zero();
                for (c, &gi) in row.iter_mut().zip(gr) {
                    *c = *c * (t * (gi - top)).exp();
                    total = total + *c;
                }
                for c in row.iter_mut() {
                    *c = *c / total;
                }
            }
            let ascent: T = cand.iter().zip(&q).zip(&g).map(|((&c, &x), &gi)| (c - x) * gi).sum();
            if ascent <= T::zero() {
                break;
            }
            let fc = obj.value(&cand);
            if fc >= f + T::lit(1e-4) * ascent {
                accepted = Some((cand, fc));
                break;
            }
            step = step / T::lit(2.0);
        }
        let Some((cand, fc)) = accepted else {
            break;
        };
        let gain = fc - f;
        q = cand;
        let vg = obj.value_grad(&q);
        f = vg.0;
        g = vg.1;
        step = (step * T::lit(2.0)).min(max_step);
        if gain <= stall_tol * (T::one() + f.abs()) {
            stalls += 1;
            if stalls >= 20 {
                break;
            }
        } else {
            stalls = 0;
        }
    }
    Ascent { q, iterations }
}

/// Row-wise Dirichlet(1) draw, i.e. a uniformly random point of each simplex.
pub(crate) fn random_rows<T: Real, R: rand::Rng>(rows: usize, width: usize, rng: &mut R) -> Vec<T> {
    let mut out = Vec::with_capacity(rows * width);
    for _ in 0..rows {
        let e: Vec<f64> = (0..width).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
        let total: f64 = e.iter().sum();
        out.extend(e.iter().map(|v| T::lit(v / total)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        target: Vec<f64>,
    }

    impl Objective<f64> for Quadratic {
        fn rows(&self) -> usize {
            1
        }
        fn width(&self) -> usize {
            self.target.len()
        }
        fn value(&self, q: &[f64]) -> f64 {
            -q.iter().zip(&self.target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        }
        fn value_grad(&self, q: &[f64]) -> (f64, Vec<f64>) {
            let g = q.iter().zip(&self.target).map(|(a, b)| -2.0 * (a - b)).collect();
            (self.value(q), g)
        }
        fn row_scale(&self, _: usize) -> f64 {
            1.0
        }
    }

    #[test]
    fn ascent_reaches_projected_target() {
        let obj = Quadratic {
            target: vec![0.7, 0.6, -0.3],
        };
        let a = ascend(&obj, vec![1.0 / 3.0; 3], AscentOptions::default());
        assert!((a.q[0] - 0.55).abs() < 1e-6 && (a.q[1] - 0.45).abs() < 1e-6);
    }

    #[test]
    fn entropy_gradient_matches_finite_differences() {
        let layout = Layout {
            ns: 2,
            nv: 1,
            nu: 3,
            nx: 1,
            ny: 2,
        };
        let kernel = vec![0.9, 0.1, 0.2, 0.8, 0.5, 0.5, 0.3, 0.7, 0.6, 0.4, 0.1, 0.9];
        let terms: [(u8, f64); 4] = [(axis::Y, 1.0), (axis::U | axis::Y, -1.0), (axis::U | axis::S, 1.0), (axis::S, -1.0)];
        let masks: Vec<u8> = terms.iter().map(|t| t.0).collect();
        let sys = EntropySystem::new(layout, vec![0.3, 0.7], kernel, &masks);
        let q = vec![0.2, 0.5, 0.3, 0.6, 0.1, 0.3];
        let (_, g) = sys.value_grad(&q, &terms);
        let h = 1e-7;
        for i in 0..q.len() {
            let mut a = q.clone();
            let mut b = q.clone();
            a[i] += h;
            b[i] -= h;
            let fd = (sys.value(&a, &terms) - sys.value(&b, &terms)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "coordinate {i}: {fd} vs {}", g[i]);
        }
    }
}
