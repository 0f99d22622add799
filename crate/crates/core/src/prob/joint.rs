use serde::Serialize;

use super::{ChannelKernel, ConditionalPmf, GpPolicy, Pmf};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Axes of a [`JointSystem`], in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Axis {
    S,
    U,
    X,
    Y,
}

impl Axis {
    fn index(self) -> usize {
        self as usize
    }
}

/// Dense row-major probability table over a product of finite alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct Table<T: Real = f64> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Table<T> {
    /// Validates non-negativity and unit total mass.
    pub fn new(dims: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let size: usize = dims.iter().product();
        if dims.contains(&0) || size != data.len() {
            return Err(Error::Dimension(format!(
                "table shape {dims:?} does not match {} entries",
                data.len()
            )));
        }
        Pmf::with_key(data, "table").map(|p| Table {
            dims,
            data: p.probs().to_vec(),
        })
    }

    pub(crate) fn from_raw(dims: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Table { dims, data }
    }

    /// Two-axis table from nested rows `p[a][b]`.
    pub fn from_matrix(rows: &[Vec<T>]) -> Result<Self> {
        let na = rows.len();
        let nb = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != nb) {
            return Err(Error::Dimension("ragged joint matrix".into()));
        }
        Self::new(vec![na, nb], rows.concat())
    }

    /// Three-axis table from nested arrays `p[a][b][c]`.
    pub fn from_cube(cube: &[Vec<Vec<T>>]) -> Result<Self> {
        let na = cube.len();
        let nb = cube.first().map_or(0, Vec::len);
        let nc = cube.first().and_then(|m| m.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity(na * nb * nc);
        for m in cube {
            if m.len() != nb || m.iter().any(|r| r.len() != nc) {
                return Err(Error::Dimension("ragged joint cube".into()));
            }
            for r in m {
                data.extend_from_slice(r);
            }
        }
        Self::new(vec![na, nb, nc], data)
    }

    /// Joint of `(a, b)` where `a ~ input` and `b | a ~ kernel`.
    pub fn product(input: &Pmf<T>, kernel: &ConditionalPmf<T>) -> Result<Self> {
        if input.len() != kernel.n_cond() {
            return Err(Error::Dimension(format!(
                "input has {} symbols, kernel expects {}",
                input.len(),
                kernel.n_cond()
            )));
        }
        let data = input
            .probs()
            .iter()
            .zip(kernel.rows())
            .flat_map(|(&pa, row)| row.probs().iter().map(move |&w| pa * w))
            .collect();
        Ok(Table::from_raw(vec![input.len(), kernel.n_out()], data))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    fn offset(&self, idx: &[usize]) -> usize {
        assert_eq!(idx.len(), self.dims.len(), "index rank mismatch");
        idx.iter().zip(&self.dims).fold(0, |acc, (&i, &d)| {
            assert!(i < d, "index out of range");
            acc * d + i
        })
    }

    pub fn get(&self, idx: &[usize]) -> T {
        self.data[self.offset(idx)]
    }

    pub fn total(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// Sums out every axis not listed; kept axes appear in the listed order.
    pub fn marginal(&self, keep: &[usize]) -> Table<T> {
        let rank = self.dims.len();
        assert!(keep.iter().all(|&a| a < rank), "axis out of range");
        let out_dims: Vec<usize> = keep.iter().map(|&a| self.dims[a]).collect();
        let mut out = vec![T::zero(); out_dims.iter().product::<usize>().max(1)];
        let mut idx = vec![0usize; rank];
        for &v in &self.data {
            let o = keep.iter().fold(0, |acc, &a| acc * self.dims[a] + idx[a]);
            out[o] = out[o] + v;
            for k in (0..rank).rev() {
                idx[k] += 1;
                if idx[k] < self.dims[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        Table::from_raw(out_dims, out)
    }

    /// Flattened marginal over `keep` as a distribution.
    pub fn to_pmf(&self) -> Pmf<T> {
        Pmf::from_vec_unchecked(self.data.clone())
    }

    /// `P(target | given)`, one row per flattened `given` value.
    pub fn conditional(&self, target: &[usize], given: &[usize]) -> ConditionalTable<T> {
        let keep: Vec<usize> = given.iter().chain(target).copied().collect();
        let m = self.marginal(&keep);
        let n_given: usize = given.iter().map(|&a| self.dims[a]).product();
        let n_target: usize = target.iter().map(|&a| self.dims[a]).product();
        let rows = m
            .data
            .chunks(n_target)
            .map(|chunk| {
                let mass: T = chunk.iter().copied().sum();
                if mass > T::zero() {
                    CondRow::Defined(Pmf::from_vec_unchecked(
                        chunk.iter().map(|&v| v / mass).collect(),
                    ))
                } else {
                    CondRow::Undefined
                }
            })
            .collect::<Vec<_>>();
        debug_assert_eq!(rows.len(), n_given);
        ConditionalTable { n_target, rows }
    }
}

/// One row of a conditional law computed from a joint.
#[derive(Debug, Clone, PartialEq)]
pub enum CondRow<T: Real = f64> {
    Defined(Pmf<T>),
    /// The conditioning value has zero probability.
    Undefined,
}

impl<T: Real> CondRow<T> {
    pub fn pmf(&self) -> Option<&Pmf<T>> {
        match self {
            CondRow::Defined(p) => Some(p),
            CondRow::Undefined => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable<T: Real = f64> {
    n_target: usize,
    rows: Vec<CondRow<T>>,
}

impl<T: Real> ConditionalTable<T> {
    pub fn rows(&self) -> &[CondRow<T>] {
        &self.rows
    }

    pub fn row(&self, given: usize) -> &CondRow<T> {
        &self.rows[given]
    }

    pub fn n_target(&self) -> usize {
        self.n_target
    }

    pub fn undefined_rows(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| matches!(r, CondRow::Undefined))
            .map(|(i, _)| i)
            .collect()
    }

    /// Fails if any conditioning value has zero probability.
    pub fn to_conditional_pmf(&self) -> Result<ConditionalPmf<T>> {
        if let Some(i) = self.undefined_rows().first() {
            return Err(Error::Precondition(format!(
                "conditional row {i} is undefined (zero-probability condition)"
            )));
        }
        ConditionalPmf::from_rows(self.rows.iter().filter_map(|r| r.pmf().cloned()).collect())
    }
}

/// Joint law `p[s][u][x][y] = P_S(s) P_{U|S}(u|s) P_{X|U,S}(x|u,s) W(y|x,s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSystem<T: Real = f64> {
    table: Table<T>,
}

/// Composes state law, policy and channel into the joint of `(S, U, X, Y)`.
pub fn compose_joint<T: Real>(
    state: &Pmf<T>,
    policy: &GpPolicy<T>,
    channel: &ChannelKernel<T>,
) -> Result<JointSystem<T>> {
    JointSystem::compose(state, policy, channel)
}

impl<T: Real> JointSystem<T> {
    pub fn compose(state: &Pmf<T>, policy: &GpPolicy<T>, channel: &ChannelKernel<T>) -> Result<Self> {
        let n_s = state.len();
        if policy.n_s() != n_s || channel.n_s() != n_s {
            return Err(Error::Dimension(format!(
                "state alphabet sizes disagree: pmf {n_s}, policy {}, channel {}",
                policy.n_s(),
                channel.n_s()
            )));
        }
        if policy.n_x() != channel.n_x() {
            return Err(Error::Dimension(format!(
                "input alphabet sizes disagree: policy {}, channel {}",
                policy.n_x(),
                channel.n_x()
            )));
        }
        let (n_u, n_x, n_y) = (policy.n_u(), channel.n_x(), channel.n_y());
        let mut data = Vec::with_capacity(n_s * n_u * n_x * n_y);
        for s in 0..n_s {
            let ps = state.get(s);
            for u in 0..n_u {
                let psu = ps * policy.u_given_s().prob(s, u);
                for x in 0..n_x {
                    let psux = psu * policy.x_given_us(u, s, x);
                    data.extend(channel.row(s, x).iter().map(|&w| psux * w));
                }
            }
        }
        Ok(JointSystem {
            table: Table::from_raw(vec![n_s, n_u, n_x, n_y], data),
        })
    }

    pub fn table(&self) -> &Table<T> {
        &self.table
    }

    pub fn dims(&self) -> [usize; 4] {
        let d = self.table.dims();
        [d[0], d[1], d[2], d[3]]
    }

    pub fn prob(&self, s: usize, u: usize, x: usize, y: usize) -> T {
        self.table.get(&[s, u, x, y])
    }

    /// Marginal over the listed axes, in the listed order.
    pub fn marginal(&self, axes: &[Axis]) -> Table<T> {
        let keep: Vec<usize> = axes.iter().map(|a| a.index()).collect();
        self.table.marginal(&keep)
    }

    /// Marginal over the listed axes flattened to a single distribution.
    pub fn marginal_pmf(&self, axes: &[Axis]) -> Pmf<T> {
        self.marginal(axes).to_pmf()
    }

    /// `P(target | given)` with zero-mass conditions flagged.
    pub fn conditional(&self, target: &[Axis], given: &[Axis]) -> ConditionalTable<T> {
        let t: Vec<usize> = target.iter().map(|a| a.index()).collect();
        let g: Vec<usize> = given.iter().map(|a| a.index()).collect();
        self.table.conditional(&t, &g)
    }
}
