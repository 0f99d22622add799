//! Finite-alphabet probability objects: distributions, stochastic matrices,
//! state-dependent channels and Gel'fand-Pinsker policies.

mod joint;
mod sample;

pub use joint::{compose_joint, Axis, CondRow, ConditionalTable, JointSystem, Table};
pub use sample::{sample_channel, sample_conditional, sample_iid, Categorical, SystemSampler};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

fn check_entries<T: Real>(probs: &[T], key: &str) -> Result<T> {
    if probs.is_empty() {
        return Err(Error::pmf(key, "empty alphabet"));
    }
    let mut total = T::zero();
    for (i, &p) in probs.iter().enumerate() {
        if !p.is_finite() {
            return Err(Error::pmf(key, format!("entry {i} is not finite")));
        }
        if p < T::zero() {
            return Err(Error::pmf(key, format!("entry {i} is negative ({p})")));
        }
        total = total + p;
    }
    Ok(total)
}

/// Probability vector over `0..len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + serde::de::DeserializeOwned"))]
pub struct Pmf<T: Real = f64> {
    probs: Vec<T>,
}

impl<T: Real> Pmf<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        Self::with_key(probs, "pmf")
    }

    /// Validates with `key` named in any error.
    pub fn with_key(probs: Vec<T>, key: &str) -> Result<Self> {
        let total = check_entries(&probs, key)?;
        if (total - T::one()).abs() > T::norm_tol() {
            return Err(Error::pmf(key, format!("entries sum to {total}, not 1")));
        }
        Ok(Pmf { probs })
    }

    /// Accepts rows whose mass is off by at most `accept_tol` and rescales them.
    pub fn renormalized(probs: Vec<T>, key: &str, accept_tol: T) -> Result<Self> {
        let total = check_entries(&probs, key)?;
        if (total - T::one()).abs() > accept_tol {
            return Err(Error::pmf(
                key,
                format!("entries sum to {total}, off by more than {accept_tol}"),
            ));
        }
        Ok(Pmf {
            probs: probs.into_iter().map(|p| p / total).collect(),
        })
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0, "uniform pmf over an empty alphabet");
        let p = T::one() / T::from_usize(size).unwrap();
        Pmf {
            probs: vec![p; size],
        }
    }

    /// Unit mass on `symbol`.
    pub fn point(size: usize, symbol: usize) -> Self {
        assert!(symbol < size, "point mass outside alphabet");
        let mut probs = vec![T::zero(); size];
        probs[symbol] = T::one();
        Pmf { probs }
    }

    pub fn bernoulli(p: T) -> Result<Self> {
        Self::with_key(vec![T::one() - p, p], "bernoulli")
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, symbol: usize) -> T {
        self.probs[symbol]
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > T::zero())
            .map(|(i, _)| i)
    }

    pub fn cast<U: Real>(&self) -> Pmf<U> {
        Pmf {
            probs: self.probs.iter().map(|p| U::lit(p.as_f64())).collect(),
        }
    }

    pub(crate) fn from_vec_unchecked(probs: Vec<T>) -> Self {
        Pmf { probs }
    }
}

/// Stochastic matrix: one [`Pmf`] per conditioning symbol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + serde::de::DeserializeOwned"))]
pub struct ConditionalPmf<T: Real = f64> {
    rows: Vec<Pmf<T>>,
}

impl<T: Real> ConditionalPmf<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::with_key(rows, "conditional")
    }

    pub fn with_key(rows: Vec<Vec<T>>, key: &str) -> Result<Self> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, r)| Pmf::with_key(r, &format!("{key}[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(rows)
    }

    pub fn from_rows(rows: Vec<Pmf<T>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::Dimension("conditional pmf without rows".into()));
        };
        let width = first.len();
        if let Some(i) = rows.iter().position(|r| r.len() != width) {
            return Err(Error::Dimension(format!(
                "row {i} has {} entries, expected {width}",
                rows[i].len()
            )));
        }
        Ok(ConditionalPmf { rows })
    }

    pub fn n_cond(&self) -> usize {
        self.rows.len()
    }

    pub fn n_out(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, cond: usize) -> &Pmf<T> {
        &self.rows[cond]
    }

    pub fn rows(&self) -> &[Pmf<T>] {
        &self.rows
    }

    pub fn prob(&self, cond: usize, out: usize) -> T {
        self.rows[cond].get(out)
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: T) -> Result<Self> {
        Self::with_key(vec![vec![T::one() - p, p], vec![p, T::one() - p]], "bsc")
    }

    /// Binary erasure channel, outputs `{0, 1, erasure}`.
    pub fn bec(e: T) -> Result<Self> {
        let keep = T::one() - e;
        Self::with_key(
            vec![vec![keep, T::zero(), e], vec![T::zero(), keep, e]],
            "bec",
        )
    }
}

/// State-dependent channel `W(y | x, s)`, stored densely as `[s][x][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + serde::de::DeserializeOwned"))]
pub struct ChannelKernel<T: Real = f64> {
    n_s: usize,
    n_x: usize,
    n_y: usize,
    w: Vec<T>,
}

impl<T: Real> ChannelKernel<T> {
    pub fn new(w: Vec<Vec<Vec<T>>>) -> Result<Self> {
        Self::with_key(w, "channel")
    }

    pub fn with_key(w: Vec<Vec<Vec<T>>>, key: &str) -> Result<Self> {
        let n_s = w.len();
        if n_s == 0 {
            return Err(Error::Dimension(format!("{key}: empty state alphabet")));
        }
        let n_x = w[0].len();
        if n_x == 0 {
            return Err(Error::Dimension(format!("{key}: empty input alphabet")));
        }
        let n_y = w[0][0].len();
        let mut flat = Vec::with_capacity(n_s * n_x * n_y);
        for (s, by_x) in w.into_iter().enumerate() {
            if by_x.len() != n_x {
                return Err(Error::Dimension(format!(
                    "{key}[{s}] has {} inputs, expected {n_x}",
                    by_x.len()
                )));
            }
            for (x, row) in by_x.into_iter().enumerate() {
                let k = format!("{key}[{s}][{x}]");
                if row.len() != n_y {
                    return Err(Error::Dimension(format!(
                        "{k} has {} outputs, expected {n_y}",
                        row.len()
                    )));
                }
                flat.extend(Pmf::with_key(row, &k)?.probs);
            }
        }
        Ok(ChannelKernel { n_s, n_x, n_y, w: flat })
    }

    /// Channel that ignores the state, repeated over `n_s` states.
    pub fn state_blind(channel: &ConditionalPmf<T>, n_s: usize) -> Self {
        assert!(n_s > 0);
        let mut w = Vec::with_capacity(n_s * channel.n_cond() * channel.n_out());
        for _ in 0..n_s {
            for row in channel.rows() {
                w.extend_from_slice(row.probs());
            }
        }
        ChannelKernel {
            n_s,
            n_x: channel.n_cond(),
            n_y: channel.n_out(),
            w,
        }
    }

    /// One stateless channel per state symbol.
    pub fn from_state_slices(slices: &[ConditionalPmf<T>]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Dimension("no state slices".into()))?;
        let (n_x, n_y) = (first.n_cond(), first.n_out());
        let mut w = Vec::new();
        for (s, c) in slices.iter().enumerate() {
            if c.n_cond() != n_x || c.n_out() != n_y {
                return Err(Error::Dimension(format!("state slice {s} has a different shape")));
            }
            for row in c.rows() {
                w.extend_from_slice(row.probs());
            }
        }
        Ok(ChannelKernel {
            n_s: slices.len(),
            n_x,
            n_y,
            w,
        })
    }

    /// Binary channel that is a BSC with crossover `crossovers[s]` in state `s`.
    pub fn binary_symmetric(crossovers: &[T]) -> Result<Self> {
        let slices = crossovers
            .iter()
            .map(|&q| ConditionalPmf::bsc(q))
            .collect::<Result<Vec<_>>>()?;
        Self::from_state_slices(&slices)
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    #[inline]
    pub fn prob(&self, s: usize, x: usize, y: usize) -> T {
        self.w[(s * self.n_x + x) * self.n_y + y]
    }

    #[inline]
    pub fn row(&self, s: usize, x: usize) -> &[T] {
        let start = (s * self.n_x + x) * self.n_y;
        &self.w[start..start + self.n_y]
    }

    /// `W(. | ., s)` as a stateless channel.
    pub fn state_slice(&self, s: usize) -> ConditionalPmf<T> {
        let rows = (0..self.n_x)
            .map(|x| Pmf::from_vec_unchecked(self.row(s, x).to_vec()))
            .collect();
        ConditionalPmf { rows }
    }

    /// `sum_s P_S(s) W(. | ., s)`: the channel seen by an encoder ignoring the state.
    pub fn averaged(&self, state: &Pmf<T>) -> Result<ConditionalPmf<T>> {
        if state.len() != self.n_s {
            return Err(Error::Dimension(format!(
                "state pmf has {} symbols, channel has {}",
                state.len(),
                self.n_s
            )));
        }
        let rows = (0..self.n_x)
            .map(|x| {
                let mut row = vec![T::zero(); self.n_y];
                for (s, &ps) in state.probs().iter().enumerate() {
                    for (acc, &w) in row.iter_mut().zip(self.row(s, x)) {
                        *acc = *acc + ps * w;
                    }
                }
                Pmf::from_vec_unchecked(row)
            })
            .collect();
        Ok(ConditionalPmf { rows })
    }

    /// True when `W(. | x, s)` does not depend on `s`.
    pub fn ignores_state(&self, tol: T) -> bool {
        (1..self.n_s).all(|s| {
            (0..self.n_x).all(|x| {
                self.row(s, x)
                    .iter()
                    .zip(self.row(0, x))
                    .all(|(a, b)| (*a - *b).abs() <= tol)
            })
        })
    }

    pub fn cast<U: Real>(&self) -> ChannelKernel<U> {
        ChannelKernel {
            n_s: self.n_s,
            n_x: self.n_x,
            n_y: self.n_y,
            w: self.w.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// How the channel input is produced from `(u, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + serde::de::DeserializeOwned"))]
pub enum XMap<T: Real = f64> {
    /// `g[u][s]` is the input symbol.
    Deterministic(Vec<Vec<usize>>),
    /// Row `u * |S| + s` is `P_{X|U,S}(. | u, s)`.
    Stochastic(ConditionalPmf<T>),
}

/// Auxiliary channel `P_{X,U|S}`, factored as `P_{U|S}` and an input map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + serde::de::DeserializeOwned"))]
pub struct GpPolicy<T: Real = f64> {
    u_given_s: ConditionalPmf<T>,
    x_map: XMap<T>,
    n_x: usize,
}

impl<T: Real> GpPolicy<T> {
    pub fn new(u_given_s: ConditionalPmf<T>, x_map: XMap<T>, n_x: usize) -> Result<Self> {
        let (n_s, n_u) = (u_given_s.n_cond(), u_given_s.n_out());
        match &x_map {
            XMap::Deterministic(g) => {
                if g.len() != n_u {
                    return Err(Error::Dimension(format!(
                        "g has {} rows, expected |U| = {n_u}",
                        g.len()
                    )));
                }
                for (u, row) in g.iter().enumerate() {
                    if row.len() != n_s {
                        return Err(Error::Dimension(format!(
                            "g[{u}] has {} entries, expected |S| = {n_s}",
                            row.len()
                        )));
                    }
                    if let Some(s) = row.iter().position(|&x| x >= n_x) {
                        return Err(Error::InvalidArgument(format!(
                            "g[{u}][{s}] = {} outside input alphabet of size {n_x}",
                            row[s]
                        )));
                    }
                }
            }
            XMap::Stochastic(c) => {
                if c.n_cond() != n_u * n_s || c.n_out() != n_x {
                    return Err(Error::Dimension(format!(
                        "P(x|u,s) is {}x{}, expected {}x{n_x}",
                        c.n_cond(),
                        c.n_out(),
                        n_u * n_s
                    )));
                }
            }
        }
        Ok(GpPolicy { u_given_s, x_map, n_x })
    }

    pub fn deterministic(u_given_s: ConditionalPmf<T>, g: Vec<Vec<usize>>, n_x: usize) -> Result<Self> {
        Self::new(u_given_s, XMap::Deterministic(g), n_x)
    }

    /// `U = X` drawn from `P_{X|S}`; the map copies `u` to the input.
    pub fn identity(x_given_s: ConditionalPmf<T>) -> Self {
        let n_x = x_given_s.n_out();
        let n_s = x_given_s.n_cond();
        let g = (0..n_x).map(|u| vec![u; n_s]).collect();
        GpPolicy {
            u_given_s: x_given_s,
            x_map: XMap::Deterministic(g),
            n_x,
        }
    }

    pub fn u_given_s(&self) -> &ConditionalPmf<T> {
        &self.u_given_s
    }

    pub fn x_map(&self) -> &XMap<T> {
        &self.x_map
    }

    pub fn n_s(&self) -> usize {
        self.u_given_s.n_cond()
    }

    pub fn n_u(&self) -> usize {
        self.u_given_s.n_out()
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    #[inline]
    pub fn x_given_us(&self, u: usize, s: usize, x: usize) -> T {
        match &self.x_map {
            XMap::Deterministic(g) => {
                if g[u][s] == x {
                    T::one()
                } else {
                    T::zero()
                }
            }
            XMap::Stochastic(c) => c.prob(u * self.n_s() + s, x),
        }
    }

    /// Policy table flattened for lexicographic tie-breaking.
    pub fn flattened(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self
            .u_given_s
            .rows()
            .iter()
            .flat_map(|r| r.probs().iter().map(|p| p.as_f64()))
            .collect();
        match &self.x_map {
            XMap::Deterministic(g) => out.extend(g.iter().flatten().map(|&x| x as f64)),
            XMap::Stochastic(c) => {
                out.extend(c.rows().iter().flat_map(|r| r.probs().iter().map(|p| p.as_f64())))
            }
        }
        out
    }

    pub fn cast<U: Real>(&self) -> GpPolicy<U> {
        let rows = self.u_given_s.rows().iter().map(|r| r.cast()).collect();
        GpPolicy {
            u_given_s: ConditionalPmf { rows },
            x_map: match &self.x_map {
                XMap::Deterministic(g) => XMap::Deterministic(g.clone()),
                XMap::Stochastic(c) => XMap::Stochastic(ConditionalPmf {
                    rows: c.rows().iter().map(|r| r.cast()).collect(),
                }),
            },
            n_x: self.n_x,
        }
    }
}

/// Lexicographic comparison of flattened policy tables.
pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.partial_cmp(y) {
            Some(std::cmp::Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    a.len().cmp(&b.len())
}
