use crate::error::{Error, Result};
use crate::prob::Table;
use crate::scalar::Real;

/// Per-letter information density `ln[p(a|b) / p(a)]` of a two-axis joint.
///
/// Entries are `None` when either marginal vanishes (such pairs are never
/// drawn); pairs with positive marginals but zero joint mass hold `-inf`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityTable<T: Real = f64> {
    na: usize,
    nb: usize,
    values: Vec<Option<T>>,
}

impl<T: Real> DensityTable<T> {
    pub fn new(joint: &Table<T>) -> Result<Self> {
        if joint.rank() != 2 {
            return Err(Error::Dimension(format!(
                "density table needs a 2-axis joint, got rank {}",
                joint.rank()
            )));
        }
        let (na, nb) = (joint.dims()[0], joint.dims()[1]);
        let p = joint.data();
        let pa: Vec<T> = (0..na).map(|a| (0..nb).map(|b| p[a * nb + b]).sum()).collect();
        let pb: Vec<T> = (0..nb).map(|b| (0..na).map(|a| p[a * nb + b]).sum()).collect();
        let values = (0..na)
            .flat_map(|a| (0..nb).map(move |b| (a, b)))
            .map(|(a, b)| {
                if pa[a] <= T::zero() || pb[b] <= T::zero() {
                    return None;
                }
                let v = p[a * nb + b];
                Some(if v > T::zero() {
                    (v / (pa[a] * pb[b])).ln()
                } else {
                    T::neg_infinity()
                })
            })
            .collect();
        Ok(DensityTable { na, nb, values })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.na, self.nb)
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> Option<T> {
        self.values[a * self.nb + b]
    }

    /// Row-major entries, flattened as `a * nb + b`.
    pub fn values(&self) -> &[Option<T>] {
        &self.values
    }

    /// `E[density]` under `joint`; equals the mutual information when
    /// `joint` is the table this was built from.
    pub fn expectation(&self, joint: &Table<T>) -> T {
        joint
            .data()
            .iter()
            .zip(&self.values)
            .filter(|(p, _)| **p > T::zero())
            .map(|(&p, v)| p * v.expect("positive-mass pair has a defined density"))
            .sum()
    }

    /// Per-letter variance of the density under `joint`.
    pub fn variance(&self, joint: &Table<T>) -> T {
        let mean = self.expectation(joint);
        joint
            .data()
            .iter()
            .zip(&self.values)
            .filter(|(p, _)| **p > T::zero())
            .map(|(&p, v)| {
                let d = v.unwrap() - mean;
                p * d * d
            })
            .sum()
    }
}
