//! Exact information functionals on finite joints, information densities and
//! Monte Carlo spectra of normalized block densities.

mod density;
mod spectrum;

pub use density::DensityTable;
pub use spectrum::{
    sample_memoryless_spectrum, spectral_rate_estimate, Histogram, Mode, SpectralEstimate, SpectralMode,
    SpectrumSamples, SpectrumSummary, DEFAULT_DELTA,
};

use crate::error::{Error, Result};
use crate::prob::Table;
use crate::scalar::{xlnx, Real};

/// Shannon entropy in nats.
pub fn entropy<T: Real>(probs: &[T]) -> T {
    -probs.iter().map(|&p| xlnx(p)).sum::<T>()
}

/// Binary entropy `h(p)` in nats.
pub fn binary_entropy<T: Real>(p: T) -> T {
    -(xlnx(p) + xlnx(T::one() - p))
}

/// `I(A; B)` for a two-axis joint `p[a][b]`.
pub fn mutual_information<T: Real>(joint: &Table<T>) -> Result<T> {
    if joint.rank() != 2 {
        return Err(Error::Dimension(format!(
            "mutual information needs a 2-axis joint, got rank {}",
            joint.rank()
        )));
    }
    let (na, nb) = (joint.dims()[0], joint.dims()[1]);
    Ok(mi_dense(joint.data(), na, nb))
}

/// `I(A; B | C)` for a three-axis joint `p[a][b][c]`.
pub fn conditional_mutual_information<T: Real>(joint: &Table<T>) -> Result<T> {
    if joint.rank() != 3 {
        return Err(Error::Dimension(format!(
            "conditional mutual information needs a 3-axis joint, got rank {}",
            joint.rank()
        )));
    }
    let (na, nb, nc) = (joint.dims()[0], joint.dims()[1], joint.dims()[2]);
    let p = joint.data();
    let mut pac = vec![T::zero(); na * nc];
    let mut pbc = vec![T::zero(); nb * nc];
    let mut pc = vec![T::zero(); nc];
    for a in 0..na {
        for b in 0..nb {
            for c in 0..nc {
                let v = p[(a * nb + b) * nc + c];
                pac[a * nc + c] = pac[a * nc + c] + v;
                pbc[b * nc + c] = pbc[b * nc + c] + v;
                pc[c] = pc[c] + v;
            }
        }
    }
    let mut acc = T::zero();
    for a in 0..na {
        for b in 0..nb {
            for c in 0..nc {
                let v = p[(a * nb + b) * nc + c];
                if v > T::zero() {
                    acc = acc + v * (v * pc[c] / (pac[a * nc + c] * pbc[b * nc + c])).ln();
                }
            }
        }
    }
    Ok(acc.max(T::zero()))
}

/// Mutual information of a dense row-major `na x nb` joint.
pub(crate) fn mi_dense<T: Real>(p: &[T], na: usize, nb: usize) -> T {
    let mut pa = vec![T::zero(); na];
    let mut pb = vec![T::zero(); nb];
    for a in 0..na {
        for b in 0..nb {
            let v = p[a * nb + b];
            pa[a] = pa[a] + v;
            pb[b] = pb[b] + v;
        }
    }
    let mut acc = T::zero();
    for a in 0..na {
        for b in 0..nb {
            let v = p[a * nb + b];
            if v > T::zero() {
                acc = acc + v * (v / (pa[a] * pb[b])).ln();
            }
        }
    }
    acc.max(T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.0_f64), 0.0);
        assert!((binary_entropy(0.5_f64) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((binary_entropy(0.1_f32) - 0.325_083_f32).abs() < 1e-5);
    }

    #[test]
    fn mi_identity_and_independent() {
        let id = Table::from_matrix(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert!((mutual_information(&id).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let ind = Table::<f64>::from_matrix(&[vec![0.06, 0.14], vec![0.24, 0.56]]).unwrap();
        assert!(mutual_information(&ind).unwrap().abs() < 1e-15);
    }

    #[test]
    fn rank_is_checked() {
        let t = Table::from_matrix(&[vec![0.5, 0.5]]).unwrap();
        assert!(conditional_mutual_information(&t).is_err());
    }
}
