use nalgebra::{DMatrix, SymmetricEigen};

use super::matrix::{ComplexMatrix, C64, ZERO};
use crate::error::{Error, Result};

/// Tolerance on M − M† accepted by the eigensolver.
pub const HERMITIAN_TOL: f64 = 1e-10;

const MAX_ITERATIONS: usize = 10_000;

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    /// Eigenvalues, descending.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, matching `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    /// Rebuilds V f(Λ) V†.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let fv: Vec<f64> = self.values.iter().map(|&x| f(x)).collect();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, n, |i, j| {
            let mut acc = ZERO;
            for k in 0..n {
                if fv[k] != 0.0 {
                    acc += v[(i, k)] * v[(j, k)].conj() * fv[k];
                }
            }
            acc
        })
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map(|x| x)
    }

    pub fn min(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }
}

/// Hermitian eigendecomposition via nalgebra's symmetric QR solver.
///
/// Output is deterministic: eigenvalues sorted descending, each eigenvector
/// phase-fixed so its first non-negligible component is real and positive.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch("eigendecomposition needs a square matrix".into()));
    }
    let resid = m.hermiticity_residual();
    if resid > HERMITIAN_TOL {
        return Err(Error::NotHermitian(resid));
    }
    let n = m.rows();
    let h = m.hermitian_part();
    let dm = DMatrix::from_fn(n, n, |i, j| h[(i, j)]);
    let eig = SymmetricEigen::try_new(dm, f64::EPSILON, MAX_ITERATIONS)
        .ok_or_else(|| Error::InvalidArgument("eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]).then(i.cmp(&j)));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = ComplexMatrix::zeros(n, n);
    for (new, &old) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(old);
        let lead = col.iter().find(|z| z.norm() > 1e-12).copied().unwrap_or(C64::new(1.0, 0.0));
        let fix = lead.conj() / lead.norm();
        for k in 0..n {
            vectors[(k, new)] = col[k] * fix;
        }
    }
    Ok(HermitianEig { values, vectors })
}

/// Singular values via nalgebra's SVD, descending.
pub fn singular_values(m: &ComplexMatrix) -> Vec<f64> {
    let dm = DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)]);
    let mut s: Vec<f64> = dm.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Eigenvalues only, descending.
pub fn eigvalsh(m: &ComplexMatrix) -> Result<Vec<f64>> {
    Ok(hermitian_eig(m)?.values)
}

/// Principal square root of a PSD matrix; tiny negative eigenvalues are clipped.
pub fn sqrt_psd(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(hermitian_eig(m)?.map(|x| x.max(0.0).sqrt()))
}

/// exp(-i t H) for Hermitian H.
pub fn unitary_exp(h: &ComplexMatrix, t: f64) -> Result<ComplexMatrix> {
    let e = hermitian_eig(h)?;
    let n = e.values.len();
    let v = &e.vectors;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| {
        let mut acc = ZERO;
        for k in 0..n {
            acc += v[(i, k)] * v[(j, k)].conj() * C64::from_polar(1.0, -t * e.values[k]);
        }
        acc
    }))
}
