//! Entropic quantities and distances on density matrices. All logarithms are base 2.

use super::eig::{hermitian_eig, singular_values, HermitianEig};
use super::layout::{partial_trace, LegLayout};
use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Eigenvalues below this are treated as zero.
pub const EIG_CLIP: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;

fn xlog2x(x: f64) -> f64 {
    if x <= EIG_CLIP {
        0.0
    } else {
        x * x.log2()
    }
}

/// Decomposes `rho` after checking it is a density matrix.
pub fn checked_state_eig(rho: &ComplexMatrix) -> Result<HermitianEig> {
    let e = hermitian_eig(rho)?;
    if e.min() < -POSITIVITY_TOL {
        return Err(Error::NotPositive(e.min()));
    }
    let tr: f64 = e.values.iter().sum();
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(Error::TraceDeviation { expected: 1.0, actual: tr });
    }
    Ok(e)
}

/// Von Neumann entropy in bits.
pub fn von_neumann_entropy(rho: &ComplexMatrix) -> Result<f64> {
    let e = checked_state_eig(rho)?;
    Ok(-e.values.iter().map(|&x| xlog2x(x)).sum::<f64>())
}

/// Relative entropy S(x‖y) = tr[x(log x − log y)] in bits.
pub fn relative_entropy(x: &ComplexMatrix, y: &ComplexMatrix) -> Result<f64> {
    if x.rows() != y.rows() || x.cols() != y.cols() {
        return Err(Error::DimensionMismatch("relative entropy arguments differ in size".into()));
    }
    let ex = checked_state_eig(x)?;
    let ey = checked_state_eig(y)?;
    let n = x.rows();
    let neg_entropy: f64 = ex.values.iter().map(|&v| xlog2x(v)).sum();
    // tr[x log y] = Σ_k ⟨v_k|x|v_k⟩ log μ_k over the eigenpairs (μ_k, v_k) of y
    let mut cross = 0.0;
    for k in 0..n {
        let col = ey.vectors.column(k);
        let xv = x.apply(&col);
        let w: f64 = col.iter().zip(&xv).map(|(a, b)| (a.conj() * b).re).sum();
        let mu = ey.values[k];
        if mu <= EIG_CLIP {
            if w > EIG_CLIP {
                return Err(Error::SupportViolation);
            }
            continue;
        }
        cross += w * mu.log2();
    }
    Ok((neg_entropy - cross).max(0.0))
}

/// Uhlmann fidelity (tr√(√ρ σ √ρ))², evaluated as ‖√ρ √σ‖₁².
///
/// The nuclear-norm form avoids square roots of the noise-level eigenvalues
/// of √ρ σ √ρ, which would otherwise cost about eight digits on rank-deficient
/// inputs. Eigenvalues below [`EIG_CLIP`] are dropped from both square roots.
pub fn fidelity(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    let clipped_sqrt = |x: f64| if x > EIG_CLIP { x.sqrt() } else { 0.0 };
    let sr = checked_state_eig(rho)?.map(clipped_sqrt);
    let ss = checked_state_eig(sigma)?.map(clipped_sqrt);
    let f: f64 = singular_values(&sr.matmul(&ss)).iter().sum();
    Ok((f * f).min(1.0))
}

/// Trace distance ½‖ρ − σ‖₁.
pub fn trace_distance(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    let d = (rho - sigma).hermitian_part();
    Ok(0.5 * hermitian_eig(&d)?.values.iter().map(|v| v.abs()).sum::<f64>())
}

/// Bipartite marginals of a state on A ⊗ C.
pub fn bipartite_marginals(rho: &ComplexMatrix, da: usize, dc: usize) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let layout = LegLayout::inputs(&["A", "C"], &[da, dc]);
    let (a, _) = partial_trace(rho, &layout, &["A"])?;
    let (c, _) = partial_trace(rho, &layout, &["C"])?;
    Ok((a, c))
}

/// Quantum mutual information I(A:C) = S_A + S_C − S_AC in bits.
pub fn mutual_information(rho: &ComplexMatrix, da: usize, dc: usize) -> Result<f64> {
    let (a, c) = bipartite_marginals(rho, da, dc)?;
    Ok(von_neumann_entropy(&a)? + von_neumann_entropy(&c)? - von_neumann_entropy(rho)?)
}

/// I(A:C|B) = S_AB + S_BC − S_ABC − S_B for a state on A ⊗ B ⊗ C.
pub fn conditional_mutual_information(rho: &ComplexMatrix, dims: [usize; 3]) -> Result<f64> {
    let layout = LegLayout::inputs(&["A", "B", "C"], &dims);
    let s = |keep: &[&str]| -> Result<f64> {
        let (m, _) = partial_trace(rho, &layout, keep)?;
        von_neumann_entropy(&m)
    };
    Ok(s(&["A", "B"])? + s(&["B", "C"])? - von_neumann_entropy(rho)? - s(&["B"])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix::{kron, C64};

    fn ket0() -> ComplexMatrix {
        ComplexMatrix::diag(&[1.0, 0.0])
    }

    #[test]
    fn pure_and_mixed_entropy() {
        assert!(von_neumann_entropy(&ket0()).unwrap().abs() < 1e-15);
        let mixed = ComplexMatrix::identity(2).scale(0.5);
        assert!((von_neumann_entropy(&mixed).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_invalid_states() {
        let neg = ComplexMatrix::diag(&[1.1, -0.1]);
        assert!(matches!(von_neumann_entropy(&neg), Err(Error::NotPositive(_))));
        let big = ComplexMatrix::diag(&[0.6, 0.6]);
        assert!(matches!(von_neumann_entropy(&big), Err(Error::TraceDeviation { .. })));
    }

    #[test]
    fn relative_entropy_examples() {
        let mixed = ComplexMatrix::identity(2).scale(0.5);
        assert!(relative_entropy(&mixed, &mixed).unwrap().abs() < 1e-14);
        assert!((relative_entropy(&ket0(), &mixed).unwrap() - 1.0).abs() < 1e-14);
        let ket1 = ComplexMatrix::diag(&[0.0, 1.0]);
        assert_eq!(relative_entropy(&mixed, &ket1), Err(Error::SupportViolation));
    }

    #[test]
    fn fidelity_examples() {
        let mixed = ComplexMatrix::identity(2).scale(0.5);
        let ket1 = ComplexMatrix::diag(&[0.0, 1.0]);
        assert!((fidelity(&ket0(), &ket0()).unwrap() - 1.0).abs() < 1e-14);
        assert!(fidelity(&ket0(), &ket1).unwrap().abs() < 1e-14);
        assert!((fidelity(&mixed, &ket0()).unwrap() - 0.5).abs() < 1e-14);
    }

    #[test]
    fn bell_state_mutual_information() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let v = [C64::new(s, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(s, 0.0)];
        let bell = ComplexMatrix::outer(&v, &v);
        assert!((mutual_information(&bell, 2, 2).unwrap() - 2.0).abs() < 1e-13);
        let prod = kron(&ket0(), &ComplexMatrix::identity(2).scale(0.5));
        assert!(mutual_information(&prod, 2, 2).unwrap().abs() < 1e-14);
    }

    #[test]
    fn cmi_of_product_vanishes() {
        let m = ComplexMatrix::identity(2).scale(0.5);
        let p = kron(&kron(&m, &ket0()), &m);
        assert!(conditional_mutual_information(&p, [2, 2, 2]).unwrap().abs() < 1e-14);
    }
}
