//! The two common-cause states, their pure-state ensembles, and Bell/Werner states.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64, ZERO};

/// Positive unit-trace matrix. Alias kept for readability of signatures.
pub type DensityMatrix = ComplexMatrix;

/// Numerators of the Process 1 state over a common denominator of 10000.
const LAMBDA_NUM: [[i32; 8]; 8] = [
    [1106, 25, -142, -525, 25, 294, -525, -58],
    [25, 1106, -525, -142, 294, 25, -58, -525],
    [-142, -525, 1394, 25, -525, -58, 25, 6],
    [-525, -142, 25, 1394, -58, -525, 6, 25],
    [25, 294, -525, -58, 1106, 25, -142, -525],
    [294, 25, -58, -525, 25, 1106, -525, -142],
    [-525, -58, 25, 6, -142, -525, 1394, 25],
    [-58, -525, 6, 25, -525, -142, 25, 1394],
];

/// Three-qubit state λ_ABC (dims 2 ⊗ 2 ⊗ 2).
pub fn lambda_state() -> DensityMatrix {
    ComplexMatrix::from_fn(8, 8, |i, j| C64::new(f64::from(LAMBDA_NUM[i][j]) / 10000.0, 0.0))
}

/// Entry of ω·48 written as `int + s·√3 + t·i√3`.
#[derive(Clone, Copy)]
struct OmegaEntry(i32, i32, i32);

const O0: OmegaEntry = OmegaEntry(0, 0, 0);
const O3: OmegaEntry = OmegaEntry(3, 0, 0);
const S: OmegaEntry = OmegaEntry(0, 1, 0);
const MS: OmegaEntry = OmegaEntry(0, -1, 0);
const IS: OmegaEntry = OmegaEntry(0, 0, 1);
const MIS: OmegaEntry = OmegaEntry(0, 0, -1);
const O24: OmegaEntry = OmegaEntry(24, 0, 0);

const OMEGA_NUM: [[OmegaEntry; 12]; 12] = [
    [O3, S, O0, O0, O0, O0, O0, O0, S, MIS, O0, O0],
    [S, O3, O0, O0, O0, O0, O0, O0, IS, MS, O0, O0],
    [O0, O0, O3, MS, O0, O0, MS, MIS, O0, O0, O0, O0],
    [O0, O0, MS, O3, O0, O0, IS, S, O0, O0, O0, O0],
    [O0, O0, O0, O0, O24, O0, O0, O0, O0, O0, O0, O0],
    [O0; 12],
    [O0, O0, MS, MIS, O0, O0, O3, MS, O0, O0, O0, O0],
    [O0, O0, IS, S, O0, O0, MS, O3, O0, O0, O0, O0],
    [S, MIS, O0, O0, O0, O0, O0, O0, O3, S, O0, O0],
    [IS, MS, O0, O0, O0, O0, O0, O0, S, O3, O0, O0],
    [O0; 12],
    [O0; 12],
];

/// Qubit–qutrit–qubit state ω_ABC (dims 2 ⊗ 3 ⊗ 2).
pub fn omega_state() -> DensityMatrix {
    let r3 = 3f64.sqrt();
    ComplexMatrix::from_fn(12, 12, |i, j| {
        let OmegaEntry(a, s, t) = OMEGA_NUM[i][j];
        C64::new(f64::from(a) + f64::from(s) * r3, f64::from(t) * r3) / 48.0
    })
}

/// Weighted pure-state ensemble.
#[derive(Debug, Clone)]
pub struct StateEnsemble {
    pub members: Vec<(Vec<C64>, f64)>,
    pub dims: Vec<usize>,
}

impl StateEnsemble {
    /// Ensemble for λ_ABC. Vectors are listed unnormalized.
    pub fn process1() -> Self {
        let rows: [[f64; 8]; 8] = [
            [1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0],
            [1.0, -1.0, 1.0, -1.0, -1.0, 1.0, -1.0, 1.0],
            [1.0, -1.0, -1.0, 1.0, -1.0, 1.0, 1.0, -1.0],
            [1.0; 8],
            [0.0, 0.1, 0.0, -0.7, -0.1, 0.0, 0.7, 0.0],
            [0.1, 0.0, -0.7, 0.0, 0.0, -0.1, 0.0, 0.7],
            [-0.7, 0.0, -0.1, 0.0, 0.0, 0.7, 0.0, 0.1],
            [0.0, -0.7, 0.0, -0.1, 0.7, 0.0, 0.1, 0.0],
        ];
        let weights = [27.0, 22.0, 5.0, 2.0, 14.0, 14.0, 8.0, 8.0];
        let members = rows
            .iter()
            .zip(weights)
            .map(|(r, w)| (r.iter().map(|&x| C64::new(x, 0.0)).collect(), w / 100.0))
            .collect();
        Self { members, dims: vec![2, 2, 2] }
    }

    /// Ensemble for ω_ABC.
    pub fn process2() -> Self {
        let z = ZERO;
        let one = C64::new(1.0, 0.0);
        let r3 = C64::new(3f64.sqrt(), 0.0);
        let e = |t: f64| C64::from_polar(1.0, t);
        let inv3 = 1.0 / 3f64.sqrt();
        let inv6 = 1.0 / 6f64.sqrt();
        let m1 = [e(-2.0 * PI / 3.0), e(-5.0 * PI / 6.0), z, z, z, z, z, z, z, one, z, z];
        let m2 = [z, z, e(-2.0 * PI / 3.0), e(PI / 6.0), z, z, z, one, z, z, z, z];
        let m3 = [one, C64::new(0.0, 1.0), z, z, z, z, z, z, r3, one, z, z];
        let m4 = [z, z, -one, C64::new(0.0, 1.0), z, z, r3, -one, z, z, z, z];
        let m5 = [z, z, z, z, one, z, z, z, z, z, z, z];
        let scaled = |v: [C64; 12], s: f64| v.iter().map(|x| x * s).collect::<Vec<_>>();
        Self {
            members: vec![
                (scaled(m1, inv3), 1.0 / 8.0),
                (scaled(m2, inv3), 1.0 / 8.0),
                (scaled(m3, inv6), 1.0 / 8.0),
                (scaled(m4, inv6), 1.0 / 8.0),
                (m5.to_vec(), 4.0 / 8.0),
            ],
            dims: vec![2, 3, 2],
        }
    }
}

/// Σ_k p_k |ψ_k⟩⟨ψ_k| with every member normalized first.
pub fn ensemble_to_state(e: &StateEnsemble) -> Result<DensityMatrix> {
    let d: usize = e.dims.iter().product();
    let total: f64 = e.members.iter().map(|(_, w)| w).sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("ensemble weights sum to {total}")));
    }
    let mut rho = ComplexMatrix::zeros(d, d);
    for (v, w) in &e.members {
        if v.len() != d {
            return Err(Error::DimensionMismatch(format!("member of length {} in dimension {d}", v.len())));
        }
        let n2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if n2 == 0.0 {
            return Err(Error::InvalidArgument("zero vector in ensemble".into()));
        }
        rho += &ComplexMatrix::outer(v, v).scale(w / n2);
    }
    Ok(rho)
}

/// Bell pair index, 1-based as in the conditioning events.
///
/// 1: (|00⟩+|11⟩)/√2, 2: (|00⟩−|11⟩)/√2, 3: (|01⟩+|10⟩)/√2, 4: (|01⟩−|10⟩)/√2.
pub fn bell(x: usize) -> Result<Vec<C64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v = match x {
        1 => [s, 0.0, 0.0, s],
        2 => [s, 0.0, 0.0, -s],
        3 => [0.0, s, s, 0.0],
        4 => [0.0, s, -s, 0.0],
        _ => return Err(Error::InvalidArgument(format!("Bell index {x} not in 1..=4"))),
    };
    Ok(v.iter().map(|&a| C64::new(a, 0.0)).collect())
}

/// r·β^(x) + (1 − r)·1/4.
pub fn werner(x: usize, r: f64) -> Result<DensityMatrix> {
    let b = bell(x)?;
    let beta = ComplexMatrix::outer(&b, &b);
    Ok(&beta.scale(r) + &ComplexMatrix::identity(4).scale((1.0 - r) / 4.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigvalsh;

    #[test]
    fn lambda_entries_and_trace() {
        let l = lambda_state();
        assert_eq!(l[(0, 0)].re, 0.1106);
        assert!((l.trace().re - 1.0).abs() < 1e-15);
        assert!(l.is_hermitian(0.0));
    }

    #[test]
    fn omega_entries_and_trace() {
        let w = omega_state();
        assert_eq!(w[(4, 4)].re, 0.5);
        assert!((w.trace().re - 1.0).abs() < 1e-15);
        assert!(w.is_hermitian(1e-16));
        for zero_row in [5, 10, 11] {
            assert!((0..12).all(|j| w[(zero_row, j)] == ZERO));
        }
    }

    #[test]
    fn states_are_positive() {
        assert!(*eigvalsh(&lambda_state()).unwrap().last().unwrap() > 0.0);
        assert!(*eigvalsh(&omega_state()).unwrap().last().unwrap() > -1e-15);
    }

    #[test]
    fn single_member_ensemble_is_projector() {
        let v = vec![C64::new(3.0, 0.0), C64::new(0.0, 4.0)];
        let e = StateEnsemble { members: vec![(v.clone(), 1.0)], dims: vec![2] };
        let rho = ensemble_to_state(&e).unwrap();
        assert!(rho.max_abs_diff(&ComplexMatrix::projector(&v)) < 1e-15);
    }

    #[test]
    fn werner_limits() {
        let b = bell(3).unwrap();
        assert!(werner(3, 1.0).unwrap().max_abs_diff(&ComplexMatrix::outer(&b, &b)) < 1e-15);
        assert!(werner(2, 0.0).unwrap().max_abs_diff(&ComplexMatrix::identity(4).scale(0.25)) < 1e-15);
        let ev = eigvalsh(&werner(4, 1.0 / 3.0).unwrap()).unwrap();
        let expect = [0.5, 1.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(bell(0).is_err());
    }
}
