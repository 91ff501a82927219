//! Measure-and-discard instruments (POVMs), dual frames and random projective measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermitian_eig, pauli, ComplexMatrix, C64, ZERO};

pub const COMPLETENESS_TOL: f64 = 1e-10;
pub const MAX_GRAM_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct PovmElement {
    pub label: String,
    pub matrix: ComplexMatrix,
}

/// Ordered POVM on a single input leg.
#[derive(Debug, Clone, PartialEq)]
pub struct Instrument {
    dim: usize,
    elements: Vec<PovmElement>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstrumentRepr {
    dim: usize,
    elements: Vec<ComplexMatrix>,
}

impl Serialize for Instrument {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        InstrumentRepr { dim: self.dim, elements: self.elements.iter().map(|e| e.matrix.clone()).collect() }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Instrument {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = InstrumentRepr::deserialize(d)?;
        Instrument::new(r.dim, r.elements).map_err(serde::de::Error::custom)
    }
}

impl Instrument {
    /// Elements are labelled 1..=n. Only shapes are checked here; see [`validate`].
    pub fn new(dim: usize, matrices: Vec<ComplexMatrix>) -> Result<Self> {
        let labels = (1..=matrices.len()).map(|i| i.to_string()).collect();
        Self::with_labels(dim, matrices, labels)
    }

    pub fn with_labels(dim: usize, matrices: Vec<ComplexMatrix>, labels: Vec<String>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidInstrument("no elements".into()));
        }
        for m in &matrices {
            if m.rows() != dim || m.cols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "element is {}x{} on a {dim}-dimensional leg",
                    m.rows(),
                    m.cols()
                )));
            }
        }
        let elements = matrices
            .into_iter()
            .zip(labels)
            .map(|(matrix, label)| PovmElement { label, matrix })
            .collect();
        Ok(Self { dim, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[PovmElement] {
        &self.elements
    }

    pub fn matrices(&self) -> impl Iterator<Item = &ComplexMatrix> {
        self.elements.iter().map(|e| &e.matrix)
    }

    pub fn element(&self, i: usize) -> &ComplexMatrix {
        &self.elements[i].matrix
    }

    pub fn sum(&self) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(self.dim, self.dim);
        for m in self.matrices() {
            acc += m;
        }
        acc
    }

    /// Outcome probabilities tr[E^(x) ρ] on a single-leg state.
    pub fn probabilities(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.matrices().map(|e| e.trace_product(rho).re).collect()
    }

    /// Drops the element at `index`; used to build deliberately incomplete sets.
    pub fn without(&self, index: usize) -> Result<Self> {
        let mut els = self.elements.clone();
        if index >= els.len() || els.len() == 1 {
            return Err(Error::InvalidArgument(format!("cannot remove element {index}")));
        }
        els.remove(index);
        Ok(Self { dim: self.dim, elements: els })
    }
}

/// Θ: three-outcome qubit POVM with non-orthogonal elements.
pub fn theta_povm() -> Instrument {
    let s2 = 2f64.sqrt();
    let a = s2 / (1.0 + s2);
    let t1 = ComplexMatrix::diag(&[0.0, a]);
    let t2 = ComplexMatrix::from_real_rows(&[&[1.0, -1.0], &[-1.0, 1.0]]).scale(a / 2.0);
    let t3 = &(&ComplexMatrix::identity(2) - &t1) - &t2;
    Instrument::new(2, vec![t1, t2, t3]).expect("static instrument")
}

/// Sign vectors of the tetrahedral POVM, in element order.
pub const TETRA_SIGNS: [[f64; 3]; 4] = [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]];

/// Π: symmetric informationally complete qubit POVM.
pub fn tetra_povm() -> Instrument {
    let k = 1.0 / 3f64.sqrt();
    let paulis = [pauli::x(), pauli::y(), pauli::z()];
    let els = TETRA_SIGNS
        .iter()
        .map(|c| {
            let mut m = ComplexMatrix::identity(2);
            for (cj, s) in c.iter().zip(&paulis) {
                m += &s.scale(cj * k);
            }
            m.scale(0.25)
        })
        .collect();
    Instrument::new(2, els).expect("static instrument")
}

/// Ξ: the coarse qutrit measurement {1 − |2⟩⟨2|, |2⟩⟨2|}.
pub fn xi_noisy() -> Instrument {
    Instrument::new(3, vec![ComplexMatrix::diag(&[1.0, 1.0, 0.0]), ComplexMatrix::diag(&[0.0, 0.0, 1.0])])
        .expect("static instrument")
}

/// Tetrahedral POVM on the {|0⟩,|1⟩} subspace of a qutrit plus |2⟩⟨2|.
pub fn qutrit_sharp() -> Instrument {
    let mut els: Vec<ComplexMatrix> = tetra_povm()
        .matrices()
        .map(|p| ComplexMatrix::from_fn(3, 3, |i, j| if i < 2 && j < 2 { p[(i, j)] } else { ZERO }))
        .collect();
    els.push(ComplexMatrix::diag(&[0.0, 0.0, 1.0]));
    Instrument::new(3, els).expect("static instrument")
}

/// Projective measurement in the computational basis.
pub fn computational(dim: usize) -> Instrument {
    let els = (0..dim)
        .map(|k| {
            let mut d = vec![0.0; dim];
            d[k] = 1.0;
            ComplexMatrix::diag(&d)
        })
        .collect();
    Instrument::new(dim, els).expect("static instrument")
}

/// Distribution over rank-1 projective qubit measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMeasure {
    /// Unitarily invariant (Haar) measure.
    Haar,
    /// |u⟩ = cos θ|0⟩ + e^{iφ} sin θ|1⟩ with θ uniform on [0, π/2] and φ uniform on [0, 2π).
    UniformAngles,
}

/// Draws a qubit projective measurement {|u⟩⟨u|, |u⊥⟩⟨u⊥|}.
pub fn random_projective_with<R: Rng + ?Sized>(rng: &mut R, measure: SamplingMeasure) -> Instrument {
    let u = match measure {
        SamplingMeasure::Haar => haar_unitary(rng, 2),
        SamplingMeasure::UniformAngles => {
            let theta = rng.random::<f64>() * std::f64::consts::FRAC_PI_2;
            let phi = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
            let (s, c) = theta.sin_cos();
            let e = C64::from_polar(1.0, phi);
            ComplexMatrix::from_rows(&[&[C64::new(c, 0.0), -e.conj() * s], &[e * s, C64::new(c, 0.0)]])
        }
    };
    let els = (0..2)
        .map(|k| {
            let col = u.column(k);
            ComplexMatrix::outer(&col, &col)
        })
        .collect();
    Instrument::new(2, els).expect("two projectors")
}

/// Haar-random projective qubit measurement for a given seed.
pub fn random_projective(seed: u64) -> Instrument {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_projective_with(&mut rng, SamplingMeasure::Haar)
}

/// Haar-random unitary: Gram–Schmidt on a complex Gaussian matrix with the
/// phases of R's diagonal made positive.
pub fn haar_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> ComplexMatrix {
    let mut cols: Vec<Vec<C64>> = (0..n)
        .map(|_| {
            (0..n)
                .map(|_| C64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)))
                .collect()
        })
        .collect();
    for j in 0..n {
        for k in 0..j {
            let (done, rest) = cols.split_at_mut(j);
            let qk = &done[k];
            let proj: C64 = qk.iter().zip(rest[0].iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, q) in rest[0].iter_mut().zip(qk) {
                *x -= proj * q;
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for x in cols[j].iter_mut() {
            *x /= norm;
        }
    }
    ComplexMatrix::from_fn(n, n, |i, j| cols[j][i])
}

#[derive(Debug, Clone, Serialize)]
pub struct InstrumentReport {
    pub min_eigenvalues: Vec<f64>,
    pub max_eigenvalues: Vec<f64>,
    /// ‖1 − Σ_x E^(x)‖_F
    pub completeness_residual: f64,
    pub positive: bool,
    pub bounded: bool,
    pub complete: bool,
    pub pass: bool,
}

pub fn validate(inst: &Instrument) -> Result<InstrumentReport> {
    let mut mins = Vec::new();
    let mut maxs = Vec::new();
    for m in inst.matrices() {
        let e = hermitian_eig(m)?;
        mins.push(e.min());
        maxs.push(e.max());
    }
    let resid = (&ComplexMatrix::identity(inst.dim) - &inst.sum()).frobenius_norm();
    let positive = mins.iter().all(|&x| x >= -COMPLETENESS_TOL);
    let bounded = maxs.iter().all(|&x| x <= 1.0 + COMPLETENESS_TOL);
    let complete = resid <= COMPLETENESS_TOL;
    Ok(InstrumentReport {
        min_eigenvalues: mins,
        max_eigenvalues: maxs,
        completeness_residual: resid,
        positive,
        bounded,
        complete,
        pass: positive && bounded && complete,
    })
}

/// Operators Δ^(x) with tr[Δ^(x) E^(y)] = δ_xy, i.e. biorthogonal to the Choi
/// operators O^(y) = E^(y)ᵀ under tr[Δ Oᵀ].
#[derive(Debug, Clone)]
pub struct DualFrame {
    pub duals: Vec<ComplexMatrix>,
    pub gram_condition: f64,
}

impl DualFrame {
    /// Σ_x Δ^(x) tr[M E^(x)]; the identity on span{Δ^(x)}.
    pub fn frame_apply(&self, inst: &Instrument, m: &ComplexMatrix) -> ComplexMatrix {
        let mut acc = ComplexMatrix::zeros(m.rows(), m.cols());
        for (d, o) in self.duals.iter().zip(inst.matrices()) {
            acc += &d.scale_c(m.trace_product(o));
        }
        acc
    }
}

/// Pseudo-inverse of a Hermitian PSD Gram matrix, with its condition number.
fn gram_inverse(g: &ComplexMatrix) -> Result<(ComplexMatrix, f64)> {
    let e = hermitian_eig(g)?;
    let cond = if e.min() > 0.0 { e.max() / e.min() } else { f64::INFINITY };
    if !(cond < MAX_GRAM_CONDITION) {
        return Err(Error::SingularGram(cond));
    }
    Ok((e.map(|x| 1.0 / x), cond))
}

/// Dual frame built inside span{E^(x)}.
///
/// For Hermitian effects the Gram matrix H_zy = tr[E^(y) E^(z)] is real
/// symmetric and the duals Δ^(x) = Σ_y (H⁻¹)_yx E^(y) are Hermitian.
pub fn dual_frame(inst: &Instrument) -> Result<DualFrame> {
    let n = inst.len();
    let els: Vec<&ComplexMatrix> = inst.matrices().collect();
    let g = ComplexMatrix::from_fn(n, n, |z, y| C64::new(els[y].trace_product(els[z]).re, 0.0));
    let (ginv, cond) = gram_inverse(&g)?;
    let duals = (0..n)
        .map(|x| {
            let mut d = ComplexMatrix::zeros(inst.dim, inst.dim);
            for (y, oy) in els.iter().enumerate() {
                d += &oy.scale(ginv[(y, x)].re);
            }
            d
        })
        .collect();
    Ok(DualFrame { duals, gram_condition: cond })
}

/// Least-squares decomposition of `op` over the instrument elements.
///
/// Returns the coefficients a_x and the residual ‖op − Σ a_x O^(x)‖_F.
pub fn span_decomposition(inst: &Instrument, op: &ComplexMatrix) -> Result<(Vec<C64>, f64)> {
    if op.rows() != inst.dim || op.cols() != inst.dim {
        return Err(Error::DimensionMismatch("operator does not act on the instrument leg".into()));
    }
    let els: Vec<&ComplexMatrix> = inst.matrices().collect();
    let n = els.len();
    let g = ComplexMatrix::from_fn(n, n, |i, j| els[i].inner(els[j]));
    let b: Vec<C64> = els.iter().map(|e| e.inner(op)).collect();
    let e = hermitian_eig(&g)?;
    let cutoff = e.max() * 1e-13;
    let ginv = e.map(|x| if x > cutoff { 1.0 / x } else { 0.0 });
    let coeffs = ginv.apply(&b);
    let mut approx = ComplexMatrix::zeros(inst.dim, inst.dim);
    for (c, m) in coeffs.iter().zip(&els) {
        approx += &m.scale_c(*c);
    }
    Ok((coeffs, (op - &approx).frobenius_norm()))
}

/// Number of linearly independent elements.
pub fn span_rank(inst: &Instrument) -> Result<usize> {
    let els: Vec<&ComplexMatrix> = inst.matrices().collect();
    let n = els.len();
    let g = ComplexMatrix::from_fn(n, n, |i, j| els[i].inner(els[j]));
    let e = hermitian_eig(&g)?;
    let cutoff = e.max() * 1e-12;
    Ok(e.values.iter().filter(|&&x| x > cutoff).count())
}

/// Looks up one of the built-in instruments by name.
pub fn by_name(name: &str) -> Result<Instrument> {
    match name {
        "theta" => Ok(theta_povm()),
        "tetra" => Ok(tetra_povm()),
        "xi" => Ok(xi_noisy()),
        "sharp" => Ok(qutrit_sharp()),
        "z" => Ok(computational(2)),
        "z3" => Ok(computational(3)),
        other => Err(Error::InvalidArgument(format!("unknown instrument `{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_first_element() {
        let t = theta_povm();
        let a = 2f64.sqrt() / (1.0 + 2f64.sqrt());
        assert_eq!(t.element(0)[(0, 0)], ZERO);
        assert!((t.element(0)[(1, 1)].re - 0.58579).abs() < 1e-5);
        assert!((t.element(0)[(1, 1)].re - a).abs() < 1e-15);
        assert!(t.sum().max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        assert!(t.element(0).trace_product(t.element(1)).norm() > 0.1);
    }

    #[test]
    fn tetra_elements() {
        let t = tetra_povm();
        for m in t.matrices() {
            assert!((m.trace().re - 0.5).abs() < 1e-15);
            let ev = hermitian_eig(m).unwrap().values;
            assert!((ev[0] - 0.5).abs() < 1e-14 && ev[1].abs() < 1e-14);
        }
        assert!(t.sum().max_abs_diff(&ComplexMatrix::identity(2)) < 1e-15);
        assert_eq!(span_rank(&t).unwrap(), 4);
    }

    #[test]
    fn qutrit_instruments() {
        let xi = xi_noisy();
        assert!(xi.element(0).matmul(xi.element(1)).max_abs() == 0.0);
        assert!(validate(&xi).unwrap().pass);
        let sharp = qutrit_sharp();
        assert!(validate(&sharp).unwrap().pass);
        let mut coarse = ComplexMatrix::zeros(3, 3);
        for m in sharp.matrices().take(4) {
            coarse += m;
        }
        assert!(coarse.max_abs_diff(xi.element(0)) < 1e-15);
    }

    #[test]
    fn validate_flags_problems() {
        assert!(validate(&theta_povm()).unwrap().pass);
        let missing = theta_povm().without(2).unwrap();
        let r = validate(&missing).unwrap();
        assert!(!r.complete);
        let expected = (2.0 * 2f64.sqrt() - 2.0) * 1.0;
        assert!((r.completeness_residual - expected).abs() < 1e-12);
        let mut els: Vec<ComplexMatrix> = theta_povm().matrices().cloned().collect();
        els[0] = els[0].scale(-1.0);
        let r = validate(&Instrument::new(2, els).unwrap()).unwrap();
        assert!(!r.positive && !r.pass);
    }

    #[test]
    fn computational_basis_is_self_dual() {
        let z = computational(2);
        let d = dual_frame(&z).unwrap();
        for (a, b) in d.duals.iter().zip(z.matrices()) {
            assert!(a.max_abs_diff(b) < 1e-15);
        }
    }

    #[test]
    fn xi_duals_are_normalized_elements() {
        let xi = xi_noisy();
        let d = dual_frame(&xi).unwrap();
        assert!(d.duals[0].max_abs_diff(&xi.element(0).scale(0.5)) < 1e-15);
        assert!(d.duals[1].max_abs_diff(xi.element(1)) < 1e-15);
    }

    #[test]
    fn dual_frame_biorthogonal_for_complex_elements() {
        let t = tetra_povm();
        let d = dual_frame(&t).unwrap();
        for (x, dx) in d.duals.iter().enumerate() {
            assert!(dx.is_hermitian(1e-14));
            for (y, oy) in t.matrices().enumerate() {
                let v = dx.trace_product(oy);
                let expect = if x == y { 1.0 } else { 0.0 };
                assert!((v - C64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn dependent_elements_rejected() {
        let z = computational(2);
        let mut els: Vec<ComplexMatrix> = z.matrices().cloned().collect();
        els.push(ComplexMatrix::identity(2));
        let inst = Instrument::new(2, els).unwrap();
        assert!(matches!(dual_frame(&inst), Err(Error::SingularGram(_))));
    }

    #[test]
    fn random_projective_is_deterministic() {
        let a = random_projective(7);
        let b = random_projective(7);
        assert_eq!(a, b);
        assert!(a.sum().max_abs_diff(&ComplexMatrix::identity(2)) < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_projective_with(&mut rng, SamplingMeasure::UniformAngles);
        assert!(validate(&u).unwrap().pass);
    }

    #[test]
    fn span_residual_of_pauli_z_against_xi() {
        let sz = ComplexMatrix::diag(&[1.0, -1.0, 0.0]);
        let (_, r) = span_decomposition(&xi_noisy(), &sz).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
        let (c, r) = span_decomposition(&theta_povm(), &ComplexMatrix::identity(2)).unwrap();
        assert!(r < 1e-12);
        for x in c {
            assert!((x - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn instrument_json_round_trip() {
        let t = tetra_povm();
        let s = serde_json::to_string(&t).unwrap();
        let back: Instrument = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }
}
