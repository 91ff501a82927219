//! Recovered processes built from a history-blocking instrument, span-restricted
//! expectation values and deviation scans.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::{dual_frame, span_decomposition, DualFrame, Instrument};
use crate::linalg::layout::{partial_trace, permute, Leg};
use crate::linalg::{kron, kron_all, unitary_exp, ComplexMatrix, LegLayout, C64};
use crate::process::{born_rule_povm, condition, condition_all, input_state_of, ProcessLike};
use crate::states::DensityMatrix;

pub const SPAN_TOL: f64 = 1e-10;

/// Σ_x p_x γ_A^(x) ⊗ Δ^(x) ⊗ γ_C^(x) ⊗ 1_{Ao Bo}.
///
/// Not positive in general; valid only against Bob operators in the span of
/// `instrument`.
#[derive(Debug, Clone)]
pub struct RecoveredProcess {
    state: ComplexMatrix,
    input_dims: [usize; 3],
    matrix: ComplexMatrix,
    layout: LegLayout,
    instrument: Instrument,
    dual: DualFrame,
    probabilities: Vec<f64>,
    marginals: Vec<(DensityMatrix, DensityMatrix)>,
}

impl ProcessLike for RecoveredProcess {
    fn choi(&self) -> &ComplexMatrix {
        &self.matrix
    }
    fn layout(&self) -> &LegLayout {
        &self.layout
    }
    fn restricted_to(&self) -> Option<&Instrument> {
        Some(&self.instrument)
    }
}

impl RecoveredProcess {
    /// Recovered common-cause state on Ai ⊗ Bi ⊗ Ci.
    pub fn state(&self) -> &ComplexMatrix {
        &self.state
    }

    pub fn input_dims(&self) -> [usize; 3] {
        self.input_dims
    }

    pub fn instrument(&self) -> &Instrument {
        &self.instrument
    }

    pub fn dual(&self) -> &DualFrame {
        &self.dual
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Normalized (γ_A^(x), γ_C^(x)) per event.
    pub fn marginals(&self) -> &[(DensityMatrix, DensityMatrix)] {
        &self.marginals
    }
}

/// Builds the recovered process of `p` with respect to Bob's instrument.
pub fn recover(p: &impl ProcessLike, inst: &Instrument) -> Result<RecoveredProcess> {
    let layout = p.layout();
    let da = layout.leg("Ai")?.dim;
    let dao = layout.leg("Ao")?.dim;
    let db = layout.leg("Bi")?.dim;
    let dbo = layout.leg("Bo")?.dim;
    let dc = layout.leg("Ci")?.dim;
    if inst.dim() != db {
        return Err(Error::DimensionMismatch(format!("instrument acts on dimension {} but Bi has {db}", inst.dim())));
    }
    let dual = dual_frame(inst)?;
    let ac = LegLayout::inputs(&["A", "C"], &[da, dc]);
    let mut state = ComplexMatrix::zeros(da * db * dc, da * db * dc);
    let mut probabilities = Vec::with_capacity(inst.len());
    let mut marginals = Vec::with_capacity(inst.len());
    for (c, delta) in condition_all(p, "B", inst)?.into_iter().zip(&dual.duals) {
        probabilities.push(c.probability);
        if c.probability.abs() < 1e-14 {
            marginals.push((ComplexMatrix::zeros(da, da), ComplexMatrix::zeros(dc, dc)));
            continue;
        }
        let (rho, _) = c.input_state()?;
        let a = partial_trace(&rho, &ac, &["A"])?.0;
        let cc = partial_trace(&rho, &ac, &["C"])?.0;
        state += &kron_all([&a, delta, &cc]).scale(c.probability);
        marginals.push((a, cc));
    }
    let staged = kron(&state, &ComplexMatrix::identity(dao * dbo));
    let staged_layout = LegLayout::new(vec![
        Leg::input("Ai", da),
        Leg::input("Bi", db),
        Leg::input("Ci", dc),
        Leg::output("Ao", dao),
        Leg::output("Bo", dbo),
    ])?;
    let (matrix, layout) = permute(&staged, &staged_layout, &["Ai", "Ao", "Bi", "Bo", "Ci"])?;
    Ok(RecoveredProcess {
        state,
        input_dims: [da, db, dc],
        matrix,
        layout,
        instrument: inst.clone(),
        dual,
        probabilities,
        marginals,
    })
}

/// Σ_y c_y (E_A^(y) ⊗ E_B^(y) ⊗ E_C^(y)) on the input legs.
#[derive(Debug, Clone)]
pub struct Observable {
    pub terms: Vec<ObservableTerm>,
}

#[derive(Debug, Clone)]
pub struct ObservableTerm {
    pub coefficient: f64,
    pub alice: ComplexMatrix,
    pub bob: ComplexMatrix,
    pub charlie: ComplexMatrix,
}

impl Observable {
    pub fn product(alice: ComplexMatrix, bob: ComplexMatrix, charlie: ComplexMatrix) -> Self {
        Self { terms: vec![ObservableTerm { coefficient: 1.0, alice, bob, charlie }] }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ObservableReport {
    pub residuals: Vec<f64>,
    pub pass: bool,
}

/// Checks every Bob operator lies in span{O^(x)}.
pub fn validate_observable(obs: &Observable, inst: &Instrument) -> Result<ObservableReport> {
    let residuals = obs
        .terms
        .iter()
        .map(|t| Ok(span_decomposition(inst, &t.bob)?.1))
        .collect::<Result<Vec<f64>>>()?;
    let pass = residuals.iter().all(|&r| r < SPAN_TOL);
    Ok(ObservableReport { residuals, pass })
}

/// ⟨C⟩ = Σ_y c_y p(E_A, E_B, E_C) with discarded outputs.
///
/// For recovered processes the observable must pass [`validate_observable`].
pub fn expectation(p: &impl ProcessLike, obs: &Observable) -> Result<f64> {
    if let Some(inst) = p.restricted_to() {
        let r = validate_observable(obs, inst)?;
        if !r.pass {
            return Err(Error::SpanViolation(r.residuals.iter().cloned().fold(0.0, f64::max)));
        }
    }
    obs.terms.iter().try_fold(0.0, |acc, t| {
        Ok(acc + t.coefficient * born_rule_povm(p, &[t.alice.clone(), t.bob.clone(), t.charlie.clone()])?)
    })
}

/// Closed-form ⟨C⟩ on a recovered process: Σ_y c_y Σ_x a_x p_x tr[E_A γ_A^(x)] tr[E_C γ_C^(x)].
pub fn expectation_closed_form(rec: &RecoveredProcess, obs: &Observable) -> Result<f64> {
    let mut total = C64::new(0.0, 0.0);
    for t in &obs.terms {
        let (a, resid) = span_decomposition(&rec.instrument, &t.bob)?;
        if resid >= SPAN_TOL {
            return Err(Error::SpanViolation(resid));
        }
        for (x, ax) in a.iter().enumerate() {
            let (ga, gc) = &rec.marginals[x];
            let va = t.alice.trace_product(ga);
            let vc = t.charlie.trace_product(gc);
            total += ax * rec.probabilities[x] * va * vc * t.coefficient;
        }
    }
    Ok(total.re)
}

/// Expectation conventions for the deviation scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanConvention {
    /// |φ⟩⟨φ| ⊗ 1 ⊗ |ψ⟩⟨ψ|, values in [0, 1].
    Projector,
    /// (|φ⟩⟨φ| − |φ⊥⟩⟨φ⊥|) ⊗ 1 ⊗ (|ψ⟩⟨ψ| − |ψ⊥⟩⟨ψ⊥|), values in [−1, 1].
    Correlator,
}

/// Evenly spaced samples of one scan parameter, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl Axis {
    pub fn fixed(value: f64) -> Self {
        Self { start: value, end: value, steps: 1 }
    }

    pub fn linspace(start: f64, end: f64, steps: usize) -> Self {
        Self { start, end, steps }
    }

    pub fn value(&self, k: usize) -> f64 {
        if self.steps <= 1 {
            self.start
        } else {
            self.start + (self.end - self.start) * k as f64 / (self.steps - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub theta1: Axis,
    pub phi: Axis,
    pub theta2: Axis,
    pub psi: Axis,
}

impl ScanGrid {
    /// θ1, θ2 over [0, π/2] with fixed phases.
    pub fn angles(steps: usize, phi: f64, psi: f64) -> Self {
        let half = std::f64::consts::FRAC_PI_2;
        Self {
            theta1: Axis::linspace(0.0, half, steps),
            phi: Axis::fixed(phi),
            theta2: Axis::linspace(0.0, half, steps),
            psi: Axis::fixed(psi),
        }
    }

    pub fn len(&self) -> usize {
        self.theta1.steps * self.phi.steps * self.theta2.steps * self.psi.steps
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid point `i` in (θ1, φ, θ2, ψ) row-major order.
    pub fn point(&self, i: usize) -> [f64; 4] {
        let mut rem = i;
        let k4 = rem % self.psi.steps;
        rem /= self.psi.steps;
        let k3 = rem % self.theta2.steps;
        rem /= self.theta2.steps;
        let k2 = rem % self.phi.steps;
        let k1 = rem / self.phi.steps;
        [self.theta1.value(k1), self.phi.value(k2), self.theta2.value(k3), self.psi.value(k4)]
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScanPoint {
    pub theta1: f64,
    pub phi: f64,
    pub theta2: f64,
    pub psi: f64,
    pub true_value: f64,
    pub recovered_value: f64,
    pub abs_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub convention: ScanConvention,
    pub points: Vec<ScanPoint>,
    pub max_abs_diff: f64,
    pub argmax: usize,
}

/// cos θ|0⟩ + e^{iφ} sin θ|1⟩ and its orthogonal partner sin θ|0⟩ − e^{−iφ} cos θ|1⟩.
pub fn qubit_pair(theta: f64, phase: f64) -> (Vec<C64>, Vec<C64>) {
    let (s, c) = theta.sin_cos();
    let e = C64::from_polar(1.0, phase);
    (vec![C64::new(c, 0.0), e * s], vec![C64::new(s, 0.0), -e.conj() * c])
}

fn local_operator(theta: f64, phase: f64, convention: ScanConvention) -> ComplexMatrix {
    let (u, v) = qubit_pair(theta, phase);
    let p = ComplexMatrix::outer(&u, &u);
    match convention {
        ScanConvention::Projector => p,
        ScanConvention::Correlator => &p - &ComplexMatrix::outer(&v, &v),
    }
}

/// Alice–Charlie operator left after Bob's non-selective identity, on Ai ⊗ Ci.
pub fn nonselective_ac(p: &impl ProcessLike) -> Result<ComplexMatrix> {
    let db = p.layout().leg("Bi")?.dim;
    let c = condition(p, "B", &ComplexMatrix::identity(db))?;
    Ok(input_state_of(&c.matrix, &c.layout)?.0)
}

/// |⟨C⟩_true − ⟨C⟩_rec| over the grid with Bob non-selective.
pub fn deviation_scan(
    true_p: &impl ProcessLike,
    recovered_p: &impl ProcessLike,
    grid: &ScanGrid,
    convention: ScanConvention,
) -> Result<ScanResult> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty scan grid".into()));
    }
    let rt = nonselective_ac(true_p)?;
    let rr = nonselective_ac(recovered_p)?;
    if rt.rows() != 4 {
        return Err(Error::DimensionMismatch("deviation scans need qubit Alice and Charlie".into()));
    }
    let points: Vec<ScanPoint> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let [t1, ph, t2, ps] = grid.point(i);
            let op = kron(&local_operator(t1, ph, convention), &local_operator(t2, ps, convention));
            let tv = op.trace_product(&rt).re;
            let rv = op.trace_product(&rr).re;
            ScanPoint { theta1: t1, phi: ph, theta2: t2, psi: ps, true_value: tv, recovered_value: rv, abs_diff: (tv - rv).abs() }
        })
        .collect();
    let (argmax, max_abs_diff) = points
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, p)| if p.abs_diff > bv { (i, p.abs_diff) } else { (bi, bv) });
    Ok(ScanResult { convention, points, max_abs_diff, argmax })
}

/// Leg-local noise used to emulate imperfect preparation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Depolarizing probability applied to every leg.
    pub depolarizing: f64,
    /// Scale of a seeded random unitary exp(−i ε H) on every leg (‖H‖_F = 1).
    pub rotation: f64,
}

impl NoiseModel {
    pub fn depolarizing(p: f64) -> Self {
        Self { depolarizing: p, rotation: 0.0 }
    }
}

/// Applies the noise model leg by leg; unit trace is preserved.
pub fn noisy_replay(gamma: &DensityMatrix, dims: &[usize], noise: NoiseModel, seed: u64) -> Result<DensityMatrix> {
    if !(0.0..=1.0).contains(&noise.depolarizing) {
        return Err(Error::InvalidArgument("depolarizing strength must lie in [0, 1]".into()));
    }
    let labels: Vec<String> = (0..dims.len()).map(|k| format!("q{k}")).collect();
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let layout = LegLayout::inputs(&label_refs, dims);
    layout.check_matrix(gamma)?;
    let mut rho = gamma.clone();
    if noise.rotation != 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let us = dims
            .iter()
            .map(|&d| unitary_exp(&random_hermitian(&mut rng, d), noise.rotation))
            .collect::<Result<Vec<_>>>()?;
        let u = kron_all(us.iter());
        rho = u.matmul(&rho).matmul(&u.adjoint());
    }
    if noise.depolarizing > 0.0 {
        for (k, &d) in dims.iter().enumerate() {
            let others: Vec<&str> = label_refs.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, l)| *l).collect();
            let reduced = partial_trace(&rho, &layout, &others)?.0;
            let staged = kron(&reduced, &ComplexMatrix::identity(d).scale(1.0 / d as f64));
            let mut staged_labels = others.clone();
            staged_labels.push(label_refs[k]);
            let staged_dims: Vec<usize> = staged_labels.iter().map(|l| layout.leg(l).map(|x| x.dim)).collect::<Result<_>>()?;
            let staged_layout = LegLayout::inputs(&staged_labels, &staged_dims);
            let (mixed, _) = permute(&staged, &staged_layout, &label_refs)?;
            rho = &rho.scale(1.0 - noise.depolarizing) + &mixed.scale(noise.depolarizing);
        }
    }
    Ok(rho.hermitian_part())
}

fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, d: usize) -> ComplexMatrix {
    let g = ComplexMatrix::from_fn(d, d, |_, _| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let h = g.hermitian_part();
    let n = h.frobenius_norm();
    h.scale(1.0 / n)
}

/// Reference recovered states written in closed form.
pub mod reference {
    use super::*;
    use crate::linalg::ZERO;

    fn qubit_marginal(offdiag: f64) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.5, offdiag], &[offdiag, 0.5]])
    }

    /// Explicit Θ duals written out by hand.
    pub fn theta_duals() -> [ComplexMatrix; 3] {
        let s2 = 2f64.sqrt();
        let h = (1.0 + s2) / 2.0;
        [
            ComplexMatrix::from_real_rows(&[&[-s2 / 2.0, 0.5], &[0.5, 1.0 + s2 / 2.0]]),
            ComplexMatrix::from_real_rows(&[&[1.0, -h], &[-h, 0.0]]),
            ComplexMatrix::from_real_rows(&[&[1.0, 0.5], &[0.5, 0.0]]),
        ]
    }

    /// Event probabilities {2(3 − 2√2), 2(3 − 2√2), 8√2 − 11}.
    pub fn theta_probabilities() -> [f64; 3] {
        let s2 = 2f64.sqrt();
        [2.0 * (3.0 - 2.0 * s2), 2.0 * (3.0 - 2.0 * s2), 8.0 * s2 - 11.0]
    }

    /// Conditional single-qubit marginals with the tabulated four-digit coherences.
    pub fn lambda_conditional_marginals() -> [ComplexMatrix; 3] {
        [qubit_marginal(0.008967), qubit_marginal(0.1976), qubit_marginal(-0.1652)]
    }

    /// Recovered Process 1 state assembled from the tabulated marginals, duals and probabilities.
    pub fn recovered_lambda() -> ComplexMatrix {
        let ms = lambda_conditional_marginals();
        let ds = theta_duals();
        let ps = theta_probabilities();
        let mut acc = ComplexMatrix::zeros(8, 8);
        for ((m, d), p) in ms.iter().zip(&ds).zip(ps) {
            acc += &kron_all([m, d, m]).scale(p);
        }
        acc
    }

    /// Recovered Process 2 state: ½(1/2 ⊗ 1₀₁/2 ⊗ 1/2) + ½(|0⟩⟨0| ⊗ |2⟩⟨2| ⊗ |0⟩⟨0|).
    ///
    /// Bob's factors are the Ξ elements divided by their rank.
    pub fn recovered_omega() -> ComplexMatrix {
        let half = ComplexMatrix::identity(2).scale(0.5);
        let k0 = ComplexMatrix::diag(&[1.0, 0.0]);
        let b1 = ComplexMatrix::diag(&[0.5, 0.5, 0.0]);
        let b2 = ComplexMatrix::diag(&[0.0, 0.0, 1.0]);
        let mut acc = kron_all([&half, &b1, &half]).scale(0.5);
        acc += &kron_all([&k0, &b2, &k0]).scale(0.5);
        debug_assert!(acc[(0, 1)] == ZERO);
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::{theta_povm, xi_noisy};
    use crate::linalg::fidelity;
    use crate::process::build_common_cause;
    use crate::states::{lambda_state, omega_state};

    #[test]
    fn omega_recovery_matches_closed_form() {
        let o = build_common_cause(&omega_state(), [2, 3, 2], (2, 3)).unwrap();
        let r = recover(&o, &xi_noisy()).unwrap();
        assert!(r.state().max_abs_diff(&reference::recovered_omega()) < 1e-14);
        assert!((fidelity(r.state(), &reference::recovered_omega()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovered_preserves_instrument_statistics() {
        let l = build_common_cause(&lambda_state(), [2, 2, 2], (2, 2)).unwrap();
        let inst = theta_povm();
        let r = recover(&l, &inst).unwrap();
        let i = ComplexMatrix::identity(2);
        for (x, e) in inst.matrices().enumerate() {
            let pt = born_rule_povm(&l, &[i.clone(), e.clone(), i.clone()]).unwrap();
            let pr = born_rule_povm(&r, &[i.clone(), e.clone(), i.clone()]).unwrap();
            assert!((pt - pr).abs() < 1e-12, "event {x}");
        }
    }

    #[test]
    fn span_violation_is_an_error() {
        let o = build_common_cause(&omega_state(), [2, 3, 2], (2, 3)).unwrap();
        let r = recover(&o, &xi_noisy()).unwrap();
        let sz = ComplexMatrix::diag(&[1.0, -1.0, 0.0]);
        let i2 = ComplexMatrix::identity(2);
        let obs = Observable::product(i2.clone(), sz, i2.clone());
        assert!(matches!(expectation(&r, &obs), Err(Error::SpanViolation(_))));
        assert!(expectation(&o, &obs).is_ok());
    }

    #[test]
    fn grid_enumeration_order() {
        let g = ScanGrid {
            theta1: Axis::linspace(0.0, 1.0, 2),
            phi: Axis::fixed(0.5),
            theta2: Axis::linspace(0.0, 2.0, 3),
            psi: Axis::fixed(0.0),
        };
        assert_eq!(g.len(), 6);
        assert_eq!(g.point(0), [0.0, 0.5, 0.0, 0.0]);
        assert_eq!(g.point(4), [1.0, 0.5, 1.0, 0.0]);
    }

    #[test]
    fn noise_limits() {
        let l = lambda_state();
        let same = noisy_replay(&l, &[2, 2, 2], NoiseModel::depolarizing(0.0), 1).unwrap();
        assert!(same.max_abs_diff(&l) < 1e-15);
        let full = noisy_replay(&l, &[2, 2, 2], NoiseModel::depolarizing(1.0), 1).unwrap();
        assert!(full.max_abs_diff(&ComplexMatrix::identity(8).scale(0.125)) < 1e-15);
        let w = omega_state();
        let n = noisy_replay(&w, &[2, 3, 2], NoiseModel { depolarizing: 0.1, rotation: 0.05 }, 9).unwrap();
        assert!((n.trace().re - 1.0).abs() < 1e-14);
    }
}
