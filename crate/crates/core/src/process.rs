//! Process tensors: construction, validity checks, the temporal Born rule and conditioning.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instrument::Instrument;
use crate::linalg::entropy::relative_entropy;
use crate::linalg::layout::{contract, partial_trace, permute, Direction, LegLayout};
use crate::linalg::{hermitian_eig, kron, kron_all, ComplexMatrix, C64};
use crate::states::DensityMatrix;

pub const PSD_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-8;
pub const CAUSALITY_TOL: f64 = 1e-8;
pub const PROBABILITY_TOL: f64 = 1e-10;

/// Anything carrying a Choi matrix over a leg layout that can be contracted
/// with instrument elements.
pub trait ProcessLike {
    fn choi(&self) -> &ComplexMatrix;
    fn layout(&self) -> &LegLayout;
    /// Instrument whose span restricts where the object makes valid predictions.
    fn restricted_to(&self) -> Option<&Instrument> {
        None
    }
}

/// Positive Choi operator satisfying the causality hierarchy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProcessTensor {
    layout: LegLayout,
    matrix: ComplexMatrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProcessRepr {
    layout: LegLayout,
    matrix: ComplexMatrix,
}

impl<'de> Deserialize<'de> for ProcessTensor {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = ProcessRepr::deserialize(d)?;
        ProcessTensor::new(r.matrix, r.layout).map_err(serde::de::Error::custom)
    }
}

impl ProcessLike for ProcessTensor {
    fn choi(&self) -> &ComplexMatrix {
        &self.matrix
    }
    fn layout(&self) -> &LegLayout {
        &self.layout
    }
}

impl ProcessTensor {
    /// Checks shape, Hermiticity, positivity and trace normalization.
    pub fn new(matrix: ComplexMatrix, layout: LegLayout) -> Result<Self> {
        layout.check_matrix(&matrix)?;
        let e = hermitian_eig(&matrix)?;
        let scale = matrix.max_abs().max(1.0);
        if e.min() < -PSD_TOL * scale {
            return Err(Error::NotPositive(e.min()));
        }
        let expected = layout.output_dim() as f64;
        let tr = matrix.trace().re;
        if (tr - expected).abs() > TRACE_TOL * expected {
            return Err(Error::TraceDeviation { expected, actual: tr });
        }
        Ok(Self { layout, matrix })
    }

    /// Skips validation; for deliberately corrupted tensors in diagnostics.
    pub fn new_unchecked(matrix: ComplexMatrix, layout: LegLayout) -> Result<Self> {
        layout.check_matrix(&matrix)?;
        Ok(Self { layout, matrix })
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &LegLayout {
        &self.layout
    }

    /// Product of output-leg dimensions, the expected trace.
    pub fn trace_norm(&self) -> f64 {
        self.layout.output_dim() as f64
    }

    /// Choi state with unit trace.
    pub fn normalized(&self) -> ComplexMatrix {
        self.matrix.scale(1.0 / self.matrix.trace().re)
    }

    /// State on the input legs: tr_outputs(Γ) / Π d_out.
    pub fn input_state(&self) -> Result<(DensityMatrix, LegLayout)> {
        input_state_of(&self.matrix, &self.layout)
    }
}

pub(crate) fn input_state_of(m: &ComplexMatrix, layout: &LegLayout) -> Result<(ComplexMatrix, LegLayout)> {
    let keep: Vec<&str> =
        layout.legs().iter().filter(|l| l.direction == Direction::Input).map(|l| l.label.as_str()).collect();
    let (r, l) = partial_trace(m, layout, &keep)?;
    Ok((r.scale(1.0 / layout.output_dim() as f64), l))
}

/// Γ = γ ⊗ 1_{Ao Bo} in the canonical leg order.
pub fn build_common_cause(gamma: &DensityMatrix, input_dims: [usize; 3], output_dims: (usize, usize)) -> Result<ProcessTensor> {
    let [da, db, dc] = input_dims;
    let (dao, dbo) = output_dims;
    let d = da * db * dc;
    if gamma.rows() != d || gamma.cols() != d {
        return Err(Error::DimensionMismatch(format!(
            "state is {}x{} but input dimensions multiply to {d}",
            gamma.rows(),
            gamma.cols()
        )));
    }
    let staged = kron(gamma, &ComplexMatrix::identity(dao * dbo));
    let staged_layout = LegLayout::new(vec![
        crate::linalg::Leg::input("Ai", da),
        crate::linalg::Leg::input("Bi", db),
        crate::linalg::Leg::input("Ci", dc),
        crate::linalg::Leg::output("Ao", dao),
        crate::linalg::Leg::output("Bo", dbo),
    ])?;
    let (m, layout) = permute(&staged, &staged_layout, &["Ai", "Ao", "Bi", "Bo", "Ci"])?;
    ProcessTensor::new(m, layout)
}

/// Labels of a party's legs: `X` → (`Xi`, optional `Xo`).
pub fn party_legs(layout: &LegLayout, party: &str) -> Result<(String, Option<String>)> {
    let input = format!("{party}i");
    let output = format!("{party}o");
    if !layout.contains(&input) {
        return Err(Error::UnknownLabel(input));
    }
    let out = layout.contains(&output).then_some(output);
    Ok((input, out))
}

/// Parties of a layout in leg order, e.g. ["A", "B", "C"].
pub fn parties(layout: &LegLayout) -> Vec<String> {
    layout
        .legs()
        .iter()
        .filter(|l| l.direction == Direction::Input)
        .map(|l| l.label.trim_end_matches('i').to_string())
        .collect()
}

/// Choi operator of "measure the effect E, then prepare the maximally mixed
/// state": Eᵀ ⊗ 1/d_out on (input, output).
pub fn measure_and_discard(element: &ComplexMatrix, d_out: usize) -> ComplexMatrix {
    kron(&element.transpose(), &ComplexMatrix::identity(d_out).scale(1.0 / d_out as f64))
}

#[derive(Debug, Clone, Serialize)]
pub struct CausalityReport {
    /// One residual per stripped time step, latest first.
    pub residuals: Vec<f64>,
    pub final_trace: f64,
    pub pass: bool,
}

/// Walks the hierarchy tr_{j^i}[Υ_{j:1}] = 1_{j−1^o} ⊗ Υ_{j−1:1}, latest step first.
pub fn check_causality(p: &ProcessTensor) -> Result<CausalityReport> {
    causality_of(&p.matrix, &p.layout)
}

pub(crate) fn causality_of(m: &ComplexMatrix, layout: &LegLayout) -> Result<CausalityReport> {
    let mut r = m.clone();
    let mut l = layout.clone();
    let mut residuals = Vec::new();
    while l.len() > 1 {
        let last = l.legs().last().expect("non-empty").clone();
        if last.direction != Direction::Input {
            return Err(Error::InvalidArgument("layout must end on an input leg".into()));
        }
        let keep: Vec<&str> = l.labels().into_iter().filter(|x| *x != last.label).collect();
        let (t, tl) = partial_trace(&r, &l, &keep)?;
        let out = tl.legs().last().expect("non-empty").clone();
        if out.direction != Direction::Output {
            return Err(Error::InvalidArgument("input legs must alternate with output legs".into()));
        }
        let keep: Vec<&str> = tl.labels().into_iter().filter(|x| *x != out.label).collect();
        let (y, yl) = partial_trace(&t, &tl, &keep)?;
        let y = y.scale(1.0 / out.dim as f64);
        let rebuilt = kron(&y, &ComplexMatrix::identity(out.dim));
        residuals.push(t.frobenius_distance(&rebuilt));
        r = y;
        l = yl;
    }
    let final_trace = r.trace().re;
    let pass = residuals.iter().all(|&x| x < CAUSALITY_TOL) && (final_trace - 1.0).abs() < CAUSALITY_TOL;
    Ok(CausalityReport { residuals, final_trace, pass })
}

/// p = tr[(⊗ ops)ᵀ Γ], one Choi operator per party in leg order.
pub fn born_rule(p: &impl ProcessLike, ops: &[ComplexMatrix]) -> Result<f64> {
    let m = p.choi();
    let layout = p.layout();
    let names = parties(layout);
    if ops.len() != names.len() {
        return Err(Error::DimensionMismatch(format!("{} operators for {} parties", ops.len(), names.len())));
    }
    for (op, party) in ops.iter().zip(&names) {
        let (i, o) = party_legs(layout, party)?;
        let d = layout.leg(&i)?.dim * o.map(|o| layout.leg(&o).map(|l| l.dim)).transpose()?.unwrap_or(1);
        if op.rows() != d || op.cols() != d {
            return Err(Error::DimensionMismatch(format!("party {party} expects a {d}x{d} operator")));
        }
    }
    let full = kron_all(ops.iter());
    // tr[Xᵀ M] = Σ_ij X_ij M_ij
    let v: C64 = full.as_slice().iter().zip(m.as_slice()).map(|(a, b)| a * b).sum();
    if v.im.abs() > PROBABILITY_TOL {
        return Err(Error::InvalidArgument(format!("probability has imaginary part {:.3e}", v.im)));
    }
    if p.restricted_to().is_none() && (v.re < -PROBABILITY_TOL || v.re > 1.0 + PROBABILITY_TOL) {
        return Err(Error::NotPositive(v.re));
    }
    Ok(v.re)
}

/// Probability of POVM effects applied by every party (outputs discarded).
pub fn born_rule_povm(p: &impl ProcessLike, elements: &[ComplexMatrix]) -> Result<f64> {
    let layout = p.layout();
    let ops = parties(layout)
        .iter()
        .zip(elements)
        .map(|(party, e)| {
            let (_, o) = party_legs(layout, party)?;
            Ok(match o {
                Some(o) => measure_and_discard(e, layout.leg(&o)?.dim),
                None => e.transpose(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    born_rule(p, &ops)
}

/// Process on the remaining legs after one party observes an event.
#[derive(Debug, Clone)]
pub struct ConditionalProcess {
    pub matrix: ComplexMatrix,
    pub layout: LegLayout,
    pub probability: f64,
    pub event_index: usize,
}

impl ConditionalProcess {
    /// Unit-trace state on the remaining input legs.
    pub fn input_state(&self) -> Result<(DensityMatrix, LegLayout)> {
        let (s, l) = input_state_of(&self.matrix, &self.layout)?;
        let tr = s.trace().re;
        if tr.abs() < 1e-300 {
            return Err(Error::InvalidArgument("zero-probability event".into()));
        }
        Ok((s.scale(1.0 / tr), l))
    }

    /// Matrix divided by the event probability.
    pub fn normalized(&self) -> ComplexMatrix {
        self.matrix.scale(1.0 / self.probability)
    }
}

/// tr_X[(E ⊗ 1/d_out) Γ] for party X observing effect E; probability =
/// trace / Π(remaining output dims).
pub fn condition(p: &impl ProcessLike, party: &str, element: &ComplexMatrix) -> Result<ConditionalProcess> {
    condition_event(p, party, element, 0)
}

pub(crate) fn condition_event(
    p: &impl ProcessLike,
    party: &str,
    element: &ComplexMatrix,
    event_index: usize,
) -> Result<ConditionalProcess> {
    let layout = p.layout();
    let (i, o) = party_legs(layout, party)?;
    let din = layout.leg(&i)?.dim;
    if element.rows() != din || element.cols() != din {
        return Err(Error::DimensionMismatch(format!("element must be {din}x{din} for party {party}")));
    }
    if !element.is_hermitian(1e-10) {
        return Err(Error::InvalidInstrument("element is not Hermitian".into()));
    }
    let (op, legs) = match &o {
        Some(o) => (measure_and_discard(element, layout.leg(o)?.dim), vec![i.as_str(), o.as_str()]),
        None => (element.transpose(), vec![i.as_str()]),
    };
    let (m, l) = contract(p.choi(), layout, &legs, &op)?;
    let probability = m.trace().re / l.output_dim() as f64;
    Ok(ConditionalProcess { matrix: m, layout: l, probability, event_index })
}

/// Conditions on every element of an instrument.
pub fn condition_all(p: &impl ProcessLike, party: &str, inst: &Instrument) -> Result<Vec<ConditionalProcess>> {
    inst.matrices().enumerate().map(|(x, e)| condition_event(p, party, e, x)).collect()
}

/// γ_A ⊗ 1 ⊗ γ_B ⊗ 1 ⊗ γ_C built from single-input-leg marginals.
pub fn markov_product(p: &ProcessTensor) -> Result<ProcessTensor> {
    let m = markov_product_of(&p.matrix, &p.layout)?;
    ProcessTensor::new(m, p.layout.clone())
}

fn markov_product_of(m: &ComplexMatrix, layout: &LegLayout) -> Result<ComplexMatrix> {
    let norm = layout.output_dim() as f64;
    let factors = layout
        .legs()
        .iter()
        .map(|leg| match leg.direction {
            Direction::Input => Ok(partial_trace(m, layout, &[leg.label.as_str()])?.0.scale(1.0 / norm)),
            Direction::Output => Ok(ComplexMatrix::identity(leg.dim)),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(kron_all(factors.iter()))
}

/// S(Γ̂ ‖ Γ̂^Markov) in bits on unit-trace Choi states.
pub fn non_markovianity(p: &ProcessTensor) -> Result<f64> {
    let mk = markov_product_of(&p.matrix, &p.layout)?;
    let tr = p.matrix.trace().re;
    relative_entropy(&p.matrix.scale(1.0 / tr), &mk.scale(1.0 / tr))
}

/// Two-point Choi operators of a three-party process and their composition.
#[derive(Debug, Clone, Serialize)]
pub struct CpDivisibilityReport {
    /// ‖Λ_{Ao Bi} − 1 ⊗ γ_B‖_F
    pub ab_residual: f64,
    /// ‖Λ_{Bo Ci} − 1 ⊗ γ_C‖_F
    pub bc_residual: f64,
    /// ‖Λ_{Ao Ci} − 1 ⊗ γ_C‖_F
    pub ac_residual: f64,
    /// ‖Λ_{Bo Ci} ⋆ Λ_{Ao Bi} − Λ_{Ao Ci}‖_F (link product over B)
    pub composition_residual: f64,
    pub pass: bool,
}

/// Link product over the shared middle leg: J13 = tr_2[(J12^{T2} ⊗ 1_3)(1_1 ⊗ J23)].
pub fn link_product(j12: &ComplexMatrix, d1: usize, d2: usize, j23: &ComplexMatrix, d3: usize) -> Result<ComplexMatrix> {
    if j12.rows() != d1 * d2 || j23.rows() != d2 * d3 {
        return Err(Error::DimensionMismatch("link product operands".into()));
    }
    let pt2 = partial_transpose(j12, &[d1, d2], 1);
    let left = kron(&pt2, &ComplexMatrix::identity(d3));
    let right = kron(&ComplexMatrix::identity(d1), j23);
    let prod = left.matmul(&right);
    let l = LegLayout::inputs(&["1", "2", "3"], &[d1, d2, d3]);
    Ok(partial_trace(&prod, &l, &["1", "3"])?.0)
}

/// Transpose of one tensor factor.
pub fn partial_transpose(m: &ComplexMatrix, dims: &[usize], leg: usize) -> ComplexMatrix {
    let n = dims.len();
    let mut strides = vec![1usize; n];
    for k in (0..n - 1).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let d = m.rows();
    let s = strides[leg];
    let dl = dims[leg];
    ComplexMatrix::from_fn(d, d, |i, j| {
        let di = (i / s) % dl;
        let dj = (j / s) % dl;
        let i2 = i - di * s + dj * s;
        let j2 = j - dj * s + di * s;
        m[(i2, j2)]
    })
}

/// Verifies Λ_{Xo Yi} = 1_{Xo} ⊗ γ_{Yi} for consecutive parties and that the
/// two-step channel composes from the one-step channels.
pub fn cp_divisibility_check(p: &impl ProcessLike) -> Result<CpDivisibilityReport> {
    let m = p.choi();
    let layout = p.layout();
    let norm = layout.output_dim() as f64;
    let two_point = |o: &str, i: &str| -> Result<ComplexMatrix> {
        let d_o = layout.leg(o)?.dim as f64;
        Ok(partial_trace(m, layout, &[o, i])?.0.scale(d_o / norm))
    };
    let marginal = |i: &str| -> Result<ComplexMatrix> { Ok(partial_trace(m, layout, &[i])?.0.scale(1.0 / norm)) };
    let dao = layout.leg("Ao")?.dim;
    let dbo = layout.leg("Bo")?.dim;
    let dbi = layout.leg("Bi")?.dim;
    let dci = layout.leg("Ci")?.dim;
    let lab = two_point("Ao", "Bi")?;
    let lbc = two_point("Bo", "Ci")?;
    let lac = two_point("Ao", "Ci")?;
    let gb = marginal("Bi")?;
    let gc = marginal("Ci")?;
    let ab = lab.frobenius_distance(&kron(&ComplexMatrix::identity(dao), &gb));
    let bc = lbc.frobenius_distance(&kron(&ComplexMatrix::identity(dbo), &gc));
    let ac = lac.frobenius_distance(&kron(&ComplexMatrix::identity(dao), &gc));
    let composition = if dbi == dbo {
        link_product(&lab, dao, dbi, &lbc, dci)?.frobenius_distance(&lac)
    } else {
        f64::NAN
    };
    let tol = 1e-10;
    let pass = ab < tol && bc < tol && ac < tol && (composition.is_nan() || composition < tol);
    Ok(CpDivisibilityReport { ab_residual: ab, bc_residual: bc, ac_residual: ac, composition_residual: composition, pass })
}

/// State-level shortcuts for common-cause processes, evaluated on γ directly.
pub mod common_cause {
    use super::*;

    pub fn layout(dims: [usize; 3]) -> LegLayout {
        LegLayout::inputs(&["A", "B", "C"], &dims)
    }

    /// (p, ρ_AC) after Bob observes `element`, ρ_AC = tr_B[(1 ⊗ E ⊗ 1) γ] / p.
    pub fn condition_state(gamma: &ComplexMatrix, dims: [usize; 3], element: &ComplexMatrix) -> Result<(f64, ComplexMatrix)> {
        let (m, _) = contract(gamma, &layout(dims), &["B"], &element.transpose())?;
        let p = m.trace().re;
        if p.abs() < 1e-300 {
            return Ok((0.0, m));
        }
        Ok((p, m.scale(1.0 / p)))
    }

    /// tr[(E_A ⊗ E_B ⊗ E_C) γ]
    pub fn probability(gamma: &ComplexMatrix, ea: &ComplexMatrix, eb: &ComplexMatrix, ec: &ComplexMatrix) -> f64 {
        kron(&kron(ea, eb), ec).trace_product(gamma).re
    }

    /// Single-party marginals (γ_A, γ_B, γ_C).
    pub fn marginals(gamma: &ComplexMatrix, dims: [usize; 3]) -> Result<[ComplexMatrix; 3]> {
        let l = layout(dims);
        Ok([
            partial_trace(gamma, &l, &["A"])?.0,
            partial_trace(gamma, &l, &["B"])?.0,
            partial_trace(gamma, &l, &["C"])?.0,
        ])
    }

    /// S(γ ‖ γ_A ⊗ γ_B ⊗ γ_C), the total correlation.
    pub fn total_correlation(gamma: &ComplexMatrix, dims: [usize; 3]) -> Result<f64> {
        let [a, b, c] = marginals(gamma, dims)?;
        relative_entropy(gamma, &kron(&kron(&a, &b), &c))
    }
}
