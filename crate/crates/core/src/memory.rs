//! Memory strength, Markov-order tests, conditional mutual information and the
//! projective-measurement survey.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::instrument::{random_projective_with, Instrument, SamplingMeasure};
use crate::linalg::entropy::{bipartite_marginals, conditional_mutual_information, mutual_information};
use crate::linalg::layout::partial_trace;
use crate::linalg::{hermitian_eig, kron, von_neumann_entropy, ComplexMatrix};
use crate::process::{condition_all, ProcessLike, ProcessTensor};
use crate::states::DensityMatrix;

/// Events rarer than this are reported with zero memory strength.
pub const ZERO_PROBABILITY: f64 = 1e-14;

#[derive(Debug, Clone, Serialize)]
pub struct EventMemory {
    pub probability: f64,
    /// I(Ai : Ci) of the normalized conditional state, bits.
    pub mutual_information: f64,
    /// ‖ρ_AC − ρ_A ⊗ ρ_C‖₁
    pub product_residual: f64,
    pub zero_probability: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MemoryReport {
    pub per_event: Vec<EventMemory>,
    /// Mean of per-event mutual information.
    pub aggregate_uniform: f64,
    /// Σ_x p_x I_x
    pub aggregate_weighted: f64,
    pub max_event: f64,
}

/// Conditional Ai:Ci states for each event of Bob's instrument, with probabilities.
pub fn conditional_states(p: &impl ProcessLike, inst: &Instrument) -> Result<Vec<(f64, Option<DensityMatrix>)>> {
    condition_all(p, "B", inst)?
        .into_iter()
        .map(|c| {
            if c.probability.abs() < ZERO_PROBABILITY {
                Ok((c.probability, None))
            } else {
                Ok((c.probability, Some(c.input_state()?.0)))
            }
        })
        .collect()
}

fn split_dims(p: &impl ProcessLike) -> Result<(usize, usize)> {
    Ok((p.layout().leg("Ai")?.dim, p.layout().leg("Ci")?.dim))
}

/// ‖ρ − ρ_A ⊗ ρ_C‖₁
pub fn product_residual(rho: &ComplexMatrix, da: usize, dc: usize) -> Result<f64> {
    let (a, c) = bipartite_marginals(rho, da, dc)?;
    let diff = (rho - &kron(&a, &c)).hermitian_part();
    Ok(hermitian_eig(&diff)?.values.iter().map(|v| v.abs()).sum())
}

/// Per-event mutual information between history and future for Bob's instrument.
pub fn memory_strength(p: &impl ProcessLike, inst: &Instrument) -> Result<MemoryReport> {
    let (da, dc) = split_dims(p)?;
    let per_event = conditional_states(p, inst)?
        .into_iter()
        .map(|(prob, state)| match state {
            None => Ok(EventMemory { probability: prob, mutual_information: 0.0, product_residual: 0.0, zero_probability: true }),
            Some(rho) => Ok(EventMemory {
                probability: prob,
                mutual_information: mutual_information(&rho, da, dc)?,
                product_residual: product_residual(&rho, da, dc)?,
                zero_probability: false,
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(per_event))
}

fn summarize(per_event: Vec<EventMemory>) -> MemoryReport {
    let n = per_event.len() as f64;
    let aggregate_uniform = per_event.iter().map(|e| e.mutual_information).sum::<f64>() / n;
    let aggregate_weighted = per_event.iter().map(|e| e.probability * e.mutual_information).sum();
    let max_event = per_event.iter().map(|e| e.mutual_information).fold(f64::NEG_INFINITY, f64::max);
    MemoryReport { per_event, aggregate_uniform, aggregate_weighted, max_event }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkovCriterion {
    /// ‖ρ_AC − ρ_A ⊗ ρ_C‖₁ < tol
    TraceNorm,
    /// I(A:C) < tol
    MutualInformation,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarkovOrderReport {
    pub criterion: MarkovCriterion,
    pub tolerance: f64,
    pub product_residuals: Vec<f64>,
    pub mutual_information: Vec<f64>,
    pub holds: bool,
}

/// Whether the instrument blocks the history for every event (Markov order 1 w.r.t. it).
pub fn markov_order_test(p: &impl ProcessLike, inst: &Instrument, tol: f64, criterion: MarkovCriterion) -> Result<MarkovOrderReport> {
    let report = memory_strength(p, inst)?;
    let product_residuals: Vec<f64> = report.per_event.iter().map(|e| e.product_residual).collect();
    let mi: Vec<f64> = report.per_event.iter().map(|e| e.mutual_information).collect();
    let holds = match criterion {
        MarkovCriterion::TraceNorm => product_residuals.iter().all(|&r| r < tol),
        MarkovCriterion::MutualInformation => mi.iter().all(|&r| r < tol),
    };
    Ok(MarkovOrderReport { criterion, tolerance: tol, product_residuals, mutual_information: mi, holds })
}

/// I(A:C|B) of a tripartite state, bits.
pub fn quantum_cmi(gamma: &DensityMatrix, dims: [usize; 3]) -> Result<f64> {
    conditional_mutual_information(gamma, dims)
}

/// I(A:C|B) of the unit-trace Choi state with A = (Ai, Ao), B = (Bi, Bo), C = Ci.
pub fn process_cmi(p: &ProcessTensor) -> Result<f64> {
    let m = p.normalized();
    let l = p.layout();
    let s = |keep: &[&str]| -> Result<f64> { von_neumann_entropy(&partial_trace(&m, l, keep)?.0) };
    Ok(s(&["Ai", "Ao", "Bi", "Bo"])? + s(&["Bi", "Bo", "Ci"])? - von_neumann_entropy(&m)? - s(&["Bi", "Bo"])?)
}

/// exp(−n N) with N given in bits and converted to nats.
pub fn confusion_probability(n: u32, non_markovianity_bits: f64) -> f64 {
    (-(n as f64) * non_markovianity_bits * std::f64::consts::LN_2).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct SurveyResult {
    pub measure: SamplingMeasure,
    pub cutoff: f64,
    pub samples: usize,
    pub below: usize,
    pub fraction: f64,
}

pub const MIN_SURVEY_SAMPLES: usize = 100;

/// Fraction of random projective instruments at Bob whose worst-case event
/// memory strength is below `cutoff`.
///
/// Sample `i` draws from its own ChaCha stream, so the result does not depend
/// on thread count or scheduling.
pub fn projective_survey(
    p: &(impl ProcessLike + Sync),
    cutoff: f64,
    samples: usize,
    seed: u64,
    measure: SamplingMeasure,
) -> Result<SurveyResult> {
    if samples < MIN_SURVEY_SAMPLES {
        return Err(Error::InvalidArgument(format!("survey needs at least {MIN_SURVEY_SAMPLES} samples")));
    }
    if !(cutoff > 0.0) {
        return Err(Error::InvalidArgument("cutoff must be positive".into()));
    }
    let below = (0..samples)
        .into_par_iter()
        .map(|i| -> Result<usize> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let inst = random_projective_with(&mut rng, measure);
            Ok(usize::from(memory_strength(p, &inst)?.max_event < cutoff))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(SurveyResult { measure, cutoff, samples, below, fraction: below as f64 / samples as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::{computational, qutrit_sharp, theta_povm, xi_noisy};
    use crate::process::build_common_cause;
    use crate::states::{lambda_state, omega_state, werner};

    fn lambda() -> ProcessTensor {
        build_common_cause(&lambda_state(), [2, 2, 2], (2, 2)).unwrap()
    }

    fn omega() -> ProcessTensor {
        build_common_cause(&omega_state(), [2, 3, 2], (2, 3)).unwrap()
    }

    #[test]
    fn werner_mutual_information() {
        let mi = mutual_information(&werner(1, 1.0 / 3.0).unwrap(), 2, 2).unwrap();
        assert!((mi - 0.2075).abs() < 1e-4);
    }

    #[test]
    fn z_event_zero_memory_strength() {
        let r = memory_strength(&lambda(), &computational(2)).unwrap();
        assert!((r.per_event[0].mutual_information - 0.0514).abs() < 1e-3);
    }

    #[test]
    fn xi_blocks_history_exactly() {
        let r = memory_strength(&omega(), &xi_noisy()).unwrap();
        for e in &r.per_event {
            assert!(e.mutual_information.abs() < 1e-10);
        }
        assert!(markov_order_test(&omega(), &xi_noisy(), 1e-8, MarkovCriterion::TraceNorm).unwrap().holds);
    }

    #[test]
    fn sharp_instrument_reveals_memory() {
        let t = markov_order_test(&omega(), &qutrit_sharp(), 1e-3, MarkovCriterion::TraceNorm).unwrap();
        assert!(!t.holds);
        let r = memory_strength(&omega(), &qutrit_sharp()).unwrap();
        assert!(r.per_event[4].mutual_information.abs() < 1e-10);
        for e in &r.per_event[..4] {
            assert!((e.probability - 0.125).abs() < 1e-12);
            assert!((e.mutual_information - 0.2075).abs() < 1e-3);
        }
    }

    #[test]
    fn theta_aggregates() {
        let r = memory_strength(&lambda(), &theta_povm()).unwrap();
        let mean = r.per_event.iter().map(|e| e.mutual_information).sum::<f64>() / 3.0;
        assert!((r.aggregate_uniform - mean).abs() < 1e-15);
        assert!(r.max_event < 0.02);
    }

    #[test]
    fn cmi_of_omega() {
        assert!((quantum_cmi(&omega_state(), [2, 3, 2]).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn confusion_limits() {
        assert_eq!(confusion_probability(5, 0.0), 1.0);
        assert!(confusion_probability(10_000, 0.3) < 1e-300);
        assert!((confusion_probability(1, 0.329) - 0.796).abs() < 1e-3);
    }

    #[test]
    fn survey_rejects_small_samples() {
        assert!(projective_survey(&lambda(), 0.0125, 99, 1, SamplingMeasure::Haar).is_err());
        let r = projective_survey(&lambda(), 1e9, 200, 1, SamplingMeasure::Haar).unwrap();
        assert_eq!(r.fraction, 1.0);
    }
}
