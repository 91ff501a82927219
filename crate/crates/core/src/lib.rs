//! Process-tensor toolkit for three-time common-cause quantum processes.
//!
//! Leg order is chronological: `Ai, Ao, Bi, Bo, Ci`. Operations enter the
//! generalized Born rule as Choi operators, `p = tr[(O_A ⊗ O_B ⊗ O_C)ᵀ Γ]`.
//! Instruments hold measurement effects E; measuring E and discarding the
//! system has Choi operator O = Eᵀ ⊗ 1/d_out, so on a plain state the rule
//! reduces to tr[E ρ]. Entropies are in bits.

pub mod error;
pub mod linalg;

pub use error::{Error, Result};
pub use linalg::{ComplexMatrix, LegLayout, C64};
pub mod instrument;
pub mod memory;
pub mod process;
pub mod recovery;
pub mod states;
pub mod walk;
pub mod tomo;
