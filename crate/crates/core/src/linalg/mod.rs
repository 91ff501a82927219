//! Dense complex linear algebra on small labeled tensor legs.

pub mod eig;
pub mod entropy;
pub mod layout;
pub mod matrix;

pub use eig::{eigvalsh, hermitian_eig, singular_values, sqrt_psd, unitary_exp, HermitianEig};
pub use entropy::{
    conditional_mutual_information, fidelity, mutual_information, relative_entropy, trace_distance,
    von_neumann_entropy,
};
pub use layout::{contract, embed, partial_trace, permute, Direction, Leg, LegLayout};
pub use matrix::{kron, kron_all, pauli, ComplexMatrix, C64, I, ONE, ZERO};
