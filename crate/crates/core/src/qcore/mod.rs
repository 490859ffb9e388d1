//! Dense complex linear algebra over small labeled tensor-product spaces.
//!
//! Conventions shared by every module:
//!
//! * amplitudes are indexed row-major in the listed subsystem order, so the
//!   first subsystem is the most significant digit;
//! * a two-level atom has `g = 0`, `e = 1`;
//! * Fock states are listed in ascending photon number.

mod density;
mod layout;
mod operator;
mod state;

pub use density::{fidelity_pure, partial_trace, DensityMatrix};
pub use layout::{SubsystemLayout, DEFAULT_DIM_CAP};
pub use operator::{annihilation, embed, embed_on, OperatorMatrix};
pub use state::{tensor, StateVector};

pub type C64 = num_complex::Complex64;

/// Atom ground-state digit.
pub const G: usize = 0;
/// Atom excited-state digit.
pub const E: usize = 1;

/// Tolerance for amplitude equality.
pub const AMP_TOL: f64 = 1e-12;
/// Floor for eigenvalues of a density matrix.
pub const POSITIVITY_TOL: f64 = 1e-10;
