//! Derivation and verification engine for overlap-based transition
//! probabilities.
//!
//! The crate follows one argument end to end: a transition probability that
//! only depends on the overlap `z = ⟨Ψ|Φ⟩`, takes the same form in every
//! dimension, and is normalized and orthogonality-consistent on every
//! orthonormal basis must equal `|z|²`.
//!
//! * [`hilbert`] holds states, bases, unitaries and Haar sampling.
//! * [`construction`] builds the equal-weight superposition and the
//!   partial-DFT basis that the argument rests on.
//! * [`axioms`] turns each requirement into a residual-returning check.
//! * [`derivation`] assembles the exact ledger `P(e^{iθ}√(K/N)) = K/N`.
//! * [`falsifier`] searches for witnesses against a candidate.
//! * [`montecarlo`] checks sampled frequencies against the ledger values.
//! * [`dsl`] parses candidate expressions such as `r^2 + 0.1*sin(phi)`.

pub mod axioms;
pub mod construction;
pub mod derivation;
pub mod dsl;
mod error;
pub mod falsifier;
pub mod hilbert;
pub mod montecarlo;
pub mod rng;
mod serde_util;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Tool version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
