//! Implementing the two-qubit controlled rotation `exp(i(θ/2)σz⊗σz)` between
//! distant parties that share one partially entangled pair
//! `cos(α/2)|00⟩ + i sin(α/2)|11⟩`.
//!
//! - [`qmath`]: small dense complex linear algebra and labelled state vectors.
//! - [`model`]: the three-outcome measurement, its positivity constraints and
//!   the optimal success probability, with a brute-force cross-check.
//! - [`protocol`]: the LOCC protocol as two parties exchanging classical
//!   messages, including failure handling and Bell-pair recovery.
//! - [`entanglement`]: average ebit cost and the threshold angle below which
//!   it drops under one ebit.
//! - [`verify`] and [`cli`]: the built-in cross-checks and the command line.

pub mod cli;
pub mod entanglement;
pub mod error;
pub mod model;
pub mod protocol;
pub mod qmath;
pub mod search;
pub mod verify;

pub use error::{Error, Result};
