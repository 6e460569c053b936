//! Permutationally invariant, full and compressed-sensing tomography of
//! N-qubit states.

pub mod analysis;
pub mod error;
pub mod linalg;
pub mod measurements;
pub mod reconstruct;
pub mod spin_rep;
pub mod synth;

pub use error::{Error, Result};
