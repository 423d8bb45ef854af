//! Bregman log-determinant divergence, Kaporin condition numbers and
//! low-rank-corrected preconditioners for PCG.

pub mod divergence;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod matio;
pub mod pcg;
pub mod precond;
pub mod rla;

pub use error::{Error, Result};
