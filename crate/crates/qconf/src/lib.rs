//! Confluence of q-difference equations into differential equations,
//! exercised on the Givental J-functions of projective space.
//!
//! The crate provides exact truncated-series and operator algebra over
//! rational-function coefficients, numeric special functions (theta,
//! q-Pochhammer, q-logarithm), builders for the K-theoretic and
//! cohomological J-functions of P^N, and the machinery to verify that the
//! q-side objects degenerate onto the differential side along q = q0^t,
//! t -> 0.

pub mod confluence;
pub mod error;
pub mod jfun;
pub mod linalg;
pub mod qop;
pub mod qsystems;
pub mod rings;
pub mod scalar;
pub mod series;
pub mod specfun;

pub use error::{Error, ErrorClass, Result};
