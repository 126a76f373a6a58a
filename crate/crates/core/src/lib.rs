//! Numerical Berezin–Toeplitz quantization of compact symplectic surfaces.
//!
//! The crate builds the quantizing spaces ℋ_k of a prequantum line bundle
//! over three model surfaces (round sphere, perturbed sphere, flat torus),
//! the coherent-state maps into projective space, Toeplitz operators and
//! their dynamics, and reports every asymptotic statement as a measured
//! convergence series.

pub mod bundle;
pub mod cache;
pub mod embedding;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod hyperplane;
pub mod kernel;
pub mod linalg;
pub mod quadrature;
pub mod sampling;
pub mod series;
pub mod spectral;
pub mod toeplitz;

pub use error::{Error, Result};
