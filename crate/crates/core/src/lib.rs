//! Spectral analysis of self-adjoint partial integral operators `T = T1 + T2`
//! with degenerate kernels on `L2([a,b] × [c,d])`.
//!
//! Functions of two variables are represented by their samples on a tensor
//! Gauss–Legendre grid ([`quadrature::Grid2D`]); every operator identity in the
//! crate holds at quadrature precision on that grid.

pub mod error;
pub mod essran;
pub mod expr;
pub mod model;
pub mod operators;
pub mod oracle;
pub mod pie;
pub mod quadrature;
pub mod spectrum;

pub use error::SpectralError;
