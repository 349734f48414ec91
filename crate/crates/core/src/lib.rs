//! Standard and weighted least-squares track estimators for a toy
//! silicon tracker, with the Monte Carlo harness that compares their
//! variances and the line-shape analysis of their sampling distributions.
//!
//! Positions are in strip widths (63 µm). Modules:
//!
//! - [`hit_models`]: zero-mean hit-error densities (Gaussian, rectangular, triangular).
//! - [`geometry`]: centred layer coordinates.
//! - [`estimators`]: closed-form fits, information matrices and predicted variances.
//! - [`lineshape`]: quality-sequence enumeration, mixture line-shapes and their maxima.
//! - [`montecarlo`]: track ensembles, covariance identities and variance inequalities.
//! - [`cli`]: configuration, experiment drivers and file output.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod geometry;
pub mod hit_models;
pub mod lineshape;
pub mod montecarlo;

pub use error::{Error, Result};
