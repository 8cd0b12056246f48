//! Truncated matrix models of the multiplication operators on `L²(S³) ⊕ ℂ`
//! and numerical certificates for the claims made about them.

pub mod cli_report;
pub mod dd;
pub mod error;
pub mod identity_checks;
pub mod linalg;
pub mod numerical_range;
pub mod operator_models;
pub mod poly_basis;
pub mod positivity;
pub mod sphere_measure;

pub use error::{Error, Result};
