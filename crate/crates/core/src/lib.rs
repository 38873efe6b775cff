//! Strict stability of critical pairs `(u, K)` of the Mumford-Shah functional
//! `F(u, K) = ∫_{Ω∖K} |∇u|² + H¹(K)` with Dirichlet data.
//!
//! The pipeline for a periodic strip configuration is
//!
//! 1. [`elliptic::solve_state`] for the harmonic `u` on the slit strip,
//! 2. [`validator::criticality_residuals`] to confirm the pair is critical,
//! 3. [`second_variation::TOperator`] and [`second_variation::lambda1`],
//! 4. [`second_variation::Verdict::from_lambda1`].
//!
//! [`analysis::analyze_strip`] runs all of it. Closed forms for the flat pair live in
//! [`analytic`].

pub mod analysis;
pub mod analytic;
pub mod elliptic;
pub mod error;
pub mod geometry;
pub mod second_variation;
pub mod validator;

pub use error::{Error, Result};
