//! The quadratic form `∂²F` at a critical pair and the eigenvalue problem that decides
//! strict stability.
//!
//! Curve functions are nodal vectors. The form
//! `(φ,ψ)~ = ∫_Γ ∂_sφ ∂_sψ + H²φψ - Σ H_∂Ω φψ` is the Gram matrix of [`TildeGram`];
//! `T` is the operator with `(Tφ,ψ)~ = 2∫∇v_φ·∇v_ψ`, and
//! `∂²F[φ] = ‖φ‖²~ - (Tφ,φ)~`. The pair is strictly stable when `λ₁ < 1`.

mod eigen;
mod gram;
mod operator;

pub use eigen::{lambda1, mu, mu_from, EigenEstimate, EigenSettings, DEFAULT_SEED, SEED_ENV};
pub use gram::{assemble_tilde_gram, GramConfig, Restriction, TildeGram};
pub use operator::{apply_t, second_variation_value, SecondVariation, TOperator};

use serde::Serialize;
use std::fmt;

/// Half-width of the marginal band around `λ₁ = 1`.
pub const DEFAULT_BAND: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    StrictlyStable,
    Unstable,
    Marginal,
}

impl Verdict {
    pub fn from_lambda1(lambda1: f64, band: f64) -> Self {
        if lambda1 < 1.0 - band {
            Verdict::StrictlyStable
        } else if lambda1 > 1.0 + band {
            Verdict::Unstable
        } else {
            Verdict::Marginal
        }
    }

    /// From the smallest eigenvalue of `∂²F` relative to the H¹ norm.
    pub fn from_coercivity(min_eig: f64, tolerance: f64) -> Self {
        if min_eig > tolerance {
            Verdict::StrictlyStable
        } else if min_eig < -tolerance {
            Verdict::Unstable
        } else {
            Verdict::Marginal
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::StrictlyStable => "strictly_stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}
