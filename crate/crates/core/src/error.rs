use thiserror::Error;

use crate::elliptic::SolveStats;
use crate::second_variation::Restriction;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    InvalidInput { what: &'static str, reason: String },

    #[error("curve escapes the strip: max |height| = {max_height} reaches the limit {limit}")]
    CurveEscapesStrip { max_height: f64, limit: f64 },

    #[error("grid has nx = {nx} columns but the curve has {nodes} nodes")]
    GridMismatch { nx: usize, nodes: usize },

    #[error("conjugate gradient did not converge ({0})")]
    SolverDiverged(SolveStats),

    #[error("restriction `{0}` is not available for this curve")]
    InvalidRestriction(Restriction),

    #[error("the Gram matrix of (.,.)~ is singular on the chosen subspace")]
    GramSingular,

    #[error("eigen iteration stopped after {iterations} iterations without converging (last estimate {estimate}, relative change {change:e})")]
    NoConvergence {
        iterations: usize,
        estimate: f64,
        change: f64,
    },

    #[error("degenerate pencil: {0}")]
    DegeneratePencil(String),

    #[error("mode index {0} is odd; periodic modes need an even index")]
    OddMode(u32),

    #[error("need at least 5 symmetric samples around t = 0, got {0}")]
    InsufficientSamples(usize),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidInput {
        what,
        reason: reason.into(),
    }
}
