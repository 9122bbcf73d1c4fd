use thiserror::Error;

/// Failures raised by the solvers and bound computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {actual})")]
    Dimension {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    /// The requested correlation exceeds what the votes can support.
    #[error("infeasible constraint: mean |a| = {mean_abs_vote} < lambda = {lambda}")]
    InfeasibleConstraint { mean_abs_vote: f64, lambda: f64 },

    /// Correlation bound at or below zero; the game is undefined.
    #[error("degenerate correlation bound lambda = {lambda} (must be > 0)")]
    DegenerateBound { lambda: f64 },

    #[error("abstain probability {prob} at index {index} is too close to 1")]
    DegenerateAbstain { index: usize, prob: f64 },

    #[error("abstain cost alpha = {alpha} must be positive")]
    InvalidCost { alpha: f64 },

    #[error("infinite divergence: {0}")]
    InfiniteDivergence(String),

    /// The single-constraint box LP has an empty feasible set.
    #[error("infeasible box LP: max a.z = {max_lhs} < b = {rhs}")]
    Infeasible { max_lhs: f64, rhs: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            actual,
        })
    }
}
