use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: &'static str },

    #[error("amplitude cutoff {required} exceeds the hard maximum {max}")]
    CutoffOverflow { required: usize, max: usize },

    #[error("the {total_n}-photon component has zero generation probability")]
    ZeroProbability { total_n: usize },

    #[error("rotation block for N = {total_n} exceeds the ceiling N <= {max}")]
    SizeExceeded { total_n: usize, max: usize },

    #[error("input fields are not phase matched (cos(theta_b - 2 theta_a) != 1)")]
    NotPhaseMatched,

    #[error("outside the domain of the closed-form approximation: {0}")]
    Domain(&'static str),

    #[error("need at least {need} data points, got {got}")]
    InsufficientData { got: usize, need: usize },

    #[error("likelihood is flat: every record is an overflow or vacuum event")]
    DegenerateLikelihood,

    #[error("eigensolver did not converge for N = {total_n}")]
    NoConvergence { total_n: usize },
}
