use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum HomError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid Zernike term (n={n}, m={m}): {reason}")]
    InvalidZernike { n: i32, m: i32, reason: &'static str },

    #[error("duplicate Zernike term (n={n}, m={m})")]
    DuplicateZernike { n: i32, m: i32 },

    #[error("quadrature did not converge for kernel {kernel} at indices ({i}, {j}): relative change {change:.3e}")]
    KernelNotConverged {
        kernel: &'static str,
        i: i32,
        j: i32,
        change: f64,
    },

    #[error("quadrature did not converge: {0}")]
    NotConverged(String),

    #[error("mask does not match kernel table: {0}")]
    MaskMismatch(String),

    #[error("modulator aperture is empty")]
    EmptyAperture,

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("quadrature budget exceeded: {points} effective points (limit {limit})")]
    BudgetExceeded { points: f64, limit: f64 },

    #[error("overlapping sets {first} and {second} contain a common sample")]
    OverlappingSets { first: usize, second: usize },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HomError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> HomError {
    HomError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
