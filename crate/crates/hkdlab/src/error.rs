use thiserror::Error;

/// Errors produced by the numerical core.
///
/// The enum is `Clone` so failed kernel-inverse constructions can be cached
/// per grid pair and replayed without recomputation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input outside the domain of an operation (negative time, point off the
    /// supremum grid, malformed probe, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Vector/matrix dimensions do not agree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A matrix handed to a projector-only operation is not idempotent.
    #[error("not a projector: defect {defect:.3e} exceeds tolerance {tol:.3e}")]
    NotAProjector { defect: f64, tol: f64 },

    /// The restriction of U(t,s) to the complement subspace is numerically
    /// singular, so no kernel inverse exists at this pair.
    #[error("projector family not compatible at (t, s) = ({t}, {s}): {detail}")]
    NotCompatible { t: f64, s: f64, detail: String },

    /// A subspace solve produced a residual above its certificate threshold,
    /// i.e. the right-hand side is not in the image of the restricted map.
    #[error("right-hand side outside the image of the restricted map: residual {residual:.3e}")]
    Residual { residual: f64 },

    /// Malformed time grid (empty, unsorted, negative, ...).
    #[error("grid error: {0}")]
    Grid(String),

    /// Unknown gallery example name.
    #[error("unknown example `{0}`")]
    UnknownExample(String),

    /// Unparsable rate or profile specifier.
    #[error("invalid specifier `{spec}`: {reason}")]
    Spec { spec: String, reason: String },

    /// A check was invoked on a system that fails the check's standing
    /// hypothesis (e.g. envelope estimation on a non-invariant family).
    #[error("precondition failed: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn spec(spec: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Spec {
            spec: spec.into(),
            reason: reason.into(),
        }
    }
}
