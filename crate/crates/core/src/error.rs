use thiserror::Error;

/// Errors raised by the engine.
///
/// Variants are grouped by how a caller is expected to react: validation and
/// configuration problems are input defects, numerical problems indicate the
/// inputs were valid but a computation could not be carried out reliably.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An input value violates a documented invariant.
    #[error("invalid {what}: {invariant}")]
    Validation { what: String, invariant: String },

    /// A model or option needed for the computation is missing or inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A spectrum carries no energy, so moment ratios are undefined.
    #[error("degenerate spectrum: {0}")]
    DegenerateSpectrum(String),

    /// Not enough samples inside an extrapolation anchor bin.
    #[error("anchor error: bin [{lo}, {hi}] Hz contains {count} samples, need at least 2")]
    Anchor { lo: f64, hi: f64, count: usize },

    /// A model was evaluated outside its domain of applicability.
    #[error("model domain error: {0}")]
    ModelDomain(String),

    /// A floating-point computation failed to meet its tolerance.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Two series that must share an axis do not.
    #[error("alignment error: {0}")]
    Alignment(String),

    /// A correlation or covariance matrix could not be factorized.
    #[error("decomposition error: {0}")]
    Decomposition(String),

    /// Variance components cannot be estimated from the given table.
    #[error("unidentifiable: {0}")]
    Unidentifiable(String),

    /// A failure in one leg of a paired computation.
    #[error("{leg} leg: {source}")]
    Leg {
        leg: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(what: impl Into<String>, invariant: impl Into<String>) -> Self {
        Error::Validation {
            what: what.into(),
            invariant: invariant.into(),
        }
    }

    /// True when the error stems from invalid input rather than a failed computation.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Validation { .. }
            | Error::Config(_)
            | Error::Anchor { .. }
            | Error::ModelDomain(_)
            | Error::Alignment(_)
            | Error::Unidentifiable(_) => true,
            Error::DegenerateSpectrum(_) | Error::Numerical(_) | Error::Decomposition(_) => false,
            Error::Leg { source, .. } => source.is_input_error(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
