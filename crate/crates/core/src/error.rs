use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Which half of an IDX pair a format error refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdxPart {
    Images,
    Labels,
}

impl core::fmt::Display for IdxPart {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            IdxPart::Images => "images",
            IdxPart::Labels => "labels",
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{what} = {value} is out of range ({expected})")]
    Range {
        what: &'static str,
        value: i64,
        expected: String,
    },
    #[error("cell {cell} has depth {depth}; shortcut metrics need depth >= 3")]
    DegenerateCell { cell: usize, depth: u32 },
    #[error("invalid architecture: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    Numeric(&'static str),
    #[error("stale forward cache: {0}")]
    State(&'static str),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("training diverged at epoch {epoch} (last finite epoch: {last_finite_epoch:?})")]
    Divergence {
        epoch: usize,
        last_finite_epoch: Option<usize>,
    },
    #[error("malformed IDX {part} file: {reason}")]
    Format { part: IdxPart, reason: String },
    #[error("inconsistent inputs: {0}")]
    Consistency(String),
    #[error("response values have zero variance")]
    DegenerateVariance,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("target mass {target} outside attainable range [{min}, {max}]")]
    Infeasible { target: f64, min: f64, max: f64 },
}

impl Error {
    /// Stable machine-readable identifier, used in CLI error documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Range { .. } => "range",
            Error::DegenerateCell { .. } => "degenerate_cell",
            Error::InvalidSpec(_) => "invalid_spec",
            Error::Shape(_) => "shape",
            Error::Numeric(_) => "numeric",
            Error::State(_) => "state",
            Error::Unsupported(_) => "unsupported_configuration",
            Error::Divergence { .. } => "divergence",
            Error::Format { .. } => "format",
            Error::Consistency(_) => "consistency",
            Error::DegenerateVariance => "degenerate_variance",
            Error::Domain(_) => "domain",
            Error::Infeasible { .. } => "infeasible",
        }
    }

    pub(crate) fn range(what: &'static str, value: i64, expected: impl Into<String>) -> Self {
        Error::Range {
            what,
            value,
            expected: expected.into(),
        }
    }
}
