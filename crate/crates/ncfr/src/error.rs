use thiserror::Error;

/// Errors raised by the library. Each variant maps to a stable CLI/FFI code.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum NcError {
    #[error("coefficient order exceeded: requested length {requested}, available {available}")]
    OrderExceeded { requested: usize, available: usize },
    #[error("linear pencil is numerically singular (condition estimate {cond:.3e})")]
    SingularPencil { cond: f64 },
    #[error("value at 0 is too small to invert ({detail})")]
    SingularAtZero { detail: String },
    #[error("state tuple is not pure: {0}")]
    NotPure(String),
    #[error("indeterminate within tolerance band: {0}")]
    Indeterminate(String),
    #[error("symbol is not contractive: {0}")]
    NotContractive(String),
    #[error("symbol is inner; no outer Sarason function")]
    InnerSymbol,
    #[error("operator is not positive semi-definite (eigenvalue {min_eig:.3e})")]
    NotPositive { min_eig: f64 },
    #[error("matrix is not Hermitian (defect {defect:.3e})")]
    NotHermitian { defect: f64 },
    #[error("truncation of {entries} entries exceeds the memory cap")]
    CapExceeded { entries: usize },
    #[error("syntax error at {pos}: {msg}")]
    SyntaxError { pos: usize, msg: String },
    #[error("unknown variable {name} at {pos} (alphabet size {d})")]
    UnknownVariable { name: String, pos: usize, d: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl NcError {
    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            NcError::OrderExceeded { .. } => "OrderExceeded",
            NcError::SingularPencil { .. } => "SingularPencil",
            NcError::SingularAtZero { .. } => "SingularAtZero",
            NcError::NotPure(_) => "NotPure",
            NcError::Indeterminate(_) => "Indeterminate",
            NcError::NotContractive(_) => "NotContractive",
            NcError::InnerSymbol => "InnerSymbol",
            NcError::NotPositive { .. } => "NotPositive",
            NcError::NotHermitian { .. } => "NotHermitian",
            NcError::CapExceeded { .. } => "CapExceeded",
            NcError::SyntaxError { .. } => "SyntaxError",
            NcError::UnknownVariable { .. } => "UnknownVariable",
            NcError::DimensionMismatch(_) => "DimensionMismatch",
            NcError::InvalidInput(_) => "InvalidInput",
        }
    }

    /// Position in the input text, when the error has one.
    pub fn location(&self) -> Option<usize> {
        match self {
            NcError::SyntaxError { pos, .. } | NcError::UnknownVariable { pos, .. } => Some(*pos),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, NcError>;
