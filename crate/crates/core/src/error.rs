use thiserror::Error;

/// Position inside a text document, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TextPos {
    pub line: usize,
    pub column: usize,
}

impl std::fmt::Display for TextPos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("no element data for {0:?}")]
    MissingElementData(String),

    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("unknown space group {0:?}")]
    UnknownGroup(String),

    #[error("bad symmetry operation {text:?}: {reason}")]
    SymOp { text: String, reason: String },

    #[error("space group table: {0}")]
    GroupTable(String),

    #[error("structure is not symmetric under {group}: site {site} has no image match")]
    NotSymmetric { group: String, site: usize },

    #[error("parse error at {pos}: {message}")]
    Parse { pos: TextPos, message: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("empty sample")]
    EmptySample,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("missing property {0:?}")]
    MissingProperty(String),

    #[error("bad condition: {0}")]
    Condition(String),

    #[error("fingerprint configuration mismatch: {0} vs {1}")]
    ConfigMismatch(String, String),
}

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            pos: TextPos { line, column },
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
