use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// A model-text parse failure, carrying the 1-based line it occurred on.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("state space of {states} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { states: u128, cap: u128 },

    #[error("no state satisfies all hard features")]
    Infeasible,

    #[error("permutation ground sizes differ ({0} vs {1})")]
    SizeMismatch(usize, usize),

    #[error("not a bijection: {0}")]
    NotABijection(String),

    #[error("orbit exceeds the cap of {0} points")]
    OrbitCapExceeded(usize),

    #[error("group closure exceeds the cap of {0} elements")]
    GroupCapExceeded(usize),

    #[error("variable '{0}' is not Boolean")]
    NonBooleanVariable(String),

    #[error("automorphism search exceeded the budget of {0} tree nodes")]
    SearchBudgetExceeded(u64),

    #[error("node permutation does not lift to a VV permutation: {0}")]
    InvalidLift(String),

    #[error("invalid VV permutation: {0}")]
    InvalidPermutation(String),

    #[error("variable permutation maps between domains of different size: {0}")]
    DomainMismatch(String),

    #[error("renaming space of {size} renamings exceeds the cap of {cap}")]
    RenamingSpaceTooLarge { size: u128, cap: u128 },

    #[error("reduced/original probability ratio is not constant: {0}")]
    RatioNotConstant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::StateSpaceTooLarge { .. }
            | Error::OrbitCapExceeded(_)
            | Error::GroupCapExceeded(_)
            | Error::SearchBudgetExceeded(_)
            | Error::RenamingSpaceTooLarge { .. } => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
