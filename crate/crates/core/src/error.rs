use crate::protocol::PartyRole;
use crate::qmath::Qubit;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("operator dimension {0} is not a power of two no larger than 16")]
    BadDimension(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("matrix has a materially negative eigenvalue {0:e}")]
    NegativeEigenvalue(f64),
    #[error("qubit {0} is not part of the register")]
    UnknownQubit(Qubit),
    #[error("qubit {0} appears more than once")]
    DuplicateQubit(Qubit),
    #[error("register labels differ: {0:?} vs {1:?}")]
    LabelMismatch(Vec<Qubit>, Vec<Qubit>),
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("{name} = {value} is outside {range}")]
    OutOfDomain {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("POVM is not positive: smallest eigenvalue of E3 is {0:e}")]
    InvalidPovm(f64),
    #[error("expected a {expected} message, got {found}")]
    UnexpectedMessage {
        expected: &'static str,
        found: String,
    },
    #[error("operation requires branch {expected}, got branch {found}")]
    WrongBranch { expected: &'static str, found: u8 },
    #[error("{party:?} may not act on qubit {qubit}")]
    NonLocal { party: PartyRole, qubit: Qubit },
    #[error("objective does not change sign on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
