use thiserror::Error;

use crate::ncalg::Signature;
use crate::scalar::ParseCoeffError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlgebraError {
    #[error("signature mismatch: {left} vs {right}")]
    SignatureMismatch { left: Signature, right: Signature },
    #[error("letter {letter} outside 1..={n}")]
    LetterOutOfRange { letter: usize, n: usize },
    #[error("word of length {len} exceeds dmax {dmax}")]
    WordTooLong { len: usize, dmax: usize },
    #[error("expected {expected} entries, found {found}")]
    ArityMismatch { expected: usize, found: usize },
    #[error("truncation overflow: degree {degree} leaves no room below dmax {dmax}")]
    TruncationOverflow { degree: usize, dmax: usize },
    #[error("invalid signature: n={n}, dmax={dmax}")]
    InvalidSignature { n: usize, dmax: usize },
    #[error(transparent)]
    Parse(#[from] ParseCoeffError),
}

pub type AlgebraResult<T> = Result<T, AlgebraError>;
