use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong in the library.
///
/// Errors raised inside a collective are reported identically on every rank
/// that took part in it, so callers can unwind symmetrically.
#[derive(Debug, Error)]
pub enum Error {
    /// Communicator could not be brought up (bad backend string, unreachable
    /// peers, world size disagreement).
    #[error("initialization error: {0}")]
    Init(String),

    /// Ranks disagreed about a collective call: lengths, counts, root,
    /// operation or call sequence.
    #[error("collective contract violated: {0}")]
    Contract(String),

    /// A peer disappeared or the transport failed mid-collective.
    #[error("transport error: {0}")]
    Transport(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("broadcast error: {0}")]
    Broadcast(String),

    /// Operands live on incompatible partitions; combining them would need
    /// communication.
    #[error("distribution error: {0}")]
    Distribution(String),

    /// The (C, A, B) layout triple is not one of the supported matmul scenarios.
    #[error("unsupported multiplication scenario: {0}")]
    Scenario(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Two embedding points coincide, making the MDS update singular.
    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

impl Error {
    /// Short machine-friendly tag, used when an error has to cross a
    /// rank boundary or the C ABI.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Init(_) => ErrorKind::Init,
            Error::Contract(_) => ErrorKind::Contract,
            Error::Transport(_) => ErrorKind::Transport,
            Error::Shape(_) | Error::Broadcast(_) | Error::Distribution(_) | Error::Scenario(_) => ErrorKind::Shape,
            Error::Input(_) => ErrorKind::Input,
            Error::Numeric(_) | Error::Degenerate(_) => ErrorKind::Numeric,
            Error::Format(_) => ErrorKind::Format,
            Error::Io(_) => ErrorKind::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Init,
    Contract,
    Transport,
    Shape,
    Input,
    Numeric,
    Format,
    Io,
}
