//! Error type shared by every module in the crate.

use std::fmt;

/// Things that can go wrong when driving the scheduler library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside its documented domain.
    InvalidArgument(String),

    /// Exact clique enumeration refused to run on a graph this large.
    CliqueBudget { vertices: usize, budget: usize },

    /// The open-loop policy space is too large to enumerate.
    PolicyBudget { policies: u128, budget: u128 },

    /// Feedback reported a packet delivery to a receiver that already holds it.
    AlreadyHeld { receiver: usize, packet: usize },

    /// Every receiver already holds the whole block; there is nothing to send.
    SessionComplete,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::CliqueBudget { vertices, budget } => write!(
                f,
                "clique enumeration needs {vertices} vertices but the budget is {budget}"
            ),
            Error::PolicyBudget { policies, budget } => write!(
                f,
                "policy space has {policies} members but the budget is {budget}"
            ),
            Error::AlreadyHeld { receiver, packet } => write!(
                f,
                "receiver {receiver} already holds packet {packet}"
            ),
            Error::SessionComplete => write!(f, "all receivers hold the full block"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
