use alloc::string::String;

use crate::isd_as::IsdAs;

/// Errors from the text grammars: ISD-AS identities, policy files, TXT
/// payloads and `Strict-SCION` header values.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("invalid ISD-AS `{token}`: {reason}")]
    IsdAs { token: String, reason: &'static str },
    #[error("line {line}: {message}")]
    Policy { line: usize, message: String },
    #[error("invalid SCION address record `{record}`: {reason}")]
    Txt { record: String, reason: String },
    #[error("invalid Strict-SCION value `{value}`")]
    StrictHeader { value: String },
    #[error("unknown mode `{value}`, expected `opportunistic` or `strict`")]
    Mode { value: String },
}

impl ParseError {
    /// Line number for policy errors, `None` otherwise.
    pub fn line(&self) -> Option<usize> {
        match self {
            ParseError::Policy { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Violations of domain preconditions and type invariants.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("hop list is empty")]
    EmptyHops,
    #[error("AS {0} appears more than once on the path")]
    RepeatedHop(IsdAs),
    #[error("wildcard identity {0} is not allowed here")]
    Wildcard(IsdAs),
    #[error("invalid hop metadata for {id}: {reason}")]
    InvalidHop { id: IsdAs, reason: &'static str },
    #[error("AS {0} is not part of the topology")]
    UnknownAs(IsdAs),
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("{0} must be at least 1")]
    ZeroBound(&'static str),
    #[error("ordering metric `{0}` listed twice")]
    DuplicateMetric(&'static str),
    #[error("cannot combine an empty list of policies")]
    NoPolicies,
}
