use std::path::PathBuf;

use pan_gate_core::{DomainError, ParseError};

#[derive(Debug, thiserror::Error)]
pub enum GatewayError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("invalid topology: {0}")]
    Semantic(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Config(String),
}

impl GatewayError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GatewayError::Io { path: path.into(), source }
    }

    pub(crate) fn syntax(e: &serde_json::Error) -> Self {
        GatewayError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
    }
}
