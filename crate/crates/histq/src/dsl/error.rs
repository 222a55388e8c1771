use std::fmt;

use super::lexer::Span;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    /// Byte offset into the source; at most the source length.
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl ParseError {
    pub fn new(at: Span, expected: Vec<String>, found: String) -> Self {
        Self {
            line: at.line,
            column: at.column,
            offset: at.offset,
            expected,
            found,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: expected ", self.line, self.column)?;
        match self.expected.as_slice() {
            [] => write!(f, "something else")?,
            [one] => write!(f, "{one}")?,
            many => write!(f, "one of {}", many.join(", "))?,
        }
        write!(f, ", found {}", self.found)
    }
}

impl std::error::Error for ParseError {}

/// Everything that can go wrong between source text and a runnable scenario.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DslError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("{span}: unresolved {kind} `{symbol}`")]
    Resolution {
        symbol: String,
        kind: &'static str,
        span: Span,
    },
    #[error("{span}: {message}")]
    Validation { message: String, span: Span },
}

impl DslError {
    pub fn validation(span: Span, message: impl Into<String>) -> Self {
        DslError::Validation {
            message: message.into(),
            span,
        }
    }

    /// `(line, column)` of the offending construct.
    pub fn position(&self) -> (usize, usize) {
        match self {
            DslError::Parse(e) => (e.line, e.column),
            DslError::Resolution { span, .. } | DslError::Validation { span, .. } => (span.line, span.column),
        }
    }
}
