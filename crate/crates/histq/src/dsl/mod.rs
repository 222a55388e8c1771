//! The scenario language: lexer, parser, printer and resolver.

pub mod ast;
pub mod error;
pub mod eval;
pub mod lexer;
pub mod parser;

pub use ast::Program;
pub use error::{DslError, ParseError};
pub use eval::{resolve, Query, QueryKind, Scenario};
pub use parser::{parse_expr, parse_program};

use histq_core::Tolerances;

/// Parses and resolves scenario source text.
pub fn parse_scenario(src: &str, origin: &str, tol: &Tolerances) -> Result<Scenario, DslError> {
    let program = parse_program(src)?;
    resolve(&program, origin, tol)
}
