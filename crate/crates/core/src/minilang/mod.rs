//! MiniLang front end: lexing, parsing, static checks, control-flow graphs
//! and operator counting for the bundled subject programs.
//!
//! The language has `int`, `bool` and fixed-length `[int]` values,
//! assignments, `if`/`else`, `while`, `return`, the `len` intrinsic and pure
//! calls between functions. Statement ids are program-global and dense from 1
//! in source order; a branch or loop header is a statement of its own.

pub mod ast;
mod cfg;
mod lexer;
mod parser;
mod pretty;
mod typeck;

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use ast::*;
pub use cfg::{build_cfg, BranchTag, Cfg, CfgEdge, CfgNode};
pub use pretty::{expr_to_string, pretty_print};

use crate::LookupError;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: u32, col: u32, message: String },
    #[error("duplicate function `{name}` at {line}:{col}")]
    DuplicateFunction { name: String, line: u32, col: u32 },
    #[error("type error at {line}:{col}: {message}")]
    Type { line: u32, col: u32, message: String },
    #[error("function `{function}` can finish without returning ({line}:{col})")]
    MissingReturn { function: String, line: u32, col: u32 },
    #[error("unreachable statement at {line}:{col}")]
    UnreachableCode { line: u32, col: u32 },
}

impl ParseError {
    pub fn position(&self) -> (u32, u32) {
        match self {
            ParseError::Syntax { line, col, .. }
            | ParseError::DuplicateFunction { line, col, .. }
            | ParseError::Type { line, col, .. }
            | ParseError::MissingReturn { line, col, .. }
            | ParseError::UnreachableCode { line, col } => (*line, *col),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parses and type-checks a whole program.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    parse_labeled(source, "v0")
}

/// Like [`parse`], tagging the program with a version label.
pub fn parse_labeled(source: &str, version_label: &str) -> Result<Program, ParseError> {
    let tokens = lexer::tokenize(source)?;
    let mut parser = parser::Parser::new(tokens);
    let functions = parser.program()?;
    typeck::check_program(&functions)?;
    Ok(Program {
        version_label: version_label.to_string(),
        functions,
        source_digest: sha256_hex(source.as_bytes()),
    })
}

/// Parses without the static checks. Mutant sources need this: deleting the
/// only definition of a variable leaves a program that fails the checks but
/// still runs, failing at the first read of the variable.
pub fn parse_unchecked(source: &str, version_label: &str) -> Result<Program, ParseError> {
    let tokens = lexer::tokenize(source)?;
    let functions = parser::Parser::new(tokens).program()?;
    Ok(Program {
        version_label: version_label.to_string(),
        functions,
        source_digest: sha256_hex(source.as_bytes()),
    })
}

/// Parses a standalone expression (used for custom relations).
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let tokens = lexer::tokenize(source)?;
    let mut parser = parser::Parser::new(tokens);
    let e = parser.expr()?;
    parser.expect_eof()?;
    Ok(e)
}

/// Arithmetic, relational and logical operator nodes in statement `s`.
/// Assignment, indexing, `len` and calls are not operators here.
pub fn count_operators(p: &Program, s: StatementId) -> Result<u32, LookupError> {
    p.statement(s)
        .map(Statement::operator_count)
        .ok_or(LookupError::UnknownStatement(s))
}
