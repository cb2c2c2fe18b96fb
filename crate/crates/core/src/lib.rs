//! Metamorphic-relation prioritization laboratory.
//!
//! Subject programs are written in MiniLang ([`minilang`]), analysed into
//! control-flow and dependence graphs ([`dependence`]) and executed with
//! coverage tracing ([`exec`]). Metamorphic relations ([`mt`]) are scored by
//! statement centrality ([`centrality`]) and ordered alongside fault-based,
//! coverage-based and random baselines ([`prioritize`]); orderings are judged
//! against first-order mutants ([`mutation`]) with the measures in
//! [`evaluate`]. [`pipeline`] wires the whole procedure together.

pub mod centrality;
pub mod dependence;
pub mod evaluate;
pub mod exec;
pub mod formats;
pub mod minilang;
pub mod mt;
pub mod mutation;
pub mod pipeline;
pub mod prioritize;
pub mod rational;
pub mod report;

use thiserror::Error;

pub use minilang::{StatementId, ParseError, Program};

/// A statement or function that is not part of the program being queried.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LookupError {
    #[error("unknown statement {0}")]
    UnknownStatement(StatementId),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
}
