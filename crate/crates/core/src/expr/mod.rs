//! Defining-function expressions: parsing, evaluation, Taylor jets and the
//! built-in domain corpus.

mod ast;
mod builtin;
mod parse;

pub use ast::{bump, bump_series, ExprAst, Node};
pub use builtin::{builtin, example52_c_max, DomainSpec, BUILTIN_NAMES};
pub use parse::parse;

use thiserror::Error;

use crate::jets::JetError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("coordinate index {index} at byte {pos} is outside 1..={n}")]
    IndexOutOfRange { pos: usize, index: usize, n: usize },
    #[error("exponent '{text}' at byte {pos} is not a positive integer")]
    NonIntegerExponent { pos: usize, text: String },
    #[error("complex dimension must be at least 1, got {0}")]
    Dimension(usize),
    #[error("point has {got} real coordinates, expected {expected}")]
    PointDimension { expected: usize, got: usize },
    #[error("division by zero: denominator {denominator} vanishes")]
    DivisionByZero { denominator: String },
    #[error(transparent)]
    Jet(JetError),
    #[error("unknown domain '{0}'")]
    UnknownDomain(String),
    #[error("parameter {name} = {value} is out of range: {reason}")]
    Parameter {
        name: String,
        value: f64,
        reason: String,
    },
}
