//! Exact symbolic scalars over the Gaussian rationals.

mod coeff;
mod eval;
mod parse;
mod scalar;
mod variable;

pub use coeff::Coeff;
pub use eval::{is_identically_zero, DomainBox, Point, ZeroTest, ZeroVerdict};
pub use parse::{parse, parse_with, Algebra, ScalarAlgebra};
pub use scalar::{sum_all, Atom, Exponent, Monomial, ScalarExpr};
pub use variable::{Reality, Variable, VariableTable};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("undeclared identifier `{0}`")]
    Undeclared(String),
    #[error("duplicate declaration of `{0}`")]
    Duplicate(String),
    #[error("reality violation: {0}")]
    Reality(String),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("domain error: {0}")]
    Domain(String),
}
