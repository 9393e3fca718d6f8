//! Graded exterior algebra over explicit charts.

mod chart;
mod form;
mod load;

pub use chart::{Chart, ChartBuilder, Conj, Generator};
pub use form::{FormExpr, Word};
pub use load::{load_chart, load_chart_unchecked, parse_form, FormAlgebra};

use thiserror::Error;

use crate::expr::ExprError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("forms belong to different charts")]
    ChartMismatch,
    #[error("degree mismatch: expected {expected}, found {found}")]
    Degree { expected: usize, found: usize },
    #[error("no exterior-derivative rule for {0}")]
    MissingRule(String),
    #[error("no substitution given for generator {0}")]
    Incomplete(String),
    #[error("malformed word: {0}")]
    MalformedWord(String),
    #[error("auxiliary generator {0} has no conjugate and may not be extracted")]
    Auxiliary(String),
    #[error("unknown generator {0}")]
    UnknownGenerator(String),
    #[error("duplicate declaration: {0}")]
    Duplicate(String),
    #[error("d∘d does not vanish on {0}")]
    DSquared(String),
    #[error("chart file line {line}: {message}")]
    Load { line: usize, message: String },
}
