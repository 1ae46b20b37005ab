//! Signal temporal logic: formulas, text syntax, and Boolean and robust
//! semantics over finite, uniformly sampled traces.

mod ast;
mod boolean;
mod parser;
mod robustness;
mod trace;

use thiserror::Error;

pub use ast::{AffineExpr, Atom, Formula, Interval, Relation, INTERVAL_EPS};
pub use boolean::boolean_sat;
pub use parser::parse_formula;
pub use robustness::{robustness, Monitor, Robustness};
pub use trace::Trace;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StlError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("singular interval [{lo},{hi}] at byte {pos}: lower bound must be below upper bound")]
    SingularInterval { pos: usize, lo: f64, hi: f64 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("sample index {index} outside trace of length {len}")]
    SampleOutOfRange { index: usize, len: usize },
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
}
