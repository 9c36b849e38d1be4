//! Scalar field expressions over the plane.
//!
//! Fields are written in a small grammar over `x` and `y`, parsed into an
//! [`Expr`], evaluated pointwise or on truncated Taylor series, and
//! differentiated symbolically to any order.

pub mod ast;
pub mod field;
pub mod parse;
pub mod series;

pub use ast::{differentiate, EvalError, Expr, Func, Var};
pub use field::ScalarField;
pub use parse::{parse_expr, ParseError};
pub use series::Series;
