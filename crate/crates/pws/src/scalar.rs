//! Scalar fields as seen by the dynamics code.
//!
//! Plain expression fields and the composite fields produced by unfoldings
//! share one interface: pointwise values, Taylor series along a line, and
//! the derivatives built from them.

use std::fmt;
use std::sync::Arc;

use field_expr::{EvalError, ScalarField, Series};

pub trait Scalar: Send + Sync + fmt::Debug {
    fn eval(&self, x: f64, y: f64) -> Result<f64, EvalError>;

    /// Evaluate on series arguments. Callers only pass arguments that are
    /// affine in the series parameter.
    fn series(&self, x: &Series, y: &Series) -> Result<Series, EvalError>;

    /// `[v, ∂x v, ..., ∂x^n v]` at (x, y).
    fn x_derivatives(&self, x: f64, y: f64, n: usize) -> Result<Vec<f64>, EvalError> {
        let s = self.series(&Series::variable(x, n), &Series::constant(y, n))?;
        Ok(s.derivatives())
    }

    /// `(v, ∂x v, ∂y v)` at (x, y).
    fn gradient(&self, x: f64, y: f64) -> Result<(f64, f64, f64), EvalError> {
        let sx = self.series(&Series::variable(x, 1), &Series::constant(y, 1))?;
        let sy = self.series(&Series::constant(x, 1), &Series::variable(y, 1))?;
        Ok((sx.value(), sx.coeffs()[1], sy.coeffs()[1]))
    }

    fn describe(&self) -> String;
}

pub type Field = Arc<dyn Scalar>;

impl Scalar for ScalarField {
    fn eval(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        ScalarField::eval(self, x, y)
    }

    fn series(&self, x: &Series, y: &Series) -> Result<Series, EvalError> {
        self.eval_series(x, y)
    }

    fn x_derivatives(&self, x: f64, y: f64, n: usize) -> Result<Vec<f64>, EvalError> {
        ScalarField::x_derivatives(self, x, y, n)
    }

    fn gradient(&self, x: f64, y: f64) -> Result<(f64, f64, f64), EvalError> {
        Ok((
            ScalarField::eval(self, x, y)?,
            self.eval_partial(1, 0, x, y)?,
            self.eval_partial(0, 1, x, y)?,
        ))
    }

    fn describe(&self) -> String {
        self.to_string()
    }
}

pub fn expr_field(source: &str) -> Result<Field, field_expr::ParseError> {
    Ok(Arc::new(ScalarField::parse(source)?))
}

pub fn constant_field(v: f64) -> Field {
    Arc::new(ScalarField::constant(v))
}

pub fn from_expr(e: field_expr::Expr) -> Field {
    Arc::new(ScalarField::new(e))
}

/// `-F`, used to reverse time for a whole system.
#[derive(Debug, Clone)]
pub struct Negated(pub Field);

impl Scalar for Negated {
    fn eval(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        Ok(-self.0.eval(x, y)?)
    }

    fn series(&self, x: &Series, y: &Series) -> Result<Series, EvalError> {
        Ok(-&self.0.series(x, y)?)
    }

    fn x_derivatives(&self, x: f64, y: f64, n: usize) -> Result<Vec<f64>, EvalError> {
        Ok(self.0.x_derivatives(x, y, n)?.into_iter().map(|v| -v).collect())
    }

    fn gradient(&self, x: f64, y: f64) -> Result<(f64, f64, f64), EvalError> {
        let (v, a, b) = self.0.gradient(x, y)?;
        Ok((-v, -a, -b))
    }

    fn describe(&self) -> String {
        format!("-({})", self.0.describe())
    }
}
