use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::ast::{differentiate, EvalError, Expr, Var};
use crate::parse::{parse_expr, ParseError};
use crate::series::Series;

/// An expression together with a lazily grown cache of its partial
/// derivatives, keyed by (order in x, order in y).
pub struct ScalarField {
    expr: Arc<Expr>,
    cache: Mutex<HashMap<(u32, u32), Arc<Expr>>>,
}

impl ScalarField {
    pub fn new(expr: Expr) -> Self {
        let expr = Arc::new(expr);
        let mut cache = HashMap::new();
        cache.insert((0, 0), expr.clone());
        ScalarField { expr, cache: Mutex::new(cache) }
    }

    pub fn parse(source: &str) -> Result<Self, ParseError> {
        parse_expr(source).map(ScalarField::new)
    }

    pub fn constant(v: f64) -> Self {
        ScalarField::new(Expr::Num(v))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        self.expr.eval(x, y)
    }

    /// Symbolic ∂x^nx ∂y^ny. Built by differentiating in x first, then y,
    /// reusing every intermediate from the cache.
    pub fn partial(&self, nx: u32, ny: u32) -> Arc<Expr> {
        let mut cache = self.cache.lock().expect("derivative cache poisoned");
        Self::partial_locked(&mut cache, nx, ny)
    }

    fn partial_locked(cache: &mut HashMap<(u32, u32), Arc<Expr>>, nx: u32, ny: u32) -> Arc<Expr> {
        if let Some(e) = cache.get(&(nx, ny)) {
            return e.clone();
        }
        let e = if ny > 0 {
            let prev = Self::partial_locked(cache, nx, ny - 1);
            Arc::new(differentiate(&prev, Var::Y))
        } else {
            let prev = Self::partial_locked(cache, nx - 1, 0);
            Arc::new(differentiate(&prev, Var::X))
        };
        cache.insert((nx, ny), e.clone());
        e
    }

    pub fn eval_partial(&self, nx: u32, ny: u32, x: f64, y: f64) -> Result<f64, EvalError> {
        self.partial(nx, ny).eval(x, y)
    }

    /// `[g, ∂x g, ..., ∂x^n g]` at (x, y), from the symbolic cache.
    pub fn x_derivatives(&self, x: f64, y: f64, n: usize) -> Result<Vec<f64>, EvalError> {
        (0..=n as u32).map(|k| self.eval_partial(k, 0, x, y)).collect()
    }

    pub fn eval_series(&self, x: &Series, y: &Series) -> Result<Series, EvalError> {
        self.expr.eval_series(x, y)
    }
}

impl Clone for ScalarField {
    fn clone(&self) -> Self {
        let cache = self.cache.lock().expect("derivative cache poisoned").clone();
        ScalarField { expr: self.expr.clone(), cache: Mutex::new(cache) }
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.expr)
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.expr)
    }
}

impl From<Expr> for ScalarField {
    fn from(e: Expr) -> Self {
        ScalarField::new(e)
    }
}
