use std::fmt;

use crate::series::Series;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        match s {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero at (x={x}, y={y})")]
    DivisionByZero { x: f64, y: f64 },
    #[error("log of non-positive argument at (x={x}, y={y})")]
    LogDomain { x: f64, y: f64 },
    #[error("non-finite value at (x={x}, y={y})")]
    NonFinite { x: f64, y: f64 },
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn x() -> Expr {
        Expr::Var(Var::X)
    }

    pub fn y() -> Expr {
        Expr::Var(Var::Y)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        let v = self.eval_raw(x, y)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { x, y })
        }
    }

    fn eval_raw(&self, x: f64, y: f64) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(Var::X) => x,
            Expr::Var(Var::Y) => y,
            Expr::Neg(a) => -a.eval_raw(x, y)?,
            Expr::Add(a, b) => a.eval_raw(x, y)? + b.eval_raw(x, y)?,
            Expr::Sub(a, b) => a.eval_raw(x, y)? - b.eval_raw(x, y)?,
            Expr::Mul(a, b) => a.eval_raw(x, y)? * b.eval_raw(x, y)?,
            Expr::Div(a, b) => {
                let d = b.eval_raw(x, y)?;
                if d == 0.0 {
                    return Err(EvalError::DivisionByZero { x, y });
                }
                a.eval_raw(x, y)? / d
            }
            Expr::Pow(a, p) => {
                let v = a.eval_raw(x, y)?;
                if *p < 0 && v == 0.0 {
                    return Err(EvalError::DivisionByZero { x, y });
                }
                v.powi(*p)
            }
            Expr::Call(f, a) => {
                let v = a.eval_raw(x, y)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Log => {
                        if v <= 0.0 {
                            return Err(EvalError::LogDomain { x, y });
                        }
                        v.ln()
                    }
                }
            }
        })
    }

    /// Evaluate with `x` and `y` replaced by truncated series.
    pub fn eval_series(&self, x: &Series, y: &Series) -> Result<Series, EvalError> {
        let at = || (x.value(), y.value());
        Ok(match self {
            Expr::Num(v) => Series::constant(*v, x.order().min(y.order())),
            Expr::Var(Var::X) => x.clone(),
            Expr::Var(Var::Y) => y.clone(),
            Expr::Neg(a) => -&a.eval_series(x, y)?,
            Expr::Add(a, b) => &a.eval_series(x, y)? + &b.eval_series(x, y)?,
            Expr::Sub(a, b) => &a.eval_series(x, y)? - &b.eval_series(x, y)?,
            Expr::Mul(a, b) => &a.eval_series(x, y)? * &b.eval_series(x, y)?,
            Expr::Div(a, b) => {
                let (px, py) = at();
                a.eval_series(x, y)?
                    .div(&b.eval_series(x, y)?)
                    .ok_or(EvalError::DivisionByZero { x: px, y: py })?
            }
            Expr::Pow(a, p) => {
                let (px, py) = at();
                a.eval_series(x, y)?
                    .powi(*p)
                    .ok_or(EvalError::DivisionByZero { x: px, y: py })?
            }
            Expr::Call(f, a) => {
                let s = a.eval_series(x, y)?;
                match f {
                    Func::Sin => s.sin_cos().0,
                    Func::Cos => s.sin_cos().1,
                    Func::Exp => s.exp(),
                    Func::Log => {
                        let (px, py) = at();
                        s.ln().ok_or(EvalError::LogDomain { x: px, y: py })?
                    }
                }
            }
        })
    }

    pub fn depends_on(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.depends_on(v),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(v) || b.depends_on(v)
            }
        }
    }

    /// Replace every occurrence of `v` by `with`.
    pub fn substitute(&self, v: Var, with: &Expr) -> Expr {
        match self {
            Expr::Num(_) => self.clone(),
            Expr::Var(w) => {
                if *w == v {
                    with.clone()
                } else {
                    self.clone()
                }
            }
            Expr::Neg(a) => neg(a.substitute(v, with)),
            Expr::Add(a, b) => add(a.substitute(v, with), b.substitute(v, with)),
            Expr::Sub(a, b) => sub(a.substitute(v, with), b.substitute(v, with)),
            Expr::Mul(a, b) => mul(a.substitute(v, with), b.substitute(v, with)),
            Expr::Div(a, b) => div(a.substitute(v, with), b.substitute(v, with)),
            Expr::Pow(a, p) => pow(a.substitute(v, with), *p),
            Expr::Call(f, a) => call(*f, a.substitute(v, with)),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Num(v) if *v < 0.0 => 3,
            _ => 5,
        }
    }
}

// Smart constructors: constant folding and 0/1 identities only.

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(u), Some(v)) => Expr::Num(u + v),
        (Some(u), _) if u == 0.0 => b,
        (_, Some(v)) if v == 0.0 => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(u), Some(v)) => Expr::Num(u - v),
        (Some(u), _) if u == 0.0 => neg(b),
        (_, Some(v)) if v == 0.0 => a,
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(u), Some(v)) => Expr::Num(u * v),
        (Some(u), _) if u == 0.0 => Expr::Num(0.0),
        (_, Some(v)) if v == 0.0 => Expr::Num(0.0),
        (Some(u), _) if u == 1.0 => b,
        (_, Some(v)) if v == 1.0 => a,
        (Some(u), _) if u == -1.0 => neg(b),
        (_, Some(v)) if v == -1.0 => neg(a),
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a.as_num(), b.as_num()) {
        (Some(u), Some(v)) if v != 0.0 => Expr::Num(u / v),
        (Some(u), _) if u == 0.0 => Expr::Num(0.0),
        (_, Some(v)) if v == 1.0 => a,
        _ => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, p: i32) -> Expr {
    match (a.as_num(), p) {
        (_, 0) => Expr::Num(1.0),
        (_, 1) => a,
        (Some(u), _) if !(u == 0.0 && p < 0) => Expr::Num(u.powi(p)),
        _ => Expr::Pow(Box::new(a), p),
    }
}

pub fn call(f: Func, a: Expr) -> Expr {
    if let Some(u) = a.as_num() {
        let v = match f {
            Func::Sin => Some(u.sin()),
            Func::Cos => Some(u.cos()),
            Func::Exp => Some(u.exp()),
            Func::Log if u > 0.0 => Some(u.ln()),
            Func::Log => None,
        };
        if let Some(v) = v {
            return Expr::Num(v);
        }
    }
    Expr::Call(f, Box::new(a))
}

/// Exact symbolic partial derivative.
pub fn differentiate(e: &Expr, v: Var) -> Expr {
    match e {
        Expr::Num(_) => Expr::Num(0.0),
        Expr::Var(w) => Expr::Num(if *w == v { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(differentiate(a, v)),
        Expr::Add(a, b) => add(differentiate(a, v), differentiate(b, v)),
        Expr::Sub(a, b) => sub(differentiate(a, v), differentiate(b, v)),
        Expr::Mul(a, b) => add(
            mul(differentiate(a, v), (**b).clone()),
            mul((**a).clone(), differentiate(b, v)),
        ),
        Expr::Div(a, b) => {
            // (a' b - a b') / b^2
            let num = sub(
                mul(differentiate(a, v), (**b).clone()),
                mul((**a).clone(), differentiate(b, v)),
            );
            div(num, pow((**b).clone(), 2))
        }
        Expr::Pow(a, p) => {
            let da = differentiate(a, v);
            mul(mul(Expr::Num(*p as f64), pow((**a).clone(), p - 1)), da)
        }
        Expr::Call(f, a) => {
            let da = differentiate(a, v);
            let outer = match f {
                Func::Sin => call(Func::Cos, (**a).clone()),
                Func::Cos => neg(call(Func::Sin, (**a).clone())),
                Func::Exp => call(Func::Exp, (**a).clone()),
                Func::Log => div(Expr::Num(1.0), (**a).clone()),
            };
            mul(outer, da)
        }
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    // `{:?}` keeps the shortest round-tripping form; the parser reads both
    // plain and exponent notation.
    let s = format!("{:?}", v);
    if v < 0.0 {
        write!(f, "({})", s)
    } else {
        write!(f, "{}", s)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({})", e)
            } else {
                write!(f, "{}", e)
            }
        };
        match self {
            Expr::Num(v) => write_num(f, *v),
            Expr::Var(Var::X) => write!(f, "x"),
            Expr::Var(Var::Y) => write!(f, "y"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                wrap(f, a, 4)
            }
            Expr::Add(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " + ")?;
                wrap(f, b, 2)
            }
            Expr::Sub(a, b) => {
                wrap(f, a, 1)?;
                write!(f, " - ")?;
                wrap(f, b, 2)
            }
            Expr::Mul(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "*")?;
                wrap(f, b, 3)
            }
            Expr::Div(a, b) => {
                wrap(f, a, 2)?;
                write!(f, "/")?;
                wrap(f, b, 3)
            }
            Expr::Pow(a, p) => {
                wrap(f, a, 5)?;
                write!(f, "^{}", p)
            }
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), a),
        }
    }
}
