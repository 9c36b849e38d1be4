//! Recursive-descent parser.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := '-' factor | base ('^' integer)?
//! base   := number | 'x' | 'y' | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Unary minus binds looser than `^`, so `-x^2` is `-(x^2)`.

use crate::ast::{Expr, Func, Var};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("exponent at byte {offset} is not an integer")]
    NonIntegerExponent { offset: usize },
}

pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut p = Parser { src: source.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn syntax(&self, message: &str) -> ParseError {
        ParseError::Syntax { offset: self.pos, message: message.to_string() }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.syntax(&format!("expected `{}`", c as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(b'-') => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(b'/') => {
                    self.pos += 1;
                    let rhs = self.factor()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let inner = self.factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        let base = self.base()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let p = self.integer()?;
            return Ok(Expr::Pow(Box::new(base), p));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let digits = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == digits {
            return Err(ParseError::NonIntegerExponent { offset: start });
        }
        if matches!(self.src.get(self.pos), Some(b'.') | Some(b'e') | Some(b'E')) {
            return Err(ParseError::NonIntegerExponent { offset: start });
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        text.parse::<i32>().map_err(|_| ParseError::NonIntegerExponent { offset: start })
    }

    fn base(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                match name {
                    "x" => Ok(Expr::Var(Var::X)),
                    "y" => Ok(Expr::Var(Var::Y)),
                    _ => match Func::from_name(name) {
                        Some(f) => {
                            self.expect(b'(')?;
                            let arg = self.expr()?;
                            self.expect(b')')?;
                            Ok(Expr::Call(f, Box::new(arg)))
                        }
                        None => Err(ParseError::UnknownIdentifier {
                            offset: start,
                            name: name.to_string(),
                        }),
                    },
                }
            }
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
        }
        if i < s.len() && s[i] == b'.' {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            let exp_digits = j;
            while j < s.len() && s[j].is_ascii_digit() {
                j += 1;
            }
            if j > exp_digits {
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).unwrap();
        self.pos = i;
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ParseError::Syntax { offset: start, message: format!("bad number `{}`", text) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_evaluates() {
        let e = parse_expr("1 - 2*x + x^3").unwrap();
        assert_eq!(e.eval(2.0, 0.0).unwrap(), 5.0);
    }

    #[test]
    fn single_variable() {
        assert_eq!(parse_expr("x").unwrap(), Expr::Var(Var::X));
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse_expr("-x^2").unwrap();
        assert_eq!(e.eval(3.0, 0.0).unwrap(), -9.0);
    }

    #[test]
    fn errors_carry_offsets() {
        assert_eq!(
            parse_expr("x + foo(1)"),
            Err(ParseError::UnknownIdentifier { offset: 4, name: "foo".into() })
        );
        assert!(matches!(parse_expr("x^2.5"), Err(ParseError::NonIntegerExponent { offset: 2 })));
        assert!(matches!(parse_expr("(x"), Err(ParseError::Syntax { offset: 2, .. })));
        assert!(matches!(parse_expr("x )"), Err(ParseError::Syntax { offset: 2, .. })));
        assert_eq!(parse_expr("  "), Err(ParseError::Empty));
    }

    #[test]
    fn exponent_notation_and_negative_powers() {
        let e = parse_expr("1.5e-3*x^-2").unwrap();
        assert!((e.eval(0.5, 0.0).unwrap() - 6e-3).abs() < 1e-15);
    }
}
