//! Arithmetic expressions in `t` and `x`.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 't' | 'x' | 'pi' | func '(' expr ')' | '(' expr ')'
//! func   := 'sin' | 'cos' | 'exp'
//! ```
//! `^` is right-associative and binds tighter than unary minus, so
//! `-x^2 = -(x^2)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("unexpected character '{ch}' at offset {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unknown identifier '{name}' at offset {pos}")]
    UnknownIdent { name: String, pos: usize },
    #[error("malformed number '{text}' at offset {pos}")]
    BadNumber { text: String, pos: usize },
    #[error("expected {expected} at offset {pos}")]
    Expected { expected: &'static str, pos: usize },
    #[error("empty expression")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    T,
    X,
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, t: f64, x: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::T => t,
            Expr::X => x,
            Expr::Neg(e) => -e.eval(t, x),
            Expr::Call(f, e) => {
                let v = e.eval(t, x);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                }
            }
            Expr::Bin(op, a, b) => {
                let (a, b) = (a.eval(t, x), b.eval(t, x));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b),
                }
            }
        }
    }

    /// True when the expression never reads `t`.
    pub fn is_time_independent(&self) -> bool {
        match self {
            Expr::T => false,
            Expr::Num(_) | Expr::X => true,
            Expr::Neg(e) | Expr::Call(_, e) => e.is_time_independent(),
            Expr::Bin(_, a, b) => a.is_time_independent() && b.is_time_independent(),
        }
    }
}

fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::T => f.write_str("t"),
            Expr::X => f.write_str("x"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Call(func, e) => {
                let name = match func {
                    Func::Sin => "sin",
                    Func::Cos => "cos",
                    Func::Exp => "exp",
                };
                write!(f, "{name}({e})")
            }
            Expr::Bin(op, a, b) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                    BinOp::Pow => '^',
                };
                write!(f, "({a} {sym} {b})")
            }
        }
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        parse(s)
    }
}

pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    p.skip_ws();
    if p.pos == p.src.len() {
        return Err(ParseError::Empty);
    }
    let e = p.expr()?;
    p.skip_ws();
    if let Some(&c) = p.src.get(p.pos) {
        return Err(ParseError::UnexpectedChar {
            ch: c as char,
            pos: p.pos,
        });
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|c| c.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat(b'-') {
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.unary()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let start = {
            self.skip_ws();
            self.pos
        };
        match self.src.get(self.pos).copied() {
            None => Err(ParseError::Expected {
                expected: "operand",
                pos: start,
            }),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return Err(ParseError::Expected {
                        expected: "')'",
                        pos: self.pos,
                    });
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(start),
            Some(c) if c.is_ascii_alphabetic() => {
                while self
                    .src
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
                let func = match name {
                    "t" => return Ok(Expr::T),
                    "x" => return Ok(Expr::X),
                    "pi" => return Ok(Expr::Num(std::f64::consts::PI)),
                    "sin" => Func::Sin,
                    "cos" => Func::Cos,
                    "exp" => Func::Exp,
                    _ => {
                        return Err(ParseError::UnknownIdent {
                            name: name.to_string(),
                            pos: start,
                        });
                    }
                };
                if !self.eat(b'(') {
                    return Err(ParseError::Expected {
                        expected: "'(' after function name",
                        pos: self.pos,
                    });
                }
                let arg = self.expr()?;
                if !self.eat(b')') {
                    return Err(ParseError::Expected {
                        expected: "')'",
                        pos: self.pos,
                    });
                }
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Some(c) => Err(ParseError::UnexpectedChar {
                ch: c as char,
                pos: start,
            }),
        }
    }

    fn number(&mut self, start: usize) -> Result<Expr, ParseError> {
        let digits = |p: &mut Self| {
            while p.src.get(p.pos).is_some_and(u8::is_ascii_digit) {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(u8::is_ascii_digit) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or_default();
        text.parse::<f64>().map(Expr::Num).map_err(|_| ParseError::BadNumber {
            text: text.to_string(),
            pos: start,
        })
    }
}
