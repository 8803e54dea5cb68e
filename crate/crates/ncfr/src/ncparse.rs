//! Text format for NC rational expressions.
//!
//! ```text
//! expr   := ["-"] term {("+"|"-") term}
//! term   := factor {"*" factor}
//! factor := atom ["^-1"]
//! atom   := number | "z" digit+ | "(" expr ")"
//! number := decimal ["i"] | "i"
//! ```
//! A leading minus is accepted as shorthand for `0 - term`.

use std::fmt;

use num_complex::Complex64;

use crate::error::{NcError, Result};
use crate::linalg::{self, CMat, ZERO};
use crate::realize::{FMRealization, MatrixTuple, RANK_TOL};

/// Below this modulus an inverted operand counts as vanishing at 0.
pub const INVERT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(Complex64),
    /// Variable `z_j`, `j` in `1..=d`.
    Var(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    /// Inverse with the byte span of its operand in the source.
    Inv(Box<Expr>, (usize, usize)),
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    d: usize,
}

pub fn parse(text: &str, d: usize) -> Result<Expr> {
    if d == 0 {
        return Err(NcError::InvalidInput("alphabet size must be positive".into()));
    }
    let mut p = Parser { src: text, pos: 0, d };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < text.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(ch) = self.peek() {
            if ch.is_whitespace() {
                self.pos += ch.len_utf8();
            } else {
                break;
            }
        }
    }

    fn error(&self, msg: &str) -> NcError {
        let found = match self.peek() {
            Some(ch) => format!("{msg} (found '{ch}')"),
            None => format!("{msg} (found end of input)"),
        };
        NcError::SyntaxError { pos: self.pos, msg: found }
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = if self.eat("-") {
            Expr::Sub(Box::new(Expr::Num(ZERO)), Box::new(self.term()?))
        } else {
            self.term()?
        };
        loop {
            if self.eat("+") {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat("-") {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while self.eat("*") {
            lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        self.skip_ws();
        let start = self.pos;
        let atom = self.atom()?;
        let end = self.pos;
        if self.eat("^") {
            if !self.eat("-1") {
                return Err(self.error("expected '-1' after '^'"));
            }
            return Ok(Expr::Inv(Box::new(atom), (start, end)));
        }
        Ok(atom)
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(")") {
                    return Err(self.error("expected ')'"));
                }
                Ok(e)
            }
            Some('z') => {
                let start = self.pos;
                self.pos += 1;
                let digits_start = self.pos;
                while matches!(self.peek(), Some(ch) if ch.is_ascii_digit()) {
                    self.pos += 1;
                }
                let digits = &self.src[digits_start..self.pos];
                if digits.is_empty() {
                    return Err(self.error("expected variable index after 'z'"));
                }
                let name = &self.src[start..self.pos];
                match digits.parse::<usize>() {
                    Ok(j) if (1..=self.d).contains(&j) => Ok(Expr::Var(j)),
                    _ => Err(NcError::UnknownVariable { name: name.to_string(), pos: start, d: self.d }),
                }
            }
            Some('i') => {
                self.pos += 1;
                Ok(Expr::Num(Complex64::new(0.0, 1.0)))
            }
            Some(ch) if ch.is_ascii_digit() || ch == '.' => self.number(),
            Some(ch) if ch.is_alphabetic() => {
                let start = self.pos;
                while matches!(self.peek(), Some(ch) if ch.is_alphanumeric()) {
                    self.pos += self.peek().unwrap().len_utf8();
                }
                Err(NcError::UnknownVariable {
                    name: self.src[start..self.pos].to_string(),
                    pos: start,
                    d: self.d,
                })
            }
            _ => Err(self.error("expected number, variable or '('")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut k = i + 1;
            if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                while k < bytes.len() && bytes[k].is_ascii_digit() {
                    k += 1;
                }
                i = k;
            }
        }
        let text = &self.src[start..i];
        let value: f64 = text
            .parse()
            .map_err(|_| NcError::SyntaxError { pos: start, msg: format!("malformed number '{text}'") })?;
        self.pos = i;
        if self.peek() == Some('i') {
            self.pos += 1;
            return Ok(Expr::Num(Complex64::new(0.0, value)));
        }
        Ok(Expr::Num(Complex64::new(value, 0.0)))
    }
}

fn fmt_real(x: f64) -> String {
    if x < 0.0 {
        format!("(0 - {:?})", -x)
    } else {
        format!("{x:?}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(z) if z.im == 0.0 => write!(f, "{}", fmt_real(z.re)),
            Expr::Num(z) => {
                let im = if z.im < 0.0 { format!("(0 - {:?}i)", -z.im) } else { format!("{:?}i", z.im) };
                write!(f, "({} + {})", fmt_real(z.re), im)
            }
            Expr::Var(j) => write!(f, "z{j}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Inv(a, _) => write!(f, "({a})^-1"),
        }
    }
}

/// Compositional realization followed by minimization.
pub fn realize_expr(e: &Expr, d: usize) -> Result<FMRealization> {
    Ok(realize_rec(e, d)?.minimize(RANK_TOL))
}

fn realize_rec(e: &Expr, d: usize) -> Result<FMRealization> {
    Ok(match e {
        Expr::Num(z) => FMRealization::constant(d, *z),
        Expr::Var(j) => {
            if *j == 0 || *j > d {
                return Err(NcError::UnknownVariable { name: format!("z{j}"), pos: 0, d });
            }
            FMRealization::variable(d, *j)
        }
        Expr::Add(a, b) => realize_rec(a, d)?.add(&realize_rec(b, d)?)?.minimize(RANK_TOL),
        Expr::Sub(a, b) => realize_rec(a, d)?.sub(&realize_rec(b, d)?)?.minimize(RANK_TOL),
        Expr::Mul(a, b) => realize_rec(a, d)?.mul(&realize_rec(b, d)?)?.minimize(RANK_TOL),
        Expr::Inv(a, span) => {
            let r = realize_rec(a, d)?;
            r.invert(INVERT_TOL)
                .map_err(|_| NcError::SingularAtZero {
                    detail: format!(
                        "operand {} at bytes {}..{} has value {} at 0",
                        a, span.0, span.1, r.d0()
                    ),
                })?
                .minimize(RANK_TOL)
        }
    })
}

/// Direct matrix-arithmetic evaluation of `e` at `Z`.
pub fn eval_direct(e: &Expr, z: &MatrixTuple) -> Result<CMat> {
    let n = z.n();
    Ok(match e {
        Expr::Num(c) => CMat::identity(n, n) * *c,
        Expr::Var(j) => {
            if *j == 0 || *j > z.d() {
                return Err(NcError::UnknownVariable { name: format!("z{j}"), pos: 0, d: z.d() });
            }
            z.get(j - 1).clone()
        }
        Expr::Add(a, b) => eval_direct(a, z)? + eval_direct(b, z)?,
        Expr::Sub(a, b) => eval_direct(a, z)? - eval_direct(b, z)?,
        Expr::Mul(a, b) => eval_direct(a, z)? * eval_direct(b, z)?,
        Expr::Inv(a, _) => {
            let m = eval_direct(a, z)?;
            let cond = linalg::condition(&m);
            if !(cond < 1e14) {
                return Err(NcError::SingularPencil { cond });
            }
            linalg::solve(&m, &CMat::identity(n, n))?
        }
    })
}

/// Parse and realize in one step.
pub fn realize_str(text: &str, d: usize) -> Result<FMRealization> {
    realize_expr(&parse(text, d)?, d)
}
