//! Arithmetic expressions in one variable `x`.
//!
//! Maps and weight functions are written as strings like `x/2`,
//! `2 + cos(2*pi*x)` or `0.5 + 0.2*sin(2*pi*x)`. The grammar has the usual
//! binary operators with `^` binding tightest (right associative), then unary
//! minus, then `*` `/`, then `+` `-`. Supported functions: `sin`, `cos`,
//! `exp`, `ln`, `abs`, `sqrt`; named constants: `pi`, `e`.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum ExprAst {
    Const(f64),
    Var,
    Pi,
    E,
    Neg(Box<ExprAst>),
    Add(Box<ExprAst>, Box<ExprAst>),
    Sub(Box<ExprAst>, Box<ExprAst>),
    Mul(Box<ExprAst>, Box<ExprAst>),
    Div(Box<ExprAst>, Box<ExprAst>),
    Pow(Box<ExprAst>, Box<ExprAst>),
    Sin(Box<ExprAst>),
    Cos(Box<ExprAst>),
    Exp(Box<ExprAst>),
    Ln(Box<ExprAst>),
    Abs(Box<ExprAst>),
    Sqrt(Box<ExprAst>),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn lex(input: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = input.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                toks.push((i, Tok::Plus));
                i += 1;
            }
            b'-' => {
                toks.push((i, Tok::Minus));
                i += 1;
            }
            b'*' => {
                toks.push((i, Tok::Star));
                i += 1;
            }
            b'/' => {
                toks.push((i, Tok::Slash));
                i += 1;
            }
            b'^' => {
                toks.push((i, Tok::Caret));
                i += 1;
            }
            b'(' => {
                toks.push((i, Tok::LParen));
                i += 1;
            }
            b')' => {
                toks.push((i, Tok::RParen));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // Exponent only when a digit actually follows, so `2*e`
                // still lexes as a constant times the named constant.
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text = &input[start..i];
                let value: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("invalid number `{text}`"),
                })?;
                toks.push((start, Tok::Num(value)));
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                toks.push((start, Tok::Ident(input[start..i].to_string())));
            }
            _ => {
                return Err(Error::Syntax {
                    offset: i,
                    message: format!("unexpected character `{}`", &input[i..i + 1]),
                })
            }
        }
    }
    Ok(toks)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    end: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Syntax {
                offset: self.offset(),
                message: format!("expected {what}"),
            })
        }
    }

    fn expr(&mut self) -> Result<ExprAst> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprAst::Add(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.term()?;
                    lhs = ExprAst::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<ExprAst> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = ExprAst::Mul(Box::new(lhs), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let rhs = self.unary()?;
                    lhs = ExprAst::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<ExprAst> {
        if self.peek() == Some(&Tok::Minus) {
            self.pos += 1;
            let inner = self.unary()?;
            Ok(ExprAst::Neg(Box::new(inner)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<ExprAst> {
        let base = self.atom()?;
        if self.peek() == Some(&Tok::Caret) {
            self.pos += 1;
            // The exponent re-enters at `unary`, so `x^-2` parses and `^`
            // is right associative.
            let exp = self.unary()?;
            Ok(ExprAst::Pow(Box::new(base), Box::new(exp)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<ExprAst> {
        let offset = self.offset();
        match self.bump() {
            Some(Tok::Num(v)) => Ok(ExprAst::Const(v)),
            Some(Tok::LParen) => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "x" => Ok(ExprAst::Var),
                "pi" => Ok(ExprAst::Pi),
                "e" => Ok(ExprAst::E),
                "sin" | "cos" | "exp" | "ln" | "abs" | "sqrt" => {
                    self.expect(Tok::LParen, "`(` after function name")?;
                    let arg = Box::new(self.expr()?);
                    self.expect(Tok::RParen, "`)`")?;
                    Ok(match name.as_str() {
                        "sin" => ExprAst::Sin(arg),
                        "cos" => ExprAst::Cos(arg),
                        "exp" => ExprAst::Exp(arg),
                        "ln" => ExprAst::Ln(arg),
                        "abs" => ExprAst::Abs(arg),
                        _ => ExprAst::Sqrt(arg),
                    })
                }
                _ => Err(Error::UnknownIdentifier { offset, name }),
            },
            Some(_) => Err(Error::Syntax {
                offset,
                message: "expected a number, `x`, a function call or `(`".into(),
            }),
            None => Err(Error::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
        }
    }
}

/// Parses an expression string into an AST.
pub fn parse(input: &str) -> Result<ExprAst> {
    let toks = lex(input)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        end: input.len(),
    };
    let ast = p.expr()?;
    if p.pos != toks.len() {
        return Err(Error::Syntax {
            offset: p.offset(),
            message: "trailing input".into(),
        });
    }
    Ok(ast)
}

fn prec(e: &ExprAst) -> u8 {
    match e {
        ExprAst::Add(..) | ExprAst::Sub(..) => 1,
        ExprAst::Mul(..) | ExprAst::Div(..) => 2,
        ExprAst::Neg(..) => 3,
        ExprAst::Pow(..) => 4,
        _ => 5,
    }
}

fn fmt_child(e: &ExprAst, f: &mut fmt::Formatter<'_>, needs_parens: bool) -> fmt::Result {
    if needs_parens {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for ExprAst {
    /// Prints with the minimal parentheses needed so that
    /// `parse(&ast.to_string())` reproduces the same tree. The one caveat is
    /// `Const` with a negative value, which re-parses as `Neg` of the
    /// positive constant; parsing itself never produces negative constants.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExprAst::Const(v) => write!(f, "{v}"),
            ExprAst::Var => write!(f, "x"),
            ExprAst::Pi => write!(f, "pi"),
            ExprAst::E => write!(f, "e"),
            ExprAst::Neg(c) => {
                write!(f, "-")?;
                fmt_child(c, f, prec(c) < 3)
            }
            ExprAst::Add(l, r) => {
                fmt_child(l, f, false)?;
                write!(f, " + ")?;
                fmt_child(r, f, prec(r) <= 1)
            }
            ExprAst::Sub(l, r) => {
                fmt_child(l, f, false)?;
                write!(f, " - ")?;
                fmt_child(r, f, prec(r) <= 1)
            }
            ExprAst::Mul(l, r) => {
                fmt_child(l, f, prec(l) < 2)?;
                write!(f, "*")?;
                fmt_child(r, f, prec(r) <= 2)
            }
            ExprAst::Div(l, r) => {
                fmt_child(l, f, prec(l) < 2)?;
                write!(f, "/")?;
                fmt_child(r, f, prec(r) <= 2)
            }
            ExprAst::Pow(l, r) => {
                fmt_child(l, f, prec(l) < 5)?;
                write!(f, "^")?;
                fmt_child(r, f, prec(r) < 3)
            }
            ExprAst::Sin(a) => write!(f, "sin({a})"),
            ExprAst::Cos(a) => write!(f, "cos({a})"),
            ExprAst::Exp(a) => write!(f, "exp({a})"),
            ExprAst::Ln(a) => write!(f, "ln({a})"),
            ExprAst::Abs(a) => write!(f, "abs({a})"),
            ExprAst::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

fn domain<T>(node: &ExprAst, message: &str) -> Result<T> {
    Err(Error::Domain {
        subexpr: node.to_string(),
        message: message.into(),
    })
}

impl ExprAst {
    /// Evaluates at `x`. Division by zero, logarithms of non-positive
    /// numbers, square roots of negatives, `0^negative`, fractional powers
    /// of negatives and non-finite results are domain errors naming the
    /// offending subexpression.
    pub fn evaluate<F: Real>(&self, x: F) -> Result<F> {
        let v = match self {
            ExprAst::Const(c) => F::of(*c),
            ExprAst::Var => x,
            ExprAst::Pi => F::of(std::f64::consts::PI),
            ExprAst::E => F::of(std::f64::consts::E),
            ExprAst::Neg(c) => -c.evaluate(x)?,
            ExprAst::Add(l, r) => l.evaluate(x)? + r.evaluate(x)?,
            ExprAst::Sub(l, r) => l.evaluate(x)? - r.evaluate(x)?,
            ExprAst::Mul(l, r) => l.evaluate(x)? * r.evaluate(x)?,
            ExprAst::Div(l, r) => {
                let den = r.evaluate(x)?;
                if den == F::zero() {
                    return domain(self, "division by zero");
                }
                l.evaluate(x)? / den
            }
            ExprAst::Pow(l, r) => {
                let base = l.evaluate(x)?;
                let exp = r.evaluate(x)?;
                if base == F::zero() && exp < F::zero() {
                    return domain(self, "zero base with negative exponent");
                }
                if base < F::zero() && exp.fract() != F::zero() {
                    return domain(self, "negative base with non-integer exponent");
                }
                base.powf(exp)
            }
            ExprAst::Sin(a) => a.evaluate(x)?.sin(),
            ExprAst::Cos(a) => a.evaluate(x)?.cos(),
            ExprAst::Exp(a) => a.evaluate(x)?.exp(),
            ExprAst::Ln(a) => {
                let arg = a.evaluate(x)?;
                if arg <= F::zero() {
                    return domain(self, "logarithm of a non-positive number");
                }
                arg.ln()
            }
            ExprAst::Abs(a) => a.evaluate(x)?.abs(),
            ExprAst::Sqrt(a) => {
                let arg = a.evaluate(x)?;
                if arg < F::zero() {
                    return domain(self, "square root of a negative number");
                }
                arg.sqrt()
            }
        };
        if !v.is_finite() {
            return domain(self, "non-finite result");
        }
        Ok(v)
    }

    /// Convenience constructors for programmatic ASTs.
    pub fn constant(v: f64) -> Self {
        ExprAst::Const(v)
    }

    pub fn var() -> Self {
        ExprAst::Var
    }
}

/// Checks that an expression maps every grid node of the `n`-cell grid into
/// `[-eps_range, 1 + eps_range]`. `n` must be at least 1; evaluation errors
/// propagate.
pub fn validate_map_range<F: Real>(ast: &ExprAst, n: usize) -> Result<()> {
    let band = F::eps_range();
    let mut count = 0usize;
    let mut first: Option<(F, F)> = None;
    for j in 0..=n {
        let x = F::of(j as f64 / n as f64);
        let v = ast.evaluate(x)?;
        if v < -band || v > F::one() + band {
            count += 1;
            if first.is_none() {
                first = Some((x, v));
            }
        }
    }
    match first {
        None => Ok(()),
        Some((x, v)) => Err(Error::MapRange {
            x: x.to_f64().unwrap_or(f64::NAN),
            value: v.to_f64().unwrap_or(f64::NAN),
            count,
        }),
    }
}
