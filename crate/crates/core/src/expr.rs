//! Parser and evaluator for operator expressions in scenario files.
//!
//! Grammar (sums of products):
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor ('*' factor)*
//! factor  := '-' factor | number | name | name '(' expr ')' | '(' expr ')'
//! ```
//!
//! Names resolve to scenario parameters (scalars), the builtin constants
//! `pi` and `e`, the identity `id`, the leg operators `a(leg)`, `adag(leg)`,
//! `sp(leg)`, `sm(leg)`, `sz(leg)`, or the real functions `cos`/`sin` on
//! scalar arguments. Operator multiplication is composition in the written
//! order (leftmost factor applied last).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hilbert::{boson_op, qubit_op, BosonOp, Operator, QubitOp, SpaceSpec};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Number { value: f64, offset: usize },
    Name { name: String, offset: usize },
    Call { name: String, arg: Box<Expr>, offset: usize },
    Neg { inner: Box<Expr>, offset: usize },
    Add { lhs: Box<Expr>, rhs: Box<Expr> },
    Sub { lhs: Box<Expr>, rhs: Box<Expr> },
    Mul { lhs: Box<Expr>, rhs: Box<Expr> },
}

impl fmt::Display for Expr {
    /// Fully parenthesized form; guaranteed to re-parse to the same value.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number { value, .. } => write!(f, "{value}"),
            Expr::Name { name, .. } => write!(f, "{name}"),
            Expr::Call { name, arg, .. } => write!(f, "{name}({arg})"),
            Expr::Neg { inner, .. } => write!(f, "(-{inner})"),
            Expr::Add { lhs, rhs } => write!(f, "({lhs} + {rhs})"),
            Expr::Sub { lhs, rhs } => write!(f, "({lhs} - {rhs})"),
            Expr::Mul { lhs, rhs } => write!(f, "({lhs} * {rhs})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
}

struct Lexer<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src: src.as_bytes(),
            pos: 0,
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next token with its byte offset, or None at end of input.
    fn next(&mut self) -> Result<Option<(Tok, usize)>> {
        self.skip_ws();
        if self.pos >= self.src.len() {
            return Ok(None);
        }
        let start = self.pos;
        let b = self.src[start];
        let tok = match b {
            b'+' => {
                self.pos += 1;
                Tok::Plus
            }
            b'-' => {
                self.pos += 1;
                Tok::Minus
            }
            b'*' => {
                self.pos += 1;
                Tok::Star
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => {
                let mut end = start;
                let mut seen_dot = false;
                while end < self.src.len() {
                    match self.src[end] {
                        b'0'..=b'9' => end += 1,
                        b'.' if !seen_dot => {
                            seen_dot = true;
                            end += 1;
                        }
                        b'e' | b'E'
                            if end > start
                                && end + 1 < self.src.len()
                                && (self.src[end + 1].is_ascii_digit()
                                    || ((self.src[end + 1] == b'+' || self.src[end + 1] == b'-')
                                        && end + 2 < self.src.len()
                                        && self.src[end + 2].is_ascii_digit())) =>
                        {
                            end += if self.src[end + 1].is_ascii_digit() { 2 } else { 3 };
                            while end < self.src.len() && self.src[end].is_ascii_digit() {
                                end += 1;
                            }
                            break;
                        }
                        _ => break,
                    }
                }
                let text = std::str::from_utf8(&self.src[start..end]).unwrap();
                let value: f64 = text.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    msg: format!("bad number `{text}`"),
                })?;
                self.pos = end;
                Tok::Num(value)
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let mut end = start;
                while end < self.src.len()
                    && (self.src[end].is_ascii_alphanumeric() || self.src[end] == b'_')
                {
                    end += 1;
                }
                let name = std::str::from_utf8(&self.src[start..end]).unwrap().to_string();
                self.pos = end;
                Tok::Ident(name)
            }
            _ => {
                return Err(Error::Syntax {
                    offset: start,
                    msg: format!("unexpected character `{}`", b as char),
                })
            }
        };
        Ok(Some((tok, start)))
    }
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    cursor: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&(Tok, usize)> {
        self.tokens.get(self.cursor)
    }

    fn bump(&mut self) -> Option<(Tok, usize)> {
        let t = self.tokens.get(self.cursor).cloned();
        if t.is_some() {
            self.cursor += 1;
        }
        t
    }

    fn expect_rparen(&mut self) -> Result<()> {
        match self.bump() {
            Some((Tok::RParen, _)) => Ok(()),
            other => Err(Error::Syntax {
                offset: other.map(|(_, o)| o).unwrap_or(self.end),
                msg: "expected `)`".into(),
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some((Tok::Plus, _)) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Add {
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    };
                }
                Some((Tok::Minus, _)) => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Sub {
                        lhs: Box::new(lhs),
                        rhs: Box::new(rhs),
                    };
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while matches!(self.peek(), Some((Tok::Star, _))) {
            self.bump();
            let rhs = self.factor()?;
            lhs = Expr::Mul {
                lhs: Box::new(lhs),
                rhs: Box::new(rhs),
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.bump() {
            Some((Tok::Minus, offset)) => {
                let inner = self.factor()?;
                Ok(Expr::Neg {
                    inner: Box::new(inner),
                    offset,
                })
            }
            Some((Tok::Num(value), offset)) => Ok(Expr::Number { value, offset }),
            Some((Tok::Ident(name), offset)) => {
                if matches!(self.peek(), Some((Tok::LParen, _))) {
                    self.bump();
                    let arg = self.expr()?;
                    self.expect_rparen()?;
                    Ok(Expr::Call {
                        name,
                        arg: Box::new(arg),
                        offset,
                    })
                } else {
                    Ok(Expr::Name { name, offset })
                }
            }
            Some((Tok::LParen, _)) => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            other => Err(Error::Syntax {
                offset: other.map(|(_, o)| o).unwrap_or(self.end),
                msg: "expected a number, name, or `(`".into(),
            }),
        }
    }
}

/// Parse source text into an AST without evaluating it.
pub fn parse(src: &str) -> Result<Expr> {
    let mut lexer = Lexer::new(src);
    let mut tokens = Vec::new();
    while let Some(t) = lexer.next()? {
        tokens.push(t);
    }
    let mut parser = Parser {
        tokens,
        cursor: 0,
        end: src.len(),
    };
    let expr = parser.expr()?;
    if let Some((_, offset)) = parser.peek() {
        return Err(Error::Syntax {
            offset: *offset,
            msg: "unexpected trailing input".into(),
        });
    }
    Ok(expr)
}

/// Evaluation result: a scalar or an operator on the target space.
#[derive(Clone, Debug)]
enum Value {
    Scalar(Complex64),
    Op(Operator),
}

struct Evaluator<'a> {
    space: &'a Arc<SpaceSpec>,
    params: &'a BTreeMap<String, Complex64>,
}

impl Evaluator<'_> {
    fn eval(&self, expr: &Expr) -> Result<Value> {
        match expr {
            Expr::Number { value, .. } => Ok(Value::Scalar(Complex64::new(*value, 0.0))),
            Expr::Name { name, offset } => match name.as_str() {
                "id" => Ok(Value::Op(Operator::identity(self.space))),
                "pi" => Ok(Value::Scalar(Complex64::new(std::f64::consts::PI, 0.0))),
                "e" => Ok(Value::Scalar(Complex64::new(std::f64::consts::E, 0.0))),
                _ => match self.params.get(name) {
                    Some(v) => Ok(Value::Scalar(*v)),
                    None => Err(Error::UnknownIdentifier {
                        name: name.clone(),
                        offset: *offset,
                    }),
                },
            },
            Expr::Call { name, arg, offset } => self.eval_call(name, arg, *offset),
            Expr::Neg { inner, .. } => match self.eval(inner)? {
                Value::Scalar(s) => Ok(Value::Scalar(-s)),
                Value::Op(op) => Ok(Value::Op(op.scale(Complex64::new(-1.0, 0.0)))),
            },
            Expr::Add { lhs, rhs } => self.combine(lhs, rhs, false),
            Expr::Sub { lhs, rhs } => self.combine(lhs, rhs, true),
            Expr::Mul { lhs, rhs } => {
                let l = self.eval(lhs)?;
                let r = self.eval(rhs)?;
                Ok(match (l, r) {
                    (Value::Scalar(a), Value::Scalar(b)) => Value::Scalar(a * b),
                    (Value::Scalar(a), Value::Op(b)) => Value::Op(b.scale(a)),
                    (Value::Op(a), Value::Scalar(b)) => Value::Op(a.scale(b)),
                    (Value::Op(a), Value::Op(b)) => Value::Op(a.mul(&b)?),
                })
            }
        }
    }

    /// Sums promote scalars to multiples of the identity when mixed with
    /// operators.
    fn combine(&self, lhs: &Expr, rhs: &Expr, subtract: bool) -> Result<Value> {
        let l = self.eval(lhs)?;
        let r = self.eval(rhs)?;
        let sign = if subtract { -1.0 } else { 1.0 };
        match (l, r) {
            (Value::Scalar(a), Value::Scalar(b)) => Ok(Value::Scalar(a + sign * b)),
            (l, r) => {
                let l = self.promote(l);
                let r = self.promote(r).scale(Complex64::new(sign, 0.0));
                Ok(Value::Op(l.add(&r)?))
            }
        }
    }

    fn promote(&self, v: Value) -> Operator {
        match v {
            Value::Op(op) => op,
            Value::Scalar(s) => Operator::identity(self.space).scale(s),
        }
    }

    fn eval_call(&self, name: &str, arg: &Expr, offset: usize) -> Result<Value> {
        match name {
            "cos" | "sin" => {
                let func: &'static str = if name == "cos" { "cos" } else { "sin" };
                let v = match self.eval(arg)? {
                    Value::Scalar(s) => s,
                    Value::Op(_) => return Err(Error::NonScalarArgument { func, offset }),
                };
                if v.im.abs() > 1e-12 {
                    return Err(Error::ExprType {
                        offset,
                        msg: format!("{func} requires a real argument"),
                    });
                }
                let x = v.re;
                Ok(Value::Scalar(Complex64::new(
                    if name == "cos" { x.cos() } else { x.sin() },
                    0.0,
                )))
            }
            "a" | "adag" | "sp" | "sm" | "sz" => {
                let leg = self.leg_index(arg, offset)?;
                let op = match name {
                    "a" => boson_op(self.space, leg, BosonOp::A)?,
                    "adag" => boson_op(self.space, leg, BosonOp::Adag)?,
                    "sp" => qubit_op(self.space, leg, QubitOp::Sp)?,
                    "sm" => qubit_op(self.space, leg, QubitOp::Sm)?,
                    _ => qubit_op(self.space, leg, QubitOp::Sz)?,
                };
                Ok(Value::Op(op))
            }
            _ => Err(Error::UnknownIdentifier {
                name: name.to_string(),
                offset,
            }),
        }
    }

    fn leg_index(&self, arg: &Expr, offset: usize) -> Result<usize> {
        let v = match self.eval(arg)? {
            Value::Scalar(s) => s,
            Value::Op(_) => {
                return Err(Error::ExprType {
                    offset,
                    msg: "leg index must be a number".into(),
                })
            }
        };
        if v.im != 0.0 || v.re < 0.0 || v.re.fract() != 0.0 {
            return Err(Error::ExprType {
                offset,
                msg: format!("leg index must be a non-negative integer, got {v}"),
            });
        }
        Ok(v.re as usize)
    }
}

/// Parse and evaluate an operator expression on the given space.
///
/// A purely scalar expression denotes that multiple of the identity.
pub fn parse_operator_expr(
    src: &str,
    space: &Arc<SpaceSpec>,
    params: &BTreeMap<String, Complex64>,
) -> Result<Operator> {
    let ast = parse(src)?;
    eval_expr(&ast, space, params)
}

/// Evaluate an already-parsed expression.
pub fn eval_expr(
    ast: &Expr,
    space: &Arc<SpaceSpec>,
    params: &BTreeMap<String, Complex64>,
) -> Result<Operator> {
    let ev = Evaluator { space, params };
    Ok(ev.promote(ev.eval(ast)?))
}
