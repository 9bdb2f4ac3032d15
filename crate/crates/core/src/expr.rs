//! Expression AST, parser, pretty-printer, and generic evaluation.
//!
//! Grammar:
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ('^' signed_number)?
//! atom   := number | 'x' | ident '(' expr ')' | '(' expr ')' | '-' atom
//! ```
//! Identifiers: sin cos tan cot exp log sinh cosh atan asinh acosh sqrt
//! gamma digamma.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};
use thiserror::Error;

use crate::real::Real;
use crate::scalar::Scalar;

/// A numeric literal. The source text is kept for lossless printing; the
/// exact rational value feeds both evaluation backends.
#[derive(Clone, Debug)]
pub struct ConstVal {
    text: String,
    rat: BigRational,
    f: f64,
}

impl ConstVal {
    pub fn from_text(text: &str) -> Option<ConstVal> {
        let rat = parse_decimal(text)?;
        let f = rat_to_f64(&rat);
        Some(ConstVal { text: text.to_string(), rat, f })
    }

    pub fn from_i64(n: i64) -> ConstVal {
        ConstVal {
            text: n.to_string(),
            rat: BigRational::from_integer(n.into()),
            f: n as f64,
        }
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn as_f64(&self) -> f64 {
        self.f
    }

    pub fn as_real(&self) -> Real {
        Real::from_rational(&self.rat)
    }

    /// The literal's value as an integer, when it is one.
    pub fn as_integer(&self) -> Option<i64> {
        if self.rat.is_integer() {
            self.rat.numer().to_i64()
        } else {
            None
        }
    }

    pub fn is_negative(&self) -> bool {
        self.rat.is_negative()
    }

    fn pick<T: Scalar>(&self) -> T {
        T::from_parts(self.f, || self.as_real())
    }
}

impl PartialEq for ConstVal {
    fn eq(&self, other: &Self) -> bool {
        self.rat == other.rat
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntrinsicKind {
    Sin,
    Cos,
    Tan,
    Cot,
    Exp,
    Log,
    Sinh,
    Cosh,
    Atan,
    Asinh,
    Acosh,
    Sqrt,
    Gamma,
    Digamma,
}

impl IntrinsicKind {
    pub const ALL: [IntrinsicKind; 14] = [
        IntrinsicKind::Sin,
        IntrinsicKind::Cos,
        IntrinsicKind::Tan,
        IntrinsicKind::Cot,
        IntrinsicKind::Exp,
        IntrinsicKind::Log,
        IntrinsicKind::Sinh,
        IntrinsicKind::Cosh,
        IntrinsicKind::Atan,
        IntrinsicKind::Asinh,
        IntrinsicKind::Acosh,
        IntrinsicKind::Sqrt,
        IntrinsicKind::Gamma,
        IntrinsicKind::Digamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IntrinsicKind::Sin => "sin",
            IntrinsicKind::Cos => "cos",
            IntrinsicKind::Tan => "tan",
            IntrinsicKind::Cot => "cot",
            IntrinsicKind::Exp => "exp",
            IntrinsicKind::Log => "log",
            IntrinsicKind::Sinh => "sinh",
            IntrinsicKind::Cosh => "cosh",
            IntrinsicKind::Atan => "atan",
            IntrinsicKind::Asinh => "asinh",
            IntrinsicKind::Acosh => "acosh",
            IntrinsicKind::Sqrt => "sqrt",
            IntrinsicKind::Gamma => "gamma",
            IntrinsicKind::Digamma => "digamma",
        }
    }

    fn from_name(name: &str) -> Option<IntrinsicKind> {
        IntrinsicKind::ALL.iter().copied().find(|k| k.name() == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(ConstVal),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, ConstVal),
    Intrinsic(IntrinsicKind, Box<Expr>),
}

#[derive(Clone, Debug, Error, PartialEq, Eq)]
#[error("syntax error at offset {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("domain violation at node {node} `{expr}`: {reason}")]
    Domain {
        /// Preorder index of the offending node.
        node: usize,
        expr: String,
        reason: String,
    },
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src: text.as_bytes(), pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> ParseError {
        ParseError { offset: self.pos, message: message.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.src.get(self.pos).is_some_and(|b| b.is_ascii_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, b: u8) -> bool {
        if self.peek() == Some(b) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, b: u8) -> Result<(), ParseError> {
        if self.eat(b) {
            Ok(())
        } else {
            Err(self.err(&format!("expected '{}'", b as char)))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let exp = self.signed_number()?;
            Ok(Expr::Pow(Box::new(base), exp))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.atom()?)))
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(b) if b.is_ascii_digit() => Ok(Expr::Const(self.number()?)),
            Some(b) if b.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.src.get(self.pos).is_some_and(|b| b.is_ascii_alphabetic()) {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
                if name == "x" {
                    return Ok(Expr::Var);
                }
                match IntrinsicKind::from_name(name) {
                    Some(kind) => {
                        self.expect(b'(')?;
                        let arg = self.expr()?;
                        self.expect(b')')?;
                        Ok(Expr::Intrinsic(kind, Box::new(arg)))
                    }
                    None => Err(ParseError {
                        offset: start,
                        message: format!("unknown identifier `{name}`"),
                    }),
                }
            }
            _ => Err(self.err("expected a number, 'x', a function call, '(' or '-'")),
        }
    }

    fn signed_number(&mut self) -> Result<ConstVal, ParseError> {
        self.skip_ws();
        let start = self.pos;
        if self.src.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        let n = self.number_body(start)?;
        Ok(n)
    }

    fn number(&mut self) -> Result<ConstVal, ParseError> {
        self.skip_ws();
        let start = self.pos;
        self.number_body(start)
    }

    fn number_body(&mut self, start: usize) -> Result<ConstVal, ParseError> {
        if !self.src.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            return Err(self.err("expected a number"));
        }
        while self.src.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            if !self.src.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
                return Err(self.err("expected digits after '.'"));
            }
            while self.src.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
                self.pos += 1;
            }
        }
        if matches!(self.src.get(self.pos), Some(b'e') | Some(b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
                while self.src.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                // not an exponent: leave the 'e' for the caller (it is a
                // syntax error there, but with the right offset)
                self.pos = save;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        ConstVal::from_text(text).ok_or_else(|| ParseError {
            offset: start,
            message: format!("invalid number `{text}`"),
        })
    }
}

/// Exact decimal-to-rational conversion ("1.5e-3" → 3/2000).
fn parse_decimal(text: &str) -> Option<BigRational> {
    let (neg, rest) = match text.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, text),
    };
    let (mant, exp10) = match rest.find(['e', 'E']) {
        Some(i) => (&rest[..i], rest[i + 1..].parse::<i64>().ok()?),
        None => (rest, 0),
    };
    let (int_part, frac_part) = match mant.find('.') {
        Some(i) => (&mant[..i], &mant[i + 1..]),
        None => (mant, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let digits: String = format!("{int_part}{frac_part}");
    if !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let numer: BigInt = digits.parse().ok()?;
    let shift = exp10 - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let mut rat = BigRational::from_integer(numer);
    if shift >= 0 {
        rat *= BigRational::from_integer(ten.pow(shift as u32));
    } else {
        rat /= BigRational::from_integer(ten.pow((-shift) as u32));
    }
    if neg {
        rat = -rat;
    }
    Some(rat)
}

fn rat_to_f64(r: &BigRational) -> f64 {
    // to_f64 on BigRational is exact-ish only for small values; go through
    // the reference arithmetic for a correctly rounded result
    Real::from_rational(r).to_f64()
}

impl Expr {
    pub fn node_count(&self) -> usize {
        1 + match self {
            Expr::Const(_) | Expr::Var => 0,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Intrinsic(_, a) => a.node_count(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.node_count() + b.node_count()
            }
        }
    }

    pub fn depth(&self) -> usize {
        1 + match self {
            Expr::Const(_) | Expr::Var => 0,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Intrinsic(_, a) => a.depth(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depth().max(b.depth())
            }
        }
    }

    /// Replaces every occurrence of the variable with `inner`; the result
    /// represents `self ∘ inner`.
    pub fn substitute(&self, inner: &Expr) -> Expr {
        match self {
            Expr::Const(c) => Expr::Const(c.clone()),
            Expr::Var => inner.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute(inner))),
            Expr::Add(a, b) => {
                Expr::Add(Box::new(a.substitute(inner)), Box::new(b.substitute(inner)))
            }
            Expr::Sub(a, b) => {
                Expr::Sub(Box::new(a.substitute(inner)), Box::new(b.substitute(inner)))
            }
            Expr::Mul(a, b) => {
                Expr::Mul(Box::new(a.substitute(inner)), Box::new(b.substitute(inner)))
            }
            Expr::Div(a, b) => {
                Expr::Div(Box::new(a.substitute(inner)), Box::new(b.substitute(inner)))
            }
            Expr::Pow(a, c) => Expr::Pow(Box::new(a.substitute(inner)), c.clone()),
            Expr::Intrinsic(k, a) => Expr::Intrinsic(*k, Box::new(a.substitute(inner))),
        }
    }

    /// The expression `self(-x)`, used to reduce negative-axis analysis to
    /// the positive axis.
    pub fn reflect(&self) -> Expr {
        self.substitute(&Expr::Neg(Box::new(Expr::Var)))
    }
}

// precedence levels: 1 additive, 2 multiplicative, 3 unary minus, 4 power
fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(_) | Expr::Var | Expr::Intrinsic(..) => 5,
    }
}

fn fmt_at(e: &Expr, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(e);
    if p < min {
        write!(out, "(")?;
    }
    match e {
        Expr::Const(c) => write!(out, "{}", c.text())?,
        Expr::Var => write!(out, "x")?,
        Expr::Neg(a) => {
            write!(out, "-")?;
            // grammar: '-' applies to an atom
            fmt_at(a, 5, out)?;
        }
        Expr::Add(a, b) => {
            fmt_at(a, 1, out)?;
            write!(out, " + ")?;
            fmt_at(b, 2, out)?;
        }
        Expr::Sub(a, b) => {
            fmt_at(a, 1, out)?;
            write!(out, " - ")?;
            fmt_at(b, 2, out)?;
        }
        Expr::Mul(a, b) => {
            fmt_at(a, 2, out)?;
            write!(out, "*")?;
            fmt_at(b, 4, out)?;
        }
        Expr::Div(a, b) => {
            fmt_at(a, 2, out)?;
            write!(out, "/")?;
            fmt_at(b, 4, out)?;
        }
        Expr::Pow(a, c) => {
            fmt_at(a, 5, out)?;
            write!(out, "^{}", c.text())?;
        }
        Expr::Intrinsic(k, a) => {
            write!(out, "{}(", k.name())?;
            fmt_at(a, 0, out)?;
            write!(out, ")")?;
        }
    }
    if p < min {
        write!(out, ")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_at(self, 0, f)
    }
}

struct EvalCtx<'a, T> {
    x: &'a T,
    next_id: usize,
}

impl<'a, T: Scalar> EvalCtx<'a, T> {
    fn fail(&self, id: usize, e: &Expr, reason: &str) -> EvalError {
        EvalError::Domain { node: id, expr: e.to_string(), reason: reason.to_string() }
    }

    fn eval(&mut self, e: &Expr) -> Result<T, EvalError> {
        let id = self.next_id;
        self.next_id += 1;
        match e {
            Expr::Const(c) => Ok(c.pick()),
            Expr::Var => Ok(self.x.clone()),
            Expr::Neg(a) => Ok(self.eval(a)?.neg()),
            Expr::Add(a, b) => Ok(self.eval(a)?.add(&self.eval(b)?)),
            Expr::Sub(a, b) => Ok(self.eval(a)?.sub(&self.eval(b)?)),
            Expr::Mul(a, b) => Ok(self.eval(a)?.mul(&self.eval(b)?)),
            Expr::Div(a, b) => {
                let num = self.eval(a)?;
                let den = self.eval(b)?;
                if den.is_zero() {
                    return Err(self.fail(id, e, "division by zero"));
                }
                Ok(num.div(&den))
            }
            Expr::Pow(a, c) => {
                let base = self.eval(a)?;
                pow_scalar(&base, c).ok_or_else(|| {
                    self.fail(id, e, "power of a non-positive base with a non-integer exponent")
                })
            }
            Expr::Intrinsic(k, a) => {
                let v = self.eval(a)?;
                intrinsic_scalar(*k, &v)
                    .ok_or_else(|| self.fail(id, e, intrinsic_domain_message(*k)))
            }
        }
    }
}

pub(crate) fn pow_scalar<T: Scalar>(base: &T, c: &ConstVal) -> Option<T> {
    if let Some(n) = c.as_integer() {
        if base.is_zero() && n <= 0 {
            return None;
        }
        return base.powi(n).admit();
    }
    if base.is_zero() {
        // 0^α = 0 for α > 0
        return if c.is_negative() { None } else { Some(T::zero()) };
    }
    if base.is_negative() {
        return None;
    }
    base.pow(&c.pick()).admit()
}

fn intrinsic_domain_message(k: IntrinsicKind) -> &'static str {
    match k {
        IntrinsicKind::Log => "log of a non-positive value",
        IntrinsicKind::Sqrt => "sqrt of a negative value",
        IntrinsicKind::Acosh => "acosh of a value below 1",
        IntrinsicKind::Cot => "cot at a zero of sin",
        IntrinsicKind::Tan => "tan at a zero of cos",
        IntrinsicKind::Gamma => "gamma of a non-positive value",
        IntrinsicKind::Digamma => "digamma of a non-positive value",
        _ => "out of domain",
    }
}

pub(crate) fn trig_kind(k: IntrinsicKind) -> bool {
    matches!(
        k,
        IntrinsicKind::Sin | IntrinsicKind::Cos | IntrinsicKind::Tan | IntrinsicKind::Cot
    )
}

pub(crate) fn intrinsic_scalar<T: Scalar>(k: IntrinsicKind, v: &T) -> Option<T> {
    if trig_kind(k) && !v.trig_arg_ok() {
        return None;
    }
    let positive = !v.is_zero() && !v.is_negative();
    let out = match k {
        IntrinsicKind::Sin => Some(v.sin()),
        IntrinsicKind::Cos => Some(v.cos()),
        IntrinsicKind::Tan => {
            let c = v.cos();
            if c.is_zero() {
                None
            } else {
                Some(v.sin().div(&c))
            }
        }
        IntrinsicKind::Cot => {
            let s = v.sin();
            if s.is_zero() {
                None
            } else {
                Some(v.cos().div(&s))
            }
        }
        IntrinsicKind::Exp => Some(v.exp()),
        IntrinsicKind::Log => positive.then(|| v.ln()),
        IntrinsicKind::Sinh => Some(v.sinh()),
        IntrinsicKind::Cosh => Some(v.cosh()),
        IntrinsicKind::Atan => Some(v.atan()),
        IntrinsicKind::Asinh => Some(v.asinh()),
        IntrinsicKind::Acosh => {
            if v.sub(&T::one()).is_negative() {
                None
            } else {
                Some(v.acosh())
            }
        }
        IntrinsicKind::Sqrt => {
            if v.is_negative() {
                None
            } else {
                Some(v.sqrt())
            }
        }
        IntrinsicKind::Gamma => positive.then(|| v.lngamma().exp()),
        IntrinsicKind::Digamma => positive.then(|| v.digamma()),
    };
    out.and_then(Scalar::admit)
}

/// Evaluates `f` at `x` over either numeric backend; node ids in errors are
/// preorder indices into the AST.
pub fn eval_scalar<T: Scalar>(f: &Expr, x: &T) -> Result<T, EvalError> {
    EvalCtx { x, next_id: 0 }.eval(f)
}

/// Reference-precision evaluation.
pub fn eval(f: &Expr, x: &Real) -> Result<Real, EvalError> {
    eval_scalar(f, x)
}
