//! Expression language for fields and parameter paths.
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := atom ['^' uint] | '-' factor
//! atom   := number | ident | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `x` is variable 0 (the normal coordinate), `y1`…`y7` are the tangential
//! coordinates, and every other identifier is a named parameter resolved at
//! binding time.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::jet::{Jet, JetError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct ParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{message} in `{at}`")]
    Domain { message: String, at: String },
    #[error("unbound parameter `{0}`")]
    UnboundParam(String),
    #[error("variable index {index} exceeds dimension {n}")]
    Variable { index: usize, n: usize },
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Named parameter values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(Vec<(String, f64)>);

impl Params {
    pub fn new() -> Self {
        Params(Vec::new())
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        match self.0.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = value,
            None => self.0.push((name.to_string(), value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(n, v)| (n.as_str(), *v))
    }

    pub fn names(&self) -> BTreeSet<String> {
        self.0.iter().map(|(n, _)| n.clone()).collect()
    }
}

impl<S: Into<String>> FromIterator<(S, f64)> for Params {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Self {
        let mut p = Params::new();
        for (n, v) in iter {
            p.set(&n.into(), v);
        }
        p
    }
}

/// Name of coordinate `i` (`x`, `y1`, …).
pub fn var_name(i: usize) -> String {
    if i == 0 {
        "x".to_string()
    } else {
        format!("y{i}")
    }
}

fn var_index(name: &str) -> Option<usize> {
    if name == "x" {
        return Some(0);
    }
    let digits = name.strip_prefix('y')?;
    match digits.parse::<usize>() {
        Ok(k) if (1..=7).contains(&k) && digits.len() == 1 => Some(k),
        _ => None,
    }
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(usize, Tok)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (at, tok) = lx.next()?;
            let end = tok == Tok::End;
            out.push((at, tok));
            if end {
                return Ok(out);
            }
        }
    }

    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&b) = bytes.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        if b.is_ascii_digit() || b == b'.' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut k = end + 1;
                if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                    k += 1;
                }
                if k < bytes.len() && bytes[k].is_ascii_digit() {
                    while k < bytes.len() && bytes[k].is_ascii_digit() {
                        k += 1;
                    }
                    end = k;
                }
            }
            let text = &self.src[start..end];
            let value: f64 = text.parse().map_err(|_| ParseError {
                offset: start,
                message: format!("malformed number `{text}`"),
            })?;
            self.pos = end;
            return Ok((start, Tok::Num(value)));
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            let mut end = start;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            self.pos = end;
            return Ok((start, Tok::Ident(self.src[start..end].to_string())));
        }
        if matches!(b, b'+' | b'-' | b'*' | b'/' | b'^' | b'(' | b')') {
            self.pos += 1;
            return Ok((start, Tok::Op(b as char)));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        })
    }
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Op(op) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{op}`"))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let k = self.exponent()?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    // uint ['^' exponent], right associative
    fn exponent(&mut self) -> Result<u32, ParseError> {
        let at = self.offset();
        let k = match self.peek().clone() {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 => {
                self.bump();
                v as u32
            }
            _ => return self.error("expected unsigned integer exponent"),
        };
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let rhs = self.exponent()?;
            return k.checked_pow(rhs).ok_or(ParseError {
                offset: at,
                message: "exponent overflow".into(),
            });
        }
        Ok(k)
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::Ident(name) => {
                self.bump();
                if let Some(f) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::Call(f, Box::new(arg)));
                }
                if let Some(i) = var_index(&name) {
                    return Ok(Expr::Var(i));
                }
                Ok(Expr::Param(name))
            }
            Tok::Op('(') => {
                self.bump();
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::End => self.error("unexpected end of input"),
            Tok::Op(c) => self.error(format!("unexpected `{c}`")),
        }
    }
}

/// Parses an expression; whitespace is insignificant.
pub fn parse_expression(src: &str) -> Result<Expr, ParseError> {
    if src.trim().is_empty() {
        return Err(ParseError {
            offset: 0,
            message: "empty expression".into(),
        });
    }
    let toks = Lexer::tokens(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return p.error("unexpected trailing input");
    }
    Ok(e)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_expression(s)
    }
}

// ---------------------------------------------------------------- printing

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_ATOM: u8 = 5;

impl Expr {
    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => PREC_SUM,
            Expr::Mul(..) | Expr::Div(..) => PREC_PRODUCT,
            Expr::Neg(_) => PREC_UNARY,
            Expr::Num(v) if v.is_sign_negative() => PREC_UNARY,
            Expr::Pow(..) => 4,
            _ => PREC_ATOM,
        }
    }

    fn write_prec(&self, f: &mut fmt::Formatter<'_>, ctx: u8) -> fmt::Result {
        let paren = self.precedence() < ctx;
        if paren {
            write!(f, "(")?;
        }
        match self {
            Expr::Num(v) => write!(f, "{v}")?,
            Expr::Var(i) => write!(f, "{}", var_name(*i))?,
            Expr::Param(p) => write!(f, "{p}")?,
            Expr::Neg(e) => {
                write!(f, "-")?;
                e.write_prec(f, PREC_UNARY)?;
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.write_prec(f, PREC_SUM)?;
                write!(f, " {} ", if matches!(self, Expr::Add(..)) { '+' } else { '-' })?;
                b.write_prec(f, PREC_PRODUCT)?;
            }
            Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.write_prec(f, PREC_PRODUCT)?;
                write!(f, "{}", if matches!(self, Expr::Mul(..)) { '*' } else { '/' })?;
                b.write_prec(f, PREC_UNARY)?;
            }
            Expr::Pow(b, k) => {
                b.write_prec(f, PREC_ATOM)?;
                write!(f, "^{k}")?;
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.write_prec(f, 0)?;
                write!(f, ")")?;
            }
        }
        if paren {
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_prec(f, 0)
    }
}

// ---------------------------------------------------------------- structure

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    /// Top-level summands of a `+`/`-` chain (subtracted terms wrapped in `Neg`).
    pub fn summands(&self) -> Vec<Expr> {
        match self {
            Expr::Add(a, b) => {
                let mut v = a.summands();
                v.push((**b).clone());
                v
            }
            Expr::Sub(a, b) => {
                let mut v = a.summands();
                v.push(Expr::Neg(b.clone()));
                v
            }
            other => vec![other.clone()],
        }
    }

    pub fn free_params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Param(p) = e {
                out.insert(p.clone());
            }
        });
        out
    }

    /// Highest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        let mut m = None;
        self.visit(&mut |e| {
            if let Expr::Var(i) = e {
                m = Some(m.map_or(*i, |c: usize| c.max(*i)));
            }
        });
        m
    }

    pub fn mentions_var(&self, i: usize) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= *e == Expr::Var(i));
        found
    }

    pub fn has_calls(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= matches!(e, Expr::Call(..)));
        found
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.visit(f),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Num(_) | Expr::Var(_) | Expr::Param(_) => {}
        }
    }

    /// Rebuilds the tree bottom-up through `f`.
    pub fn map(&self, f: &impl Fn(&Expr) -> Option<Expr>) -> Expr {
        if let Some(e) = f(self) {
            return e;
        }
        let bx = |e: &Expr| Box::new(e.map(f));
        match self {
            Expr::Neg(a) => Expr::Neg(bx(a)),
            Expr::Add(a, b) => Expr::Add(bx(a), bx(b)),
            Expr::Sub(a, b) => Expr::Sub(bx(a), bx(b)),
            Expr::Mul(a, b) => Expr::Mul(bx(a), bx(b)),
            Expr::Div(a, b) => Expr::Div(bx(a), bx(b)),
            Expr::Pow(a, k) => Expr::Pow(bx(a), *k),
            Expr::Call(func, a) => Expr::Call(*func, bx(a)),
            leaf => leaf.clone(),
        }
    }

    pub fn substitute_var(&self, i: usize, with: &Expr) -> Expr {
        self.map(&|e| (*e == Expr::Var(i)).then(|| with.clone()))
    }

    /// Replaces bound parameters by their values.
    pub fn bind(&self, params: &Params) -> Expr {
        self.map(&|e| match e {
            Expr::Param(p) => params.get(p).map(Expr::Num),
            _ => None,
        })
    }

    // Light constant folding so generated trees stay readable.
    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) => Expr::Num(x + y),
            (Expr::Num(x), _) if *x == 0.0 => b,
            (_, Expr::Num(y)) if *y == 0.0 => a,
            (_, Expr::Num(y)) if *y < 0.0 => Expr::Sub(Box::new(a), Box::new(Expr::Num(-y))),
            (_, Expr::Neg(inner)) => Expr::Sub(Box::new(a), inner.clone()),
            _ => Expr::Add(Box::new(a), Box::new(b)),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn mul(a: Expr, b: Expr) -> Expr {
        match (&a, &b) {
            (Expr::Num(x), Expr::Num(y)) => Expr::Num(x * y),
            (Expr::Num(x), _) | (_, Expr::Num(x)) if *x == 0.0 => Expr::Num(0.0),
            (Expr::Num(x), _) if *x == 1.0 => b,
            (_, Expr::Num(y)) if *y == 1.0 => a,
            (Expr::Num(x), _) if *x == -1.0 => Expr::Neg(Box::new(b)),
            _ => Expr::Mul(Box::new(a), Box::new(b)),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }
}

// ---------------------------------------------------------------- evaluation

fn domain(message: impl Into<String>, at: &Expr) -> EvalError {
    EvalError::Domain {
        message: message.into(),
        at: at.to_string(),
    }
}

impl Expr {
    /// Pointwise value.
    pub fn eval(&self, vars: &[f64], params: &Params) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Num(v) => *v,
            Expr::Var(i) => *vars.get(*i).ok_or(EvalError::Variable {
                index: *i,
                n: vars.len(),
            })?,
            Expr::Param(p) => params.get(p).ok_or_else(|| EvalError::UnboundParam(p.clone()))?,
            Expr::Neg(a) => -a.eval(vars, params)?,
            Expr::Add(a, b) => a.eval(vars, params)? + b.eval(vars, params)?,
            Expr::Sub(a, b) => a.eval(vars, params)? - b.eval(vars, params)?,
            Expr::Mul(a, b) => a.eval(vars, params)? * b.eval(vars, params)?,
            Expr::Div(a, b) => {
                let d = b.eval(vars, params)?;
                if d == 0.0 {
                    return Err(domain("division by zero", self));
                }
                a.eval(vars, params)? / d
            }
            Expr::Pow(a, k) => a.eval(vars, params)?.powi(*k as i32),
            Expr::Call(f, a) => {
                let v = a.eval(vars, params)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(domain("square root of a negative value", self));
                        }
                        v.sqrt()
                    }
                }
            }
        })
    }

    /// Evaluates over the jet ring with the given coordinate seeds.
    pub fn eval_jet(&self, seeds: &[Jet], params: &Params) -> Result<Jet, EvalError> {
        let layout = seeds
            .first()
            .map(|s| s.layout().clone())
            .ok_or(EvalError::Variable { index: 0, n: 0 })?;
        Ok(match self {
            Expr::Num(v) => Jet::constant_in(&layout, *v),
            Expr::Var(i) => seeds
                .get(*i)
                .ok_or(EvalError::Variable {
                    index: *i,
                    n: seeds.len(),
                })?
                .clone(),
            Expr::Param(p) => Jet::constant_in(
                &layout,
                params.get(p).ok_or_else(|| EvalError::UnboundParam(p.clone()))?,
            ),
            Expr::Neg(a) => -&a.eval_jet(seeds, params)?,
            Expr::Add(a, b) => &a.eval_jet(seeds, params)? + &b.eval_jet(seeds, params)?,
            Expr::Sub(a, b) => &a.eval_jet(seeds, params)? - &b.eval_jet(seeds, params)?,
            Expr::Mul(a, b) => &a.eval_jet(seeds, params)? * &b.eval_jet(seeds, params)?,
            Expr::Div(a, b) => {
                let d = b.eval_jet(seeds, params)?;
                if d.value() == 0.0 {
                    return Err(domain("division by zero", self));
                }
                let n = a.eval_jet(seeds, params)?;
                n.try_div(&d).map_err(|e| domain(e.to_string(), self))?
            }
            Expr::Pow(a, k) => a.eval_jet(seeds, params)?.powi(*k),
            Expr::Call(f, a) => {
                let v = a.eval_jet(seeds, params)?;
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Sqrt => v.sqrt().map_err(|e| domain(e.to_string(), self))?,
                }
            }
        })
    }
}
