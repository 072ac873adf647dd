//! Exact polynomial views of expressions.
//!
//! [`Poly`] is a dense-free map from exponent vectors to coefficients for fully
//! polynomial expressions. [`XPoly`] only requires polynomial dependence on the
//! normal coordinate `x`; its coefficients are arbitrary expressions in the
//! remaining variables.

use std::collections::BTreeMap;

use crate::expr::{Expr, Func, Params};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    n: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn zero(n: usize) -> Poly {
        Poly {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Poly {
        let mut p = Poly::zero(n);
        p.add_term(vec![0; n], c);
        p
    }

    pub fn var(n: usize, i: usize) -> Poly {
        let mut e = vec![0; n];
        e[i] = 1;
        let mut p = Poly::zero(n);
        p.add_term(e, 1.0);
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    pub fn coeff(&self, exps: &[u32]) -> f64 {
        self.terms.get(exps).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        let slot = self.terms.entry(exps).or_insert(0.0);
        *slot += c;
        if *slot == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 => self
                .terms
                .get(&vec![0; self.n])
                .copied(),
            _ => None,
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut out = Poly::zero(self.n);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.n);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::constant(self.n, 1.0);
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Converts an expression; `None` when it is not a polynomial in the variables.
    pub fn from_expr(e: &Expr, n: usize, params: &Params) -> Option<Poly> {
        Some(match e {
            Expr::Num(v) => Poly::constant(n, *v),
            Expr::Var(i) if *i < n => Poly::var(n, *i),
            Expr::Var(_) => return None,
            Expr::Param(p) => Poly::constant(n, params.get(p)?),
            Expr::Neg(a) => Poly::from_expr(a, n, params)?.scale(-1.0),
            Expr::Add(a, b) => Poly::from_expr(a, n, params)?.add(&Poly::from_expr(b, n, params)?),
            Expr::Sub(a, b) => Poly::from_expr(a, n, params)?
                .add(&Poly::from_expr(b, n, params)?.scale(-1.0)),
            Expr::Mul(a, b) => Poly::from_expr(a, n, params)?.mul(&Poly::from_expr(b, n, params)?),
            Expr::Div(a, b) => {
                let d = Poly::from_expr(b, n, params)?.as_constant()?;
                if d == 0.0 {
                    return None;
                }
                Poly::from_expr(a, n, params)?.scale(1.0 / d)
            }
            Expr::Pow(a, k) => Poly::from_expr(a, n, params)?.pow(*k),
            Expr::Call(f, a) => {
                let c = Poly::from_expr(a, n, params)?.as_constant()?;
                let v = match f {
                    Func::Sin => c.sin(),
                    Func::Cos => c.cos(),
                    Func::Exp => c.exp(),
                    Func::Sqrt if c >= 0.0 => c.sqrt(),
                    Func::Sqrt => return None,
                };
                Poly::constant(n, v)
            }
        })
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).fold(0.0, f64::max)
    }

    /// Keeps the monomials whose `x` exponent has the given parity.
    pub fn x_parity_part(&self, odd: bool) -> Poly {
        let mut out = Poly::zero(self.n);
        for (e, c) in &self.terms {
            if (e[0] % 2 == 1) == odd {
                out.add_term(e.clone(), *c);
            }
        }
        out
    }

    /// Expression with terms in descending graded order.
    pub fn to_expr(&self) -> Expr {
        let mut keys: Vec<&Vec<u32>> = self.terms.keys().collect();
        keys.sort_by(|a, b| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        let mut out: Option<Expr> = None;
        for e in keys {
            let c = self.terms[e];
            let mut mono: Option<Expr> = None;
            for (i, &k) in e.iter().enumerate() {
                if k == 0 {
                    continue;
                }
                let f = if k == 1 {
                    Expr::Var(i)
                } else {
                    Expr::Pow(Box::new(Expr::Var(i)), k)
                };
                mono = Some(match mono {
                    None => f,
                    Some(m) => Expr::Mul(Box::new(m), Box::new(f)),
                });
            }
            let (neg, mag) = (c < 0.0, c.abs());
            let term = match mono {
                None => Expr::Num(mag),
                Some(m) if mag == 1.0 => m,
                Some(m) => Expr::Mul(Box::new(Expr::Num(mag)), Box::new(m)),
            };
            out = Some(match (out, neg) {
                (None, false) => term,
                (None, true) => Expr::Neg(Box::new(term)),
                (Some(acc), false) => Expr::Add(Box::new(acc), Box::new(term)),
                (Some(acc), true) => Expr::Sub(Box::new(acc), Box::new(term)),
            });
        }
        out.unwrap_or(Expr::Num(0.0))
    }
}

/// Polynomial in `x` with coefficients free of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct XPoly {
    pub coeffs: Vec<Expr>,
}

impl XPoly {
    fn constant(e: Expr) -> XPoly {
        XPoly { coeffs: vec![e] }
    }

    fn add(&self, other: &XPoly) -> XPoly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|k| {
                let a = self.coeffs.get(k).cloned().unwrap_or(Expr::Num(0.0));
                let b = other.coeffs.get(k).cloned().unwrap_or(Expr::Num(0.0));
                Expr::add(a, b)
            })
            .collect();
        XPoly { coeffs }.trimmed()
    }

    fn scale_by(&self, f: &dyn Fn(Expr) -> Expr) -> XPoly {
        XPoly {
            coeffs: self.coeffs.iter().cloned().map(f).collect(),
        }
        .trimmed()
    }

    fn mul(&self, other: &XPoly) -> XPoly {
        let mut coeffs = vec![Expr::Num(0.0); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                let prod = Expr::mul(a.clone(), b.clone());
                coeffs[i + j] = Expr::add(coeffs[i + j].clone(), prod);
            }
        }
        XPoly { coeffs }.trimmed()
    }

    fn trimmed(mut self) -> XPoly {
        while self.coeffs.len() > 1 && self.coeffs.last().is_some_and(Expr::is_zero) {
            self.coeffs.pop();
        }
        self
    }

    /// `None` when `x` occurs non-polynomially.
    pub fn from_expr(e: &Expr) -> Option<XPoly> {
        if !e.mentions_var(0) {
            return Some(XPoly::constant(e.clone()));
        }
        Some(match e {
            Expr::Var(0) => XPoly {
                coeffs: vec![Expr::Num(0.0), Expr::Num(1.0)],
            },
            Expr::Neg(a) => XPoly::from_expr(a)?.scale_by(&|c| Expr::mul(Expr::Num(-1.0), c)),
            Expr::Add(a, b) => XPoly::from_expr(a)?.add(&XPoly::from_expr(b)?),
            Expr::Sub(a, b) => XPoly::from_expr(a)?
                .add(&XPoly::from_expr(b)?.scale_by(&|c| Expr::mul(Expr::Num(-1.0), c))),
            Expr::Mul(a, b) => XPoly::from_expr(a)?.mul(&XPoly::from_expr(b)?),
            Expr::Div(a, b) if !b.mentions_var(0) => {
                let d = (**b).clone();
                XPoly::from_expr(a)?.scale_by(&|c| {
                    if c.is_zero() {
                        c
                    } else {
                        Expr::Div(Box::new(c), Box::new(d.clone()))
                    }
                })
            }
            Expr::Pow(a, k) => {
                let base = XPoly::from_expr(a)?;
                let mut out = XPoly::constant(Expr::Num(1.0));
                for _ in 0..*k {
                    out = out.mul(&base);
                }
                out
            }
            _ => return None,
        })
    }

    /// Sum of the coefficients selected by `keep`, times the matching power of `x`.
    pub fn to_expr_filtered(&self, keep: impl Fn(usize) -> bool, shift: usize) -> Expr {
        let mut out = Expr::Num(0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            if !keep(k) || c.is_zero() {
                continue;
            }
            let p = k - shift;
            let xp = match p {
                0 => Expr::Num(1.0),
                1 => Expr::Var(0),
                _ => Expr::Pow(Box::new(Expr::Var(0)), p as u32),
            };
            out = Expr::add(out, Expr::mul(c.clone(), xp));
        }
        out
    }
}
