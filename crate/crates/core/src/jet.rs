//! Truncated multivariate Taylor expansions ("jets").
//!
//! A [`Jet`] stores the Taylor coefficients `∂^a f / a!` of a function at a
//! base point for every multi-index `a` of total degree at most `order`.
//! Storage is dense, in graded lexicographic order, and the monomial
//! bookkeeping lives in a shared [`Layout`] per `(n, order)` pair.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use thiserror::Error;

/// Largest supported number of variables.
pub const MAX_VARS: usize = 8;
/// Largest supported truncation order.
pub const MAX_ORDER: usize = 6;
/// Truncation order used everywhere unless a caller asks otherwise.
pub const DEFAULT_ORDER: usize = 4;

/// Number of Newton steps used by [`Jet::root`].
const ROOT_NEWTON_STEPS: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JetError {
    #[error("jet shape mismatch: ({0}, order {1}) vs ({2}, order {3})")]
    Shape(usize, usize, usize, usize),
    #[error("unsupported jet shape: {n} variables, order {order}")]
    Unsupported { n: usize, order: usize },
    #[error("substitution {index} has nonzero constant term {value}")]
    NonzeroConstant { index: usize, value: f64 },
    #[error("expected {expected} substitutions, got {got}")]
    SubstitutionCount { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("variable index {index} out of range for {n} variables")]
    Variable { index: usize, n: usize },
}

/// Exponent vector of a monomial `∏ uᵢ^{aᵢ}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u8>);

impl MultiIndex {
    pub fn new(exponents: Vec<u8>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// `eᵢ` scaled by `power`.
    pub fn unit(n: usize, i: usize, power: u8) -> Self {
        let mut e = vec![0; n];
        e[i] = power;
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u8] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// `a! = ∏ aᵢ!`
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&e| (1..=e as u32).map(f64::from).product::<f64>())
            .product()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<&[u8]> for MultiIndex {
    fn from(e: &[u8]) -> Self {
        MultiIndex(e.to_vec())
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

/// Monomial table shared by all jets of one shape.
#[derive(Debug)]
pub struct Layout {
    n: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    degrees: Vec<usize>,
    /// For every slot `i`, the pairs `(j, k)` with `indices[i] + indices[j] = indices[k]`.
    products: Vec<Vec<(u32, u32)>>,
    /// For every nonconstant slot, `(parent slot, variable)` such that
    /// `indices[slot] = indices[parent] + e_variable` with `variable` the last nonzero exponent.
    parents: Vec<Option<(usize, usize)>>,
}

impl Layout {
    /// Shared layout for `n` variables at `order`.
    pub fn get(n: usize, order: usize) -> Result<Arc<Layout>, JetError> {
        if n == 0 || n > MAX_VARS || order > MAX_ORDER {
            return Err(JetError::Unsupported { n, order });
        }
        type Cache = Mutex<HashMap<(usize, usize), Arc<Layout>>>;
        static CACHE: OnceLock<Cache> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("layout cache poisoned");
        Ok(guard
            .entry((n, order))
            .or_insert_with(|| Arc::new(Layout::build(n, order)))
            .clone())
    }

    fn build(n: usize, order: usize) -> Layout {
        let mut indices = Vec::new();
        for degree in 0..=order {
            let mut current = vec![0u8; n];
            enumerate_degree(&mut current, 0, degree, &mut indices);
        }
        let lookup: HashMap<MultiIndex, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();
        let degrees: Vec<usize> = indices.iter().map(MultiIndex::degree).collect();

        let mut products = vec![Vec::new(); indices.len()];
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if degrees[i] + degrees[j] > order {
                    continue;
                }
                let sum: Vec<u8> = a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect();
                let k = lookup[&MultiIndex(sum)];
                products[i].push((j as u32, k as u32));
            }
        }

        let parents = indices
            .iter()
            .map(|m| {
                let var = m.0.iter().rposition(|&e| e > 0)?;
                let mut p = m.0.clone();
                p[var] -= 1;
                Some((lookup[&MultiIndex(p)], var))
            })
            .collect();

        Layout {
            n,
            order,
            indices,
            lookup,
            degrees,
            products,
            parents,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.lookup.get(index).copied()
    }

    pub fn degree_of(&self, slot: usize) -> usize {
        self.degrees[slot]
    }
}

// Lexicographically descending within one degree: x² before xy before y².
fn enumerate_degree(current: &mut [u8], var: usize, remaining: usize, out: &mut Vec<MultiIndex>) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(MultiIndex(current.to_vec()));
        current[var] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        current[var] = e as u8;
        enumerate_degree(current, var + 1, remaining - e, out);
    }
    current[var] = 0;
}

/// Parity of a coordinate under the reflection `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Per-variable behaviour under `τ`. The boundary model has `x` (variable 0) odd.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetryMask {
    parity: Vec<Parity>,
}

impl SymmetryMask {
    pub fn new(parity: Vec<Parity>) -> Self {
        SymmetryMask { parity }
    }

    /// `x` odd, every `yᵢ` even.
    pub fn boundary(n: usize) -> Self {
        let mut parity = vec![Parity::Even; n];
        parity[0] = Parity::Odd;
        SymmetryMask { parity }
    }

    /// Trivial action, used around interior orbits.
    pub fn interior(n: usize) -> Self {
        SymmetryMask {
            parity: vec![Parity::Even; n],
        }
    }

    pub fn parity(&self) -> &[Parity] {
        &self.parity
    }

    pub fn len(&self) -> usize {
        self.parity.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parity.is_empty()
    }

    /// Parity of the monomial with the given exponents.
    pub fn monomial_parity(&self, index: &MultiIndex) -> Parity {
        let odd: usize = index
            .0
            .iter()
            .zip(&self.parity)
            .filter(|(_, p)| **p == Parity::Odd)
            .map(|(e, _)| *e as usize)
            .sum();
        if odd.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

/// Truncated Taylor expansion in `n` variables.
#[derive(Clone)]
pub struct Jet {
    layout: Arc<Layout>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let terms: Vec<String> = self
            .terms()
            .filter(|(_, c)| *c != 0.0)
            .map(|(m, c)| format!("{c}·u^{m}"))
            .collect();
        write!(
            f,
            "Jet(n={}, order={}, [{}])",
            self.n(),
            self.order(),
            terms.join(" + ")
        )
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.same_shape(other) && self.coeffs == other.coeffs
    }
}

impl Jet {
    pub fn zero(n: usize, order: usize) -> Result<Jet, JetError> {
        let layout = Layout::get(n, order)?;
        Ok(Jet::zero_in(&layout))
    }

    pub fn zero_in(layout: &Arc<Layout>) -> Jet {
        Jet {
            layout: layout.clone(),
            coeffs: vec![0.0; layout.len()],
        }
    }

    pub fn constant(n: usize, order: usize, value: f64) -> Result<Jet, JetError> {
        let layout = Layout::get(n, order)?;
        Ok(Jet::constant_in(&layout, value))
    }

    pub fn constant_in(layout: &Arc<Layout>, value: f64) -> Jet {
        let mut j = Jet::zero_in(layout);
        j.coeffs[0] = value;
        j
    }

    /// The coordinate function `uᵢ` (zero constant term).
    pub fn variable(n: usize, order: usize, i: usize) -> Result<Jet, JetError> {
        let layout = Layout::get(n, order)?;
        Jet::variable_in(&layout, i)
    }

    pub fn variable_in(layout: &Arc<Layout>, i: usize) -> Result<Jet, JetError> {
        if i >= layout.n {
            return Err(JetError::Variable { index: i, n: layout.n });
        }
        let mut j = Jet::zero_in(layout);
        if layout.order >= 1 {
            j.coeffs[1 + i] = 1.0;
        }
        Ok(j)
    }

    /// `base + uᵢ`: the seed used to expand a function around a point.
    pub fn coordinate_in(layout: &Arc<Layout>, i: usize, base: f64) -> Result<Jet, JetError> {
        let mut j = Jet::variable_in(layout, i)?;
        j.coeffs[0] = base;
        Ok(j)
    }

    /// Builds a jet from `(exponents, coefficient)` pairs; terms above `order` are dropped.
    pub fn from_terms<'a, I>(n: usize, order: usize, terms: I) -> Result<Jet, JetError>
    where
        I: IntoIterator<Item = (&'a [u8], f64)>,
    {
        let layout = Layout::get(n, order)?;
        let mut j = Jet::zero_in(&layout);
        for (exps, c) in terms {
            if exps.len() != n {
                return Err(JetError::Shape(exps.len(), order, n, order));
            }
            if let Some(slot) = layout.position(&MultiIndex::from(exps)) {
                j.coeffs[slot] += c;
            }
        }
        Ok(j)
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn n(&self) -> usize {
        self.layout.n
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.layout.indices.iter().zip(self.coeffs.iter().copied())
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Taylor coefficient of `u^a`; zero when `a` is above the truncation order.
    pub fn coeff(&self, exponents: &[u8]) -> f64 {
        self.layout
            .position(&MultiIndex::from(exponents))
            .map_or(0.0, |slot| self.coeffs[slot])
    }

    pub fn set_coeff(&mut self, exponents: &[u8], value: f64) -> Result<(), JetError> {
        let slot = self
            .layout
            .position(&MultiIndex::from(exponents))
            .ok_or(JetError::Unsupported {
                n: exponents.len(),
                order: exponents.iter().map(|&e| e as usize).sum(),
            })?;
        self.coeffs[slot] = value;
        Ok(())
    }

    /// Raw partial derivative `∂^a f` at the base point.
    pub fn derivative(&self, exponents: &[u8]) -> f64 {
        self.coeff(exponents) * MultiIndex::from(exponents).factorial()
    }

    pub fn gradient(&self) -> Vec<f64> {
        let n = self.n();
        if self.order() == 0 {
            return vec![0.0; n];
        }
        self.coeffs[1..=n].to_vec()
    }

    /// Row-major `n × n` Hessian.
    pub fn hessian(&self) -> Vec<f64> {
        let n = self.n();
        let mut h = vec![0.0; n * n];
        if self.order() < 2 {
            return h;
        }
        let mut e = vec![0u8; n];
        for i in 0..n {
            for j in i..n {
                e[i] += 1;
                e[j] += 1;
                let d = self.derivative(&e);
                e[i] -= 1;
                e[j] -= 1;
                h[i * n + j] = d;
                h[j * n + i] = d;
            }
        }
        h
    }

    fn same_shape(&self, other: &Jet) -> bool {
        Arc::ptr_eq(&self.layout, &other.layout)
            || (self.n() == other.n() && self.order() == other.order())
    }

    fn check_shape(&self, other: &Jet) -> Result<(), JetError> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(JetError::Shape(self.n(), self.order(), other.n(), other.order()))
        }
    }

    pub fn try_add(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(Jet {
            layout: self.layout.clone(),
            coeffs,
        })
    }

    pub fn try_sub(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(Jet {
            layout: self.layout.clone(),
            coeffs,
        })
    }

    /// Cauchy product, terms above the truncation order discarded.
    pub fn try_mul(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        let mut out = vec![0.0; self.coeffs.len()];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for &(j, k) in &self.layout.products[i] {
                let b = other.coeffs[j as usize];
                if b != 0.0 {
                    out[k as usize] += a * b;
                }
            }
        }
        Ok(Jet {
            layout: self.layout.clone(),
            coeffs: out,
        })
    }

    pub fn scale(&self, factor: f64) -> Jet {
        Jet {
            layout: self.layout.clone(),
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] += c;
        j
    }

    /// The jet with its constant term removed.
    pub fn nonconstant_part(&self) -> Jet {
        let mut j = self.clone();
        j.coeffs[0] = 0.0;
        j
    }

    pub fn powi(&self, k: u32) -> Jet {
        let mut result = Jet::constant_in(&self.layout, 1.0);
        let mut base = self.clone();
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                result = &result * &base;
            }
            k >>= 1;
            if k > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Applies a scalar function given its Taylor coefficients `f^{(k)}(c)/k!` at the constant term.
    fn apply_series(&self, series: &[f64]) -> Jet {
        let h = self.nonconstant_part();
        let mut out = Jet::constant_in(&self.layout, series[0]);
        let mut power = Jet::constant_in(&self.layout, 1.0);
        for &coef in series.iter().skip(1).take(self.order()) {
            power = &power * &h;
            if coef != 0.0 {
                for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                    *o += coef * p;
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Result<Jet, JetError> {
        let c = self.value();
        if c == 0.0 {
            return Err(JetError::Domain("reciprocal of a jet with zero constant term".into()));
        }
        // 1/(c+h) = Σ (-1)^k h^k / c^{k+1}
        let series: Vec<f64> = (0..=self.order())
            .map(|k| if k % 2 == 0 { 1.0 } else { -1.0 } / c.powi(k as i32 + 1))
            .collect();
        Ok(self.apply_series(&series))
    }

    pub fn try_div(&self, other: &Jet) -> Result<Jet, JetError> {
        self.check_shape(other)?;
        Ok(self * &other.recip()?)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut fact = 1.0;
        for k in 0..=self.order() {
            if k > 0 {
                fact *= k as f64;
            }
            series.push(e / fact);
        }
        self.apply_series(&series)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.apply_series(&trig_series(s, c, self.order()))
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        // cos^{(k)} = sin^{(k+1)}
        self.apply_series(&trig_series(c, -s, self.order()))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        self.root(2)
    }

    /// `k`-th root by Newton iteration in the jet ring: `g ← g − (gᵏ − f)/(k·gᵏ⁻¹)`.
    pub fn root(&self, k: u32) -> Result<Jet, JetError> {
        let c = self.value();
        if k == 0 {
            return Err(JetError::Domain("root of order 0".into()));
        }
        if c == 0.0 || (k.is_multiple_of(2) && c < 0.0) {
            return Err(JetError::Domain(format!(
                "{k}-th root of a jet with constant term {c}"
            )));
        }
        if k == 1 {
            return Ok(self.clone());
        }
        let c_root = c.signum() * c.abs().powf(1.0 / k as f64);
        let mut g = Jet::constant_in(&self.layout, c_root);
        for _ in 0..ROOT_NEWTON_STEPS {
            let g_km1 = g.powi(k - 1);
            let residual = &(&g_km1 * &g) - self;
            let step = residual.try_div(&g_km1.scale(k as f64))?;
            g = &g - &step;
        }
        Ok(g)
    }

    /// `f(subs₀, …, subs_{n−1})` truncated to the order of the substitutions.
    ///
    /// Every substitution must vanish at the base point: a coordinate change
    /// fixes the point it is centered at.
    pub fn compose(&self, subs: &[Jet]) -> Result<Jet, JetError> {
        if subs.len() != self.n() {
            return Err(JetError::SubstitutionCount {
                expected: self.n(),
                got: subs.len(),
            });
        }
        let target = subs[0].layout.clone();
        for (index, s) in subs.iter().enumerate() {
            if !Arc::ptr_eq(&s.layout, &target) && (s.n() != target.n || s.order() != target.order) {
                return Err(JetError::Shape(s.n(), s.order(), target.n, target.order));
            }
            if s.value() != 0.0 {
                return Err(JetError::NonzeroConstant {
                    index,
                    value: s.value(),
                });
            }
        }
        // Monomials in the substitutions, built incrementally from their parents.
        let src = &self.layout;
        let mut monomials: Vec<Option<Jet>> = vec![None; src.len()];
        let mut out = Jet::constant_in(&target, self.coeffs[0]);
        monomials[0] = Some(Jet::constant_in(&target, 1.0));
        for slot in 1..src.len() {
            if src.degrees[slot] > target.order {
                break;
            }
            let (parent, var) = src.parents[slot].expect("nonconstant slot has a parent");
            let m = monomials[parent].as_ref().expect("parents precede children") * &subs[var];
            let c = self.coeffs[slot];
            if c != 0.0 {
                for (o, v) in out.coeffs.iter_mut().zip(&m.coeffs) {
                    *o += c * v;
                }
            }
            monomials[slot] = Some(m);
        }
        Ok(out)
    }

    /// Formal partial derivative in variable `i`; the result has order `order − 1`.
    pub fn partial(&self, i: usize) -> Result<Jet, JetError> {
        if i >= self.n() {
            return Err(JetError::Variable { index: i, n: self.n() });
        }
        if self.order() == 0 {
            return Jet::zero(self.n(), 0);
        }
        let layout = Layout::get(self.n(), self.order() - 1)?;
        let mut out = Jet::zero_in(&layout);
        let mut e = vec![0u8; self.n()];
        for (slot, m) in layout.indices.iter().enumerate() {
            e.copy_from_slice(&m.0);
            e[i] += 1;
            out.coeffs[slot] = f64::from(e[i]) * self.coeff(&e);
        }
        Ok(out)
    }

    /// Truncates or zero-pads to another order.
    pub fn with_order(&self, order: usize) -> Result<Jet, JetError> {
        if order == self.order() {
            return Ok(self.clone());
        }
        let layout = Layout::get(self.n(), order)?;
        let mut out = Jet::zero_in(&layout);
        for (slot, m) in layout.indices.iter().enumerate() {
            if let Some(src) = self.layout.position(m) {
                out.coeffs[slot] = self.coeffs[src];
            }
        }
        Ok(out)
    }

    /// Restriction to the variables listed in `keep` (others set to zero).
    pub fn restrict(&self, keep: &[usize]) -> Result<Jet, JetError> {
        let layout = Layout::get(keep.len(), self.order())?;
        let mut out = Jet::zero_in(&layout);
        let mut full = vec![0u8; self.n()];
        for (slot, m) in layout.indices.iter().enumerate() {
            full.iter_mut().for_each(|e| *e = 0);
            for (k, &v) in keep.iter().enumerate() {
                full[v] = m.0[k];
            }
            out.coeffs[slot] = self.coeff(&full);
        }
        Ok(out)
    }

    /// True when every monomial of the wrong parity has an exactly zero coefficient.
    pub fn respects(&self, mask: &SymmetryMask, parity: Parity) -> bool {
        self.terms()
            .all(|(m, c)| c == 0.0 || mask.monomial_parity(m) == parity)
    }

    /// Largest coefficient magnitude among monomials of the wrong parity.
    pub fn parity_defect(&self, mask: &SymmetryMask, parity: Parity) -> f64 {
        self.terms()
            .filter(|(m, _)| mask.monomial_parity(m) != parity)
            .map(|(_, c)| c.abs())
            .fold(0.0, f64::max)
    }

    /// Zeroes every monomial of the wrong parity.
    pub fn project(&self, mask: &SymmetryMask, parity: Parity) -> Jet {
        let mut out = self.clone();
        for (slot, m) in self.layout.indices.iter().enumerate() {
            if mask.monomial_parity(m) != parity {
                out.coeffs[slot] = 0.0;
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Jet) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).fold(0.0, f64::max)
    }

    /// Evaluates the truncated polynomial at a displacement `u` from the base point.
    pub fn eval(&self, u: &[f64]) -> f64 {
        self.terms()
            .map(|(m, c)| {
                c * m
                    .0
                    .iter()
                    .zip(u)
                    .map(|(&e, &x)| x.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

fn trig_series(f0: f64, f1: f64, order: usize) -> Vec<f64> {
    // derivatives cycle f0, f1, -f0, -f1
    let cycle = [f0, f1, -f0, -f1];
    let mut fact = 1.0;
    (0..=order)
        .map(|k| {
            if k > 0 {
                fact *= k as f64;
            }
            cycle[k % 4] / fact
        })
        .collect()
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.try_add(rhs).expect("jet add")
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.try_sub(rhs).expect("jet sub")
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.try_mul(rhs).expect("jet mul")
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

/// Identity coordinate map `(u₀, …, u_{n−1})`.
pub fn identity_map(n: usize, order: usize) -> Result<Vec<Jet>, JetError> {
    let layout = Layout::get(n, order)?;
    (0..n).map(|i| Jet::variable_in(&layout, i)).collect()
}

/// Composes two coordinate maps: `(outer ∘ inner)ᵢ = outerᵢ(inner)`.
pub fn compose_maps(outer: &[Jet], inner: &[Jet]) -> Result<Vec<Jet>, JetError> {
    outer.iter().map(|o| o.compose(inner)).collect()
}

/// Inverts a coordinate map fixing the origin with invertible linear part.
///
/// Solves `φ(ψ(v)) = v` by the fixed point `ψ ← L⁻¹(v − N(ψ))`, where `L`
/// is the linear part of `φ` and `N` its nonlinear remainder. Each sweep
/// gains at least one order.
pub fn invert_map(map: &[Jet]) -> Result<Vec<Jet>, JetError> {
    let n = map.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let layout = map[0].layout.clone();
    let order = layout.order;
    let mut lin = vec![0.0; n * n];
    for (i, f) in map.iter().enumerate() {
        if f.n() != n {
            return Err(JetError::SubstitutionCount { expected: n, got: f.n() });
        }
        if f.value() != 0.0 {
            return Err(JetError::NonzeroConstant { index: i, value: f.value() });
        }
        let g = f.gradient();
        lin[i * n..(i + 1) * n].copy_from_slice(&g);
    }
    let lin_inv = crate::linalg::inverse(&lin, n)
        .ok_or_else(|| JetError::Domain("coordinate map has singular linear part".into()))?;
    let nonlinear: Vec<Jet> = map
        .iter()
        .map(|f| {
            let mut g = f.clone();
            for c in g.coeffs[1..=n].iter_mut() {
                *c = 0.0;
            }
            g
        })
        .collect();
    let vars: Vec<Jet> = (0..n)
        .map(|i| Jet::variable_in(&layout, i))
        .collect::<Result<_, _>>()?;
    let apply_inv = |rhs: &[Jet]| -> Vec<Jet> {
        (0..n)
            .map(|i| {
                let mut acc = Jet::zero_in(&layout);
                for (j, r) in rhs.iter().enumerate() {
                    let a = lin_inv[i * n + j];
                    if a != 0.0 {
                        acc = &acc + &r.scale(a);
                    }
                }
                acc
            })
            .collect()
    };
    let mut psi = apply_inv(&vars);
    for _ in 1..order.max(1) {
        let n_of_psi = compose_maps(&nonlinear, &psi)?;
        let rhs: Vec<Jet> = vars.iter().zip(&n_of_psi).map(|(v, m)| v - m).collect();
        psi = apply_inv(&rhs);
    }
    Ok(psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(n: usize, order: usize, terms: &[(&[u8], f64)]) -> Jet {
        Jet::from_terms(n, order, terms.iter().map(|(e, c)| (*e, *c))).unwrap()
    }

    #[test]
    fn layout_counts_match_binomials() {
        // C(n+4, 4)
        assert_eq!(Layout::get(2, 4).unwrap().len(), 15);
        assert_eq!(Layout::get(3, 4).unwrap().len(), 35);
        assert_eq!(Layout::get(8, 4).unwrap().len(), 495);
        assert!(Layout::get(9, 4).is_err());
    }

    #[test]
    fn enumeration_is_graded_lex() {
        let l = Layout::get(2, 2).unwrap();
        let got: Vec<Vec<u8>> = l.indices().iter().map(|m| m.exponents().to_vec()).collect();
        assert_eq!(
            got,
            vec![vec![0, 0], vec![1, 0], vec![0, 1], vec![2, 0], vec![1, 1], vec![0, 2]]
        );
    }

    #[test]
    fn add_is_coefficientwise() {
        let a = poly(1, 2, &[(&[0], 1.0), (&[1], 1.0)]);
        let b = poly(1, 2, &[(&[2], 1.0)]);
        let s = &a + &b;
        assert_eq!(s.coeffs(), &[1.0, 1.0, 1.0]);
        let z = Jet::zero(1, 2).unwrap();
        assert_eq!(&a + &z, a);
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        let a = Jet::zero(2, 4).unwrap();
        let b = Jet::zero(3, 4).unwrap();
        let c = Jet::zero(2, 3).unwrap();
        assert!(matches!(a.try_add(&b), Err(JetError::Shape(..))));
        assert!(matches!(a.try_mul(&c), Err(JetError::Shape(..))));
    }

    #[test]
    fn mul_truncates() {
        let a = poly(1, 2, &[(&[0], 1.0), (&[1], 1.0)]);
        let b = poly(1, 2, &[(&[0], 1.0), (&[1], -1.0)]);
        assert_eq!((&a * &b).coeffs(), &[1.0, 0.0, -1.0]);
        let x = Jet::variable(1, 2, 0).unwrap();
        let cube = &(&x * &x) * &x;
        assert_eq!(cube.coeffs(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn compose_expands_square_of_sum() {
        let f = poly(1, 2, &[(&[2], 1.0)]);
        let u = poly(2, 2, &[(&[1, 0], 1.0), (&[0, 1], 1.0)]);
        let g = f.compose(&[u]).unwrap();
        assert_eq!(g.coeff(&[2, 0]), 1.0);
        assert_eq!(g.coeff(&[1, 1]), 2.0);
        assert_eq!(g.coeff(&[0, 2]), 1.0);
    }

    #[test]
    fn compose_with_identity_is_noop() {
        let f = poly(2, 4, &[(&[0, 0], 3.0), (&[1, 2], -2.0), (&[4, 0], 0.5)]);
        let id = identity_map(2, 4).unwrap();
        assert_eq!(f.compose(&id).unwrap(), f);
    }

    #[test]
    fn compose_scales_normal_coordinate() {
        // y³ − x²y with x ↦ 2x
        let f = poly(2, 4, &[(&[0, 3], 1.0), (&[2, 1], -1.0)]);
        let subs = vec![
            poly(2, 4, &[(&[1, 0], 2.0)]),
            poly(2, 4, &[(&[0, 1], 1.0)]),
        ];
        let g = f.compose(&subs).unwrap();
        assert_eq!(g.coeff(&[0, 3]), 1.0);
        assert_eq!(g.coeff(&[2, 1]), -4.0);
    }

    #[test]
    fn compose_rejects_shifted_substitution() {
        let f = poly(1, 2, &[(&[2], 1.0)]);
        let s = poly(1, 2, &[(&[0], 0.5), (&[1], 1.0)]);
        assert!(matches!(
            f.compose(&[s]),
            Err(JetError::NonzeroConstant { index: 0, .. })
        ));
    }

    #[test]
    fn roots() {
        let f = poly(1, 2, &[(&[0], 1.0), (&[1], 2.0), (&[2], 1.0)]);
        let g = f.sqrt().unwrap();
        assert!((g.coeff(&[0]) - 1.0).abs() < 1e-15);
        assert!((g.coeff(&[1]) - 1.0).abs() < 1e-15);
        assert!(g.coeff(&[2]).abs() < 1e-15);

        let eight = Jet::constant(2, 4, 8.0).unwrap();
        assert!((eight.root(3).unwrap().value() - 2.0).abs() < 1e-15);

        let neg = Jet::constant(1, 3, -1.0).unwrap();
        assert!(matches!(neg.root(2), Err(JetError::Domain(_))));
        assert!((neg.root(3).unwrap().value() + 1.0).abs() < 1e-15);
        assert!(Jet::zero(1, 3).unwrap().root(3).is_err());
    }

    #[test]
    fn partials() {
        let f = poly(2, 4, &[(&[2, 1], 1.0)]);
        let d = f.partial(0).unwrap();
        assert_eq!(d.order(), 3);
        assert_eq!(d.coeff(&[1, 1]), 2.0);

        let c = Jet::constant(2, 4, 5.0).unwrap();
        assert_eq!(c.partial(0).unwrap().max_abs(), 0.0);

        let x4 = poly(1, 4, &[(&[4], 1.0)]);
        let mut d = x4;
        for _ in 0..4 {
            d = d.partial(0).unwrap();
        }
        assert_eq!(d.value(), 24.0);
    }

    #[test]
    fn derivative_undoes_normalization() {
        let f = poly(2, 4, &[(&[4, 0], 1.0), (&[2, 1], -1.0)]);
        assert_eq!(f.derivative(&[4, 0]), 24.0);
        assert_eq!(f.derivative(&[2, 1]), -2.0);
    }

    #[test]
    fn transcendental_series() {
        let l = Layout::get(1, 4).unwrap();
        let t = Jet::coordinate_in(&l, 0, 0.3).unwrap();
        let e = t.exp();
        let s = t.sin();
        let c = t.cos();
        for k in 0..=4u8 {
            let fact: f64 = (1..=k as u32).map(f64::from).product();
            assert!((e.coeff(&[k]) - 0.3f64.exp() / fact).abs() < 1e-15);
        }
        assert!((s.coeff(&[1]) - 0.3f64.cos()).abs() < 1e-15);
        assert!((c.coeff(&[1]) + 0.3f64.sin()).abs() < 1e-15);
        assert!((c.coeff(&[3]) - 0.3f64.sin() / 6.0).abs() < 1e-15);
    }

    #[test]
    fn inverse_map_round_trips() {
        let order = 4;
        let u = identity_map(2, order).unwrap();
        let x = &u[0];
        let y = &u[1];
        let phi = vec![
            &x.scale(2.0) + &(&(x * y) * &Jet::constant(2, order, 0.5).unwrap()),
            &y.scale(-1.0) + &(x * x),
        ];
        let psi = invert_map(&phi).unwrap();
        let back = compose_maps(&phi, &psi).unwrap();
        for (b, v) in back.iter().zip(&u) {
            assert!(b.max_abs_diff(v) < 1e-13);
        }
    }

    #[test]
    fn mask_checks() {
        let mask = SymmetryMask::boundary(2);
        let even = poly(2, 4, &[(&[2, 0], 1.0), (&[0, 3], 1.0), (&[2, 1], 1.0)]);
        let odd = poly(2, 4, &[(&[1, 0], 1.0)]);
        assert!(even.respects(&mask, Parity::Even));
        assert!(!odd.respects(&mask, Parity::Even));
        assert!(odd.respects(&mask, Parity::Odd));
        assert_eq!(odd.parity_defect(&mask, Parity::Even), 1.0);
    }
}
