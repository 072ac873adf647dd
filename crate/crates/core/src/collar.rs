//! Collar splitting and the doubling construction.
//!
//! Near the boundary a field is written `F(z, x) = F(z, 0) + x G(z, x)`. The
//! doubled field replaces the increment by `(1 - η) x G`, where the cutoff
//! `η = ρ(x) η0(z)` switches the increment off in a thin collar except around
//! boundary critical points. The result has vanishing odd `x`-derivatives on
//! the boundary wherever `η = 1`.

use std::sync::Arc;

use crate::critical::{refine_newton, NewtonMode, Tolerances};
use crate::expr::{Expr, Params};
use crate::field::{seeds, Field, FieldError, ScalarField};
use crate::jet::{Jet, Layout};
use crate::poly::XPoly;

pub const DEFAULT_QUADRATURE_NODES: usize = 16;
pub const DEFAULT_PROTECT_RADIUS: f64 = 0.25;

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(m);
    let mut weights = Vec::with_capacity(m);
    for i in 0..m {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=m {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j - 1) as f64 * t * p2 - (j - 1) as f64 * p3) / j as f64;
            }
            dp = m as f64 * (t * p1 - p2) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - t));
        weights.push(1.0 / ((1.0 - t * t) * dp * dp));
    }
    (nodes, weights)
}

#[derive(Debug, Clone)]
pub enum HadamardFactor {
    /// `G` obtained by exact division by `x`.
    Exact(ScalarField),
    /// `G(z, x) = ∫₀¹ ∂F/∂x(z, t x) dt` by Gauss–Legendre.
    Quadrature { nodes: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct CollarSplit {
    field: ScalarField,
    boundary: Option<ScalarField>,
    factor: HadamardFactor,
}

/// Splits `F(z, x) = F(z, 0) + x G(z, x)`.
pub fn hadamard_split(f: &ScalarField, quadrature_nodes: usize) -> CollarSplit {
    let exact = XPoly::from_expr(f.expr()).map(|xp| {
        let boundary = xp.coeffs.first().cloned().unwrap_or(Expr::Num(0.0));
        let g = xp.to_expr_filtered(|k| k >= 1, 1);
        let bind = |e: Expr| ScalarField::new(f.n(), e, f.params().clone()).expect("subexpression of a bound field");
        (bind(boundary), bind(g))
    });
    match exact {
        Some((boundary, g)) => CollarSplit {
            field: f.clone(),
            boundary: Some(boundary),
            factor: HadamardFactor::Exact(g),
        },
        None => {
            let (nodes, weights) = gauss_legendre(quadrature_nodes.max(1));
            CollarSplit {
                field: f.clone(),
                boundary: None,
                factor: HadamardFactor::Quadrature { nodes, weights },
            }
        }
    }
}

impl CollarSplit {
    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn factor(&self) -> &HadamardFactor {
        &self.factor
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.factor, HadamardFactor::Exact(_))
    }

    /// Jet of `(z, x) ↦ F(z, 0)` at `p`.
    pub fn boundary_jet(&self, p: &[f64], order: usize) -> Result<Jet, FieldError> {
        match &self.boundary {
            Some(b) => b.jet(p, order),
            None => {
                let layout = Layout::get(self.field.n(), order)?;
                let mut s = seeds(&layout, p)?;
                s[0] = Jet::zero_in(&layout);
                self.field.jet_at_seeds(&s)
            }
        }
    }

    /// Jet of the Hadamard factor `G` at `p`.
    pub fn factor_jet(&self, p: &[f64], order: usize) -> Result<Jet, FieldError> {
        match &self.factor {
            HadamardFactor::Exact(g) => g.jet(p, order),
            HadamardFactor::Quadrature { nodes, weights } => {
                let layout = Layout::get(self.field.n(), order + 1)?;
                let mut acc = Jet::zero(self.field.n(), order)?;
                for (t, w) in nodes.iter().zip(weights) {
                    let mut s = seeds(&layout, p)?;
                    s[0] = s[0].scale(*t);
                    // ∂/∂u₀ of F(z, t(x + u₀)) is t·∂F/∂x
                    let d = self.field.jet_at_seeds(&s)?.partial(0)?;
                    acc = &acc + &d.scale(w / t);
                }
                Ok(acc)
            }
        }
    }

    /// Jet of the increment `x G(z, x)`.
    pub fn increment_jet(&self, p: &[f64], order: usize) -> Result<Jet, FieldError> {
        match &self.factor {
            HadamardFactor::Exact(_) => {
                Ok(&self.field.jet(p, order)? - &self.boundary_jet(p, order)?)
            }
            HadamardFactor::Quadrature { .. } => {
                let layout = Layout::get(self.field.n(), order)?;
                let x = Jet::coordinate_in(&layout, 0, p[0])?;
                Ok(&x * &self.factor_jet(p, order)?)
            }
        }
    }
}

/// `t ↦ e^{-1/t}` for `t > 0`, identically zero otherwise.
fn flat(t: &Jet) -> Jet {
    if t.value() <= 0.0 {
        return Jet::zero_in(t.layout());
    }
    let inv = t.recip().expect("positive constant term");
    (-&inv).exp()
}

/// Smooth step: `0` for `t ≤ 0`, `1` for `t ≥ 1`.
pub fn smooth_step(t: &Jet) -> Jet {
    if t.value() <= 0.0 {
        return Jet::zero_in(t.layout());
    }
    if t.value() >= 1.0 {
        return Jet::constant_in(t.layout(), 1.0);
    }
    let a = flat(t);
    let b = flat(&(-t).add_constant(1.0));
    a.try_div(&(&a + &b)).expect("a + b > 0 inside the ramp")
}

/// Cutoffs used by [`build_double`].
#[derive(Debug, Clone, PartialEq)]
pub struct BumpSpec {
    /// Collar width.
    pub epsilon: f64,
    /// Radius `r` of the protected neighborhoods `U′_p`; `U_p` has radius `2r`.
    pub radius: f64,
    /// Optional period of the tangential coordinates (circle boundaries).
    pub period: Option<f64>,
}

impl BumpSpec {
    pub fn new(epsilon: f64, radius: f64) -> BumpSpec {
        BumpSpec {
            epsilon,
            radius,
            period: None,
        }
    }

    pub fn with_period(mut self, period: f64) -> BumpSpec {
        self.period = Some(period);
        self
    }

    /// `ρ`: `1` on `[0, ε/4]`, `0` beyond `ε/2`.
    pub fn rho(&self, x: &Jet) -> Jet {
        let q = self.epsilon / 4.0;
        let t = x.add_constant(-q).scale(1.0 / q);
        (-&smooth_step(&t)).add_constant(1.0)
    }

    /// `η0`: `0` within `r` of a center, `1` beyond `2r` from every center.
    pub fn eta0(&self, z: &[Jet], centers: &[Vec<f64>]) -> Jet {
        let layout = z[0].layout().clone();
        let r2 = self.radius * self.radius;
        let mut out = Jet::constant_in(&layout, 1.0);
        for c in centers {
            let mut d2 = Jet::zero_in(&layout);
            for (zi, ci) in z.iter().zip(c) {
                let mut off = zi.value() - ci;
                if let Some(per) = self.period {
                    off -= per * (off / per).round();
                }
                let diff = zi.add_constant(off - zi.value());
                d2 = &d2 + &(&diff * &diff);
            }
            let t = d2.add_constant(-r2).scale(1.0 / (3.0 * r2));
            out = &out * &smooth_step(&t);
        }
        out
    }

    /// `η(z, x) = ρ(x) η0(z)` at `p`; `centers` are tangential coordinates.
    pub fn eta(&self, p: &[f64], order: usize, centers: &[Vec<f64>]) -> Result<Jet, FieldError> {
        let layout = Layout::get(p.len(), order)?;
        let s = seeds(&layout, p)?;
        let rho = self.rho(&s[0]);
        if rho.max_abs() == 0.0 || s.len() == 1 {
            return Ok(rho);
        }
        Ok(&rho * &self.eta0(&s[1..], centers))
    }

    /// Sampled `sup |Dη| · ε` over a neighborhood of the given centers.
    pub fn derivative_bound(&self, centers: &[Vec<f64>]) -> Result<f64, FieldError> {
        let mut sup: f64 = 0.0;
        for c in centers.iter().take(1) {
            for i in 0..=40 {
                for j in 0..=40 {
                    let x = self.epsilon * 0.6 * i as f64 / 40.0;
                    let mut p = vec![x];
                    p.extend(c.iter().enumerate().map(|(k, v)| {
                        if k == 0 {
                            v + 3.0 * self.radius * (j as f64 / 20.0 - 1.0)
                        } else {
                            *v
                        }
                    }));
                    let g = self.eta(&p, 1, centers)?.gradient();
                    sup = sup.max(crate::linalg::norm(&g));
                }
            }
        }
        Ok(sup * self.epsilon)
    }
}

/// The doubled field `F_s = F(z, 0) + (1 - s η) x G`, with `s = 1` giving `P`.
#[derive(Debug, Clone)]
pub struct DoubledField {
    split: Arc<CollarSplit>,
    bump: BumpSpec,
    centers: Vec<Vec<f64>>,
    s: f64,
}

impl DoubledField {
    pub fn split(&self) -> &CollarSplit {
        &self.split
    }

    pub fn bump(&self) -> &BumpSpec {
        &self.bump
    }

    /// Tangential coordinates of the protected boundary critical points.
    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    /// Member `F_s` of the homotopy from `F` (`s = 0`) to `P` (`s = 1`).
    pub fn homotopy(&self, s: f64) -> DoubledField {
        DoubledField {
            s,
            ..self.clone()
        }
    }
}

impl Field for DoubledField {
    fn n(&self) -> usize {
        self.split.field.n()
    }

    fn jet(&self, p: &[f64], order: usize) -> Result<Jet, FieldError> {
        let eta = self.bump.eta(p, order, &self.centers)?;
        if eta.max_abs() == 0.0 || self.s == 0.0 {
            return self.split.field.jet(p, order);
        }
        let f0 = self.split.boundary_jet(p, order)?;
        let inc = self.split.increment_jet(p, order)?;
        let damp = (-&eta.scale(self.s)).add_constant(1.0);
        Ok(&f0 + &(&damp * &inc))
    }
}

/// Builds the doublable field `P` from a collar field `F`.
///
/// `crit_boundary` lists the boundary critical points of `F` (full points with
/// `x = 0`); `tangential_box` bounds the tangential coordinates scanned for
/// interior critical points inside the collar.
pub fn build_double(
    f: &ScalarField,
    crit_boundary: &[Vec<f64>],
    bump: BumpSpec,
    tangential_box: (&[f64], &[f64]),
) -> Result<DoubledField, FieldError> {
    if !(bump.epsilon > 0.0 && bump.radius > 0.0) {
        return Err(FieldError::Precondition(
            "collar width and protection radius must be positive".into(),
        ));
    }
    let tol = Tolerances::default();
    for p in crit_boundary {
        if p.len() != f.n() || p[0] != 0.0 {
            return Err(FieldError::Precondition(format!(
                "boundary critical point {p:?} must have x = 0 and dimension {}",
                f.n()
            )));
        }
        let g = f.gradient(p)?;
        if crate::linalg::norm(&g) > 1e-8 {
            return Err(FieldError::Precondition(format!(
                "{p:?} is not a critical point of F (|DF| = {:e})",
                crate::linalg::norm(&g)
            )));
        }
    }
    // grid scan of the collar for interior critical points
    let (lo, hi) = tangential_box;
    let m = 24usize;
    let steps = m.pow(lo.len() as u32);
    for k in 0..steps {
        let mut p = vec![0.0; f.n()];
        let mut rem = k;
        for d in 0..lo.len() {
            let i = rem % m;
            rem /= m;
            p[d + 1] = lo[d] + (hi[d] - lo[d]) * i as f64 / (m - 1) as f64;
        }
        for xi in 1..=3 {
            p[0] = bump.epsilon * xi as f64 / 3.0;
            if let Ok(q) = refine_newton(f, &p, NewtonMode::Interior, &tol) {
                if q[0] > tol.snap && q[0] < bump.epsilon {
                    return Err(FieldError::Precondition(format!(
                        "collar of width {} contains an interior critical point near {q:?}; choose a smaller epsilon",
                        bump.epsilon
                    )));
                }
            }
        }
    }
    let centers = crit_boundary.iter().map(|p| p[1..].to_vec()).collect();
    Ok(DoubledField {
        split: Arc::new(hadamard_split(f, DEFAULT_QUADRATURE_NODES)),
        bump,
        centers,
        s: 1.0,
    })
}

/// Scalar field `F(z, x)` with the period `2π` circle example used by the demo.
pub fn collar_example() -> ScalarField {
    ScalarField::parse(2, "cos(y1) + x^2 + x*sin(y1)^2", Params::new()).expect("valid expression")
}
