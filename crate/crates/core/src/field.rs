//! Equivariant scalar fields on the half-space model and one-parameter families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{parse_expression, var_name, EvalError, Expr, ParseError, Params};
use crate::jet::{Jet, JetError, Layout, SymmetryMask, MAX_VARS};
use crate::poly::{Poly, XPoly};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("dimension {0} outside 1..={MAX_VARS}")]
    Dimension(usize),
    #[error("expression uses `{var}` but the field has dimension {n}")]
    VariableOutOfRange { var: String, n: usize },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("point has {got} coordinates, expected {n}")]
    PointDimension { got: usize, n: usize },
    #[error("field is not equivariant: f(x, y) != f(-x, y) at {witness:?}")]
    NotEquivariant { witness: Vec<f64> },
    #[error("{0}")]
    Precondition(String),
}

/// Anything that can produce Taylor jets at points of `R^n`.
pub trait Field: Send + Sync {
    fn n(&self) -> usize;

    fn jet(&self, p: &[f64], order: usize) -> Result<Jet, FieldError>;

    fn value(&self, p: &[f64]) -> Result<f64, FieldError> {
        Ok(self.jet(p, 0)?.value())
    }

    fn gradient(&self, p: &[f64]) -> Result<Vec<f64>, FieldError> {
        Ok(self.jet(p, 1)?.gradient())
    }
}

/// Coordinate seeds `p_i + u_i`.
pub fn seeds(layout: &std::sync::Arc<Layout>, p: &[f64]) -> Result<Vec<Jet>, JetError> {
    (0..p.len())
        .map(|i| Jet::coordinate_in(layout, i, p[i]))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    n: usize,
    expr: Expr,
    params: Params,
    bound: Expr,
}

impl ScalarField {
    /// Binds `params`; every identifier that is not a coordinate must be bound.
    pub fn new(n: usize, expr: Expr, params: Params) -> Result<ScalarField, FieldError> {
        if n == 0 || n > MAX_VARS {
            return Err(FieldError::Dimension(n));
        }
        if let Some(m) = expr.max_var() {
            if m >= n {
                return Err(FieldError::VariableOutOfRange { var: var_name(m), n });
            }
        }
        if let Some(p) = expr.free_params().into_iter().find(|p| params.get(p).is_none()) {
            return Err(FieldError::UnknownIdentifier(p));
        }
        let bound = expr.bind(&params);
        Ok(ScalarField {
            n,
            expr,
            params,
            bound,
        })
    }

    pub fn parse(n: usize, src: &str, params: Params) -> Result<ScalarField, FieldError> {
        ScalarField::new(n, parse_expression(src)?, params)
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn mask(&self) -> SymmetryMask {
        SymmetryMask::boundary(self.n)
    }

    fn check_point(&self, p: &[f64]) -> Result<(), FieldError> {
        if p.len() != self.n {
            return Err(FieldError::PointDimension { got: p.len(), n: self.n });
        }
        Ok(())
    }

    /// Evaluates over caller-provided coordinate jets.
    pub fn jet_at_seeds(&self, seeds: &[Jet]) -> Result<Jet, FieldError> {
        Ok(self.bound.eval_jet(seeds, &Params::new())?)
    }

    pub fn eval(&self, p: &[f64]) -> Result<f64, FieldError> {
        self.check_point(p)?;
        Ok(self.bound.eval(p, &Params::new())?)
    }
}

impl Field for ScalarField {
    fn n(&self) -> usize {
        self.n
    }

    fn jet(&self, p: &[f64], order: usize) -> Result<Jet, FieldError> {
        eval_field_jet(self, p, order)
    }

    fn value(&self, p: &[f64]) -> Result<f64, FieldError> {
        self.eval(p)
    }
}

/// Taylor expansion of `f` at `p`.
pub fn eval_field_jet(f: &ScalarField, p: &[f64], order: usize) -> Result<Jet, FieldError> {
    f.check_point(p)?;
    let layout = Layout::get(f.n, order)?;
    let s = seeds(&layout, p)?;
    Ok(f.bound.eval_jet(&s, &Params::new())?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Equivariance {
    Exact,
    NumericPass,
    Fail(Vec<f64>),
}

impl Equivariance {
    pub fn passed(&self) -> bool {
        !matches!(self, Equivariance::Fail(_))
    }
}

const EQUIVARIANCE_RTOL: f64 = 1e-9;
const SAMPLE_SEED: u64 = 0x5eed_0dd5;
const SAMPLE_RADIUS: f64 = 2.0;

fn mirrored(p: &[f64]) -> Vec<f64> {
    let mut q = p.to_vec();
    q[0] = -q[0];
    q
}

fn asymmetric_at(f: &ScalarField, p: &[f64]) -> bool {
    match (f.eval(p), f.eval(&mirrored(p))) {
        (Ok(a), Ok(b)) => (a - b).abs() >= EQUIVARIANCE_RTOL * a.abs().max(b.abs()).max(1.0),
        _ => false,
    }
}

/// Exact check for x-polynomial expressions, sampled otherwise.
pub fn check_equivariance(f: &ScalarField, samples: usize) -> Equivariance {
    if let Some(poly) = Poly::from_expr(&f.bound, f.n, &Params::new()) {
        let odd = poly.x_parity_part(true);
        if odd.max_abs_coeff() <= 1e-14 * poly.max_abs_coeff().max(1.0) {
            return Equivariance::Exact;
        }
    } else if let Some(xp) = XPoly::from_expr(&f.bound) {
        if xp.coeffs.iter().skip(1).step_by(2).all(Expr::is_zero) {
            return Equivariance::Exact;
        }
    }
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    let mut unit = vec![0.0; f.n];
    unit[0] = 1.0;
    candidates.push(unit.clone());
    for i in 1..f.n {
        let mut q = unit.clone();
        q[i] = 0.5;
        candidates.push(q);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SAMPLE_SEED);
    for _ in 0..samples {
        candidates.push(
            (0..f.n)
                .map(|_| rng.gen_range(-SAMPLE_RADIUS..SAMPLE_RADIUS))
                .collect(),
        );
    }
    for p in candidates {
        if asymmetric_at(f, &p) {
            return Equivariance::Fail(p);
        }
    }
    Equivariance::NumericPass
}

/// Even part `(f(x, y) + f(-x, y)) / 2`.
pub fn symmetrize(f: &ScalarField) -> ScalarField {
    let expr = if let Some(poly) = Poly::from_expr(&f.expr, f.n, &f.params) {
        poly.x_parity_part(false).to_expr()
    } else if let Some(xp) = XPoly::from_expr(&f.expr) {
        xp.to_expr_filtered(|k| k % 2 == 0, 0)
    } else {
        let flipped = f
            .expr
            .substitute_var(0, &Expr::Neg(Box::new(Expr::Var(0))));
        Expr::Mul(
            Box::new(Expr::Num(0.5)),
            Box::new(Expr::Add(Box::new(f.expr.clone()), Box::new(flipped))),
        )
    };
    ScalarField::new(f.n, expr, f.params.clone()).expect("same variables and parameters")
}

/// Base field with parameters driven by expressions in `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilySpec {
    pub n: usize,
    pub base: Expr,
    pub fixed: Params,
    pub path: Vec<(String, Expr)>,
    pub sigma_range: (f64, f64),
}

impl FamilySpec {
    pub fn new(
        n: usize,
        base: Expr,
        fixed: Params,
        path: Vec<(String, Expr)>,
        sigma_range: (f64, f64),
    ) -> Result<FamilySpec, FieldError> {
        let (a, b) = sigma_range;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(FieldError::Precondition(format!(
                "sigma range [{a}, {b}] must be finite and increasing"
            )));
        }
        for (name, e) in &path {
            if e.max_var().is_some() {
                return Err(FieldError::Precondition(format!(
                    "path for `{name}` may only depend on sigma"
                )));
            }
            if let Some(p) = e.free_params().into_iter().find(|p| p != "sigma") {
                return Err(FieldError::UnknownIdentifier(p));
            }
        }
        let fam = FamilySpec {
            n,
            base,
            fixed,
            path,
            sigma_range,
        };
        // binding at the start validates dimension and coverage of parameters
        fam.at(a)?;
        Ok(fam)
    }

    pub fn params_at(&self, sigma: f64) -> Result<Params, FieldError> {
        let mut p = self.fixed.clone();
        let s = Params::new().with("sigma", sigma);
        p.set("sigma", sigma);
        for (name, e) in &self.path {
            p.set(name, e.eval(&[], &s)?);
        }
        Ok(p)
    }

    pub fn at(&self, sigma: f64) -> Result<ScalarField, FieldError> {
        ScalarField::new(self.n, self.base.clone(), self.params_at(sigma)?)
    }

    /// Names of the parameters driven by the path.
    pub fn path_names(&self) -> Vec<&str> {
        self.path.iter().map(|(n, _)| n.as_str()).collect()
    }
}
