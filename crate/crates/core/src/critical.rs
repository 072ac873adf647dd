//! Critical point search and Morse classification on the half-space.

use std::cmp::Ordering;

use thiserror::Error;

use crate::exec::Exec;
use crate::field::{Field, FieldError};
use crate::jet::Jet;
use crate::linalg::{jacobi_eigen, norm, solve};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative eigenvalue threshold below which a Hessian counts as degenerate.
    pub eig_tol: f64,
    pub third_tol: f64,
    pub det_tol: f64,
    pub dedup: f64,
    pub snap: f64,
    /// Newton stops once `|∇Φ| < grad_tol · scale`.
    pub grad_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eig_tol: 1e-7,
            third_tol: 1e-7,
            det_tol: 1e-9,
            dedup: 1e-6,
            snap: 1e-8,
            grad_tol: 1e-10,
            newton_max_iter: 40,
        }
    }
}

/// Axis-aligned search box.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchBox {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl SearchBox {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<SearchBox, FieldError> {
        if min.len() != max.len() || min.is_empty() {
            return Err(FieldError::Precondition("box bounds must have equal, positive length".into()));
        }
        if min.iter().zip(&max).any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b)) {
            return Err(FieldError::Precondition(format!("box {min:?}..{max:?} is not ordered")));
        }
        if min[0] < 0.0 {
            return Err(FieldError::Precondition("box must lie in the half-space x >= 0".into()));
        }
        Ok(SearchBox { min, max })
    }

    pub fn n(&self) -> usize {
        self.min.len()
    }

    pub fn contains(&self, p: &[f64], slack: f64) -> bool {
        p.iter()
            .zip(self.min.iter().zip(&self.max))
            .all(|(v, (lo, hi))| *v >= lo - slack && *v <= hi + slack)
    }

    pub fn diameter(&self) -> f64 {
        norm(&self.max.iter().zip(&self.min).map(|(a, b)| a - b).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solver {
    pub tol: Tolerances,
    pub density: usize,
    pub exec: Exec,
}

impl Default for Solver {
    fn default() -> Self {
        Solver {
            tol: Tolerances::default(),
            density: 21,
            exec: Exec::default(),
        }
    }
}

fn axis(lo: f64, hi: f64, density: usize) -> Vec<f64> {
    if lo == hi {
        return vec![lo];
    }
    (0..density)
        .map(|i| lo + (hi - lo) * i as f64 / (density - 1) as f64)
        .collect()
}

fn grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(axes.len())];
    for a in axes {
        out = out
            .into_iter()
            .flat_map(|p| {
                a.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Regular grid over the box, first coordinate slowest. Degenerate axes
/// (`lo == hi`) contribute a single value.
pub fn seed_grid(b: &SearchBox, density: usize) -> Vec<Vec<f64>> {
    let density = density.max(2);
    let axes: Vec<Vec<f64>> = (0..b.n())
        .map(|i| axis(b.min[i], b.max[i], density))
        .collect();
    grid(&axes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NewtonMode {
    Interior,
    Boundary,
}

#[derive(Debug, Error)]
pub enum NewtonError {
    #[error("Newton did not converge within {0} iterations")]
    Diverged(usize),
    #[error("singular Newton system")]
    Singular,
    #[error("boundary point with nonzero normal derivative {0:e}")]
    NotCritical(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
}

const EXPLODE: f64 = 1e6;

fn gradient_scale(jet: &Jet) -> f64 {
    1.0 + jet.hessian().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Newton iteration on `∇Φ` (interior) or on `∇_y Φ(0, ·)` (boundary).
///
/// Interior results are reported with `x ≥ 0`; results within the snap
/// tolerance of the boundary are re-refined there.
pub fn refine_newton(
    f: &dyn Field,
    seed: &[f64],
    mode: NewtonMode,
    tol: &Tolerances,
) -> Result<Vec<f64>, NewtonError> {
    let n = f.n();
    let mut p = seed.to_vec();
    if mode == NewtonMode::Boundary {
        p[0] = 0.0;
    }
    let vars: Vec<usize> = match mode {
        NewtonMode::Interior => (0..n).collect(),
        NewtonMode::Boundary => (1..n).collect(),
    };
    let m = vars.len();
    let mut converged = false;
    for _ in 0..=tol.newton_max_iter {
        let jet = f.jet(&p, 2)?;
        let g_full = jet.gradient();
        let h_full = jet.hessian();
        let g: Vec<f64> = vars.iter().map(|&i| g_full[i]).collect();
        let h: Vec<f64> = vars
            .iter()
            .flat_map(|&i| vars.iter().map(move |&j| (i, j)))
            .map(|(i, j)| h_full[i * n + j])
            .collect();
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let step = solve(&h, &rhs, m);
        if norm(&g) < tol.grad_tol * gradient_scale(&jet) {
            // one polishing step, kept only if it does not make things worse
            if let Some(step) = step {
                let mut q = p.clone();
                for (k, &i) in vars.iter().enumerate() {
                    q[i] += step[k];
                }
                let gq = f.jet(&q, 1)?.gradient();
                if norm(&vars.iter().map(|&i| gq[i]).collect::<Vec<_>>()) <= norm(&g) {
                    p = q;
                }
            }
            converged = true;
            break;
        }
        let step = step.ok_or(NewtonError::Singular)?;
        for (k, &i) in vars.iter().enumerate() {
            p[i] += step[k];
        }
        if p.iter().any(|v| !v.is_finite() || v.abs() > EXPLODE) {
            return Err(NewtonError::Diverged(tol.newton_max_iter));
        }
    }
    if !converged {
        return Err(NewtonError::Diverged(tol.newton_max_iter));
    }
    match mode {
        NewtonMode::Interior => {
            p[0] = p[0].abs();
            if p[0] < tol.snap {
                return refine_newton(f, &p, NewtonMode::Boundary, tol);
            }
        }
        NewtonMode::Boundary => {
            let jet = f.jet(&p, 2)?;
            let gx = jet.gradient()[0];
            if gx.abs() >= 1e-8 * gradient_scale(&jet) {
                return Err(NewtonError::NotCritical(gx));
            }
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PointKind {
    InteriorOrbit,
    Boundary,
}

impl PointKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PointKind::InteriorOrbit => "interior-orbit",
            PointKind::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stability {
    BoundaryStable,
    BoundaryUnstable,
}

impl Stability {
    pub fn as_str(self) -> &'static str {
        match self {
            Stability::BoundaryStable => "boundary-stable",
            Stability::BoundaryUnstable => "boundary-unstable",
        }
    }
}

/// Hessian split into tangential (`y`) block, normal (`x`) entry and mixed row.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianData {
    pub n: usize,
    pub full: Vec<f64>,
    pub tangential: Vec<f64>,
    pub normal: f64,
    pub mixed: Vec<f64>,
}

impl HessianData {
    pub fn from_jet(jet: &Jet) -> HessianData {
        let n = jet.n();
        let full = jet.hessian();
        let tangential = (1..n)
            .flat_map(|i| (1..n).map(move |j| (i, j)))
            .map(|(i, j)| full[i * n + j])
            .collect();
        let mixed = (1..n).map(|j| full[j]).collect();
        HessianData {
            n,
            normal: full[0],
            full,
            tangential,
            mixed,
        }
    }

    pub fn max_mixed(&self) -> f64 {
        self.mixed.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub kind: PointKind,
    pub value: f64,
    /// Ascending.
    pub hessian_eigs: Vec<f64>,
    /// `None` for degenerate points.
    pub index: Option<usize>,
    pub boundary_index: Option<usize>,
    pub stability: Option<Stability>,
    pub normal_block: Option<f64>,
    pub degenerate: bool,
    /// Eigenvalue of smallest magnitude, with its sign.
    pub min_eig: f64,
    pub gradient_norm: f64,
}

impl CriticalPoint {
    pub fn is_boundary(&self) -> bool {
        self.kind == PointKind::Boundary
    }
}

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("gradient norm {0:e} too large for a critical point")]
    GradientTooLarge(f64),
    #[error(transparent)]
    Field(#[from] FieldError),
}

fn count_negative(vals: &[f64]) -> usize {
    vals.iter().filter(|v| **v < 0.0).count()
}

/// Eigenvalue threshold `eig_tol · max(1, spectral radius)`.
pub fn degeneracy_threshold(eigs: &[f64], tol: &Tolerances) -> f64 {
    let radius = eigs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    tol.eig_tol * radius.max(1.0)
}

pub fn signed_min_eig(eigs: &[f64]) -> f64 {
    eigs.iter()
        .copied()
        .min_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(0.0)
}

/// Morse data at a critical point; `x = 0` exactly marks a boundary point.
pub fn classify_point(
    f: &dyn Field,
    p: &[f64],
    tol: &Tolerances,
) -> Result<CriticalPoint, ClassifyError> {
    let jet = f.jet(p, 2)?;
    let n = f.n();
    let grad = jet.gradient();
    let gnorm = norm(&grad);
    if gnorm > 1e-8 * gradient_scale(&jet) {
        return Err(ClassifyError::GradientTooLarge(gnorm));
    }
    let hd = HessianData::from_jet(&jet);
    let eig = jacobi_eigen(&hd.full, n);
    let thresh = degeneracy_threshold(&eig.values, tol);
    let min_eig = signed_min_eig(&eig.values);
    let degenerate = min_eig.abs() < thresh;
    let kind = if p[0] == 0.0 {
        PointKind::Boundary
    } else {
        PointKind::InteriorOrbit
    };
    let index = (!degenerate).then(|| count_negative(&eig.values));
    let (boundary_index, stability, normal_block) = match kind {
        PointKind::InteriorOrbit => (None, None, None),
        PointKind::Boundary => {
            let tan = jacobi_eigen(&hd.tangential, n - 1);
            let tan_ok = tan.values.iter().all(|v| v.abs() >= thresh);
            let bidx = tan_ok.then(|| count_negative(&tan.values));
            let stab = if hd.normal.abs() < thresh {
                None
            } else if hd.normal < 0.0 {
                Some(Stability::BoundaryStable)
            } else {
                Some(Stability::BoundaryUnstable)
            };
            (bidx, stab, Some(hd.normal))
        }
    };
    Ok(CriticalPoint {
        location: p.to_vec(),
        kind,
        value: jet.value(),
        hessian_eigs: eig.values,
        index,
        boundary_index,
        stability,
        normal_block,
        degenerate,
        min_eig,
        gradient_norm: gnorm,
    })
}

fn lex(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

/// Removes points within `radius` of an earlier one.
pub fn dedup_points(points: Vec<Vec<f64>>, radius: f64) -> Vec<Vec<f64>> {
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for p in points {
        let dup = kept.iter().any(|q| {
            norm(&p.iter().zip(q).map(|(a, b)| a - b).collect::<Vec<_>>()) < radius
        });
        if !dup {
            kept.push(p);
        }
    }
    kept
}

/// Every critical point in the box, interior orbits represented with `x > 0`,
/// sorted by value and then location.
pub fn find_all_critical_points(
    f: &dyn Field,
    b: &SearchBox,
    solver: &Solver,
) -> Result<Vec<CriticalPoint>, FieldError> {
    let n = f.n();
    if b.n() != n {
        return Err(FieldError::PointDimension { got: b.n(), n });
    }
    let tol = solver.tol;
    let seeds = seed_grid(b, solver.density);
    let mut boundary_box = b.clone();
    boundary_box.max[0] = boundary_box.min[0];
    let boundary_seeds = if b.min[0] == 0.0 {
        seed_grid(&boundary_box, solver.density)
    } else {
        Vec::new()
    };
    let slack = 1e-9 * (1.0 + b.diameter());
    let keep = |r: Result<Vec<f64>, NewtonError>| match r {
        Ok(p) if b.contains(&p, slack) => Some(Ok(p)),
        Ok(_) | Err(NewtonError::Diverged(_) | NewtonError::Singular | NewtonError::NotCritical(_)) => None,
        Err(NewtonError::Field(FieldError::Eval(_))) => None,
        Err(NewtonError::Field(e)) => Some(Err(e)),
    };
    let found_b = solver
        .exec
        .map(&boundary_seeds, |s| keep(refine_newton(f, s, NewtonMode::Boundary, &tol)));
    let found_i = solver
        .exec
        .map(&seeds, |s| keep(refine_newton(f, s, NewtonMode::Interior, &tol)));
    let mut candidates = Vec::new();
    for r in found_b.into_iter().chain(found_i).flatten() {
        candidates.push(r?);
    }
    let unique = dedup_points(candidates, tol.dedup);
    let mut out = Vec::with_capacity(unique.len());
    for p in unique {
        match classify_point(f, &p, &tol) {
            Ok(c) => out.push(c),
            Err(ClassifyError::GradientTooLarge(_)) => {}
            Err(ClassifyError::Field(e)) => return Err(e),
        }
    }
    out.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then_with(|| lex(&a.location, &b.location))
    });
    Ok(out)
}
