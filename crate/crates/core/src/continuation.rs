//! Tracking critical points along a one-parameter family and locating the
//! codimension-one events between them.
//!
//! Every σ sample gets a fresh global solve. Consecutive samples whose censuses
//! differ are subdivided until the change is a single elementary event, which
//! is then located with a smooth test function:
//!
//! * folds (interior or boundary pairs): with `v0` the kernel direction and
//!   `W` its complement at the last sample before the fold, `p(σ)` solves
//!   `Wᵀ∇Φ = 0, λ_min(D²Φ) = 0` and `ρ(σ) = v0·∇Φ(p(σ))`;
//! * collisions: `ρ(σ) = ∂²Φ/∂x²` along the boundary branch whose stability flips.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::critical::{
    classify_point, find_all_critical_points, refine_newton, CriticalPoint, NewtonMode, PointKind,
    SearchBox, Solver, Stability,
};
use crate::field::{check_equivariance, Equivariance, FamilySpec, Field, FieldError, ScalarField};
use crate::linalg::{dot, jacobi_eigen, norm, solve};
use crate::strata::{classify_stratum, CodimReason, StrataError, StratumLabel, StratumTag};

#[derive(Debug, Error)]
pub enum TrackError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Strata(#[from] StrataError),
    #[error("family is not equivariant at sigma = {sigma}: witness {witness:?}")]
    NotEquivariant { sigma: f64, witness: Vec<f64> },
    #[error("box dimension {got} does not match field dimension {n}")]
    BoxDimension { got: usize, n: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackerConfig {
    pub sigma_step: f64,
    pub solver: Solver,
    pub trans_tol: f64,
    pub bracket_tol: f64,
    /// Offset of the censuses taken on both sides of a located event.
    pub census_delta: f64,
    /// Step of the central difference used for transversality.
    pub fd_step: f64,
    pub max_subdivisions: u32,
    pub equivariance_samples: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            sigma_step: 1.0 / 200.0,
            solver: Solver::default(),
            trans_tol: 1e-6,
            bracket_tol: 1e-10,
            census_delta: 1e-6,
            fd_step: 1e-5,
            max_subdivisions: 10,
            equivariance_samples: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, PartialOrd, Ord)]
pub struct Census {
    pub interior: usize,
    pub boundary_stable: usize,
    pub boundary_unstable: usize,
    pub degenerate: usize,
}

impl Census {
    pub fn from_points(points: &[CriticalPoint]) -> Census {
        let mut c = Census::default();
        for p in points {
            if p.degenerate {
                c.degenerate += 1;
                continue;
            }
            match (p.kind, p.stability) {
                (PointKind::InteriorOrbit, _) => c.interior += 1,
                (PointKind::Boundary, Some(Stability::BoundaryStable)) => c.boundary_stable += 1,
                (PointKind::Boundary, Some(Stability::BoundaryUnstable)) => c.boundary_unstable += 1,
                (PointKind::Boundary, None) => c.degenerate += 1,
            }
        }
        c
    }

    pub fn boundary(&self) -> usize {
        self.boundary_stable + self.boundary_unstable
    }

    /// Short region label such as `i1s0u2`.
    pub fn label(&self) -> String {
        format!(
            "i{}s{}u{}",
            self.interior, self.boundary_stable, self.boundary_unstable
        )
    }

    /// Two degenerate orbits at one parameter value put the function in codimension ≥ 2.
    pub fn stratum_hint(&self) -> Option<StratumLabel> {
        (self.degenerate >= 2).then(|| StratumLabel::codim_ge2(CodimReason::MultipleDegenerateOrbits))
    }
}

type SignatureKey = (PointKind, Option<usize>, Option<usize>, Option<Stability>);

fn signature(points: &[CriticalPoint]) -> BTreeMap<SignatureKey, usize> {
    let mut m = BTreeMap::new();
    for p in points {
        *m.entry((p.kind, p.index, p.boundary_index, p.stability)).or_insert(0) += 1;
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchSample {
    pub sigma: f64,
    pub location: Vec<f64>,
    pub index: Option<usize>,
    pub boundary_index: Option<usize>,
    pub stability: Option<Stability>,
    pub min_eig: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: usize,
    pub kind: PointKind,
    pub samples: Vec<BranchSample>,
    pub birth_event: Option<usize>,
    pub death_event: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    InteriorBirth,
    InteriorDeath,
    BoundaryBirth,
    BoundaryDeath,
    Collision,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::InteriorBirth => "interior-birth",
            EventKind::InteriorDeath => "interior-death",
            EventKind::BoundaryBirth => "boundary-birth",
            EventKind::BoundaryDeath => "boundary-death",
            EventKind::Collision => "collision",
        }
    }

    pub fn parse(s: &str) -> Option<EventKind> {
        [
            EventKind::InteriorBirth,
            EventKind::InteriorDeath,
            EventKind::BoundaryBirth,
            EventKind::BoundaryDeath,
            EventKind::Collision,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }

    pub fn expected_stratum(self) -> StratumTag {
        match self {
            EventKind::InteriorBirth | EventKind::InteriorDeath => StratumTag::F1_1,
            EventKind::BoundaryBirth | EventKind::BoundaryDeath => StratumTag::F1_21,
            EventKind::Collision => StratumTag::F1_22,
        }
    }
}

/// One member of a created or annihilated pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMember {
    pub branch: usize,
    pub index: Option<usize>,
    pub boundary_index: Option<usize>,
    pub stability: Option<Stability>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EventDetails {
    Pair([PairMember; 2]),
    Collision {
        interior_branch: usize,
        boundary_branch: usize,
        interior_index: Option<usize>,
        /// Stability of the boundary point before and after the event (in σ order).
        before: Stability,
        after: Stability,
        index_before: Option<usize>,
        index_after: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: usize,
    pub sigma_star: f64,
    pub location: Vec<f64>,
    pub stratum: StratumLabel,
    pub kind: EventKind,
    pub details: EventDetails,
    /// `|dρ/dσ|` at the event.
    pub transversality: f64,
    pub transverse: bool,
    pub census_before: Census,
    pub census_after: Census,
}

/// A census change that could not be turned into an event.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub sigma: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalCensus {
    pub from: f64,
    pub to: f64,
    pub census: Census,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult {
    pub branches: Vec<Branch>,
    pub events: Vec<Event>,
    pub diagnostics: Vec<Diagnostic>,
    pub intervals: Vec<IntervalCensus>,
}

#[derive(Debug, Clone)]
struct Snapshot {
    sigma: f64,
    points: Vec<CriticalPoint>,
}

impl Snapshot {
    fn census(&self) -> Census {
        Census::from_points(&self.points)
    }

    fn has_degenerate(&self) -> bool {
        self.points.iter().any(|p| p.degenerate || (p.is_boundary() && p.stability.is_none()))
    }
}

fn equivariant_field(family: &FamilySpec, sigma: f64, samples: usize) -> Result<ScalarField, TrackError> {
    let f = family.at(sigma)?;
    if let Equivariance::Fail(witness) = check_equivariance(&f, samples) {
        return Err(TrackError::NotEquivariant { sigma, witness });
    }
    Ok(f)
}

fn solve_at(
    family: &FamilySpec,
    sigma: f64,
    b: &SearchBox,
    cfg: &TrackerConfig,
) -> Result<Snapshot, TrackError> {
    let f = equivariant_field(family, sigma, cfg.equivariance_samples)?;
    Ok(Snapshot {
        sigma,
        points: find_all_critical_points(&f, b, &cfg.solver)?,
    })
}

/// Critical-point census of the family member at `sigma`.
pub fn census(family: &FamilySpec, sigma: f64, b: &SearchBox, solver: &Solver) -> Result<Census, TrackError> {
    let f = family.at(sigma)?;
    Ok(Census::from_points(&find_all_critical_points(&f, b, solver)?))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

/// Greedy nearest matching of same-kind points; returns pairs and leftovers.
fn match_points(a: &[CriticalPoint], b: &[CriticalPoint]) -> (Vec<(usize, usize)>, Vec<usize>, Vec<usize>) {
    let mut cand = Vec::new();
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            if p.kind == q.kind {
                cand.push((distance(&p.location, &q.location), i, j));
            }
        }
    }
    cand.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push((i, j));
        }
    }
    pairs.sort_unstable();
    let left_a = (0..a.len()).filter(|&i| !used_a[i]).collect();
    let left_b = (0..b.len()).filter(|&j| !used_b[j]).collect();
    (pairs, left_a, left_b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Change {
    InteriorPair { birth: bool },
    BoundaryPair { birth: bool },
    Collision { interior_born: bool },
}

fn elementary(a: &Census, b: &Census) -> Option<Change> {
    if a.degenerate > 0 || b.degenerate > 0 {
        return None;
    }
    let di = b.interior as i64 - a.interior as i64;
    let ds = b.boundary_stable as i64 - a.boundary_stable as i64;
    let du = b.boundary_unstable as i64 - a.boundary_unstable as i64;
    match (di, ds, du) {
        (2 | -2, 0, 0) => Some(Change::InteriorPair { birth: di > 0 }),
        (0, 2 | -2, 0) => Some(Change::BoundaryPair { birth: ds > 0 }),
        (0, 0, 2 | -2) => Some(Change::BoundaryPair { birth: du > 0 }),
        (1 | -1, 1, -1) | (1 | -1, -1, 1) => Some(Change::Collision { interior_born: di > 0 }),
        _ => None,
    }
}

// ---------------------------------------------------------------- test functions

/// Defining system for a fold point at fixed σ, with frozen kernel direction.
#[derive(Debug, Clone)]
pub struct FoldSystem {
    vars: Vec<usize>,
    v0: Vec<f64>,
    w: Vec<Vec<f64>>,
}

fn restricted(h: &[f64], n: usize, vars: &[usize]) -> Vec<f64> {
    vars.iter()
        .flat_map(|&i| vars.iter().map(move |&j| h[i * n + j]))
        .collect()
}

impl FoldSystem {
    /// Freezes the kernel direction of `f` at `p`; boundary systems work in `y` only.
    pub fn at(f: &dyn Field, p: &[f64], boundary: bool) -> Result<FoldSystem, FieldError> {
        let n = f.n();
        let vars: Vec<usize> = if boundary { (1..n).collect() } else { (0..n).collect() };
        let h = restricted(&f.jet(p, 2)?.hessian(), n, &vars);
        let e = jacobi_eigen(&h, vars.len());
        let k = e.smallest_magnitude().unwrap_or(0);
        let v0 = e.vector(k);
        let w = (0..vars.len()).filter(|&j| j != k).map(|j| e.vector(j)).collect();
        Ok(FoldSystem { vars, v0, w })
    }

    /// Newton on `(Wᵀ∇Φ, λ_min) = 0` started at `start`.
    pub fn solve(&self, f: &dyn Field, start: &[f64]) -> Option<Vec<f64>> {
        let n = f.n();
        let m = self.vars.len();
        let mut p = start.to_vec();
        for _ in 0..60 {
            let jet = f.jet(&p, 3).ok()?;
            let g_full = jet.gradient();
            let g: Vec<f64> = self.vars.iter().map(|&i| g_full[i]).collect();
            let h = restricted(&jet.hessian(), n, &self.vars);
            let e = jacobi_eigen(&h, m);
            let k = e.smallest_magnitude()?;
            let v = e.vector(k);
            let mut res: Vec<f64> = self.w.iter().map(|w| dot(w, &g)).collect();
            res.push(e.values[k]);
            let scale = 1.0 + h.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let rnorm = norm(&res);
            if rnorm < 1e-14 * scale {
                return Some(p);
            }
            let mut jac = Vec::with_capacity(m * m);
            for w in &self.w {
                for j in 0..m {
                    jac.push((0..m).map(|i| w[i] * h[i * m + j]).sum());
                }
            }
            for &vj in &self.vars {
                let dh = restricted(&jet.partial(vj).ok()?.hessian(), n, &self.vars);
                let mut s = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        s += v[a] * dh[a * m + b] * v[b];
                    }
                }
                jac.push(s);
            }
            let step = solve(&jac, &res.iter().map(|r| -r).collect::<Vec<_>>(), m)?;
            for (k, &i) in self.vars.iter().enumerate() {
                p[i] += step[k];
            }
            if p.iter().any(|x| !x.is_finite()) {
                return None;
            }
            if norm(&step) < 1e-15 * (1.0 + norm(&p)) {
                return (rnorm < 1e-8 * scale).then_some(p);
            }
        }
        None
    }

    /// `v0·∇Φ(p)`.
    pub fn rho(&self, f: &dyn Field, p: &[f64]) -> Option<f64> {
        let g = f.gradient(p).ok()?;
        Some(self.vars.iter().zip(&self.v0).map(|(&i, v)| v * g[i]).sum())
    }
}

/// Normal Hessian entry along the boundary branch through `start`.
fn collision_rho(f: &dyn Field, start: &[f64], solver: &Solver) -> Option<(f64, Vec<f64>)> {
    let p = refine_newton(f, start, NewtonMode::Boundary, &solver.tol).ok()?;
    let h = f.jet(&p, 2).ok()?.hessian();
    Some((h[0], p))
}

/// Bracketed root of a sign-changing function (Illinois variant of regula falsi).
fn bracket_root(
    mut f: impl FnMut(f64) -> Option<f64>,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    tol: f64,
) -> Option<f64> {
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let mut side = 0i8;
    for it in 0..200 {
        if (b - a).abs() < tol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        let w = b - a;
        if !(c > a.min(b) && c < a.max(b)) || it % 4 == 3 {
            c = 0.5 * (a + b);
        }
        // keep the secant point away from the endpoints so the bracket shrinks on both sides
        let guard = 0.25 * tol;
        c = c.clamp(a.min(b) + guard, a.max(b) - guard);
        let fc = f(c)?;
        if fc == 0.0 {
            return Some(c);
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() >= w {
            break;
        }
    }
    Some(0.5 * (a + b))
}

/// Fold location between a σ with the pair present and one without it.
pub fn locate_fold(
    family: &FamilySpec,
    pair_sigma: f64,
    other_sigma: f64,
    pair: (&[f64], &[f64]),
    boundary: bool,
    cfg: &TrackerConfig,
) -> Result<Option<(f64, Vec<f64>, FoldSystem)>, TrackError> {
    let mut mid: Vec<f64> = pair.0.iter().zip(pair.1).map(|(a, b)| 0.5 * (a + b)).collect();
    if boundary {
        mid[0] = 0.0;
    }
    let fp = family.at(pair_sigma)?;
    let sys = FoldSystem::at(&fp, &mid, boundary)?;
    let Some(p_pair) = sys.solve(&fp, &mid) else {
        return Ok(None);
    };
    let Some(r_pair) = sys.rho(&fp, &p_pair) else {
        return Ok(None);
    };
    let fo = family.at(other_sigma)?;
    let Some(p_other) = sys.solve(&fo, &p_pair) else {
        return Ok(None);
    };
    let Some(r_other) = sys.rho(&fo, &p_other) else {
        return Ok(None);
    };
    let mut last = p_pair.clone();
    let mut eval = |s: f64| -> Option<f64> {
        let f = family.at(s).ok()?;
        let p = sys.solve(&f, &last)?;
        let r = sys.rho(&f, &p)?;
        last = p;
        Some(r)
    };
    let (a, b, fa, fb) = if pair_sigma < other_sigma {
        (pair_sigma, other_sigma, r_pair, r_other)
    } else {
        (other_sigma, pair_sigma, r_other, r_pair)
    };
    let Some(star) = bracket_root(&mut eval, a, b, fa, fb, cfg.bracket_tol) else {
        return Ok(None);
    };
    let f = family.at(star)?;
    let Some(p) = sys.solve(&f, &last) else {
        return Ok(None);
    };
    Ok(Some((star, p, sys)))
}

/// Collision location along a boundary branch with a stability flip.
pub fn locate_collision(
    family: &FamilySpec,
    (sa, pa): (f64, &[f64]),
    (sb, pb): (f64, &[f64]),
    cfg: &TrackerConfig,
) -> Result<Option<(f64, Vec<f64>)>, TrackError> {
    let solver = cfg.solver;
    let fa = family.at(sa)?;
    let fb = family.at(sb)?;
    let (Some((ra, qa)), Some((rb, _))) = (collision_rho(&fa, pa, &solver), collision_rho(&fb, pb, &solver)) else {
        return Ok(None);
    };
    let mut last = qa;
    let mut eval = |s: f64| -> Option<f64> {
        let f = family.at(s).ok()?;
        let (r, p) = collision_rho(&f, &last, &solver)?;
        last = p;
        Some(r)
    };
    let Some(star) = bracket_root(&mut eval, sa, sb, ra, rb, cfg.bracket_tol) else {
        return Ok(None);
    };
    let f = family.at(star)?;
    Ok(collision_rho(&f, &last, &solver).map(|(_, p)| (star, p)))
}

/// `|dρ/dσ|` at a located event by a central difference of the event's test function.
pub fn transversality_check(
    family: &FamilySpec,
    sigma_star: f64,
    point: &[f64],
    cfg: &TrackerConfig,
) -> Result<f64, TrackError> {
    let f = family.at(sigma_star)?;
    let boundary = point[0] == 0.0;
    let h = cfg.fd_step;
    let normal_kernel = boundary && {
        let hess = f.jet(point, 2)?.hessian();
        let eigs = jacobi_eigen(&hess, f.n()).values;
        hess[0].abs() <= eigs.iter().fold(f64::INFINITY, |m, v| m.min(v.abs())) + 1e-12
    };
    let rho_at = |s: f64| -> Result<f64, TrackError> {
        let g = family.at(s)?;
        if normal_kernel {
            collision_rho(&g, point, &cfg.solver)
                .map(|(r, _)| r)
                .ok_or_else(|| FieldError::Precondition(format!("boundary branch lost at sigma = {s}")).into())
        } else {
            let sys = FoldSystem::at(&f, point, boundary)?;
            let p = sys
                .solve(&g, point)
                .ok_or_else(|| FieldError::Precondition(format!("fold system diverged at sigma = {s}")))?;
            sys.rho(&g, &p)
                .ok_or_else(|| FieldError::Precondition("gradient unavailable".into()).into())
        }
    };
    Ok(((rho_at(sigma_star + h)? - rho_at(sigma_star - h)?) / (2.0 * h)).abs())
}

// ---------------------------------------------------------------- tracker

struct PendingEvent {
    /// Index of the interval `(snapshots[k], snapshots[k + 1])`.
    interval: usize,
    event: Event,
    /// Points (by snapshot-local index) that start or stop at the event.
    ended: Vec<usize>,
    started: Vec<usize>,
}

fn sample_sigmas(family: &FamilySpec, step: f64) -> Vec<f64> {
    let (a, b) = family.sigma_range;
    let count = ((b - a) / step).ceil().max(1.0) as usize;
    (0..=count)
        .map(|k| if k == count { b } else { a + (b - a) * k as f64 / count as f64 })
        .collect()
}

const SPLIT: f64 = 0.381_966_011_250_105_1;

fn nudged(
    family: &FamilySpec,
    sigma: f64,
    toward: f64,
    b: &SearchBox,
    cfg: &TrackerConfig,
) -> Result<Option<Snapshot>, TrackError> {
    let mut s = sigma;
    for k in 0..6 {
        let snap = solve_at(family, s, b, cfg)?;
        if !snap.has_degenerate() {
            return Ok(Some(snap));
        }
        s = sigma + (toward - sigma) * 0.01 * 3f64.powi(k);
    }
    Ok(None)
}

/// Tracks all critical points of the family over its σ range.
pub fn track_branches(family: &FamilySpec, b: &SearchBox, cfg: &TrackerConfig) -> Result<TrackResult, TrackError> {
    if b.n() != family.n {
        return Err(TrackError::BoxDimension { got: b.n(), n: family.n });
    }
    let (lo, hi) = family.sigma_range;
    let mut diagnostics = Vec::new();

    // samples, skipping parameter values that land on a degenerate member
    let mut snaps: Vec<Snapshot> = Vec::new();
    for s in sample_sigmas(family, cfg.sigma_step) {
        let snap = solve_at(family, s, b, cfg)?;
        if !snap.has_degenerate() {
            snaps.push(snap);
        } else if s == lo || s == hi {
            let toward = if s == lo { hi } else { lo };
            let step = cfg.sigma_step.min((hi - lo) / 4.0);
            match nudged(family, s, s + (toward - s).signum() * step, b, cfg)? {
                Some(n) => snaps.push(n),
                None => diagnostics.push(Diagnostic {
                    sigma: s,
                    message: "range endpoint sits on a degenerate member".into(),
                }),
            }
        }
    }

    // subdivide until every census change is elementary
    let min_width = cfg.sigma_step / f64::from(1u32 << cfg.max_subdivisions);
    let mut i = 0;
    while i + 1 < snaps.len() {
        let (a, c) = (&snaps[i], &snaps[i + 1]);
        if signature(&a.points) == signature(&c.points) {
            i += 1;
            continue;
        }
        if elementary(&a.census(), &c.census()).is_some() {
            i += 1;
            continue;
        }
        let width = c.sigma - a.sigma;
        if width <= min_width {
            diagnostics.push(Diagnostic {
                sigma: 0.5 * (a.sigma + c.sigma),
                message: format!(
                    "unresolved census change {} -> {} on [{}, {}]",
                    a.census().label(),
                    c.census().label(),
                    a.sigma,
                    c.sigma
                ),
            });
            i += 1;
            continue;
        }
        let mut inserted = None;
        for frac in [SPLIT, 1.0 - SPLIT, 0.5 - 0.1 * SPLIT] {
            let s = a.sigma + frac * width;
            let snap = solve_at(family, s, b, cfg)?;
            if !snap.has_degenerate() {
                inserted = Some(snap);
                break;
            }
        }
        match inserted {
            Some(snap) => snaps.insert(i + 1, snap),
            None => {
                diagnostics.push(Diagnostic {
                    sigma: a.sigma,
                    message: "degenerate members throughout a subdivision".into(),
                });
                i += 1;
            }
        }
    }

    // locate and classify the elementary events
    let mut pending: Vec<PendingEvent> = Vec::new();
    for k in 0..snaps.len().saturating_sub(1) {
        let (a, c) = (&snaps[k], &snaps[k + 1]);
        if signature(&a.points) == signature(&c.points) {
            continue;
        }
        let Some(change) = elementary(&a.census(), &c.census()) else {
            continue;
        };
        match resolve_event(family, b, cfg, a, c, change)? {
            Ok(mut ev) => {
                ev.interval = k;
                pending.push(ev);
            }
            Err(message) => diagnostics.push(Diagnostic {
                sigma: 0.5 * (a.sigma + c.sigma),
                message,
            }),
        }
    }

    let (branches, events) = build_branches(&snaps, pending);
    let intervals = interval_censuses(family, b, cfg, &snaps, &events)?;
    Ok(TrackResult {
        branches,
        events,
        diagnostics,
        intervals,
    })
}

fn pair_member(p: &CriticalPoint) -> PairMember {
    PairMember {
        branch: usize::MAX,
        index: p.index,
        boundary_index: p.boundary_index,
        stability: p.stability,
    }
}

/// Census at `σ* ± δ`, with δ kept inside the bracketing interval.
fn side_censuses(
    family: &FamilySpec,
    b: &SearchBox,
    cfg: &TrackerConfig,
    star: f64,
    lo: f64,
    hi: f64,
) -> Result<(Census, Census), TrackError> {
    let d = cfg.census_delta.min(0.5 * (star - lo)).min(0.5 * (hi - star));
    let before = solve_at(family, star - d, b, cfg)?.census();
    let after = solve_at(family, star + d, b, cfg)?.census();
    Ok((before, after))
}

type Resolved = Result<PendingEvent, String>;

fn resolve_event(
    family: &FamilySpec,
    b: &SearchBox,
    cfg: &TrackerConfig,
    a: &Snapshot,
    c: &Snapshot,
    change: Change,
) -> Result<Resolved, TrackError> {
    let (_, left_a, left_c) = match_points(&a.points, &c.points);
    match change {
        Change::InteriorPair { birth } | Change::BoundaryPair { birth } => {
            let boundary = matches!(change, Change::BoundaryPair { .. });
            let (pair_snap, other, left) = if birth { (c, a, &left_c) } else { (a, c, &left_a) };
            let kind = if boundary { PointKind::Boundary } else { PointKind::InteriorOrbit };
            let members: Vec<usize> = left.iter().copied().filter(|&i| pair_snap.points[i].kind == kind).collect();
            if members.len() != 2 {
                return Ok(Err(format!(
                    "expected two unmatched points near sigma {}, found {}",
                    pair_snap.sigma,
                    members.len()
                )));
            }
            let (p1, p2) = (&pair_snap.points[members[0]], &pair_snap.points[members[1]]);
            let Some((star, loc, _)) = locate_fold(
                family,
                pair_snap.sigma,
                other.sigma,
                (&p1.location, &p2.location),
                boundary,
                cfg,
            )?
            else {
                return Ok(Err(format!(
                    "fold test function has no sign change on [{}, {}]",
                    a.sigma, c.sigma
                )));
            };
            let f = family.at(star)?;
            let stratum = classify_stratum(&f, &loc, &cfg.solver.tol)?;
            let expected = if boundary { StratumTag::F1_21 } else { StratumTag::F1_1 };
            if stratum.tag != expected {
                return Ok(Err(non_generic(star, &loc, stratum)));
            }
            let (before, after) = side_censuses(family, b, cfg, star, a.sigma, c.sigma)?;
            let grew = after.interior + after.boundary() > before.interior + before.boundary();
            if grew != birth {
                return Ok(Err(format!(
                    "census across sigma* = {star} ({} -> {}) disagrees with the bracket ({} -> {})",
                    before.label(),
                    after.label(),
                    a.census().label(),
                    c.census().label()
                )));
            }
            let kind = match (boundary, birth) {
                (false, true) => EventKind::InteriorBirth,
                (false, false) => EventKind::InteriorDeath,
                (true, true) => EventKind::BoundaryBirth,
                (true, false) => EventKind::BoundaryDeath,
            };
            let trans = transversality_check(family, star, &loc, cfg)?;
            let event = Event {
                id: 0,
                sigma_star: star,
                location: loc,
                stratum,
                kind,
                details: EventDetails::Pair([pair_member(p1), pair_member(p2)]),
                transversality: trans,
                transverse: trans > cfg.trans_tol,
                census_before: before,
                census_after: after,
            };
            let (ended, started) = if birth { (vec![], members) } else { (members, vec![]) };
            Ok(Ok(PendingEvent {
                interval: 0,
                event,
                ended,
                started,
            }))
        }
        Change::Collision { interior_born } => {
            let (pairs, _, _) = match_points(&a.points, &c.points);
            let flips: Vec<(usize, usize)> = pairs
                .into_iter()
                .filter(|&(i, j)| {
                    a.points[i].is_boundary() && a.points[i].stability != c.points[j].stability
                })
                .collect();
            let interior: Vec<usize> = if interior_born { left_c.clone() } else { left_a.clone() };
            if flips.len() != 1 || interior.len() != 1 {
                return Ok(Err(format!(
                    "collision bracket [{}, {}] has {} stability flips and {} unmatched interior orbits",
                    a.sigma,
                    c.sigma,
                    flips.len(),
                    interior.len()
                )));
            }
            let (bi, bj) = flips[0];
            let Some((star, loc)) = locate_collision(
                family,
                (a.sigma, &a.points[bi].location),
                (c.sigma, &c.points[bj].location),
                cfg,
            )?
            else {
                return Ok(Err(format!(
                    "normal Hessian entry has no sign change on [{}, {}]",
                    a.sigma, c.sigma
                )));
            };
            let f = family.at(star)?;
            let stratum = classify_stratum(&f, &loc, &cfg.solver.tol)?;
            if stratum.tag != StratumTag::F1_22 {
                return Ok(Err(non_generic(star, &loc, stratum)));
            }
            let (before, after) = side_censuses(family, b, cfg, star, a.sigma, c.sigma)?;
            if (after.interior > before.interior) != interior_born {
                return Ok(Err(format!(
                    "census across collision at sigma* = {star} ({} -> {}) disagrees with the bracket",
                    before.label(),
                    after.label()
                )));
            }
            let pa = &a.points[bi];
            let pc = &c.points[bj];
            let io = if interior_born { &c.points[interior[0]] } else { &a.points[interior[0]] };
            let trans = transversality_check(family, star, &loc, cfg)?;
            let event = Event {
                id: 0,
                sigma_star: star,
                location: loc,
                stratum,
                kind: EventKind::Collision,
                details: EventDetails::Collision {
                    interior_branch: usize::MAX,
                    boundary_branch: usize::MAX,
                    interior_index: io.index,
                    before: pa.stability.expect("nondegenerate sample"),
                    after: pc.stability.expect("nondegenerate sample"),
                    index_before: pa.index,
                    index_after: pc.index,
                },
                transversality: trans,
                transverse: trans > cfg.trans_tol,
                census_before: before,
                census_after: after,
            };
            // the boundary point is tracked through the event; remember it in slot 0
            let (ended, started) = if interior_born {
                (vec![bi], vec![interior[0]])
            } else {
                (vec![interior[0], bi], vec![])
            };
            Ok(Ok(PendingEvent {
                interval: 0,
                event,
                ended,
                started,
            }))
        }
    }
}

fn non_generic(star: f64, loc: &[f64], stratum: StratumLabel) -> String {
    format!(
        "path meets {stratum} at sigma = {star}, location {loc:?}; this is not a generic event, perturb the path (for example add 1e-3*sigma to a parameter)"
    )
}

fn sample_of(sigma: f64, p: &CriticalPoint) -> BranchSample {
    BranchSample {
        sigma,
        location: p.location.clone(),
        index: p.index,
        boundary_index: p.boundary_index,
        stability: p.stability,
        min_eig: p.min_eig,
    }
}

fn build_branches(snaps: &[Snapshot], mut pending: Vec<PendingEvent>) -> (Vec<Branch>, Vec<Event>) {
    pending.sort_by(|x, y| x.event.sigma_star.total_cmp(&y.event.sigma_star));
    let mut events: Vec<Event> = Vec::new();
    let mut by_interval: BTreeMap<usize, usize> = BTreeMap::new();
    for (id, p) in pending.iter_mut().enumerate() {
        p.event.id = id;
        by_interval.insert(p.interval, id);
    }
    let mut branches: Vec<Branch> = Vec::new();
    let Some(first) = snaps.first() else {
        return (branches, events);
    };
    // branch id of each point in the current snapshot
    let mut current: Vec<usize> = Vec::new();
    for p in &first.points {
        current.push(branches.len());
        branches.push(Branch {
            id: branches.len(),
            kind: p.kind,
            samples: vec![sample_of(first.sigma, p)],
            birth_event: None,
            death_event: None,
        });
    }
    for k in 0..snaps.len() - 1 {
        let (a, c) = (&snaps[k], &snaps[k + 1]);
        let (pairs, left_a, left_c) = match_points(&a.points, &c.points);
        let ev = by_interval.get(&k).map(|&id| &mut pending[id]);
        let mut next = vec![usize::MAX; c.points.len()];
        for (i, j) in pairs {
            let id = current[i];
            branches[id].samples.push(sample_of(c.sigma, &c.points[j]));
            next[j] = id;
        }
        let event_id = ev.as_ref().map(|e| e.event.id);
        let mut ended_ids = Vec::new();
        for i in left_a {
            branches[current[i]].death_event = event_id;
            ended_ids.push((i, current[i]));
        }
        let mut started_ids = Vec::new();
        for j in left_c {
            let id = branches.len();
            branches.push(Branch {
                id,
                kind: c.points[j].kind,
                samples: vec![sample_of(c.sigma, &c.points[j])],
                birth_event: event_id,
                death_event: None,
            });
            next[j] = id;
            started_ids.push((j, id));
        }
        if let Some(pe) = ev {
            let lookup_a = |i: usize| ended_ids.iter().find(|(x, _)| *x == i).map(|(_, id)| *id);
            let lookup_c = |j: usize| started_ids.iter().find(|(x, _)| *x == j).map(|(_, id)| *id);
            match &mut pe.event.details {
                EventDetails::Pair(members) => {
                    let ids: Vec<usize> = if pe.started.is_empty() {
                        pe.ended.iter().filter_map(|&i| lookup_a(i)).collect()
                    } else {
                        pe.started.iter().filter_map(|&j| lookup_c(j)).collect()
                    };
                    for (m, id) in members.iter_mut().zip(ids) {
                        m.branch = id;
                    }
                }
                EventDetails::Collision {
                    interior_branch,
                    boundary_branch,
                    ..
                } => {
                    if pe.started.is_empty() {
                        // interior orbit ends, boundary point `ended[1]` continues
                        *interior_branch = lookup_a(pe.ended[0]).unwrap_or(usize::MAX);
                        *boundary_branch = current[pe.ended[1]];
                    } else {
                        *interior_branch = lookup_c(pe.started[0]).unwrap_or(usize::MAX);
                        *boundary_branch = current[pe.ended[0]];
                    }
                }
            }
        }
        current = next;
    }
    for p in pending {
        events.push(p.event);
    }
    (branches, events)
}

fn interval_censuses(
    family: &FamilySpec,
    b: &SearchBox,
    cfg: &TrackerConfig,
    snaps: &[Snapshot],
    events: &[Event],
) -> Result<Vec<IntervalCensus>, TrackError> {
    let (lo, hi) = family.sigma_range;
    let mut cuts = vec![lo];
    cuts.extend(events.iter().map(|e| e.sigma_star));
    cuts.push(hi);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let (from, to) = (w[0], w[1]);
        let mid = 0.5 * (from + to);
        // prefer an existing sample near the middle
        let census = match snaps
            .iter()
            .filter(|s| s.sigma > from && s.sigma < to)
            .min_by(|x, y| (x.sigma - mid).abs().total_cmp(&(y.sigma - mid).abs()))
        {
            Some(s) => s.census(),
            None => solve_at(family, mid, b, cfg)?.census(),
        };
        out.push(IntervalCensus { from, to, census });
    }
    Ok(out)
}

/// Classification data of a single point along a family, used by callers that
/// probe members directly.
pub fn classify_at(
    family: &FamilySpec,
    sigma: f64,
    p: &[f64],
    solver: &Solver,
) -> Result<CriticalPoint, TrackError> {
    let f = family.at(sigma)?;
    classify_point(&f, p, &solver.tol).map_err(|e| match e {
        crate::critical::ClassifyError::Field(f) => TrackError::Field(f),
        other => TrackError::Field(FieldError::Precondition(other.to_string())),
    })
}
