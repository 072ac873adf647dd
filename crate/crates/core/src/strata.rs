//! Codimension-one strata and jet-level normal forms at degenerate critical points.
//!
//! Jets passed to the `*_jet` functions are expansions centered at the point
//! (`u = 0` is the critical point). Boundary jets keep the normal coordinate
//! `x` at index 0.

use std::fmt;

use thiserror::Error;

use crate::critical::{degeneracy_threshold, Tolerances};
use crate::field::{Field, FieldError};
use crate::jet::{compose_maps, identity_map, invert_map, Jet, JetError, Layout, Parity, SymmetryMask};
use crate::linalg::{canonical_sign, det, jacobi_eigen};

#[derive(Debug, Error)]
pub enum StrataError {
    #[error("internal inconsistency: {0}")]
    Inconsistent(String),
    #[error("jet of order {got} is too short; need at least {need}")]
    Order { got: usize, need: usize },
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StratumTag {
    F0Interior,
    F0Boundary,
    F1_1,
    F1_21,
    F1_22,
    CodimGe2,
}

impl StratumTag {
    pub fn as_str(self) -> &'static str {
        match self {
            StratumTag::F0Interior => "F0-interior",
            StratumTag::F0Boundary => "F0-boundary",
            StratumTag::F1_1 => "F1_1",
            StratumTag::F1_21 => "F1_21",
            StratumTag::F1_22 => "F1_22",
            StratumTag::CodimGe2 => "CodimGe2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CodimReason {
    KernelDimGt1,
    CubicVanishes,
    BformDegenerate,
    MultipleDegenerateOrbits,
}

impl CodimReason {
    pub fn as_str(self) -> &'static str {
        match self {
            CodimReason::KernelDimGt1 => "kernel-dim>1",
            CodimReason::CubicVanishes => "cubic-vanishes",
            CodimReason::BformDegenerate => "bform-degenerate",
            CodimReason::MultipleDegenerateOrbits => "multiple-degenerate-orbits",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StratumLabel {
    pub tag: StratumTag,
    pub reason: Option<CodimReason>,
}

impl StratumLabel {
    pub fn of(tag: StratumTag) -> StratumLabel {
        StratumLabel { tag, reason: None }
    }

    pub fn codim_ge2(reason: CodimReason) -> StratumLabel {
        StratumLabel {
            tag: StratumTag::CodimGe2,
            reason: Some(reason),
        }
    }
}

impl fmt::Display for StratumLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.reason {
            Some(r) => write!(f, "{}({})", self.tag.as_str(), r.as_str()),
            None => write!(f, "{}", self.tag.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TauType {
    Tangent,
    Normal,
    NotApplicable,
}

impl TauType {
    pub fn as_str(self) -> &'static str {
        match self {
            TauType::Tangent => "tangent",
            TauType::Normal => "normal",
            TauType::NotApplicable => "not-applicable",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelInfo {
    pub dim: usize,
    /// Unit kernel vector, largest entry positive (only when `dim == 1`).
    pub v: Option<Vec<f64>>,
    pub tau_type: TauType,
    pub eigenvalues: Vec<f64>,
}

/// Kernel of the Hessian of `jet` (order ≥ 2).
pub fn kernel_analysis_jet(jet: &Jet, boundary: bool, tol: &Tolerances) -> KernelInfo {
    let n = jet.n();
    let h = jet.hessian();
    let eig = jacobi_eigen(&h, n);
    let thresh = degeneracy_threshold(&eig.values, tol);
    let small: Vec<usize> = (0..n).filter(|&k| eig.values[k].abs() < thresh).collect();
    let dim = small.len();
    let mut tau_type = if boundary {
        TauType::Tangent
    } else {
        TauType::NotApplicable
    };
    let mut v = None;
    if dim == 1 {
        if boundary && h[0].abs() < thresh {
            tau_type = TauType::Normal;
            let mut e = vec![0.0; n];
            e[0] = 1.0;
            v = Some(e);
        } else if boundary {
            // the singular block is the tangential one
            let m = n - 1;
            let a: Vec<f64> = (1..n)
                .flat_map(|i| (1..n).map(move |j| (i, j)))
                .map(|(i, j)| h[i * n + j])
                .collect();
            let te = jacobi_eigen(&a, m);
            let k = te.smallest_magnitude().expect("nonempty block");
            let mut e = vec![0.0];
            e.extend(te.vector(k));
            canonical_sign(&mut e);
            v = Some(e);
        } else {
            let mut e = eig.vector(small[0]);
            canonical_sign(&mut e);
            v = Some(e);
        }
    }
    KernelInfo {
        dim,
        v,
        tau_type,
        eigenvalues: eig.values,
    }
}

pub fn kernel_analysis(f: &dyn Field, p: &[f64], tol: &Tolerances) -> Result<KernelInfo, FieldError> {
    Ok(kernel_analysis_jet(&f.jet(p, 2)?, p[0] == 0.0, tol))
}

/// `D³Φ(v, v, v)` from a jet of order ≥ 3.
pub fn third_derivative(jet: &Jet, v: &[f64]) -> f64 {
    let mut s = 0.0;
    for (idx, c) in jet.terms() {
        if idx.degree() == 3 && c != 0.0 {
            s += c * idx
                .exponents()
                .iter()
                .zip(v)
                .map(|(&a, x)| x.powi(a as i32))
                .product::<f64>();
        }
    }
    6.0 * s
}

/// Data of the quasi-homogeneous form at a boundary point with normal kernel.
///
/// `alpha*` are raw derivatives. `gamma` is the matrix of the weighted-leading
/// part of the Taylor expansion, `Σ γ_ab ȳ_a ȳ_b` with `ȳ = (y_1, …, y_{n-1}, x²)`,
/// so that weighted coordinate changes act on it by congruence.
#[derive(Debug, Clone, PartialEq)]
pub struct BFormMatrix {
    pub alpha: f64,
    pub alpha_i: Vec<f64>,
    /// Row-major `(n-1) × (n-1)`.
    pub alpha_ij: Vec<f64>,
    /// Row-major `n × n`, the `x²` slot last.
    pub gamma: Vec<f64>,
    pub det: f64,
}

impl BFormMatrix {
    pub fn size(&self) -> usize {
        self.alpha_i.len() + 1
    }

    /// The matrix with raw entries `α_ij`, `α_i / 2`, `α`.
    pub fn raw_gamma(&self) -> Vec<f64> {
        let m = self.alpha_i.len();
        let k = m + 1;
        let mut g = vec![0.0; k * k];
        for i in 0..m {
            for j in 0..m {
                g[i * k + j] = self.alpha_ij[i * m + j];
            }
            g[i * k + m] = self.alpha_i[i] / 2.0;
            g[m * k + i] = self.alpha_i[i] / 2.0;
        }
        g[m * k + m] = self.alpha;
        g
    }
}

fn unit_exps(n: usize, pairs: &[(usize, u8)]) -> Vec<u8> {
    let mut e = vec![0u8; n];
    for &(i, k) in pairs {
        e[i] += k;
    }
    e
}

pub fn compute_bform_jet(jet: &Jet) -> Result<BFormMatrix, StrataError> {
    if jet.order() < 4 {
        return Err(StrataError::Order { got: jet.order(), need: 4 });
    }
    let n = jet.n();
    let m = n - 1;
    let alpha = jet.derivative(&unit_exps(n, &[(0, 4)]));
    let alpha_i: Vec<f64> = (1..n)
        .map(|i| jet.derivative(&unit_exps(n, &[(0, 2), (i, 1)])))
        .collect();
    let mut alpha_ij = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            alpha_ij[i * m + j] = jet.derivative(&unit_exps(n, &[(i + 1, 1), (j + 1, 1)]));
        }
    }
    let k = m + 1;
    let mut gamma = vec![0.0; k * k];
    for i in 0..m {
        for j in 0..m {
            gamma[i * k + j] = alpha_ij[i * m + j] / 2.0;
        }
        gamma[i * k + m] = alpha_i[i] / 4.0;
        gamma[m * k + i] = alpha_i[i] / 4.0;
    }
    gamma[m * k + m] = alpha / 24.0;
    let d = det(&gamma, k);
    Ok(BFormMatrix {
        alpha,
        alpha_i,
        alpha_ij,
        gamma,
        det: d,
    })
}

pub fn compute_bform(f: &dyn Field, p: &[f64]) -> Result<BFormMatrix, StrataError> {
    compute_bform_jet(&f.jet(p, 4)?)
}

/// Stratum of the point at the center of `jet` (order ≥ 4 for normal kernels,
/// ≥ 3 otherwise).
pub fn classify_stratum_jet(jet: &Jet, boundary: bool, tol: &Tolerances) -> Result<StratumLabel, StrataError> {
    let k = kernel_analysis_jet(jet, boundary, tol);
    if k.dim == 0 {
        return Ok(StratumLabel::of(if boundary {
            StratumTag::F0Boundary
        } else {
            StratumTag::F0Interior
        }));
    }
    if k.dim > 1 {
        return Ok(StratumLabel::codim_ge2(CodimReason::KernelDimGt1));
    }
    if jet.order() < 3 {
        return Err(StrataError::Order { got: jet.order(), need: 3 });
    }
    let v = k.v.as_ref().expect("dim 1 kernel has a vector");
    Ok(match k.tau_type {
        TauType::Normal => {
            let b = compute_bform_jet(jet)?;
            if b.det.abs() > tol.det_tol {
                StratumLabel::of(StratumTag::F1_22)
            } else {
                StratumLabel::codim_ge2(CodimReason::BformDegenerate)
            }
        }
        tau => {
            if third_derivative(jet, v).abs() > tol.third_tol {
                StratumLabel::of(if tau == TauType::Tangent {
                    StratumTag::F1_21
                } else {
                    StratumTag::F1_1
                })
            } else {
                StratumLabel::codim_ge2(CodimReason::CubicVanishes)
            }
        }
    })
}

pub fn classify_stratum(f: &dyn Field, p: &[f64], tol: &Tolerances) -> Result<StratumLabel, StrataError> {
    classify_stratum_jet(&f.jet(p, 4)?, p[0] == 0.0, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalFormKind {
    /// `Σ εᵢ wᵢ² + w³` (interior or tangential kernel).
    Cubic,
    /// `Σ εᵢ yᵢ² + ε_x x⁴` (normal kernel).
    Quartic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormSignature {
    pub kind: NormalFormKind,
    /// Sign of the normal quadratic direction (boundary cubic case).
    pub eps_x: Option<i8>,
    /// Signs of the remaining quadratic directions, sorted.
    pub eps: Vec<i8>,
    /// Cubic coefficient after reduction; the kernel orientation is chosen so it is `+1`.
    pub cubic_sign: Option<i8>,
    pub quartic_sign: Option<i8>,
    pub residual: f64,
    /// Reduced coordinates in terms of the original ones are `inverse`;
    /// `forward` expresses the original coordinates through the reduced ones.
    pub forward: Vec<Jet>,
    pub inverse: Vec<Jet>,
    /// Index of the kernel coordinate in the reduced coordinates.
    pub kernel_index: usize,
    pub reduced: Jet,
    pub normal_form: Jet,
}

impl NormalFormSignature {
    /// Comparable part of the signature.
    pub fn key(&self) -> (Option<i8>, Vec<i8>, Option<i8>, Option<i8>) {
        (self.eps_x, self.eps.clone(), self.cubic_sign, self.quartic_sign)
    }
}

struct Reducer {
    n: usize,
    boundary: bool,
    mask: SymmetryMask,
    layout: std::sync::Arc<Layout>,
    current: Jet,
    forward: Vec<Jet>,
}

impl Reducer {
    fn apply(&mut self, subs: Vec<Jet>) -> Result<(), StrataError> {
        let subs: Vec<Jet> = if self.boundary {
            subs.into_iter()
                .enumerate()
                .map(|(i, s)| s.project(&self.mask, if i == 0 { Parity::Odd } else { Parity::Even }))
                .collect()
        } else {
            subs
        };
        self.current = self.current.compose(&subs)?;
        self.forward = compose_maps(&self.forward, &subs)?;
        if self.boundary {
            self.current = self.current.project(&self.mask, Parity::Even);
        }
        Ok(())
    }

    fn linear(&self, m: &[f64]) -> Result<Vec<Jet>, StrataError> {
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut j = Jet::zero_in(&self.layout);
                for k in 0..n {
                    if m[i * n + k] != 0.0 {
                        j = &j + &Jet::variable_in(&self.layout, k)?.scale(m[i * n + k]);
                    }
                }
                Ok(j)
            })
            .collect()
    }

    fn quad_coeff(&self, i: usize) -> f64 {
        let mut e = vec![0u8; self.n];
        e[i] = 2;
        self.current.coeff(&e)
    }
}

/// Orthogonal change sorting eigen-directions; `kernel_last` moves the
/// smallest-magnitude eigenvalue to the end of its block.
fn ordered_eigenbasis(h: &[f64], idx: &[usize], n: usize, kernel_last: bool) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = idx.len();
    let block: Vec<f64> = idx
        .iter()
        .flat_map(|&i| idx.iter().map(move |&j| h[i * n + j]))
        .collect();
    let e = jacobi_eigen(&block, m);
    let mut order: Vec<usize> = (0..m).collect();
    if kernel_last {
        if let Some(k) = e.smallest_magnitude() {
            order.retain(|&o| o != k);
            order.push(k);
        }
    }
    let vecs = order
        .iter()
        .map(|&k| {
            let mut v = e.vector(k);
            canonical_sign(&mut v);
            v
        })
        .collect();
    let vals = order.iter().map(|&k| e.values[k]).collect();
    (vecs, vals)
}

fn sign(v: f64) -> i8 {
    if v < 0.0 {
        -1
    } else {
        1
    }
}

fn reduce(jet: &Jet, boundary: bool, kind: NormalFormKind) -> Result<NormalFormSignature, StrataError> {
    let n = jet.n();
    let order = jet.order();
    let need = match kind {
        NormalFormKind::Cubic => 3,
        NormalFormKind::Quartic => 4,
    };
    if order < need {
        return Err(StrataError::Order { got: order, need });
    }
    if kind == NormalFormKind::Quartic && !boundary {
        return Err(StrataError::Inconsistent("quartic normal form needs a boundary point".into()));
    }
    let mask = if boundary {
        SymmetryMask::boundary(n)
    } else {
        SymmetryMask::interior(n)
    };
    let layout = jet.layout().clone();
    let mut start = jet.nonconstant_part();
    if boundary {
        start = start.project(&mask, Parity::Even);
    }
    let mut r = Reducer {
        n,
        boundary,
        mask,
        layout: layout.clone(),
        current: start,
        forward: identity_map(n, order)?,
    };

    // (1) orthogonal change; the normal coordinate is never mixed with the others
    let h = r.current.hessian();
    let mut q = vec![0.0; n * n];
    let kernel_index;
    if boundary {
        q[0] = 1.0;
        let ys: Vec<usize> = (1..n).collect();
        let kernel_in_y = kind == NormalFormKind::Cubic;
        let (vecs, _) = ordered_eigenbasis(&h, &ys, n, kernel_in_y);
        for (col, v) in vecs.iter().enumerate() {
            for (row, &y) in ys.iter().enumerate() {
                q[y * n + col + 1] = v[row];
            }
        }
        kernel_index = if kernel_in_y { n - 1 } else { 0 };
    } else {
        let all: Vec<usize> = (0..n).collect();
        let (vecs, _) = ordered_eigenbasis(&h, &all, n, true);
        for (col, v) in vecs.iter().enumerate() {
            for row in 0..n {
                q[row * n + col] = v[row];
            }
        }
        kernel_index = n - 1;
    }
    let lin = r.linear(&q)?;
    r.apply(lin)?;

    // (2) scale quadratic directions to ±1
    let mut scale = vec![0.0; n * n];
    let mut eps = vec![0i8; n];
    for i in 0..n {
        if i == kernel_index {
            scale[i * n + i] = 1.0;
            continue;
        }
        let c = r.quad_coeff(i);
        if c.abs() < 1e-12 {
            return Err(StrataError::Inconsistent(format!(
                "vanishing quadratic pivot {c:e} in direction {i}"
            )));
        }
        eps[i] = sign(c);
        scale[i * n + i] = 1.0 / c.abs().sqrt();
    }
    let lin = r.linear(&scale)?;
    r.apply(lin)?;

    // (3) graded elimination of everything outside the normal form
    for d in 3..=order {
        let mut phi: Vec<Jet> = (0..n).map(|_| Jet::zero_in(&layout)).collect();
        let mut any = false;
        for (idx, c) in r.current.terms() {
            if idx.degree() != d || c == 0.0 {
                continue;
            }
            let e = idx.exponents();
            let pure_kernel = e.iter().enumerate().all(|(i, &a)| a == 0 || i == kernel_index);
            if pure_kernel {
                continue;
            }
            let i = (0..n)
                .find(|&i| i != kernel_index && e[i] > 0)
                .expect("mixed monomial has a nondegenerate variable");
            let mut quotient = e.to_vec();
            quotient[i] -= 1;
            let mut term = Jet::zero_in(&layout);
            term.set_coeff(&quotient, -c / (2.0 * f64::from(eps[i])))?;
            phi[i] = &phi[i] + &term;
            any = true;
        }
        if any {
            let subs = (0..n)
                .map(|i| Ok(&Jet::variable_in(&layout, i)? + &phi[i]))
                .collect::<Result<Vec<_>, JetError>>()?;
            r.apply(subs)?;
        }
    }

    // (4) kernel direction: w^k G'(w) = ±W^k with W = w·root(G', k)
    let k = match kind {
        NormalFormKind::Cubic => 3u8,
        NormalFormKind::Quartic => 4u8,
    };
    let mut g = Jet::zero_in(&layout);
    for j in 0..=(order as u8 - k) {
        let mut e = vec![0u8; n];
        e[kernel_index] = j + k;
        let c = r.current.coeff(&e);
        e[kernel_index] = j;
        g.set_coeff(&e, c)?;
    }
    let lead = g.value();
    if lead.abs() < 1e-12 {
        return Err(StrataError::Inconsistent(format!(
            "leading kernel coefficient {lead:e} vanishes"
        )));
    }
    let lead_sign = sign(lead);
    let root = match kind {
        NormalFormKind::Cubic => g.root(3)?,
        NormalFormKind::Quartic => g.scale(f64::from(lead_sign)).root(4)?,
    };
    let mut to_new = identity_map(n, order)?;
    to_new[kernel_index] = &to_new[kernel_index] * &root;
    let back = invert_map(&to_new)?;
    r.apply(back)?;

    // normal form and residual
    let mut nf = Jet::zero_in(&layout);
    for i in 0..n {
        let mut e = vec![0u8; n];
        if i == kernel_index {
            e[i] = k;
            let c = match kind {
                NormalFormKind::Cubic => 1.0,
                NormalFormKind::Quartic => f64::from(lead_sign),
            };
            nf.set_coeff(&e, c)?;
        } else {
            e[i] = 2;
            nf.set_coeff(&e, f64::from(eps[i]))?;
        }
    }
    let residual = r.current.max_abs_diff(&nf);
    let inverse = invert_map(&r.forward)?;
    let (eps_x, mut rest): (Option<i8>, Vec<i8>) = if boundary && kernel_index != 0 {
        (Some(eps[0]), (1..n).filter(|&i| i != kernel_index).map(|i| eps[i]).collect())
    } else {
        (None, (0..n).filter(|&i| i != kernel_index).map(|i| eps[i]).collect())
    };
    rest.sort_unstable();
    Ok(NormalFormSignature {
        kind,
        eps_x,
        eps: rest,
        cubic_sign: (kind == NormalFormKind::Cubic).then_some(1),
        quartic_sign: (kind == NormalFormKind::Quartic).then_some(lead_sign),
        residual,
        forward: r.forward,
        inverse,
        kernel_index,
        reduced: r.current,
        normal_form: nf,
    })
}

/// Reduction to `Σ εᵢ wᵢ² + w³`; the mask decides whether `x` must be kept separate.
pub fn reduce_normal_form_cubic(jet: &Jet, mask: &SymmetryMask) -> Result<NormalFormSignature, StrataError> {
    reduce(jet, is_boundary_mask(mask), NormalFormKind::Cubic)
}

/// Reduction to `Σ εᵢ yᵢ² + ε_x x⁴` at a boundary point with normal kernel.
pub fn reduce_normal_form_quartic(jet: &Jet, mask: &SymmetryMask) -> Result<NormalFormSignature, StrataError> {
    reduce(jet, is_boundary_mask(mask), NormalFormKind::Quartic)
}

fn is_boundary_mask(mask: &SymmetryMask) -> bool {
    mask.parity().first() == Some(&Parity::Odd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Params;
    use crate::field::ScalarField;

    fn phi(lambda: f64, mu: f64) -> ScalarField {
        ScalarField::parse(
            2,
            "y1^3 - x^2*y1 + lambda*y1 + mu*x^2",
            Params::new().with("lambda", lambda).with("mu", mu),
        )
        .unwrap()
    }

    fn jet(n: usize, src: &str, at: &[f64]) -> Jet {
        ScalarField::parse(n, src, Params::new()).unwrap().jet(at, 4).unwrap()
    }

    #[test]
    fn kernel_examples() {
        let tol = Tolerances::default();
        let k = kernel_analysis(&phi(0.0, 0.5), &[0.0, 0.0], &tol).unwrap();
        assert_eq!((k.dim, k.tau_type), (1, TauType::Tangent));
        assert_eq!(k.v, Some(vec![0.0, 1.0]));
        let k = kernel_analysis(&phi(-0.75, 0.5), &[0.0, 0.5], &tol).unwrap();
        assert_eq!((k.dim, k.tau_type), (1, TauType::Normal));
        assert_eq!(k.v, Some(vec![1.0, 0.0]));
        let k = kernel_analysis(&phi(0.0, 0.0), &[0.0, 0.0], &tol).unwrap();
        assert_eq!(k.dim, 2);
    }

    #[test]
    fn bform_examples() {
        let b = compute_bform(&phi(-0.75, 0.5), &[0.0, 0.5]).unwrap();
        assert_eq!((b.alpha, b.alpha_i[0], b.alpha_ij[0]), (0.0, -2.0, 3.0));
        assert_eq!(b.raw_gamma(), vec![3.0, -1.0, -1.0, 0.0]);
        assert_eq!(b.gamma, vec![1.5, -0.5, -0.5, 0.0]);
        assert!((b.det + 0.25).abs() < 1e-15);

        let b = compute_bform_jet(&jet(2, "x^4 + y1^2", &[0.0, 0.0])).unwrap();
        assert_eq!((b.alpha, b.alpha_i[0], b.alpha_ij[0]), (24.0, 0.0, 2.0));
        assert!(b.det > 0.0);

        let b = compute_bform_jet(&jet(2, "y1^2 + x^2*y1", &[0.0, 0.0])).unwrap();
        assert_eq!((b.alpha, b.alpha_i[0], b.alpha_ij[0]), (0.0, 2.0, 2.0));
        assert!((b.det + 0.25).abs() < 1e-15);
        assert!((det(&b.raw_gamma(), 2) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn stratum_examples() {
        let tol = Tolerances::default();
        let j = jet(2, "x^2 + y1^3", &[0.0, 0.0]);
        assert_eq!(classify_stratum_jet(&j, false, &tol).unwrap(), StratumLabel::of(StratumTag::F1_1));
        assert_eq!(
            classify_stratum(&phi(0.0, 0.5), &[0.0, 0.0], &tol).unwrap(),
            StratumLabel::of(StratumTag::F1_21)
        );
        assert_eq!(
            classify_stratum(&phi(0.0, 0.0), &[0.0, 0.0], &tol).unwrap(),
            StratumLabel::codim_ge2(CodimReason::KernelDimGt1)
        );
        assert_eq!(
            classify_stratum(&phi(-0.75, 0.5), &[0.0, 0.5], &tol).unwrap(),
            StratumLabel::of(StratumTag::F1_22)
        );
        let flat = jet(2, "y1^2 + x^6", &[0.0, 0.0]);
        assert_eq!(
            classify_stratum_jet(&flat, true, &tol).unwrap(),
            StratumLabel::codim_ge2(CodimReason::BformDegenerate)
        );
        let c = jet(2, "x^2 + y1^4", &[0.0, 0.0]);
        assert_eq!(
            classify_stratum_jet(&c, true, &tol).unwrap(),
            StratumLabel::codim_ge2(CodimReason::CubicVanishes)
        );
    }

    fn check_sound(sig: &NormalFormSignature, original: &Jet) {
        let back = sig.normal_form.compose(&sig.inverse).unwrap();
        assert!(back.max_abs_diff(&original.nonconstant_part()) < 1e-8);
    }

    #[test]
    fn cubic_reductions() {
        let j = jet(3, "y1^2 + y2^3", &[0.0, 0.0, 0.0]).restrict(&[1, 2]).unwrap();
        let s = reduce_normal_form_cubic(&j, &SymmetryMask::interior(2)).unwrap();
        assert_eq!((s.eps.clone(), s.cubic_sign), (vec![1], Some(1)));
        assert!(s.residual < 1e-14);

        let j = jet(3, "y1^2 + y2^3 + 0.3*y1*y2^2", &[0.0, 0.0, 0.0]).restrict(&[1, 2]).unwrap();
        let s = reduce_normal_form_cubic(&j, &SymmetryMask::interior(2)).unwrap();
        assert_eq!(s.eps, vec![1]);
        assert!(s.residual < 1e-8, "{}", s.residual);
        check_sound(&s, &j);

        let j = jet(2, "x^2 + y1^3 + 0.1*x^2*y1", &[0.0, 0.0]);
        let s = reduce_normal_form_cubic(&j, &SymmetryMask::boundary(2)).unwrap();
        assert_eq!((s.eps_x, s.cubic_sign), (Some(1), Some(1)));
        assert!(s.residual < 1e-8);
        assert!(s.reduced.respects(&SymmetryMask::boundary(2), Parity::Even));
        check_sound(&s, &j);
    }

    #[test]
    fn quartic_reductions() {
        let mask = SymmetryMask::boundary(2);
        let s = reduce_normal_form_quartic(&jet(2, "y1^2 + x^4", &[0.0, 0.0]), &mask).unwrap();
        assert_eq!((s.eps.clone(), s.quartic_sign, s.residual), (vec![1], Some(1), 0.0));

        let j = jet(2, "y1^2 - x^4 + 0.2*x^4*y1", &[0.0, 0.0]);
        let s = reduce_normal_form_quartic(&j, &mask).unwrap();
        assert_eq!(s.quartic_sign, Some(-1));

        let j = jet(2, "2*y1^2 + 3*x^4", &[0.0, 0.0]);
        let s = reduce_normal_form_quartic(&j, &mask).unwrap();
        assert_eq!((s.eps.clone(), s.quartic_sign), (vec![1], Some(1)));
        assert!(s.residual < 1e-8);
        check_sound(&s, &j);

        // the model family at the collision point: x²y couples into the quartic
        let j = phi(-0.75, 0.5).jet(&[0.0, 0.5], 4).unwrap();
        let s = reduce_normal_form_quartic(&j, &mask).unwrap();
        assert_eq!(s.quartic_sign, Some(-1));
        assert!(s.residual < 1e-8);
        check_sound(&s, &j);
    }
}
