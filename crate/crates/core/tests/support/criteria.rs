//! Checks shared by the integration suites and the acceptance target. Each
//! returns an [`Outcome`] instead of panicking so callers can report them.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::time::Instant;

use cerfkit_core::collar::{build_double, collar_example, BumpSpec};
use cerfkit_core::critical::{find_all_critical_points, SearchBox, Solver, Tolerances};
use cerfkit_core::field::{symmetrize, Field, ScalarField};
use cerfkit_core::jet::{Jet, SymmetryMask};
use cerfkit_core::linalg::det;
use cerfkit_core::plane::{census_map, PlaneSpec};
use cerfkit_core::strata::{
    classify_stratum_jet, compute_bform_jet, reduce_normal_form_cubic, reduce_normal_form_quartic,
    NormalFormSignature,
};
use cerfkit_core::{parse_expression, Exec, Params};
use rand::seq::SliceRandom;
use rand::Rng;

use super::{discriminant_distance, model_census, random_poly, rng, Dense, TestRng};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Outcome {
        Outcome { pass, detail }
    }
}

pub const DEMO_RADIUS: f64 = 2e-6;
pub const DEMO_EPSILON: f64 = 5e-7;

// ------------------------------------------------------------ region census

pub fn model_plane(resolution: usize) -> PlaneSpec {
    PlaneSpec {
        n: 2,
        base: parse_expression("y1^3 - x^2*y1 + lambda*y1 + mu*x^2").unwrap(),
        fixed: Params::new(),
        axes: ["lambda".into(), "mu".into()],
        ranges: [(-1.5, 1.5), (-1.5, 1.5)],
        resolution: [resolution, resolution],
    }
}

pub fn model_plane_box() -> SearchBox {
    SearchBox::new(vec![0.0, -2.5], vec![3.5, 2.5]).unwrap()
}

pub fn map_solver() -> Solver {
    Solver {
        density: 11,
        ..Solver::default()
    }
}

/// Every cell off the discriminant has the closed-form census.
pub fn region_census(resolution: usize, time_limit: f64) -> Outcome {
    let start = Instant::now();
    let cells = census_map(&model_plane(resolution), &model_plane_box(), &map_solver(), Exec::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let mut checked = 0;
    let mut bad = Vec::new();
    let mut labels = std::collections::BTreeSet::new();
    for c in &cells {
        let [l, m] = c.params;
        if discriminant_distance(l, m) <= 0.02 {
            continue;
        }
        checked += 1;
        let got = (c.census.interior, c.census.boundary_stable, c.census.boundary_unstable);
        if got != model_census(l, m) || c.near_degenerate {
            bad.push((l, m, got));
        } else {
            labels.insert(c.label.clone());
        }
    }
    let pass = bad.is_empty() && elapsed < time_limit && checked > 0;
    Outcome::new(
        pass,
        format!(
            "{checked} cells checked, {} mismatches {:?}, regions {:?}, {elapsed:.1}s",
            bad.len(),
            bad.iter().take(3).collect::<Vec<_>>(),
            labels
        ),
    )
}

// ------------------------------------------------------------ mixed block

fn solver_for(n: usize) -> Solver {
    Solver {
        density: match n {
            2 => 15,
            3 => 9,
            _ => 6,
        },
        ..Solver::default()
    }
}

/// Symmetrized random polynomials have no mixed `x`–`y` Hessian entries at boundary critical points.
pub fn block_suite(count: usize, seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    for _ in 0..count {
        let n = r.gen_range(2..=4);
        let mut p = random_poly(&mut r, n, 1, 4, false, 0.6);
        // a confining quartic keeps the boundary critical set bounded
        for i in 0..n {
            let mut e = vec![0u8; n];
            e[i] = 4;
            p.term(e, 1.0);
        }
        let raw = ScalarField::parse(n, &p.to_source(), Params::new()).unwrap();
        let f = symmetrize(&raw);
        let mut lo = vec![-2.0; n];
        lo[0] = 0.0;
        let b = SearchBox::new(lo, vec![2.0; n]).unwrap();
        for cp in find_all_critical_points(&f, &b, &solver_for(n)).unwrap() {
            if !cp.is_boundary() {
                continue;
            }
            points += 1;
            let h = f.jet(&cp.location, 2).unwrap().hessian();
            for v in &h[1..n] {
                worst = worst.max(v.abs());
            }
        }
    }
    Outcome::new(
        worst < 1e-10 && points >= count,
        format!("{points} boundary critical points, max |d2/dxdy| = {worst:e}"),
    )
}

// ------------------------------------------------------------ congruence

fn random_matrix(r: &mut TestRng, k: usize) -> Vec<f64> {
    (0..k * k)
        .map(|i| if i % (k + 1) == 0 { 1.0 } else { 0.0 } + r.gen_range(-0.4..0.4))
        .collect()
}

/// Germ at the origin with a normal kernel: zero gradient, zero `x²` term,
/// nondegenerate tangential block.
fn normal_kernel_germ(r: &mut TestRng, n: usize) -> Dense {
    let mut p = random_poly(r, n, 2, 4, true, 0.8);
    let mut e = vec![0u8; n];
    e[0] = 2;
    p.c.remove(&e);
    for i in 1..n {
        let mut e = vec![0u8; n];
        e[i] = 2;
        let s = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        p.term(e, 1.5 * s);
    }
    p
}

/// Weighted equivariant change `x ↦ c x + d x y₁`, `y ↦ A y + b x² + q y₁²`
/// with its weighted linear part `E` (x² slot last).
struct WeightedChange {
    subs: Vec<Dense>,
    e: Vec<f64>,
}

fn weighted_change(r: &mut TestRng, n: usize) -> WeightedChange {
    let k = n - 1;
    let a = random_matrix(r, k);
    let b: Vec<f64> = (0..k).map(|_| r.gen_range(-1.0..1.0)).collect();
    let c: f64 = r.gen_range(0.5..1.5);
    let d: f64 = r.gen_range(-0.5..0.5);
    let mut subs = Vec::new();
    let mut xs = Dense::var(n, 0).scale(c);
    xs = xs.add(&Dense::var(n, 0).mul(&Dense::var(n, 1)).scale(d));
    subs.push(xs);
    for i in 0..k {
        let mut s = Dense::zero(n);
        for j in 0..k {
            s = s.add(&Dense::var(n, j + 1).scale(a[i * k + j]));
        }
        s = s.add(&Dense::var(n, 0).mul(&Dense::var(n, 0)).scale(b[i]));
        s = s.add(&Dense::var(n, 1).mul(&Dense::var(n, 1)).scale(r.gen_range(-0.5..0.5)));
        subs.push(s);
    }
    let m = k + 1;
    let mut e = vec![0.0; m * m];
    for i in 0..k {
        for j in 0..k {
            e[i * m + j] = a[i * k + j];
        }
        e[i * m + k] = b[i];
    }
    e[k * m + k] = c * c;
    WeightedChange { subs, e }
}

fn compose_jet(j: &Jet, subs: &[Dense], order: usize) -> Jet {
    let s: Vec<Jet> = subs.iter().map(|d| d.to_jet(order)).collect();
    j.compose(&s).unwrap()
}

/// `det Γ̃ = (det E)² det Γ` and the stratum label survive weighted changes.
pub fn congruence_suite(count: usize, seed: u64) -> Outcome {
    let mut r = rng(seed);
    let tol = Tolerances::default();
    let mut worst: f64 = 0.0;
    let mut label_changes = 0;
    for _ in 0..count {
        let n = r.gen_range(2..=4);
        let germ = normal_kernel_germ(&mut r, n).to_jet(4);
        let ch = weighted_change(&mut r, n);
        let moved = compose_jet(&germ, &ch.subs, 4);
        let g = compute_bform_jet(&germ).unwrap();
        let gt = compute_bform_jet(&moved).unwrap();
        let de = det(&ch.e, n);
        let err = (gt.det - de * de * g.det).abs() / g.det.abs().max(1.0);
        worst = worst.max(err);
        let l0 = classify_stratum_jet(&germ, true, &tol).unwrap();
        let l1 = classify_stratum_jet(&moved, true, &tol).unwrap();
        if l0 != l1 {
            label_changes += 1;
        }
    }
    Outcome::new(
        worst < 1e-8 && label_changes == 0,
        format!("max relative det error {worst:e}, {label_changes} label changes"),
    )
}

// ------------------------------------------------------------ normal forms

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NfStratum {
    InteriorFold,
    BoundaryFold,
    Collision,
}

fn signs(r: &mut TestRng, k: usize) -> Vec<i8> {
    (0..k).map(|_| if r.gen_bool(0.5) { 1 } else { -1 }).collect()
}

fn square(n: usize, i: usize, s: f64) -> Dense {
    Dense::var(n, i).mul(&Dense::var(n, i)).scale(s)
}

type Key = (Option<i8>, Vec<i8>, Option<i8>, Option<i8>);

/// Normal form, its expected signature key and a random admissible change.
fn nf_case(r: &mut TestRng, which: NfStratum) -> (Jet, Key, SymmetryMask, Vec<Dense>) {
    let n = r.gen_range(2..=4);
    match which {
        NfStratum::InteriorFold => {
            let eps = signs(r, n - 1);
            let mut nf = Dense::var(n, n - 1).pow(3, 4);
            for (i, &e) in eps.iter().enumerate() {
                nf = nf.add(&square(n, i, f64::from(e)));
            }
            let m = random_matrix(r, n);
            let subs = (0..n)
                .map(|i| {
                    let mut s = Dense::zero(n);
                    for j in 0..n {
                        s = s.add(&Dense::var(n, j).scale(m[i * n + j]));
                    }
                    let (a, b) = (r.gen_range(0..n), r.gen_range(0..n));
                    s.add(&Dense::var(n, a).mul(&Dense::var(n, b)).scale(r.gen_range(-0.5..0.5)))
                })
                .collect();
            let mut sorted = eps.clone();
            sorted.sort_unstable();
            (nf.to_jet(4), (None, sorted, Some(1), None), SymmetryMask::interior(n), subs)
        }
        NfStratum::BoundaryFold | NfStratum::Collision => {
            let k = n - 1;
            let eps = signs(r, if which == NfStratum::BoundaryFold { k - 1 } else { k });
            let ex = signs(r, 1)[0];
            let mut nf = Dense::zero(n);
            for (i, &e) in eps.iter().enumerate() {
                nf = nf.add(&square(n, i + 1, f64::from(e)));
            }
            let key;
            if which == NfStratum::BoundaryFold {
                nf = nf.add(&square(n, 0, f64::from(ex)));
                nf = nf.add(&Dense::var(n, n - 1).pow(3, 4));
                let mut sorted = eps.clone();
                sorted.sort_unstable();
                key = (Some(ex), sorted, Some(1), None);
            } else {
                nf = nf.add(&Dense::var(n, 0).pow(4, 4).scale(f64::from(ex)));
                let mut sorted = eps.clone();
                sorted.sort_unstable();
                key = (None, sorted, None, Some(ex));
            }
            let ch = weighted_change(r, n);
            (nf.to_jet(4), key, SymmetryMask::boundary(n), ch.subs)
        }
    }
}

fn reduce(which: NfStratum, j: &Jet, mask: &SymmetryMask) -> NormalFormSignature {
    match which {
        NfStratum::Collision => reduce_normal_form_quartic(j, mask).unwrap(),
        _ => reduce_normal_form_cubic(j, mask).unwrap(),
    }
}

/// Coordinate-changed copies of each normal form reduce back to it.
pub fn normal_form_suite(count: usize, seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut details = Vec::new();
    let mut pass = true;
    for which in [NfStratum::InteriorFold, NfStratum::BoundaryFold, NfStratum::Collision] {
        let mut worst: f64 = 0.0;
        let mut mismatches = 0;
        for _ in 0..count {
            let (nf, key, mask, subs) = nf_case(&mut r, which);
            let moved = compose_jet(&nf, &subs, 4);
            let sig = reduce(which, &moved, &mask);
            let back = sig.normal_form.compose(&sig.inverse).unwrap();
            let sound = back.max_abs_diff(&moved.nonconstant_part());
            worst = worst.max(sig.residual).max(sound);
            if sig.key() != key {
                mismatches += 1;
            }
        }
        pass &= worst < 1e-8 && mismatches == 0;
        details.push(format!("{which:?}: {mismatches} signature mismatches, max residual {worst:e}"));
    }
    Outcome::new(pass, details.join("; "))
}

// ------------------------------------------------------------ jets

/// Jet arithmetic agrees with dense polynomial arithmetic.
pub fn jet_identities(count: usize, seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for k in 0..count {
        let n = r.gen_range(1..=3);
        let order = r.gen_range(2..=4);
        let p = random_poly(&mut r, n, 0, order, false, 0.7);
        let q = random_poly(&mut r, n, 0, order, false, 0.7);
        let (jp, jq) = (p.to_jet(order), q.to_jet(order));
        let err = match k % 4 {
            0 => Dense::from_jet(&(&jp + &jq)).max_diff(&p.add(&q).truncate(order)),
            1 => Dense::from_jet(&(&jp * &jq)).max_diff(&p.mul(&q).truncate(order)),
            2 => {
                let subs: Vec<Dense> = (0..n).map(|_| random_poly(&mut r, n, 1, order, false, 0.7)).collect();
                let js: Vec<Jet> = subs.iter().map(|s| s.to_jet(order)).collect();
                Dense::from_jet(&jp.compose(&js).unwrap()).max_diff(&p.compose(&subs, order))
            }
            _ => {
                let root = [2u32, 3][r.gen_range(0..2)];
                let mut base = p.clone();
                base.c.insert(vec![0; n], r.gen_range(1.0..2.0));
                let g = base.to_jet(order).root(root).unwrap();
                Dense::from_jet(&g).pow(root, order).max_diff(&base.truncate(order))
            }
        };
        worst = worst.max(err);
    }
    Outcome::new(worst < 1e-12, format!("{count} identities, max coefficient error {worst:e}"))
}

fn smooth_source(r: &mut TestRng, n: usize) -> String {
    let mut parts = Vec::new();
    let funcs = ["sin", "cos", "exp"];
    for _ in 0..3 {
        let p = random_poly(r, n, 0, 2, false, 0.7);
        let f = funcs.choose(r).unwrap();
        let scale = if *f == "exp" { 0.3 } else { 1.0 };
        parts.push(format!("{f}({scale}*({}))", p.to_source()));
    }
    let q = random_poly(r, n, 0, 3, false, 0.5);
    parts.push(format!("({})*{}", q.to_source(), parts[0].clone()));
    parts.join(" + ")
}

/// Richardson-extrapolated central differences of a scalar function of one step.
fn richardson(g: impl Fn(f64) -> f64, h: f64) -> f64 {
    (4.0 * g(h / 2.0) - g(h)) / 3.0
}

/// Orders ≤ 2 of jets agree with finite differences of values.
pub fn fd_cross_check(count: usize, seed: u64) -> Outcome {
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let n = r.gen_range(2..=3);
        let f = ScalarField::parse(n, &smooth_source(&mut r, n), Params::new()).unwrap();
        let p: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..1.0)).collect();
        let jet = f.jet(&p, 2).unwrap();
        let v = |d: &[(usize, f64)]| {
            let mut q = p.clone();
            for &(i, s) in d {
                q[i] += s;
            }
            f.eval(&q).unwrap()
        };
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1.0);
        worst = worst.max(rel(jet.value(), v(&[])));
        let g = jet.gradient();
        let h = jet.hessian();
        for i in 0..n {
            let fd = richardson(|s| (v(&[(i, s)]) - v(&[(i, -s)])) / (2.0 * s), 1e-3);
            worst = worst.max(rel(g[i], fd));
            for j in 0..n {
                let fd = if i == j {
                    richardson(|s| (v(&[(i, s)]) - 2.0 * v(&[]) + v(&[(i, -s)])) / (s * s), 1e-3)
                } else {
                    richardson(
                        |s| {
                            (v(&[(i, s), (j, s)]) - v(&[(i, s), (j, -s)]) - v(&[(i, -s), (j, s)])
                                + v(&[(i, -s), (j, -s)]))
                                / (4.0 * s * s)
                        },
                        1e-3,
                    )
                };
                worst = worst.max(rel(h[i * n + j], fd));
            }
        }
    }
    Outcome::new(worst < 1e-6, format!("{count} fields, max relative error {worst:e}"))
}

// ------------------------------------------------------------ doubling

/// Properties of the doubled collar field built from the circle example.
pub fn doubling_suite() -> Outcome {
    let f = collar_example();
    let crit = vec![vec![0.0, 0.0], vec![0.0, PI]];
    let bump = BumpSpec::new(DEMO_EPSILON, DEMO_RADIUS).with_period(2.0 * PI);
    let p = build_double(&f, &crit, bump, (&[-0.5], &[2.0 * PI - 0.5])).unwrap();
    let mut notes = Vec::new();
    let mut pass = true;

    // odd normal derivatives on the boundary, sampled globally and across the cutoff
    let mut zs: Vec<f64> = (0..200).map(|k| 2.0 * PI * k as f64 / 200.0).collect();
    for c in [0.0, PI] {
        zs.extend((0..=60).map(|k| c + DEMO_RADIUS * (3.0 * k as f64 / 30.0 - 3.0)));
    }
    let mut odd: f64 = 0.0;
    for &z in &zs {
        let j = p.jet(&[0.0, z], 3).unwrap();
        odd = odd.max(j.coeff(&[1, 0]).abs()).max((6.0 * j.coeff(&[3, 0])).abs());
    }
    pass &= odd < 1e-10;
    notes.push(format!("max odd x-derivative {odd:e}"));

    // sup |P − F| against ε·max|∂F/∂x| on the collar grid
    let (mut sup, mut dfx): (f64, f64) = (0.0, 0.0);
    for i in 0..200 {
        let z = 2.0 * PI * i as f64 / 199.0;
        for k in 0..50 {
            let x = DEMO_EPSILON * k as f64 / 49.0;
            sup = sup.max((p.value(&[x, z]).unwrap() - f.eval(&[x, z]).unwrap()).abs());
            dfx = dfx.max(f.gradient(&[x, z]).unwrap()[0].abs());
        }
    }
    pass &= sup <= DEMO_EPSILON * dfx;
    notes.push(format!("sup|P-F| = {sup:e} <= {:e}", DEMO_EPSILON * dfx));

    // P = F beyond ε/2
    let mut differs = 0;
    for i in 0..100 {
        let z = 2.0 * PI * i as f64 / 100.0;
        for k in 0..20 {
            let x = DEMO_EPSILON * (0.5 + k as f64 * 0.25);
            if p.jet(&[x, z], 2).unwrap() != f.jet(&[x, z], 2).unwrap() {
                differs += 1;
            }
        }
    }
    pass &= differs == 0;
    notes.push(format!("{differs} samples with P != F beyond eps/2"));

    // identical critical sets
    let b = SearchBox::new(vec![0.0, -0.5], vec![1.0, 2.0 * PI - 0.5]).unwrap();
    let s = Solver::default();
    let cp: Vec<Vec<f64>> = find_all_critical_points(&p, &b, &s).unwrap().into_iter().map(|c| c.location).collect();
    let cf: Vec<Vec<f64>> = find_all_critical_points(&f, &b, &s).unwrap().into_iter().map(|c| c.location).collect();
    let same = cp.len() == cf.len()
        && cp.iter().all(|a| {
            cf.iter()
                .any(|b| a.iter().zip(b).all(|(u, v)| (u - v).abs() < 1e-8))
        });
    pass &= same && cf.len() == 2;
    notes.push(format!("critical sets P {cp:?} F {cf:?}"));

    Outcome::new(pass, notes.join("; "))
}
