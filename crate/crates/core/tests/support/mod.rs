//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

pub mod criteria;

use std::collections::BTreeMap;

use cerfkit_core::jet::Jet;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense multivariate polynomial keyed by exponent vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub n: usize,
    pub c: BTreeMap<Vec<u8>, f64>,
}

impl Dense {
    pub fn zero(n: usize) -> Dense {
        Dense { n, c: BTreeMap::new() }
    }

    pub fn constant(n: usize, v: f64) -> Dense {
        let mut d = Dense::zero(n);
        d.c.insert(vec![0; n], v);
        d
    }

    pub fn var(n: usize, i: usize) -> Dense {
        let mut e = vec![0; n];
        e[i] = 1;
        let mut d = Dense::zero(n);
        d.c.insert(e, 1.0);
        d
    }

    pub fn term(&mut self, e: Vec<u8>, v: f64) {
        *self.c.entry(e).or_insert(0.0) += v;
    }

    pub fn add(&self, o: &Dense) -> Dense {
        let mut r = self.clone();
        for (e, v) in &o.c {
            r.term(e.clone(), *v);
        }
        r
    }

    pub fn scale(&self, s: f64) -> Dense {
        Dense {
            n: self.n,
            c: self.c.iter().map(|(e, v)| (e.clone(), v * s)).collect(),
        }
    }

    pub fn mul(&self, o: &Dense) -> Dense {
        let mut r = Dense::zero(self.n);
        for (a, x) in &self.c {
            for (b, y) in &o.c {
                r.term(a.iter().zip(b).map(|(p, q)| p + q).collect(), x * y);
            }
        }
        r
    }

    pub fn truncate(&self, order: usize) -> Dense {
        Dense {
            n: self.n,
            c: self
                .c
                .iter()
                .filter(|(e, _)| degree(e) <= order)
                .map(|(e, v)| (e.clone(), *v))
                .collect(),
        }
    }

    pub fn pow(&self, k: u32, order: usize) -> Dense {
        let mut r = Dense::constant(self.n, 1.0);
        for _ in 0..k {
            r = r.mul(self).truncate(order);
        }
        r
    }

    /// `self(subs)` truncated to `order`.
    pub fn compose(&self, subs: &[Dense], order: usize) -> Dense {
        let m = subs[0].n;
        let mut r = Dense::zero(m);
        for (e, v) in &self.c {
            let mut t = Dense::constant(m, *v);
            for (i, &k) in e.iter().enumerate() {
                t = t.mul(&subs[i].pow(u32::from(k), order)).truncate(order);
            }
            r = r.add(&t);
        }
        r
    }

    pub fn eval(&self, p: &[f64]) -> f64 {
        self.c
            .iter()
            .map(|(e, v)| v * e.iter().zip(p).map(|(&k, x)| x.powi(i32::from(k))).product::<f64>())
            .sum()
    }

    pub fn to_jet(&self, order: usize) -> Jet {
        Jet::from_terms(self.n, order, self.c.iter().map(|(e, v)| (e.as_slice(), *v))).unwrap()
    }

    pub fn from_jet(j: &Jet) -> Dense {
        let mut d = Dense::zero(j.n());
        for (m, v) in j.terms() {
            if v != 0.0 {
                d.term(m.exponents().to_vec(), v);
            }
        }
        d
    }

    pub fn max_diff(&self, o: &Dense) -> f64 {
        let mut keys: Vec<&Vec<u8>> = self.c.keys().chain(o.c.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.into_iter()
            .map(|k| (self.c.get(k).unwrap_or(&0.0) - o.c.get(k).unwrap_or(&0.0)).abs())
            .fold(0.0, f64::max)
    }

    /// Source text accepted by the expression parser.
    pub fn to_source(&self) -> String {
        let mut parts = Vec::new();
        for (e, v) in &self.c {
            let mut s = format!("({v:e})");
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    let name = if i == 0 { "x".to_string() } else { format!("y{i}") };
                    s.push_str(&format!("*{name}^{k}"));
                }
            }
            parts.push(s);
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

pub fn degree(e: &[u8]) -> usize {
    e.iter().map(|&k| usize::from(k)).sum()
}

pub fn monomials(n: usize, max_deg: usize) -> Vec<Vec<u8>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|e: Vec<u8>| {
                let used = degree(&e);
                (0..=(max_deg - used) as u8).map(move |k| {
                    let mut f = e.clone();
                    f.push(k);
                    f
                })
            })
            .collect();
    }
    out
}

/// Random polynomial with coefficients in `[-1, 1]`; `min_deg` drops low terms,
/// `even_x` keeps only monomials even in the first variable.
pub fn random_poly(rng: &mut TestRng, n: usize, min_deg: usize, max_deg: usize, even_x: bool, density: f64) -> Dense {
    let mut d = Dense::zero(n);
    for e in monomials(n, max_deg) {
        let deg = degree(&e);
        if deg < min_deg || (even_x && e[0] % 2 == 1) || rng.gen::<f64>() > density {
            continue;
        }
        d.term(e, rng.gen_range(-1.0..1.0));
    }
    d
}

/// Roots of `a x³ + b x² + c x + d` by Cardano with a Newton polish.
pub fn cubic_real_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (p, q) = {
        let (b, c, d) = (b / a, c / a, d / a);
        (c - b * b / 3.0, 2.0 * b * b * b / 27.0 - b * c / 3.0 + d)
    };
    let shift = -b / (3.0 * a);
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let mut roots = if disc > 0.0 {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt()]
    } else if p == 0.0 {
        vec![0.0]
    } else {
        let r = (-p / 3.0).sqrt();
        let phi = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0).acos();
        (0..3)
            .map(|k| 2.0 * r * ((phi + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos())
            .collect()
    };
    for t in &mut roots {
        *t += shift;
        for _ in 0..3 {
            let f = ((a * *t + b) * *t + c) * *t + d;
            let df = (3.0 * a * *t + 2.0 * b) * *t + c;
            if df != 0.0 {
                *t -= f / df;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Eigenvalues of a symmetric 2×2 or 3×3 matrix from its characteristic polynomial.
pub fn char_poly_eigs(a: &[f64], n: usize) -> Vec<f64> {
    match n {
        1 => vec![a[0]],
        2 => {
            let (t, d) = (a[0] + a[3], a[0] * a[3] - a[1] * a[2]);
            let s = (t * t / 4.0 - d).max(0.0).sqrt();
            vec![t / 2.0 - s, t / 2.0 + s]
        }
        3 => {
            let tr = a[0] + a[4] + a[8];
            let m2 = a[0] * a[4] - a[1] * a[3] + a[0] * a[8] - a[2] * a[6] + a[4] * a[8] - a[5] * a[7];
            let det = a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6]);
            // λ³ − tr λ² + m2 λ − det
            cubic_real_roots(1.0, -tr, m2, -det)
        }
        _ => panic!("oracle covers n ≤ 3"),
    }
}

/// Closed-form census of `y³ − x²y + λy + μx²` on `x ≥ 0`:
/// `(interior, boundary stable, boundary unstable)`.
pub fn model_census(lambda: f64, mu: f64) -> (usize, usize, usize) {
    let interior = usize::from(lambda + 3.0 * mu * mu > 0.0);
    let (mut s, mut u) = (0, 0);
    if lambda < 0.0 {
        for y in [(-lambda / 3.0).sqrt(), -(-lambda / 3.0).sqrt()] {
            // normal Hessian entry 2(μ − y)
            if mu - y > 0.0 {
                u += 1;
            } else {
                s += 1;
            }
        }
    }
    (interior, s, u)
}

/// Distance of `(λ, μ)` to the discriminant `{λ = 0} ∪ {λ = −3μ²}`, measured
/// along λ for the parabola.
pub fn discriminant_distance(lambda: f64, mu: f64) -> f64 {
    lambda.abs().min((lambda + 3.0 * mu * mu).abs())
}

/// σ where the circle `(cos πσ, ±sin πσ)` meets `λ = −3μ²`, by bisection on
/// `3c² − c − 3` over `c ∈ [−1, 0]`.
pub fn circle_collision() -> f64 {
    let g = |c: f64| 3.0 * c * c - c - 3.0;
    let (mut a, mut b) = (-1.0f64, 0.0f64);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if g(a).signum() == g(m).signum() {
            a = m;
        } else {
            b = m;
        }
    }
    (0.5 * (a + b)).acos() / std::f64::consts::PI
}
