mod support;

use cerfkit_core::critical::{find_all_critical_points, Solver};
use cerfkit_core::field::ScalarField;
use cerfkit_core::linalg::jacobi_eigen;
use cerfkit_core::Params;
use rand::Rng;
use support::criteria::{model_plane_box, region_census};
use support::{char_poly_eigs, cubic_real_roots, model_census, rng};

fn model(lambda: f64, mu: f64) -> ScalarField {
    ScalarField::parse(
        2,
        "y1^3 - x^2*y1 + lambda*y1 + mu*x^2",
        Params::new().with("lambda", lambda).with("mu", mu),
    )
    .unwrap()
}

#[test]
fn region_examples() {
    let s = Solver::default();
    for (l, m, want) in [(1.0, 0.0, (1, 0, 0)), (-0.75, 0.6, (1, 0, 2)), (-1.0, 0.0, (0, 1, 1))] {
        let pts = find_all_critical_points(&model(l, m), &model_plane_box(), &s).unwrap();
        let c = cerfkit_core::continuation::Census::from_points(&pts);
        assert_eq!((c.interior, c.boundary_stable, c.boundary_unstable), want);
        assert_eq!(model_census(l, m), want);
    }
}

#[test]
fn random_parameters_find_every_point() {
    let mut r = rng(21);
    let s = Solver::default();
    for _ in 0..20 {
        let (l, m): (f64, f64) = (r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5));
        let pts = find_all_critical_points(&model(l, m), &model_plane_box(), &s).unwrap();
        let mut expect: Vec<Vec<f64>> = Vec::new();
        if l + 3.0 * m * m > 0.0 {
            expect.push(vec![(l + 3.0 * m * m).sqrt(), m]);
        }
        if l < 0.0 {
            let y = (-l / 3.0).sqrt();
            expect.push(vec![0.0, y]);
            expect.push(vec![0.0, -y]);
        }
        assert_eq!(pts.len(), expect.len(), "lambda {l} mu {m}");
        for e in expect {
            assert!(pts.iter().any(|p| (p.location[0] - e[0]).abs() < 1e-9 && (p.location[1] - e[1]).abs() < 1e-9));
        }
    }
}

#[test]
fn hessian_eigenvalues_match_characteristic_polynomial() {
    let mut r = rng(22);
    for _ in 0..200 {
        let n = r.gen_range(1..=3);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = r.gen_range(-2.0..2.0);
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        let e = jacobi_eigen(&a, n);
        for (x, y) in e.values.iter().zip(char_poly_eigs(&a, n)) {
            assert!((x - y).abs() < 1e-8 * (1.0 + y.abs()), "{x} vs {y}");
        }
    }
}

#[test]
fn cubic_oracle_roots() {
    let r = cubic_real_roots(4.0, 0.0, -2.0, 0.0);
    assert_eq!(r.len(), 3);
    assert!((r[2] - 0.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn coarse_region_map() {
    let o = region_census(21, 60.0);
    assert!(o.pass, "{}", o.detail);
}
