//! Census map over a two-parameter plane.

use crate::continuation::Census;
use crate::critical::{find_all_critical_points, SearchBox, Solver};
use crate::exec::Exec;
use crate::expr::{Expr, Params};
use crate::field::{FieldError, ScalarField};

#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSpec {
    pub n: usize,
    pub base: Expr,
    pub fixed: Params,
    pub axes: [String; 2],
    pub ranges: [(f64, f64); 2],
    pub resolution: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapCell {
    pub params: [f64; 2],
    pub census: Census,
    pub label: String,
    /// Some point sits within the degeneracy tolerance.
    pub near_degenerate: bool,
}

fn axis(range: (f64, f64), k: usize, count: usize) -> f64 {
    if count <= 1 {
        return range.0;
    }
    range.0 + (range.1 - range.0) * k as f64 / (count - 1) as f64
}

/// Census of every grid cell, first axis slowest. Cells run through `exec`;
/// each cell solves sequentially.
pub fn census_map(spec: &PlaneSpec, b: &SearchBox, solver: &Solver, exec: Exec) -> Result<Vec<MapCell>, FieldError> {
    let [na, nb] = spec.resolution;
    let grid: Vec<[f64; 2]> = (0..na)
        .flat_map(|i| (0..nb).map(move |j| (i, j)))
        .map(|(i, j)| [axis(spec.ranges[0], i, na), axis(spec.ranges[1], j, nb)])
        .collect();
    let inner = Solver {
        exec: Exec::Sequential,
        ..*solver
    };
    let cells = exec.map(&grid, |&params| -> Result<MapCell, FieldError> {
        let bound = spec
            .fixed
            .clone()
            .with(&spec.axes[0], params[0])
            .with(&spec.axes[1], params[1]);
        let f = ScalarField::new(spec.n, spec.base.clone(), bound)?;
        let points = find_all_critical_points(&f, b, &inner)?;
        let census = Census::from_points(&points);
        Ok(MapCell {
            params,
            label: census.label(),
            near_degenerate: census.degenerate > 0,
            census,
        })
    });
    cells.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;

    #[test]
    fn small_map_regions() {
        let spec = PlaneSpec {
            n: 2,
            base: parse_expression("y1^3 - x^2*y1 + lambda*y1 + mu*x^2").unwrap(),
            fixed: Params::new(),
            axes: ["lambda".into(), "mu".into()],
            ranges: [(-1.0, 1.0), (-1.0, 1.0)],
            resolution: [3, 3],
        };
        let b = SearchBox::new(vec![0.0, -2.5], vec![3.5, 2.5]).unwrap();
        let cells = census_map(&spec, &b, &Solver::default(), Exec::default()).unwrap();
        assert_eq!(cells.len(), 9);
        // (λ, μ) = (1, 1): one interior orbit, no boundary points
        assert_eq!(cells[8].label, "i1s0u0");
        // (-1, 1): both boundary points unstable, λ + 3μ² > 0
        assert_eq!(cells[2].label, "i1s0u2");
        // (-1, 0): y = ±1/√3 straddle μ = 0
        assert_eq!(cells[1].label, "i0s1u1");
        // (0, 0) is the organizing centre
        assert!(cells[4].near_degenerate);
    }
}
