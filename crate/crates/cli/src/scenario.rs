//! Scenario files: schema, validation and conversion to core types.

use std::collections::BTreeMap;
use std::path::Path;

use cerfkit_core::continuation::{EventKind, TrackerConfig};
use cerfkit_core::critical::SearchBox;
use cerfkit_core::field::{FamilySpec, ScalarField};
use cerfkit_core::{parse_expression, Expr, Params};
use serde::Deserialize;

use crate::builtins;
use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub description: Option<String>,
    pub n: usize,
    pub field: String,
    /// Parameter paths as expressions in `sigma`.
    #[serde(default)]
    pub params: BTreeMap<String, String>,
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    #[serde(default)]
    pub sigma: Option<[f64; 2]>,
    #[serde(rename = "box")]
    pub search_box: BoxFile,
    #[serde(default)]
    pub config: ConfigFile,
    #[serde(default)]
    pub map: Option<MapFile>,
    #[serde(default)]
    pub double: Option<DoubleFile>,
    #[serde(default)]
    pub expected: Vec<ExpectedFile>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxFile {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub sigma_step: Option<f64>,
    pub seed_density: Option<usize>,
    pub eig_tol: Option<f64>,
    pub order: Option<usize>,
    pub trans_tol: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub axes: [String; 2],
    pub ranges: [[f64; 2]; 2],
    pub grid: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleFile {
    pub epsilon: f64,
    pub radius: f64,
    #[serde(default)]
    pub period: Option<f64>,
    pub boundary_points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedFile {
    pub kind: String,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    #[serde(default)]
    pub count: Option<usize>,
}

/// Command-line overrides of the scenario config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub order: Option<usize>,
    pub eig_tol: Option<f64>,
    pub seed_density: Option<usize>,
    pub sigma_step: Option<f64>,
    pub grid: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expected {
    Event { kind: EventKind, sigma: f64, tol: f64 },
    Regions(Vec<String>),
    Doubling { count: usize },
}

#[derive(Debug, Clone)]
pub struct MapPlan {
    pub axes: [String; 2],
    pub ranges: [(f64, f64); 2],
    pub grid: usize,
}

#[derive(Debug, Clone)]
pub struct DoublePlan {
    pub epsilon: f64,
    pub radius: f64,
    pub period: Option<f64>,
    pub boundary_points: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub enum Mode {
    Path(FamilySpec),
    Map(MapPlan),
    Double(DoublePlan),
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub n: usize,
    pub field_source: String,
    pub base: Expr,
    pub fixed: Params,
    pub search_box: SearchBox,
    pub tracker: TrackerConfig,
    pub order: usize,
    pub mode: Mode,
    pub expected: Vec<Expected>,
}

fn schema(msg: impl Into<String>) -> CliError {
    CliError::Schema(msg.into())
}

fn parse_in(what: &str, src: &str) -> Result<Expr, CliError> {
    parse_expression(src).map_err(|e| CliError::Syntax {
        what: what.to_string(),
        source: e,
    })
}

impl Scenario {
    /// Reads a scenario from a file, or a builtin when `arg` names one.
    pub fn load(arg: &str, ov: &Overrides) -> Result<Scenario, CliError> {
        let text = match builtins::source(arg) {
            Some(s) if !Path::new(arg).exists() => s.to_string(),
            _ => std::fs::read_to_string(arg).map_err(|e| CliError::Io {
                path: arg.to_string(),
                source: e,
            })?,
        };
        Scenario::from_json(&text, ov)
    }

    pub fn from_json(text: &str, ov: &Overrides) -> Result<Scenario, CliError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
        Scenario::validate(file, ov)
    }

    pub fn validate(file: ScenarioFile, ov: &Overrides) -> Result<Scenario, CliError> {
        let n = file.n;
        if file.name.trim().is_empty() {
            return Err(schema("`name` must not be empty"));
        }
        let base = parse_in("field", &file.field)?;
        let fixed: Params = file.fixed.iter().map(|(k, v)| (k.clone(), *v)).collect();
        let BoxFile { min, max } = file.search_box.clone();
        if min.len() != n || max.len() != n {
            return Err(schema(format!("`box` bounds need {n} coordinates")));
        }
        let search_box = SearchBox::new(min, max)?;

        let mut tracker = TrackerConfig::default();
        let cfg = &file.config;
        if let Some(h) = ov.sigma_step.or(cfg.sigma_step) {
            if !(h > 0.0 && h <= 0.5) {
                return Err(schema(format!("sigma step {h} must lie in (0, 0.5]")));
            }
            tracker.sigma_step = h;
        }
        if let Some(d) = ov.seed_density.or(cfg.seed_density) {
            if d < 2 {
                return Err(schema("seed density must be at least 2"));
            }
            tracker.solver.density = d;
        }
        if let Some(t) = ov.eig_tol.or(cfg.eig_tol) {
            if t.is_nan() || t <= 0.0 {
                return Err(schema("eig_tol must be positive"));
            }
            tracker.solver.tol.eig_tol = t;
        }
        if let Some(t) = cfg.trans_tol {
            tracker.trans_tol = t;
        }
        let order = ov.order.or(cfg.order).unwrap_or(4);
        if !(4..=6).contains(&order) {
            return Err(schema(format!("order {order} outside 4..=6")));
        }

        let exclusive = [file.map.is_some(), file.double.is_some()];
        if exclusive.iter().filter(|&&b| b).count() > 1 {
            return Err(schema("`map` and `double` are mutually exclusive"));
        }
        let free: Vec<String> = base
            .free_params()
            .into_iter()
            .filter(|p| !fixed.names().contains(p))
            .collect();

        let mode = if let Some(m) = &file.map {
            if !file.params.is_empty() || file.sigma.is_some() {
                return Err(schema("a map scenario takes no `params` path or `sigma` range"));
            }
            let mut axes = m.axes.to_vec();
            axes.sort();
            if free != axes {
                return Err(schema(format!(
                    "a map needs exactly two free parameters matching its axes; free parameters are {free:?}"
                )));
            }
            let grid = ov.grid.unwrap_or(m.grid);
            if grid < 2 {
                return Err(schema("map grid must be at least 2"));
            }
            for r in m.ranges {
                if r[0].is_nan() || r[1].is_nan() || r[0] >= r[1] {
                    return Err(schema(format!("map range {r:?} must be increasing")));
                }
            }
            // surfaces bad dimensions and variables before any numeric work
            ScalarField::new(
                n,
                base.clone(),
                fixed.clone().with(&m.axes[0], 0.0).with(&m.axes[1], 0.0),
            )?;
            Mode::Map(MapPlan {
                axes: m.axes.clone(),
                ranges: [(m.ranges[0][0], m.ranges[0][1]), (m.ranges[1][0], m.ranges[1][1])],
                grid,
            })
        } else if let Some(d) = &file.double {
            if !free.is_empty() {
                return Err(schema(format!("unbound parameters {free:?}")));
            }
            ScalarField::new(n, base.clone(), fixed.clone())?;
            if d.boundary_points.iter().any(|p| p.len() != n) {
                return Err(schema(format!("boundary points need {n} coordinates")));
            }
            Mode::Double(DoublePlan {
                epsilon: d.epsilon,
                radius: d.radius,
                period: d.period,
                boundary_points: d.boundary_points.clone(),
            })
        } else {
            let [a, b] = file.sigma.ok_or_else(|| schema("missing `sigma` range"))?;
            let mut path = Vec::new();
            for (name, src) in &file.params {
                path.push((name.clone(), parse_in(&format!("params.{name}"), src)?));
            }
            let unbound: Vec<&String> = free.iter().filter(|p| !file.params.contains_key(*p)).collect();
            if !unbound.is_empty() {
                return Err(schema(format!("unbound parameters {unbound:?}")));
            }
            Mode::Path(FamilySpec::new(n, base.clone(), fixed.clone(), path, (a, b))?)
        };

        let mut expected = Vec::new();
        for e in &file.expected {
            expected.push(match (e.kind.as_str(), &mode) {
                ("regions", Mode::Map(_)) => Expected::Regions(
                    e.labels.clone().ok_or_else(|| schema("`regions` expectation needs `labels`"))?,
                ),
                ("doubling", Mode::Double(_)) => Expected::Doubling {
                    count: e.count.ok_or_else(|| schema("`doubling` expectation needs `count`"))?,
                },
                (k, Mode::Path(_)) => Expected::Event {
                    kind: EventKind::parse(k).ok_or_else(|| schema(format!("unknown event kind `{k}`")))?,
                    sigma: e.sigma.ok_or_else(|| schema("event expectation needs `sigma`"))?,
                    tol: e.tol.unwrap_or(1e-6),
                },
                (k, _) => return Err(schema(format!("expectation `{k}` does not fit this scenario"))),
            });
        }

        Ok(Scenario {
            name: file.name,
            n,
            field_source: file.field,
            base,
            fixed,
            search_box,
            tracker,
            order,
            mode,
            expected,
        })
    }
}
