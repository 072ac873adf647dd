//! Scenario execution and output files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cerfkit_core::collar::{build_double, BumpSpec, DoubledField};
use cerfkit_core::continuation::{
    track_branches, Census, Event, EventDetails, EventKind, TrackResult,
};
use cerfkit_core::critical::{find_all_critical_points, CriticalPoint, Solver, Tolerances};
use cerfkit_core::expr::var_name;
use cerfkit_core::field::{FamilySpec, Field, ScalarField};
use cerfkit_core::jet::SymmetryMask;
use cerfkit_core::plane::{census_map, MapCell, PlaneSpec};
use cerfkit_core::strata::{reduce_normal_form_cubic, reduce_normal_form_quartic, StratumTag};
use cerfkit_core::Exec;
use serde_json::{json, Map, Value};

use crate::json::{float, to_string};
use crate::scenario::{DoublePlan, Expected, MapPlan, Mode, Scenario};
use crate::CliError;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Value,
    /// `None` when the scenario declares no expectations.
    pub passed: Option<bool>,
    pub mismatches: Vec<String>,
    pub files: Vec<PathBuf>,
    pub elapsed: f64,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.passed == Some(false) {
            2
        } else {
            0
        }
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn floats(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| json!(x)).collect())
}

fn census_json(c: &Census) -> Value {
    json!({
        "interior": c.interior,
        "boundary_stable": c.boundary_stable,
        "boundary_unstable": c.boundary_unstable,
        "degenerate": c.degenerate,
        "label": c.label(),
    })
}

fn tolerances_json(t: &Tolerances) -> Value {
    json!({
        "eig_tol": t.eig_tol,
        "third_tol": t.third_tol,
        "det_tol": t.det_tol,
        "dedup": t.dedup,
        "snap": t.snap,
        "grad_tol": t.grad_tol,
        "newton_max_iter": t.newton_max_iter,
    })
}

fn opt<T: Into<Value>>(v: Option<T>) -> Value {
    v.map_or(Value::Null, Into::into)
}

/// Runs a validated scenario and writes its files under `out`.
pub fn run_scenario(s: &Scenario, out: &Path, exec: Exec) -> Result<RunOutcome, CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    let start = Instant::now();
    let mut report = Map::new();
    report.insert("scenario".into(), json!(s.name));
    report.insert("n".into(), json!(s.n));
    report.insert("field".into(), json!(s.field_source));
    report.insert(
        "fixed".into(),
        Value::Object(s.fixed.iter().map(|(k, v)| (k.to_string(), json!(v))).collect()),
    );
    report.insert("tolerances".into(), tolerances_json(&s.tracker.solver.tol));
    report.insert("seed_density".into(), json!(s.tracker.solver.density));
    report.insert(
        "box".into(),
        json!({"min": floats(&s.search_box.min), "max": floats(&s.search_box.max)}),
    );
    let mut files = Vec::new();
    let mismatches = match &s.mode {
        Mode::Path(fam) => run_path(s, fam, out, exec, &mut report, &mut files)?,
        Mode::Map(plan) => run_map(s, plan, out, exec, &mut report, &mut files)?,
        Mode::Double(plan) => run_double(s, plan, out, &mut report, &mut files)?,
    };
    let passed = (!s.expected.is_empty()).then_some(mismatches.is_empty());
    report.insert(
        "expected".into(),
        match passed {
            None => Value::Null,
            Some(p) => json!({"passed": p, "mismatches": mismatches}),
        },
    );
    let report = Value::Object(report);
    let path = out.join("report.json");
    write(&path, &to_string(&report))?;
    files.push(path);
    Ok(RunOutcome {
        report,
        passed,
        mismatches,
        files,
        elapsed: start.elapsed().as_secs_f64(),
    })
}

// ------------------------------------------------------------ paths

fn normal_form_json(fam: &FamilySpec, e: &Event, order: usize) -> Value {
    let Ok(f) = fam.at(e.sigma_star) else {
        return Value::Null;
    };
    let Ok(jet) = f.jet(&e.location, order) else {
        return Value::Null;
    };
    let n = jet.n();
    let sig = match e.stratum.tag {
        StratumTag::F1_1 => reduce_normal_form_cubic(&jet, &SymmetryMask::interior(n)),
        StratumTag::F1_21 => reduce_normal_form_cubic(&jet, &SymmetryMask::boundary(n)),
        StratumTag::F1_22 => reduce_normal_form_quartic(&jet, &SymmetryMask::boundary(n)),
        _ => return Value::Null,
    };
    match sig {
        Ok(s) => json!({
            "eps_x": opt(s.eps_x),
            "eps": s.eps,
            "cubic_sign": opt(s.cubic_sign),
            "quartic_sign": opt(s.quartic_sign),
            "residual": s.residual,
            "order": order,
        }),
        Err(err) => json!({"error": err.to_string()}),
    }
}

fn event_json(fam: &FamilySpec, e: &Event, order: usize) -> Value {
    let details = match &e.details {
        EventDetails::Pair(m) => json!({
            "pair": m.iter().map(|p| json!({
                "branch": p.branch,
                "index": opt(p.index),
                "boundary_index": opt(p.boundary_index),
                "stability": opt(p.stability.map(|s| s.as_str())),
            })).collect::<Vec<_>>()
        }),
        EventDetails::Collision {
            interior_branch,
            boundary_branch,
            interior_index,
            before,
            after,
            index_before,
            index_after,
        } => json!({
            "interior_branch": interior_branch,
            "boundary_branch": boundary_branch,
            "interior_index": opt(*interior_index),
            "stability_before": before.as_str(),
            "stability_after": after.as_str(),
            "index_before": opt(*index_before),
            "index_after": opt(*index_after),
        }),
    };
    json!({
        "id": e.id,
        "kind": e.kind.as_str(),
        "sigma_star": e.sigma_star,
        "location": floats(&e.location),
        "stratum": e.stratum.to_string(),
        "transversality": e.transversality,
        "transverse": e.transverse,
        "census_before": census_json(&e.census_before),
        "census_after": census_json(&e.census_after),
        "details": details,
        "normal_form": normal_form_json(fam, e, order),
    })
}

fn branches_csv(n: usize, r: &TrackResult) -> String {
    let mut s = String::from("sigma,branch_id,kind");
    for i in 0..n {
        s.push(',');
        s.push_str(&var_name(i));
    }
    s.push_str(",index,boundary_index,stability,min_eig\n");
    let num = |v: Option<usize>| v.map_or(String::new(), |v| v.to_string());
    for b in &r.branches {
        for p in &b.samples {
            let _ = write!(s, "{},{},{}", float(p.sigma), b.id, b.kind.as_str());
            for c in &p.location {
                let _ = write!(s, ",{}", float(*c));
            }
            let _ = writeln!(
                s,
                ",{},{},{},{}",
                num(p.index),
                num(p.boundary_index),
                p.stability.map_or("", |st| st.as_str()),
                float(p.min_eig)
            );
        }
    }
    s
}

fn check_events(expected: &[Expected], r: &TrackResult) -> Vec<String> {
    let want: Vec<(EventKind, f64, f64)> = expected
        .iter()
        .filter_map(|e| match e {
            Expected::Event { kind, sigma, tol } => Some((*kind, *sigma, *tol)),
            _ => None,
        })
        .collect();
    let mut out = Vec::new();
    if want.is_empty() {
        return out;
    }
    if want.len() != r.events.len() {
        out.push(format!("expected {} events, found {}", want.len(), r.events.len()));
    }
    for (i, ((kind, sigma, tol), e)) in want.iter().zip(&r.events).enumerate() {
        if *kind != e.kind {
            out.push(format!("event {i}: expected {}, found {}", kind.as_str(), e.kind.as_str()));
        }
        if (e.sigma_star - sigma).abs() > *tol {
            out.push(format!(
                "event {i}: sigma* = {} differs from {sigma} by more than {tol:e}",
                float(e.sigma_star)
            ));
        }
    }
    for d in &r.diagnostics {
        out.push(format!("diagnostic at sigma {}: {}", float(d.sigma), d.message));
    }
    out
}

fn run_path(
    s: &Scenario,
    fam: &FamilySpec,
    out: &Path,
    exec: Exec,
    report: &mut Map<String, Value>,
    files: &mut Vec<PathBuf>,
) -> Result<Vec<String>, CliError> {
    let mut cfg = s.tracker;
    cfg.solver.exec = exec;
    let r = track_branches(fam, &s.search_box, &cfg)?;
    let events: Vec<Value> = r.events.iter().map(|e| event_json(fam, e, s.order)).collect();

    report.insert("mode".into(), json!("path"));
    report.insert(
        "params".into(),
        Value::Object(fam.path.iter().map(|(k, e)| (k.clone(), json!(e.to_string()))).collect()),
    );
    report.insert("sigma".into(), floats(&[fam.sigma_range.0, fam.sigma_range.1]));
    report.insert("sigma_step".into(), json!(cfg.sigma_step));
    report.insert("order".into(), json!(s.order));
    report.insert("events".into(), Value::Array(events.clone()));
    report.insert(
        "branches".into(),
        Value::Array(
            r.branches
                .iter()
                .map(|b| {
                    json!({
                        "id": b.id,
                        "kind": b.kind.as_str(),
                        "sigma_start": b.samples.first().map(|p| p.sigma),
                        "sigma_end": b.samples.last().map(|p| p.sigma),
                        "samples": b.samples.len(),
                        "birth_event": opt(b.birth_event),
                        "death_event": opt(b.death_event),
                    })
                })
                .collect(),
        ),
    );
    report.insert(
        "intervals".into(),
        Value::Array(
            r.intervals
                .iter()
                .map(|i| json!({"from": i.from, "to": i.to, "census": census_json(&i.census)}))
                .collect(),
        ),
    );
    report.insert(
        "diagnostics".into(),
        Value::Array(
            r.diagnostics
                .iter()
                .map(|d| json!({"sigma": d.sigma, "message": d.message}))
                .collect(),
        ),
    );

    let p = out.join("branches.csv");
    write(&p, &branches_csv(s.n, &r))?;
    files.push(p);
    let p = out.join("events.json");
    write(&p, &to_string(&Value::Array(events)))?;
    files.push(p);
    Ok(check_events(&s.expected, &r))
}

// ------------------------------------------------------------ maps

pub fn map_cells(s: &Scenario, plan: &MapPlan, exec: Exec) -> Result<Vec<MapCell>, CliError> {
    let spec = PlaneSpec {
        n: s.n,
        base: s.base.clone(),
        fixed: s.fixed.clone(),
        axes: plan.axes.clone(),
        ranges: plan.ranges,
        resolution: [plan.grid, plan.grid],
    };
    Ok(census_map(&spec, &s.search_box, &s.tracker.solver, exec)?)
}

pub fn map_csv(plan: &MapPlan, cells: &[MapCell]) -> String {
    let mut s = format!(
        "{},{},interior_count,boundary_stable,boundary_unstable,degenerate_flag,label\n",
        plan.axes[0], plan.axes[1]
    );
    for c in cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            float(c.params[0]),
            float(c.params[1]),
            c.census.interior,
            c.census.boundary_stable,
            c.census.boundary_unstable,
            u8::from(c.near_degenerate),
            if c.near_degenerate { "degenerate" } else { c.label.as_str() }
        );
    }
    s
}

fn run_map(
    s: &Scenario,
    plan: &MapPlan,
    out: &Path,
    exec: Exec,
    report: &mut Map<String, Value>,
    files: &mut Vec<PathBuf>,
) -> Result<Vec<String>, CliError> {
    let cells = map_cells(s, plan, exec)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut flagged = 0;
    for c in &cells {
        if c.near_degenerate {
            flagged += 1;
        } else {
            *counts.entry(c.label.clone()).or_insert(0) += 1;
        }
    }
    report.insert("mode".into(), json!("map"));
    report.insert("axes".into(), json!(plan.axes));
    report.insert(
        "ranges".into(),
        json!([[plan.ranges[0].0, plan.ranges[0].1], [plan.ranges[1].0, plan.ranges[1].1]]),
    );
    report.insert("grid".into(), json!(plan.grid));
    report.insert("regions".into(), json!(counts));
    report.insert("degenerate_cells".into(), json!(flagged));
    let p = out.join("map.csv");
    write(&p, &map_csv(plan, &cells))?;
    files.push(p);

    let mut mismatches = Vec::new();
    for e in &s.expected {
        if let Expected::Regions(labels) = e {
            let want: BTreeSet<&str> = labels.iter().map(String::as_str).collect();
            let got: BTreeSet<&str> = counts.keys().map(String::as_str).collect();
            if want != got {
                mismatches.push(format!("expected regions {want:?}, found {got:?}"));
            }
        }
    }
    Ok(mismatches)
}

// ------------------------------------------------------------ doubling

/// Measurements comparing a doubled field with the original.
#[derive(Debug, Clone)]
pub struct DoublingCheck {
    pub odd_derivative_max: f64,
    pub sup_difference: f64,
    pub bound: f64,
    pub critical_f: Vec<CriticalPoint>,
    pub critical_p: Vec<CriticalPoint>,
    pub sets_match: bool,
}

pub fn doubling_check(
    f: &ScalarField,
    p: &DoubledField,
    s: &Scenario,
    solver: &Solver,
) -> Result<DoublingCheck, CliError> {
    let b = &s.search_box;
    let n = s.n;
    let eps = p.bump().epsilon;
    let r = p.bump().radius;
    let mid: Vec<f64> = b.min.iter().zip(&b.max).map(|(a, c)| 0.5 * (a + c)).collect();
    let along = |t: f64| -> Vec<f64> {
        let mut q = mid.clone();
        q[0] = 0.0;
        if n > 1 {
            q[1] = t;
        }
        q
    };
    let (lo, hi) = if n > 1 { (b.min[1], b.max[1]) } else { (0.0, 0.0) };

    let mut pts: Vec<Vec<f64>> = (0..200).map(|k| along(lo + (hi - lo) * k as f64 / 200.0)).collect();
    for c in p.centers() {
        for k in 0..=60 {
            let mut q = c.clone();
            if let Some(first) = q.first_mut() {
                *first += r * (k as f64 / 10.0 - 3.0);
            }
            let mut full = vec![0.0];
            full.extend(q);
            pts.push(full);
        }
    }
    let mut odd: f64 = 0.0;
    for q in &pts {
        let j = p.jet(q, 3)?;
        let mut e1 = vec![0u8; n];
        e1[0] = 1;
        let mut e3 = vec![0u8; n];
        e3[0] = 3;
        odd = odd.max(j.coeff(&e1).abs()).max((6.0 * j.coeff(&e3)).abs());
    }

    let (mut sup, mut dfx): (f64, f64) = (0.0, 0.0);
    for i in 0..200 {
        for k in 0..50 {
            let mut q = along(lo + (hi - lo) * i as f64 / 199.0);
            q[0] = eps * k as f64 / 49.0;
            sup = sup.max((p.value(&q)? - f.value(&q)?).abs());
            dfx = dfx.max(f.gradient(&q)?[0].abs());
        }
    }

    let critical_f = find_all_critical_points(f, b, solver)?;
    let critical_p = find_all_critical_points(p, b, solver)?;
    let sets_match = critical_f.len() == critical_p.len()
        && critical_p.iter().all(|a| {
            critical_f
                .iter()
                .any(|c| a.location.iter().zip(&c.location).all(|(u, v)| (u - v).abs() < 1e-8))
        });
    Ok(DoublingCheck {
        odd_derivative_max: odd,
        sup_difference: sup,
        bound: eps * dfx,
        critical_f,
        critical_p,
        sets_match,
    })
}

fn point_json(p: &CriticalPoint) -> Value {
    json!({
        "location": floats(&p.location),
        "kind": p.kind.as_str(),
        "index": opt(p.index),
        "stability": opt(p.stability.map(|s| s.as_str())),
        "value": p.value,
    })
}

fn run_double(
    s: &Scenario,
    plan: &DoublePlan,
    out: &Path,
    report: &mut Map<String, Value>,
    files: &mut Vec<PathBuf>,
) -> Result<Vec<String>, CliError> {
    let f = ScalarField::new(s.n, s.base.clone(), s.fixed.clone())?;
    let mut bump = BumpSpec::new(plan.epsilon, plan.radius);
    if let Some(per) = plan.period {
        bump = bump.with_period(per);
    }
    let b = &s.search_box;
    let p = build_double(&f, &plan.boundary_points, bump, (&b.min[1..], &b.max[1..]))?;
    let check = doubling_check(&f, &p, s, &s.tracker.solver)?;

    report.insert("mode".into(), json!("double"));
    report.insert("epsilon".into(), json!(plan.epsilon));
    report.insert("radius".into(), json!(plan.radius));
    report.insert("period".into(), opt(plan.period));
    report.insert("exact_split".into(), json!(p.split().is_exact()));
    report.insert("odd_derivative_max".into(), json!(check.odd_derivative_max));
    report.insert("sup_difference".into(), json!(check.sup_difference));
    report.insert("difference_bound".into(), json!(check.bound));
    report.insert("critical_sets_match".into(), json!(check.sets_match));
    report.insert(
        "critical_f".into(),
        Value::Array(check.critical_f.iter().map(point_json).collect()),
    );
    report.insert(
        "critical_p".into(),
        Value::Array(check.critical_p.iter().map(point_json).collect()),
    );

    let mut csv = String::from("field");
    for i in 0..s.n {
        csv.push(',');
        csv.push_str(&var_name(i));
    }
    csv.push_str(",kind,index,stability\n");
    for (tag, set) in [("F", &check.critical_f), ("P", &check.critical_p)] {
        for c in set {
            csv.push_str(tag);
            for v in &c.location {
                let _ = write!(csv, ",{}", float(*v));
            }
            let _ = writeln!(
                csv,
                ",{},{},{}",
                c.kind.as_str(),
                c.index.map_or(String::new(), |i| i.to_string()),
                c.stability.map_or("", |st| st.as_str())
            );
        }
    }
    let path = out.join("critical_points.csv");
    write(&path, &csv)?;
    files.push(path);

    let mut mismatches = Vec::new();
    for e in &s.expected {
        if let Expected::Doubling { count } = e {
            if check.critical_f.len() != *count || check.critical_p.len() != *count {
                mismatches.push(format!(
                    "expected {count} critical points, found {} for F and {} for P",
                    check.critical_f.len(),
                    check.critical_p.len()
                ));
            }
            if !check.sets_match {
                mismatches.push("critical sets of F and P differ".into());
            }
            if check.odd_derivative_max >= 1e-10 {
                mismatches.push(format!("odd x-derivative {:e} on the boundary", check.odd_derivative_max));
            }
            if check.sup_difference > check.bound {
                mismatches.push(format!(
                    "sup|P - F| = {:e} exceeds {:e}",
                    check.sup_difference, check.bound
                ));
            }
        }
    }
    Ok(mismatches)
}
