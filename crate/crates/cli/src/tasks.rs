//! One function per task kind. Each returns whether the task met its
//! tolerances and a JSON body for the report.

use serde_json::{json, Value};

use algebroid::cubes::{time_names, TimeSections};
use algebroid::transgression::{
    decompose_path, kernel_defect, monodromy_group, transgress2_formula, transgress_lift,
    TransgressionResult,
};
use algebroid::{Cube, Section};

use crate::build::Workspace;
use crate::config::Section as Sec;
use crate::error::{CliError, Result};

pub const SYMBOLIC_TOL: f64 = 1e-6;
pub const GRID_TOL: f64 = 1e-2;

pub struct Outcome {
    pub passed: bool,
    pub grid: Option<usize>,
    pub result: Value,
}

fn wrap<T>(s: &Sec, r: algebroid::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::Build {
        entity: s.to_string(),
        source: e,
    })
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn run(ws: &mut Workspace, s: &Sec, seed: u64) -> Result<Outcome> {
    match s.require("kind")? {
        "check" => check(ws, s, seed),
        "flow" => flow(ws, s, seed),
        "lift" => lift(ws, s),
        "transgress" => transgress(ws, s),
        "monodromy" => monodromy(ws, s),
        "decompose" => decompose(ws, s),
        other => Err(s.invalid(format!("unknown task kind `{other}`"))),
    }
}

fn expectation(s: &Sec) -> Result<bool> {
    match s.get("expect").unwrap_or("pass") {
        "pass" => Ok(true),
        "fail" => Ok(false),
        other => Err(s.invalid(format!("`expect` must be pass or fail, not `{other}`"))),
    }
}

fn check(ws: &mut Workspace, s: &Sec, seed: u64) -> Result<Outcome> {
    let samples = s.usize("samples")?.unwrap_or(200);
    let tol = s.f64("tol")?.unwrap_or(SYMBOLIC_TOL);
    let expect_pass = expectation(s)?;
    let (ok, mut result) = match (s.get("algebroid"), s.get("fibration")) {
        (Some(a), None) => {
            let alg = ws.algebroid(a)?;
            let rep = wrap(s, alg.check_axioms_seeded(samples, tol, seed))?;
            let mut v = to_value(&rep);
            v["rank"] = json!(alg.rank());
            v["dim"] = json!(alg.dim());
            (rep.passed, v)
        }
        (None, Some(f)) => {
            let fib = ws.fibration(f)?;
            let val = wrap(s, fib.validate(samples, tol))?;
            let ids = wrap(s, fib.identity_residuals(samples, tol))?;
            let (abelian, central) = wrap(s, fib.centrality_residual(samples))?;
            let v = json!({
                "validation": to_value(&val),
                "identities": to_value(&ids),
                "kernel_abelian_residual": abelian,
                "curvature_central_residual": central,
            });
            (val.passed && ids.passed, v)
        }
        _ => return Err(s.invalid("give exactly one of `algebroid` or `fibration`")),
    };
    result["expected"] = json!(if expect_pass { "pass" } else { "fail" });
    result["outcome"] = json!(if ok { "pass" } else { "fail" });
    Ok(Outcome {
        passed: ok == expect_pass,
        grid: None,
        result,
    })
}

fn flow(ws: &mut Workspace, s: &Sec, seed: u64) -> Result<Outcome> {
    let alg = ws.algebroid(s.require("algebroid")?)?;
    let mut sections = Vec::new();
    for (idx, _) in s.indexed("section", 1)? {
        let key = format!("section.{}", idx[0] + 1);
        sections.push((idx[0], Section::new(s.exprs(&key)?.expect("key exists"))));
    }
    sections.sort_by_key(|p| p.0);
    if sections.is_empty() || sections.iter().enumerate().any(|(i, p)| p.0 != i) {
        return Err(s.invalid("sections must be numbered 1..n without gaps"));
    }
    let n = sections.len();
    let ts = wrap(s, TimeSections::new(&alg, sections.into_iter().map(|p| p.1).collect()))?;
    let x0 = s.floats("x0")?.ok_or_else(|| s.invalid("missing key `x0`"))?;
    let grid = ws.grid(s)?;
    let tol = s.f64("tol")?.unwrap_or(SYMBOLIC_TOL);
    let swap_tol = s.f64("swap_tol")?.unwrap_or(SYMBOLIC_TOL);
    let flow_tol = s.f64("flow_tol")?.unwrap_or(1e-10);
    let commutation = wrap(s, ts.commutation_residual_seeded(s.usize("samples")?.unwrap_or(50), seed))?;
    let cube = wrap(s, ts.cube_from_sections(&x0, grid, flow_tol, None))?;
    let residual = wrap(s, cube.morphism_residual(&alg))?;
    let mut passed = commutation <= tol;
    let mut result = json!({
        "commutation_residual": commutation,
        "morphism_residual": to_value(&residual),
        "endpoint": cube.gamma_at(cube.node_count() - 1),
    });
    if let Some(want) = s.exprs("expect_gamma")? {
        let tn = time_names(n);
        let names: Vec<&str> = tn.iter().map(String::as_str).collect();
        let compiled = want
            .iter()
            .map(|e| e.compile(&names).map_err(|e| s.invalid(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if compiled.len() != cube.dim() {
            return Err(s.invalid("`expect_gamma` has the wrong number of coordinates"));
        }
        let mut err = 0.0f64;
        for idx in 0..cube.node_count() {
            let t = cube.t_of(idx);
            for (c, g) in compiled.iter().zip(cube.gamma_at(idx)) {
                let v = c.eval(&t).map_err(|e| s.invalid(e.to_string()))?;
                err = err.max((v - g).abs());
            }
        }
        result["path_error"] = json!(err);
        passed &= err <= tol;
    }
    if n >= 2 {
        let reversed: Vec<usize> = (0..n).rev().collect();
        let other = wrap(s, ts.cube_from_sections(&x0, grid, flow_tol, Some(&reversed)))?;
        let diff = max_gap(cube.gamma(), other.gamma());
        result["order_difference"] = json!(diff);
        passed &= diff <= swap_tol;
    }
    result["tol"] = json!(tol);
    Ok(Outcome {
        passed,
        grid: Some(grid),
        result,
    })
}

fn expect_value(s: &Sec, r: &TransgressionResult, result: &mut Value, key: &str) -> Result<bool> {
    let Some(want) = s.floats("expect")? else {
        return Ok(true);
    };
    let tol = s.f64("tol")?.unwrap_or(GRID_TOL);
    if want.len() != r.value.len() {
        return Err(s.invalid(format!("`expect` needs {} value(s)", r.value.len())));
    }
    let err = max_gap(&r.value, &want);
    result[format!("{key}_error")] = json!(err);
    Ok(err <= tol)
}

fn sphere_and_fibration(
    ws: &mut Workspace,
    s: &Sec,
) -> Result<(algebroid::Fibration, Cube, Vec<f64>)> {
    let f = ws.fibration(s.require("fibration")?)?;
    let c = ws.cube(s.require("cube")?)?.cube;
    let y0 = s.floats("y0")?.unwrap_or_default();
    Ok((f, c, y0))
}

fn lift(ws: &mut Workspace, s: &Sec) -> Result<Outcome> {
    let (f, c, y0) = sphere_and_fibration(ws, s)?;
    let (r, face) = wrap(s, transgress_lift(&f, &c, &y0))?;
    let last = face.node_count() - 1;
    let mut result = json!({
        "lift": to_value(&r),
        "face": {
            "order": face.order(),
            "nodes": face.node_count(),
            "start": face.gamma_at(0),
            "end": face.gamma_at(last),
        },
    });
    let passed = expect_value(s, &r, &mut result, "lift")?;
    Ok(Outcome {
        passed,
        grid: Some(c.grid()),
        result,
    })
}

fn transgress(ws: &mut Workspace, s: &Sec) -> Result<Outcome> {
    let (f, c, y0) = sphere_and_fibration(ws, s)?;
    let method = s.get("method").unwrap_or("formula");
    let mut result = json!({});
    let mut passed = true;
    let mut values = Vec::new();
    if method == "formula" || method == "both" {
        let r = wrap(s, transgress2_formula(&f, &c, &y0))?;
        passed &= expect_value(s, &r, &mut result, "formula")?;
        result["formula"] = to_value(&r);
        values.push(r);
    }
    if method == "lift" || method == "both" {
        let (r, _) = wrap(s, transgress_lift(&f, &c, &y0))?;
        passed &= expect_value(s, &r, &mut result, "lift")?;
        result["lift"] = to_value(&r);
        values.push(r);
    }
    match values.as_slice() {
        [] => return Err(s.invalid(format!("unknown method `{method}`"))),
        [a, b] => {
            let gap = max_gap(&a.value, &b.value);
            let allowed = s.f64("tol")?.unwrap_or(GRID_TOL).max(3.0 * a.estimated_error);
            result["method_gap"] = json!(gap);
            passed &= gap <= allowed;
        }
        _ => {}
    }
    Ok(Outcome {
        passed,
        grid: Some(c.grid()),
        result,
    })
}

fn monodromy(ws: &mut Workspace, s: &Sec) -> Result<Outcome> {
    let f = ws.fibration(s.require("fibration")?)?;
    let names = s.names("cubes").unwrap_or_default();
    if names.is_empty() {
        return Err(s.invalid("`cubes` must name at least one sphere"));
    }
    let mut gens = Vec::new();
    for n in &names {
        gens.push((n.clone(), ws.cube(n)?.cube));
    }
    let grid = gens[0].1.grid();
    let rep = wrap(s, monodromy_group(&f, &gens))?;
    let mut result = to_value(&rep);
    let mut passed = true;
    if let Some(want) = s.floats("expect")? {
        let tol = s.f64("tol")?.unwrap_or(GRID_TOL);
        if want.len() != rep.periods[0].len() {
            return Err(s.invalid(format!("`expect` needs {} value(s)", rep.periods[0].len())));
        }
        let err = max_gap(&rep.periods[0], &want);
        result["period_error"] = json!(err);
        passed &= err <= tol;
    }
    if let Some(d) = s.bool("expect_discrete")? {
        passed &= rep.discrete == d;
    }
    Ok(Outcome {
        passed,
        grid: Some(grid),
        result,
    })
}

fn decompose(ws: &mut Workspace, s: &Sec) -> Result<Outcome> {
    let f = ws.fibration(s.require("fibration")?)?;
    let a = ws.cube(s.require("cube")?)?.cube;
    let tol = s.f64("tol")?.unwrap_or(1e-3);
    let endpoint_tol = s.f64("endpoint_tol")?.unwrap_or(SYMBOLIC_TOL);
    let d = wrap(s, decompose_path(&f, &a))?;
    let residual = wrap(s, d.witness.morphism_residual(f.total()))?;
    let boundary = d.witness.homotopy_boundary_defect();
    let recon = wrap(s, d.reconstruction(1e-6))?;
    let last = a.node_count() - 1;
    let start = max_gap(recon.gamma_at(0), a.gamma_at(0));
    let end = max_gap(recon.gamma_at(last), a.gamma_at(last));
    let homotopy = d.witness.is_homotopy(f.total(), tol);
    let result = json!({
        "witness_residual": to_value(&residual),
        "witness_boundary_defect": boundary,
        "is_homotopy": homotopy,
        "kernel_path_defect": wrap(s, kernel_defect(&f, &d.k_path))?,
        "endpoint_gap_start": start,
        "endpoint_gap_end": end,
        "kernel_path_end": d.k_path.gamma_at(last),
        "horizontal_path_start": d.h_path.gamma_at(0),
        "tol": tol,
    });
    Ok(Outcome {
        passed: homotopy && start <= endpoint_tol && end <= endpoint_tol,
        grid: Some(a.grid()),
        result,
    })
}
