//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use algebroid::algebroid::{Algebroid, Bivector, Chart, Section};
use algebroid::cubes::{concat_fn, Cube, TimeSections};
use algebroid::samples::{
    area_sphere, cotangent_fn, disk_fn, jacobi_plane, rep_extension, s2_leaf, s2_sphere,
};
use algebroid::transgression::{decompose_path, monodromy_period, transgress2_formula, transgress_lift};
use algebroid::Expr;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn plane(half: f64) -> Chart {
    Chart::symmetric(&["x", "y"], half).unwrap()
}

fn axiom_suite() -> Outcome {
    let mut cases = vec![
        ("so(3)".to_string(), Algebroid::so3(Chart::point())),
        (
            "T R3".to_string(),
            Algebroid::make_tangent(Chart::symmetric(&["x", "y", "z"], 1.0).map_err(err)?),
        ),
    ];
    for p in ["1", "x", "1 + x^2"] {
        let pi = Bivector::planar(Expr::parse(p).map_err(err)?);
        cases.push((format!("T* P={p}"), Algebroid::make_cotangent_poisson(plane(2.0), &pi).map_err(err)?));
        cases.push((format!("jacobi P={p}"), Algebroid::make_jacobi_extension(plane(2.0), &pi).map_err(err)?));
    }
    cases.push(("rep extension".into(), rep_extension(false).map_err(err)?.total().clone()));
    let mut worst = 0.0f64;
    for (name, a) in &cases {
        let rep = a.check_axioms(200, 1e-8).map_err(err)?;
        ensure(rep.passed, format!("{name}: jacobi {:e}, anchor {:e}", rep.jacobi_residual, rep.anchor_residual))?;
        worst = worst.max(rep.jacobi_residual).max(rep.anchor_residual);
    }
    let line = Algebroid::make_tangent(Chart::symmetric(&["x"], 1.0).map_err(err)?);
    let bad = Algebroid::so3(Chart::point())
        .product(&line)
        .and_then(|p| p.with_structure_entry(0, 1, 2, Expr::parse("1 + x")?))
        .map_err(err)?;
    let rep = bad.check_axioms(200, 1e-8).map_err(err)?;
    ensure(!rep.passed, "corrupted so(3) passed")?;
    let w = rep.witness.ok_or("corrupted so(3) failed without a witness")?;
    Ok(format!(
        "{} algebroids, worst residual {worst:.1e}; corrupted so(3) witness {} on {:?}, residual {:.3}",
        cases.len(),
        w.kind,
        w.frame,
        w.residual
    ))
}

// smooth map I² → R² sending the boundary to the origin, with its exact
// tangent lift
fn collapsing_lift(grid: usize) -> Result<Cube, String> {
    Cube::from_fn(2, grid, 2, 2, |t| {
        let (s1, c1) = ((PI * t[0]).sin(), (PI * t[0]).cos());
        let (s2, c2) = ((PI * t[1]).sin(), (PI * t[1]).cos());
        let g = vec![s1 * s2 * (1.0 + t[0]), s1 * s1 * s2];
        let d1 = vec![PI * c1 * s2 * (1.0 + t[0]) + s1 * s2, 2.0 * PI * s1 * c1 * s2];
        let d2 = vec![PI * s1 * c2 * (1.0 + t[0]), PI * s1 * s1 * c2];
        Ok((g, vec![d1, d2]))
    })
    .map_err(err)
}

fn residual_convergence() -> Outcome {
    let alg = Algebroid::make_tangent(plane(3.0));
    let r64 = collapsing_lift(64)?.morphism_residual(&alg).map_err(err)?.max();
    let r128 = collapsing_lift(128)?.morphism_residual(&alg).map_err(err)?.max();
    let ratio = r64 / r128;
    ensure((3.5..=4.5).contains(&ratio), format!("ratio {ratio:.3}"))?;
    Ok(format!("residual {r64:.2e} -> {r128:.2e}, ratio {ratio:.3}"))
}

fn flow_construction() -> Outcome {
    let alg = Algebroid::make_tangent(plane(4.0));
    let ts = TimeSections::new(
        &alg,
        vec![
            Section::parse(&["y", "0"]).map_err(err)?,
            Section::parse(&["t1", "1"]).map_err(err)?,
        ],
    )
    .map_err(err)?;
    let x0 = [0.3, -0.4];
    let c = ts.cube_from_sections(&x0, 256, 1e-10, None).map_err(err)?;
    let swapped = ts.cube_from_sections(&x0, 256, 1e-10, Some(&[1, 0])).map_err(err)?;
    let (mut path_err, mut swap) = (0.0f64, 0.0f64);
    for idx in 0..c.node_count() {
        let t = c.t_of(idx);
        let want = [x0[0] + t[0] * (x0[1] + t[1]), x0[1] + t[1]];
        for k in 0..2 {
            path_err = path_err.max((c.gamma_at(idx)[k] - want[k]).abs());
            swap = swap.max((c.gamma_at(idx)[k] - swapped.gamma_at(idx)[k]).abs());
        }
    }
    ensure(path_err < 1e-8, format!("path error {path_err:e}"))?;
    ensure(swap < 1e-6, format!("axis order changes the path by {swap:e}"))?;
    Ok(format!("path error {path_err:.1e}, order swap {swap:.1e}"))
}

fn connection_identities() -> Outcome {
    let good = rep_extension(false).map_err(err)?.identity_residuals(200, 1e-8).map_err(err)?;
    ensure(
        good.curvature_identity < 1e-8 && good.bianchi < 1e-8,
        format!("closed cocycle: {good:?}"),
    )?;
    let bad = rep_extension(true).map_err(err)?.identity_residuals(200, 1e-8).map_err(err)?;
    ensure(bad.bianchi > 1e-3, format!("perturbed Bianchi residual {:e}", bad.bianchi))?;
    Ok(format!(
        "curvature {:.1e}, Bianchi {:.1e}; perturbed Bianchi {:.3}",
        good.curvature_identity, good.bianchi, bad.bianchi
    ))
}

fn cross_check() -> Outcome {
    let f = jacobi_plane(Expr::one(), 3.0).map_err(err)?;
    let s = area_sphere(128, 1.0, [0.1, -0.2]).map_err(err)?;
    let formula = transgress2_formula(&f, &s, &[]).map_err(err)?.value[0];
    let lift = transgress_lift(&f, &s, &[]).map_err(err)?.0.value[0];
    // the sphere sweeps the unit disk once
    let oracle = PI;
    ensure((formula - lift).abs() < 1e-2, format!("formula {formula} vs lift {lift}"))?;
    ensure((formula - oracle).abs() < 1e-2, format!("formula {formula} vs area {oracle}"))?;
    ensure((lift - oracle).abs() < 1e-2, format!("lift {lift} vs area {oracle}"))?;
    Ok(format!("formula {formula:.5}, lift {lift:.5}, area {oracle:.5}"))
}

fn group_morphism() -> Outcome {
    let f = jacobi_plane(Expr::one(), 3.0).map_err(err)?;
    let x0 = [0.1, -0.2];
    let s = area_sphere(128, 1.0, x0).map_err(err)?;
    let v = transgress2_formula(&f, &s, &[]).map_err(err)?.value[0];
    let gen = || cotangent_fn(disk_fn(1.0, x0));
    let mut worst = 0.0f64;
    for axis in [1, 2] {
        let ss = Cube::from_fn(2, 128, 2, 2, concat_fn(gen(), gen(), axis)).map_err(err)?;
        let w = transgress2_formula(&f, &ss, &[]).map_err(err)?.value[0];
        worst = worst.max((w - 2.0 * v).abs());
    }
    ensure(worst < 1e-2, format!("|d(S.S) - 2 d(S)| = {worst:e}"))?;
    for axis in [0, 1] {
        let r = s.reverse_axis(axis).map_err(err)?;
        let w = transgress2_formula(&f, &r, &[]).map_err(err)?.value[0];
        ensure(w == -v, format!("reversal along axis {}: {w} vs {}", axis + 1, -v))?;
    }
    Ok(format!("d(S) = {v:.5}, concatenation defect {worst:.1e}, reversal exact on both axes"))
}

// ∫ over the stereographic disk of radius cot(eps/2) of the round area
// form 4/(1+r²)², by composite Simpson in r
fn surface_oracle(eps: f64) -> f64 {
    let big_r = ((PI - eps) / 2.0).tan();
    let n = 400_000;
    let h = big_r / n as f64;
    let g = |r: f64| 2.0 * PI * r * 4.0 / (1.0 + r * r).powi(2);
    let mut s = g(0.0) + g(big_r);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    s * h / 3.0
}

fn s2_monodromy() -> Outcome {
    let eps = 1e-3;
    let f = s2_leaf(2001.0).map_err(err)?;
    let s = s2_sphere(512, eps).map_err(err)?;
    let p = monodromy_period(&f, &s).map_err(err)?;
    let v = p.value[0];
    let oracle = surface_oracle(eps);
    ensure((v - 4.0 * PI).abs() < 2e-2, format!("period {v} vs 4π"))?;
    ensure((v - oracle).abs() < 2e-2, format!("period {v} vs surface integral {oracle}"))?;
    Ok(format!(
        "period {v:.5} (estimated error {:.1e}), surface integral {oracle:.5}, 4π {:.5}",
        p.estimated_error,
        4.0 * PI
    ))
}

fn connection_independence() -> Outcome {
    let f = jacobi_plane(Expr::one(), 3.0).map_err(err)?;
    // Δ = d_A of 0.05 (x - 0.1)(y + 0.2), which vanishes at the basepoint
    let delta = vec![vec![
        Expr::parse("0.05*(x - 0.1)").map_err(err)?,
        Expr::parse("-0.05*(y + 0.2)").map_err(err)?,
    ]];
    let g = f.perturbed(&delta).map_err(err)?;
    let s = area_sphere(128, 1.0, [0.1, -0.2]).map_err(err)?;
    let a = transgress2_formula(&f, &s, &[]).map_err(err)?;
    let b = transgress2_formula(&g, &s, &[]).map_err(err)?;
    let tol = 2.0 * a.estimated_error.max(b.estimated_error);
    let gap = (a.value[0] - b.value[0]).abs();
    ensure(gap < tol, format!("{} vs {} (allowed {tol:e})", a.value[0], b.value[0]))?;
    Ok(format!("sigma {:.6}, shifted {:.6}, gap {gap:.1e} < {tol:.1e}", a.value[0], b.value[0]))
}

fn path_decomposition() -> Outcome {
    let f = jacobi_plane(Expr::one(), 4.0).map_err(err)?;
    let n = 1024;
    let a = Cube::from_fn(1, n, 3, 2, |t| {
        let s = t[0];
        Ok((vec![0.3 - s * s / 2.0, -0.2 + s], vec![vec![0.5 + (3.0 * s).sin(), 1.0, s]]))
    })
    .map_err(err)?;
    let d = decompose_path(&f, &a).map_err(err)?;
    let res = d.witness.morphism_residual(f.total()).map_err(err)?;
    ensure(d.witness.is_homotopy(f.total(), 1e-3), format!("witness residual {res:?}"))?;
    let r = d.reconstruction(1e-6).map_err(err)?;
    let gap = |i: usize| {
        r.gamma_at(i)
            .iter()
            .zip(a.gamma_at(i))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let (g0, g1) = (gap(0), gap(n));
    ensure(g0 < 1e-6 && g1 < 1e-6, format!("endpoint gaps {g0:e}, {g1:e}"))?;
    Ok(format!(
        "witness residual {:.1e}, boundary defect {:.1e}, endpoint gaps {g0:.1e} / {g1:.1e}",
        res.max(),
        d.witness.homotopy_boundary_defect()
    ))
}

fn examples() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .expect("examples directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "cfg"))
        .collect();
    v.sort();
    v
}

fn strip_wall_time(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"wall_time_s\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn cli_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(err)?;
    let mut files = 0;
    for cfg in examples() {
        let stem = cfg.file_stem().unwrap().to_string_lossy().to_string();
        let mut outs = Vec::new();
        for pass in ["a", "b"] {
            let out = root.path().join(pass).join(&stem);
            let status = Command::new(env!("CARGO_BIN_EXE_algebroid"))
                .arg("run")
                .arg(&cfg)
                .args(["--set", "run.seed=42", "--out"])
                .arg(&out)
                .output()
                .map_err(err)?;
            ensure(status.status.success(), format!("{stem} exited with {:?}", status.status.code()))?;
            outs.push(out);
        }
        let mut names: Vec<_> = std::fs::read_dir(&outs[0]).map_err(err)?.filter_map(|e| e.ok()).map(|e| e.file_name()).collect();
        names.sort();
        for name in names {
            let a = std::fs::read_to_string(outs[0].join(&name)).map_err(err)?;
            let b = std::fs::read_to_string(outs[1].join(&name)).map_err(err)?;
            ensure(
                strip_wall_time(&a) == strip_wall_time(&b),
                format!("{stem}/{} differs between runs", name.to_string_lossy()),
            )?;
            files += 1;
        }
    }
    Ok(format!("{files} reports identical across two runs"))
}

fn main() -> ExitCode {
    let criteria: [(&str, f64, fn() -> Outcome); 10] = [
        ("axiom suite", 5.0, axiom_suite),
        ("morphism residual convergence", 5.0, residual_convergence),
        ("flow construction", 10.0, flow_construction),
        ("connection identities", 5.0, connection_identities),
        ("transgression cross-check", 30.0, cross_check),
        ("group morphism and reversal", 30.0, group_morphism),
        ("monodromy on the sphere", 60.0, s2_monodromy),
        ("connection independence", 30.0, connection_independence),
        ("path decomposition", 10.0, path_decomposition),
        ("cli determinism", 180.0, cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let outcome = match outcome {
            Ok(detail) if secs > *budget => Err(format!("{detail}; took {secs:.1} s, budget {budget} s")),
            o => o,
        };
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2} s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
