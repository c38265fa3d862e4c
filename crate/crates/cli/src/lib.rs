//! Batch front-end: read a config, run its tasks in order, write one JSON
//! report per task.

pub mod build;
pub mod config;
pub mod error;
pub mod tasks;

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::build::{validate, Workspace};
use crate::config::Config;
use crate::error::{CliError, Result};

#[derive(Debug, Clone)]
pub struct TaskSummary {
    pub name: String,
    pub kind: String,
    pub passed: bool,
    pub report: PathBuf,
    pub wall_time_s: f64,
}

pub fn config_hash(cfg: &Config, overrides: &[String]) -> String {
    let mut h = Sha256::new();
    h.update(cfg.text.as_bytes());
    for o in overrides {
        h.update(b"\n");
        h.update(o.as_bytes());
    }
    h.finalize().iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn load(path: &Path, overrides: &[String]) -> Result<Config> {
    let mut cfg = Config::load(path)?;
    cfg.apply_overrides(overrides)?;
    validate(&cfg)?;
    Ok(cfg)
}

fn write_atomic(path: &Path, body: &str) -> Result<()> {
    let io = |e: std::io::Error| CliError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(body.as_bytes()).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Run every task of the config. Errors are config problems; task failures
/// show up as `passed: false` in the summaries.
pub fn run(path: &Path, overrides: &[String], out: &Path) -> Result<Vec<TaskSummary>> {
    let cfg = load(path, overrides)?;
    let hash = config_hash(&cfg, overrides);
    let run_seed = cfg.run_usize("seed", 0)? as u64;
    let mut ws = Workspace::new(&cfg);
    let mut summaries = Vec::new();
    for s in cfg.of_kind("task") {
        let seed = s.usize("seed")?.map_or(run_seed, |v| v as u64);
        let start = Instant::now();
        let (passed, grid, result, error) = match tasks::run(&mut ws, s, seed) {
            Ok(o) => (o.passed, o.grid, o.result, None),
            Err(e @ CliError::Build { .. }) => (false, None, Value::Null, Some(e.to_string())),
            Err(e) => return Err(e),
        };
        let wall = start.elapsed().as_secs_f64();
        let params: Map<String, Value> = s
            .entries
            .iter()
            .map(|(k, e)| (k.clone(), Value::String(e.value.clone())))
            .collect();
        let mut report = json!({
            "task": {"name": s.name, "kind": s.require("kind")?, "params": params},
            "passed": passed,
            "result": result,
            "config_hash": hash,
            "N": grid,
            "seed": seed,
            "overrides": overrides,
            "wall_time_s": wall,
        });
        if let Some(e) = error {
            report["error"] = json!(e);
        }
        let file = s.get("output").map_or_else(|| format!("{}.json", s.name), str::to_string);
        let target = out.join(file);
        let mut body = serde_json::to_string_pretty(&report).expect("json values serialize");
        body.push('\n');
        write_atomic(&target, &body)?;
        summaries.push(TaskSummary {
            name: s.name.clone(),
            kind: s.require("kind")?.to_string(),
            passed,
            report: target,
            wall_time_s: wall,
        });
    }
    Ok(summaries)
}

/// Entity table and task plan. Builds algebroids and fibrations to report
/// their ranks; cubes are listed but not sampled.
pub fn describe(path: &Path, overrides: &[String]) -> Result<String> {
    let cfg = load(path, overrides)?;
    let mut ws = Workspace::new(&cfg);
    let mut rows: Vec<[String; 3]> = Vec::new();
    for s in &cfg.sections {
        let detail = match s.kind.as_str() {
            "chart" => {
                let c = ws.chart(&s.name)?;
                format!("coords {}", c.names().join(", "))
            }
            "algebroid" => {
                let a = ws.algebroid(&s.name)?;
                format!("{}, rank {}, dim {}", s.require("kind")?, a.rank(), a.dim())
            }
            "fibration" => {
                let f = ws.fibration(&s.name)?;
                format!(
                    "{}, total rank {}, base rank {}, kernel rank {}, fiber dim {}",
                    s.require("kind")?,
                    f.total().rank(),
                    f.base().rank(),
                    f.kernel_rank(),
                    f.fiber_dim()
                )
            }
            "cube" => format!("{}, N {}", s.require("kind")?, ws.grid(s)?),
            _ => {
                let refs: Vec<String> = ["algebroid", "fibration", "cube", "cubes"]
                    .iter()
                    .filter_map(|k| s.get(k).map(|v| format!("{k} {v}")))
                    .collect();
                format!("{}: {}", s.require("kind")?, refs.join(", "))
            }
        };
        rows.push([s.kind.clone(), s.name.clone(), detail]);
    }
    let w0 = rows.iter().map(|r| r[0].len()).max().unwrap_or(0).max(4);
    let w1 = rows.iter().map(|r| r[1].len()).max().unwrap_or(0).max(4);
    let mut out = format!("{:w0$}  {:w1$}  details\n", "type", "name");
    for r in &rows {
        let _ = writeln!(out, "{:w0$}  {:w1$}  {}", r[0], r[1], r[2]);
    }
    Ok(out)
}
