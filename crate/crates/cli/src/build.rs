//! Turning config sections into algebroids, fibrations and cubes.

use std::collections::{BTreeMap, BTreeSet};
use std::rc::Rc;

use algebroid::algebroid::{Algebroid, Bivector, Chart};
use algebroid::cubes::{concat_fn, time_names, CubeData, TimeSections};
use algebroid::samples::{cotangent_fn, disk_fn, s2_fn};
use algebroid::{Cube, Expr, Fibration, Section};

use crate::config::{Config, Section as Sec};
use crate::error::{CliError, Result};

pub const DEFAULT_N: usize = 128;

/// Keys that name other entities, with the kind they refer to.
fn references(kind: &str) -> &'static [(&'static str, &'static str)] {
    match kind {
        "algebroid" => &[("chart", "chart"), ("base", "algebroid"), ("factors", "algebroid")],
        "fibration" => &[("total", "algebroid"), ("base", "algebroid"), ("fiber", "algebroid")],
        "cube" => &[("algebroid", "algebroid"), ("first", "cube"), ("second", "cube"), ("of", "cube")],
        "task" => &[
            ("algebroid", "algebroid"),
            ("fibration", "fibration"),
            ("cube", "cube"),
            ("cubes", "cube"),
        ],
        _ => &[],
    }
}

const KINDS: [(&str, &[&str]); 4] = [
    (
        "algebroid",
        &["tangent", "lie_algebra", "cotangent_poisson", "jacobi_extension", "rep_extension", "explicit", "product"],
    ),
    ("fibration", &["extension", "product", "anchor", "explicit"]),
    (
        "cube",
        &["disk", "s2", "tangent_lift", "formula", "from_sections", "file", "concat", "reverse"],
    ),
    ("task", &["check", "flow", "lift", "transgress", "monodromy", "decompose"]),
];

/// Check kinds, references and acyclicity without building anything.
pub fn validate(cfg: &Config) -> Result<()> {
    for s in &cfg.sections {
        if let Some((_, kinds)) = KINDS.iter().find(|(k, _)| *k == s.kind) {
            let kind = s.require("kind")?;
            if !kinds.contains(&kind) {
                return Err(s.invalid(format!(
                    "unknown kind `{kind}` (expected one of {})",
                    kinds.join(", ")
                )));
            }
        }
        for (key, target) in references(&s.kind) {
            for name in s.names(key).unwrap_or_default() {
                if cfg.find(target, &name).is_none() {
                    return Err(s.invalid(format!("`{key}` refers to undefined {target} `{name}`")));
                }
            }
        }
    }
    let mut done = BTreeSet::new();
    for s in &cfg.sections {
        let mut stack = Vec::new();
        visit(cfg, s, &mut stack, &mut done)?;
    }
    Ok(())
}

fn visit<'c>(
    cfg: &'c Config,
    s: &'c Sec,
    stack: &mut Vec<(&'c str, &'c str)>,
    done: &mut BTreeSet<(&'c str, &'c str)>,
) -> Result<()> {
    let id = (s.kind.as_str(), s.name.as_str());
    if done.contains(&id) {
        return Ok(());
    }
    if let Some(pos) = stack.iter().position(|x| *x == id) {
        let mut path: Vec<String> = stack[pos..].iter().map(|(k, n)| format!("{k} `{n}`")).collect();
        path.push(format!("{} `{}`", id.0, id.1));
        return Err(CliError::Cycle(path.join(" -> ")));
    }
    stack.push(id);
    for (key, target) in references(&s.kind) {
        for name in s.names(key).unwrap_or_default() {
            if let Some(t) = cfg.find(target, &name) {
                visit(cfg, t, stack, done)?;
            }
        }
    }
    stack.pop();
    done.insert(id);
    Ok(())
}

type Gen = Rc<dyn Fn(&[f64]) -> algebroid::Result<CubeData>>;

/// A grid cube, plus the function it was sampled from when there is one.
#[derive(Clone)]
pub struct BuiltCube {
    pub cube: Cube,
    gen: Option<(Gen, usize, usize, usize)>,
}

pub struct Workspace<'c> {
    pub cfg: &'c Config,
    charts: BTreeMap<String, Chart>,
    algebroids: BTreeMap<String, Algebroid>,
    fibrations: BTreeMap<String, Fibration>,
    cubes: BTreeMap<String, BuiltCube>,
}

fn wrap<T>(s: &Sec, r: algebroid::Result<T>) -> Result<T> {
    r.map_err(|e| CliError::Build {
        entity: s.to_string(),
        source: e,
    })
}

fn section<'c>(cfg: &'c Config, kind: &str, name: &str) -> Result<&'c Sec> {
    cfg.find(kind, name).ok_or_else(|| CliError::Invalid {
        entity: format!("{kind} `{name}`"),
        message: "not defined".into(),
    })
}

impl<'c> Workspace<'c> {
    pub fn new(cfg: &'c Config) -> Self {
        Workspace {
            cfg,
            charts: BTreeMap::new(),
            algebroids: BTreeMap::new(),
            fibrations: BTreeMap::new(),
            cubes: BTreeMap::new(),
        }
    }

    pub fn grid(&self, s: &Sec) -> Result<usize> {
        match s.usize("N")? {
            Some(n) => Ok(n),
            None => self.cfg.run_usize("N", DEFAULT_N),
        }
    }

    pub fn chart(&mut self, name: &str) -> Result<Chart> {
        if let Some(c) = self.charts.get(name) {
            return Ok(c.clone());
        }
        let s = section(self.cfg, "chart", name)?;
        let coords = s.names("coords").ok_or_else(|| s.invalid("missing key `coords`"))?;
        let refs: Vec<&str> = coords.iter().map(String::as_str).collect();
        let chart = match (s.f64("half")?, s.floats("lo")?, s.floats("hi")?) {
            (Some(h), None, None) => wrap(s, Chart::symmetric(&refs, h))?,
            (None, Some(lo), Some(hi)) => wrap(s, Chart::new(coords.clone(), lo, hi))?,
            _ => return Err(s.invalid("give either `half` or both `lo` and `hi`")),
        };
        self.charts.insert(name.to_string(), chart.clone());
        Ok(chart)
    }

    fn chart_of(&mut self, s: &Sec) -> Result<Chart> {
        match s.get("chart") {
            Some(c) => self.chart(c),
            None => Ok(Chart::point()),
        }
    }

    pub fn algebroid(&mut self, name: &str) -> Result<Algebroid> {
        if let Some(a) = self.algebroids.get(name) {
            return Ok(a.clone());
        }
        let s = section(self.cfg, "algebroid", name)?;
        let mut a = self.build_algebroid(s)?;
        for (idx, v) in s.indexed("corrupt", 3)? {
            let e = Expr::parse(v).map_err(|e| s.invalid(e.to_string()))?;
            a = wrap(s, a.with_structure_entry(idx[0], idx[1], idx[2], e))?;
        }
        self.algebroids.insert(name.to_string(), a.clone());
        Ok(a)
    }

    fn bivector(&self, s: &Sec, m: usize) -> Result<Bivector> {
        if let Some(p) = s.expr("poisson")? {
            if m != 2 {
                return Err(s.invalid("`poisson = <expr>` needs a 2-dimensional chart; use `poisson.i.j`"));
            }
            return Ok(Bivector::planar(p));
        }
        let mut b = Bivector::zero(m);
        for (idx, v) in s.indexed("poisson", 2)? {
            let e = Expr::parse(v).map_err(|e| s.invalid(e.to_string()))?;
            wrap(s, b.set(idx[0], idx[1], e))?;
        }
        Ok(b)
    }

    fn build_algebroid(&mut self, s: &Sec) -> Result<Algebroid> {
        let kind = s.require("kind")?;
        match kind {
            "tangent" => Ok(Algebroid::make_tangent(self.chart_of(s)?)),
            "lie_algebra" => {
                let chart = self.chart_of(s)?;
                if s.get("preset") == Some("so3") {
                    return Ok(Algebroid::so3(chart));
                }
                if let Some(p) = s.get("preset") {
                    return Err(s.invalid(format!("unknown preset `{p}`")));
                }
                let r = s.usize("rank")?.ok_or_else(|| s.invalid("missing key `rank`"))?;
                let mut consts = vec![vec![vec![0.0; r]; r]; r];
                for (idx, v) in s.indexed("bracket", 2)? {
                    let row: Option<Vec<f64>> = v.split(',').map(|x| x.trim().parse().ok()).collect();
                    let row = row.ok_or_else(|| s.invalid(format!("bad structure constants `{v}`")))?;
                    if idx[0] >= r || idx[1] >= r || row.len() != r {
                        return Err(s.invalid(format!("bracket entry `{v}` does not fit rank {r}")));
                    }
                    consts[idx[0]][idx[1]] = row;
                }
                wrap(s, Algebroid::make_lie_algebra(chart, &consts))
            }
            "cotangent_poisson" | "jacobi_extension" => {
                let chart = self.chart_of(s)?;
                let pi = self.bivector(s, chart.dim())?;
                if kind == "cotangent_poisson" {
                    wrap(s, Algebroid::make_cotangent_poisson(chart, &pi))
                } else {
                    wrap(s, Algebroid::make_jacobi_extension(chart, &pi))
                }
            }
            "rep_extension" => {
                let base = self.algebroid(s.require("base")?)?;
                let d = s.usize("fiber_rank")?.unwrap_or(1);
                let r = base.rank();
                let mut action = vec![vec![vec![Expr::zero(); d]; d]; r];
                for (idx, _) in s.indexed("action", 1)? {
                    let key = format!("action.{}", idx[0] + 1);
                    let m = s.matrix(&key)?.expect("key exists");
                    if idx[0] >= r || m.len() != d || m.iter().any(|row| row.len() != d) {
                        return Err(s.invalid(format!("`{key}` must be a {d}x{d} matrix for e1..e{r}")));
                    }
                    action[idx[0]] = m;
                }
                let mut cocycle = BTreeMap::new();
                for (idx, _) in s.indexed("cocycle", 2)? {
                    let key = format!("cocycle.{}.{}", idx[0] + 1, idx[1] + 1);
                    let v = s.exprs(&key)?.expect("key exists");
                    cocycle.insert((idx[0], idx[1]), v);
                }
                wrap(s, Algebroid::make_rep_extension(&base, &action, &cocycle))
            }
            "explicit" => {
                let chart = self.chart_of(s)?;
                let r = s.usize("rank")?.ok_or_else(|| s.invalid("missing key `rank`"))?;
                let frame = match s.names("frame") {
                    Some(f) => f,
                    None => (1..=r).map(|i| format!("e{i}")).collect(),
                };
                let mut anchor = vec![vec![Expr::zero(); chart.dim()]; r];
                for (idx, _) in s.indexed("anchor", 1)? {
                    let key = format!("anchor.{}", idx[0] + 1);
                    if idx[0] >= r {
                        return Err(s.invalid(format!("`{key}` exceeds rank {r}")));
                    }
                    anchor[idx[0]] = s.exprs(&key)?.expect("key exists");
                }
                let mut structure = BTreeMap::new();
                for (idx, _) in s.indexed("bracket", 2)? {
                    let key = format!("bracket.{}.{}", idx[0] + 1, idx[1] + 1);
                    structure.insert((idx[0], idx[1]), s.exprs(&key)?.expect("key exists"));
                }
                wrap(s, Algebroid::new(chart, frame, anchor, structure))
            }
            "product" => {
                let f = s.names("factors").unwrap_or_default();
                if f.len() != 2 {
                    return Err(s.invalid("`factors` must name two algebroids"));
                }
                let (a, b) = (self.algebroid(&f[0])?, self.algebroid(&f[1])?);
                wrap(s, a.product(&b))
            }
            other => Err(s.invalid(format!("unknown kind `{other}`"))),
        }
    }

    fn require_matrix(s: &Sec, key: &str) -> Result<Vec<Vec<Expr>>> {
        s.matrix(key)?.ok_or_else(|| s.invalid(format!("missing key `{key}`")))
    }

    pub fn fibration(&mut self, name: &str) -> Result<Fibration> {
        if let Some(f) = self.fibrations.get(name) {
            return Ok(f.clone());
        }
        let s = section(self.cfg, "fibration", name)?;
        let mut f = match s.require("kind")? {
            "extension" => {
                let total = self.algebroid(s.require("total")?)?;
                let base = self.algebroid(s.require("base")?)?;
                let f = wrap(s, Fibration::extension(&total, &base))?;
                match s.matrix("sigma")? {
                    Some(m) => wrap(s, f.with_sigma(m))?,
                    None => f,
                }
            }
            "product" => {
                let base = self.algebroid(s.require("base")?)?;
                let fiber = self.algebroid(s.require("fiber")?)?;
                wrap(s, Fibration::product(&base, &fiber))?
            }
            "anchor" => {
                let total = self.algebroid(s.require("total")?)?;
                let sigma = Self::require_matrix(s, "sigma")?;
                let kernel = Self::require_matrix(s, "kernel")?;
                wrap(s, Fibration::from_anchor(&total, sigma, kernel))?
            }
            "explicit" => {
                let total = self.algebroid(s.require("total")?)?;
                let base = self.algebroid(s.require("base")?)?;
                let pi = Self::require_matrix(s, "pi")?;
                let kernel = Self::require_matrix(s, "kernel")?;
                wrap(s, Fibration::new(total, base, pi, s.matrix("sigma")?, kernel))?
            }
            other => return Err(s.invalid(format!("unknown kind `{other}`"))),
        };
        if let Some(delta) = s.matrix("perturb")? {
            f = wrap(s, f.perturbed(&delta))?;
        }
        self.fibrations.insert(name.to_string(), f.clone());
        Ok(f)
    }

    pub fn cube(&mut self, name: &str) -> Result<BuiltCube> {
        if let Some(c) = self.cubes.get(name) {
            return Ok(c.clone());
        }
        let s = section(self.cfg, "cube", name)?;
        let built = self.build_cube(s)?;
        if let Some(a) = s.get("algebroid") {
            let alg = self.algebroid(a)?;
            wrap(s, built.cube.check_chart(&alg))?;
        }
        self.cubes.insert(name.to_string(), built.clone());
        Ok(built)
    }

    fn sampled(&self, s: &Sec, gen: Gen, n: usize, r: usize, m: usize) -> Result<BuiltCube> {
        let grid = self.grid(s)?;
        let g = gen.clone();
        let cube = wrap(s, Cube::from_fn(n, grid, r, m, move |t| g(t)))?;
        Ok(BuiltCube {
            cube,
            gen: Some((gen, n, r, m)),
        })
    }

    fn build_cube(&mut self, s: &Sec) -> Result<BuiltCube> {
        match s.require("kind")? {
            "disk" => {
                let rho = s.f64("rho")?.ok_or_else(|| s.invalid("missing key `rho`"))?;
                let c = s.floats("center")?.unwrap_or(vec![0.0, 0.0]);
                if c.len() != 2 {
                    return Err(s.invalid("`center` needs two coordinates"));
                }
                let extra = s.floats("append")?.unwrap_or_default();
                let base: Gen = match s.get("bundle").unwrap_or("tangent") {
                    "tangent" => Rc::new(disk_fn(rho, [c[0], c[1]])),
                    "cotangent" => Rc::new(cotangent_fn(disk_fn(rho, [c[0], c[1]]))),
                    other => return Err(s.invalid(format!("unknown bundle `{other}`"))),
                };
                let k = extra.len();
                let gen: Gen = if k == 0 {
                    base
                } else {
                    Rc::new(move |t: &[f64]| {
                        let (mut g, comps) = base(t)?;
                        g.extend_from_slice(&extra);
                        let comps = comps
                            .into_iter()
                            .map(|mut v| {
                                v.resize(2 + k, 0.0);
                                v
                            })
                            .collect();
                        Ok((g, comps))
                    })
                };
                self.sampled(s, gen, 2, 2 + k, 2 + k)
            }
            "s2" => {
                let eps = s.f64("eps")?.unwrap_or(1e-3);
                self.sampled(s, Rc::new(s2_fn(eps)), 2, 2, 2)
            }
            "tangent_lift" => {
                let n = s.usize("order")?.unwrap_or(2);
                let map = s.exprs("map")?.ok_or_else(|| s.invalid("missing key `map`"))?;
                let tn = time_names(n);
                let comps: Vec<Vec<Expr>> =
                    tn.iter().map(|t| map.iter().map(|e| e.diff(t)).collect()).collect();
                let m = map.len();
                self.formula_cube(s, n, map, comps, m)
            }
            "formula" => {
                let n = s.usize("order")?.unwrap_or(2);
                let gamma = s.exprs("gamma")?.ok_or_else(|| s.invalid("missing key `gamma`"))?;
                let mut comps = Vec::new();
                for i in 1..=n {
                    let key = format!("comp.{i}");
                    comps.push(s.exprs(&key)?.ok_or_else(|| s.invalid(format!("missing key `{key}`")))?);
                }
                let r = comps[0].len();
                if comps.iter().any(|c| c.len() != r) {
                    return Err(s.invalid("components differ in length"));
                }
                self.formula_cube(s, n, gamma, comps, r)
            }
            "from_sections" => {
                let alg = self.algebroid(s.require("algebroid")?)?;
                let mut sections = Vec::new();
                for (idx, _) in s.indexed("section", 1)? {
                    let key = format!("section.{}", idx[0] + 1);
                    sections.push((idx[0], Section::new(s.exprs(&key)?.expect("key exists"))));
                }
                sections.sort_by_key(|p| p.0);
                if sections.iter().enumerate().any(|(i, p)| p.0 != i) {
                    return Err(s.invalid("sections must be numbered 1..n without gaps"));
                }
                let ts = wrap(s, TimeSections::new(&alg, sections.into_iter().map(|p| p.1).collect()))?;
                let x0 = s.floats("x0")?.ok_or_else(|| s.invalid("missing key `x0`"))?;
                let tol = s.f64("tol")?.unwrap_or(1e-10);
                let order: Option<Vec<usize>> = match s.floats("axis_order")? {
                    Some(v) => Some(v.iter().map(|&a| (a as usize).saturating_sub(1)).collect()),
                    None => None,
                };
                let cube = wrap(s, ts.cube_from_sections(&x0, self.grid(s)?, tol, order.as_deref()))?;
                Ok(BuiltCube { cube, gen: None })
            }
            "file" => {
                let path = self.cfg.base_dir().join(s.require("path")?);
                let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io {
                    path: path.display().to_string(),
                    source: e,
                })?;
                Ok(BuiltCube {
                    cube: wrap(s, Cube::from_json(&text))?,
                    gen: None,
                })
            }
            "concat" => {
                let first = self.cube(s.require("first")?)?;
                let second = self.cube(s.require("second")?)?;
                let axis = s.usize("axis")?.unwrap_or(1);
                match (&first.gen, &second.gen) {
                    (Some((g0, n, r, m)), Some((g1, n1, r1, m1))) if (n, r, m) == (n1, r1, m1) => {
                        if axis == 0 || axis > *n {
                            return Err(s.invalid(format!("axis {axis} of a {n}-cube")));
                        }
                        let (a, b) = (g1.clone(), g0.clone());
                        let f = concat_fn(move |t: &[f64]| a(t), move |t: &[f64]| b(t), axis);
                        self.sampled(s, Rc::new(f), *n, *r, *m)
                    }
                    _ => {
                        let tol = s.f64("tol")?.unwrap_or(1e-9);
                        let cube = wrap(s, Cube::concat(&second.cube, &first.cube, axis, tol))?;
                        Ok(BuiltCube { cube, gen: None })
                    }
                }
            }
            "reverse" => {
                let of = self.cube(s.require("of")?)?;
                let axis = s.usize("axis")?.unwrap_or(1);
                if axis == 0 || axis > of.cube.order() {
                    return Err(s.invalid(format!("axis {axis} of a {}-cube", of.cube.order())));
                }
                Ok(BuiltCube {
                    cube: wrap(s, of.cube.reverse_axis(axis - 1))?,
                    gen: of.gen.map(|(g, n, r, m)| {
                        let k = axis - 1;
                        let rev: Gen = Rc::new(move |t: &[f64]| {
                            let mut u = t.to_vec();
                            u[k] = 1.0 - u[k];
                            let (gamma, mut comps) = g(&u)?;
                            comps[k].iter_mut().for_each(|v| *v = -*v);
                            Ok((gamma, comps))
                        });
                        (rev, n, r, m)
                    }),
                })
            }
            other => Err(s.invalid(format!("unknown kind `{other}`"))),
        }
    }

    fn formula_cube(
        &self,
        s: &Sec,
        n: usize,
        gamma: Vec<Expr>,
        comps: Vec<Vec<Expr>>,
        r: usize,
    ) -> Result<BuiltCube> {
        let tn = time_names(n);
        let names: Vec<&str> = tn.iter().map(String::as_str).collect();
        let compile = |e: &Expr| e.compile(&names).map_err(|e| s.invalid(e.to_string()));
        let g: Vec<_> = gamma.iter().map(compile).collect::<Result<_>>()?;
        let a: Vec<Vec<_>> = comps
            .iter()
            .map(|row| row.iter().map(compile).collect::<Result<_>>())
            .collect::<Result<_>>()?;
        let m = g.len();
        let gen: Gen = Rc::new(move |t: &[f64]| {
            let gamma = g.iter().map(|c| c.eval(t)).collect::<std::result::Result<_, _>>()?;
            let comps = a
                .iter()
                .map(|row| row.iter().map(|c| c.eval(t)).collect::<std::result::Result<_, _>>())
                .collect::<std::result::Result<_, _>>()?;
            Ok((gamma, comps))
        });
        self.sampled(s, gen, n, r, m)
    }
}
