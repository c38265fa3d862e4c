//! Lie algebroids on one coordinate chart.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{Env, Expr};

pub const DEFAULT_SEED: u64 = 42;

/// Coordinate box `lo < x < hi` with named coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    names: Vec<String>,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Chart {
    pub fn new(names: Vec<String>, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if names.len() != lo.len() || names.len() != hi.len() {
            return Err(Error::Chart("names and bounds differ in length".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Chart(format!("duplicate coordinate `{n}`")));
            }
            if !(lo[i] < hi[i]) {
                return Err(Error::Chart(format!("empty range for `{n}`")));
            }
        }
        Ok(Chart { names, lo, hi })
    }

    /// Chart box `[-half, half]^m` with the given coordinate names.
    pub fn symmetric(names: &[&str], half: f64) -> Result<Self> {
        let m = names.len();
        Chart::new(
            names.iter().map(|s| s.to_string()).collect(),
            vec![-half; m],
            vec![half; m],
        )
    }

    pub fn point() -> Self {
        Chart {
            names: vec![],
            lo: vec![],
            hi: vec![],
        }
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name_refs(&self) -> Vec<&str> {
        self.names.iter().map(|s| s.as_str()).collect()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| rng.gen_range(*l..*h))
            .collect()
    }

    pub fn env(&self, x: &[f64]) -> Env {
        self.names.iter().cloned().zip(x.iter().copied()).collect()
    }

    /// Concatenate two charts; coordinate names must stay unique.
    pub fn product(&self, other: &Chart) -> Result<Chart> {
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        let mut lo = self.lo.clone();
        lo.extend(&other.lo);
        let mut hi = self.hi.clone();
        hi.extend(&other.hi);
        Chart::new(names, lo, hi)
    }
}

/// Antisymmetric bivector on a chart, stored by its upper triangle.
#[derive(Debug, Clone)]
pub struct Bivector {
    m: usize,
    upper: Vec<Expr>,
}

pub(crate) fn pair_index(i: usize, j: usize, n: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

pub(crate) fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

impl Bivector {
    pub fn zero(m: usize) -> Self {
        Bivector {
            m,
            upper: vec![Expr::zero(); pair_count(m)],
        }
    }

    pub fn set(&mut self, i: usize, j: usize, e: Expr) -> Result<()> {
        if i >= self.m || j >= self.m || i == j {
            return Err(Error::Index(format!("bivector entry ({i},{j}) in dimension {}", self.m)));
        }
        if i < j {
            self.upper[pair_index(i, j, self.m)] = e;
        } else {
            self.upper[pair_index(j, i, self.m)] = -e;
        }
        Ok(())
    }

    /// Planar bivector `p ∂x∧∂y`.
    pub fn planar(p: Expr) -> Self {
        Bivector {
            m: 2,
            upper: vec![p],
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Expr {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.upper[pair_index(i, j, self.m)].clone(),
            Greater => -self.upper[pair_index(j, i, self.m)].clone(),
            Equal => Expr::zero(),
        }
    }
}

/// A section given by its coefficients in the algebroid frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub coeffs: Vec<Expr>,
}

impl Section {
    pub fn new(coeffs: Vec<Expr>) -> Self {
        Section { coeffs }
    }

    pub fn zero(r: usize) -> Self {
        Section {
            coeffs: vec![Expr::zero(); r],
        }
    }

    /// The frame element `e_i`.
    pub fn basis(r: usize, i: usize) -> Self {
        let mut s = Section::zero(r);
        s.coeffs[i] = Expr::one();
        s
    }

    pub fn constant(values: &[f64]) -> Self {
        Section {
            coeffs: values.iter().map(|v| Expr::Const(*v)).collect(),
        }
    }

    pub fn parse(texts: &[&str]) -> Result<Self> {
        Ok(Section {
            coeffs: texts
                .iter()
                .map(|t| Expr::parse(t))
                .collect::<std::result::Result<_, _>>()?,
        })
    }

    pub fn rank(&self) -> usize {
        self.coeffs.len()
    }

    pub fn scale(&self, f: &Expr) -> Section {
        Section {
            coeffs: self.coeffs.iter().map(|c| f.clone() * c.clone()).collect(),
        }
    }

    pub fn add(&self, other: &Section) -> Section {
        Section {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        }
    }

    pub fn sub(&self, other: &Section) -> Section {
        Section {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }

    pub fn diff(&self, var: &str) -> Section {
        Section {
            coeffs: self.coeffs.iter().map(|c| c.diff(var)).collect(),
        }
    }

    pub fn eval(&self, env: &Env) -> Result<Vec<f64>> {
        Ok(self
            .coeffs
            .iter()
            .map(|c| c.eval(env))
            .collect::<std::result::Result<_, _>>()?)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(Expr::is_zero)
    }
}

/// Vector field on a chart as `m` coefficient expressions.
pub type VectorField = Vec<Expr>;

/// Apply a vector field to a function.
pub fn derivation(v: &[Expr], names: &[String], f: &Expr) -> Expr {
    Expr::sum(
        v.iter()
            .zip(names)
            .filter(|(c, n)| !c.is_zero() && f.depends_on(n))
            .map(|(c, n)| c.clone() * f.diff(n)),
    )
}

/// Commutator of vector fields.
pub fn vector_bracket(v: &[Expr], w: &[Expr], names: &[String]) -> VectorField {
    (0..names.len())
        .map(|a| derivation(v, names, &w[a]) - derivation(w, names, &v[a]))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Algebroid {
    chart: Chart,
    frame: Vec<String>,
    anchor: Vec<Vec<Expr>>,
    structure: Vec<Vec<Expr>>,
}

impl Algebroid {
    /// `anchor[i][a]` is the `∂x_a` coefficient of `♯e_i`; `structure` maps
    /// `(i, j)` with `i < j` to the coefficients of `[e_i, e_j]`. Missing
    /// pairs are zero.
    pub fn new(
        chart: Chart,
        frame: Vec<String>,
        anchor: Vec<Vec<Expr>>,
        structure: BTreeMap<(usize, usize), Vec<Expr>>,
    ) -> Result<Self> {
        let r = frame.len();
        let m = chart.dim();
        if anchor.len() != r || anchor.iter().any(|row| row.len() != m) {
            return Err(Error::Dimension(format!("anchor must be {r}x{m}")));
        }
        let mut table = vec![vec![Expr::zero(); r]; pair_count(r)];
        for ((i, j), v) in structure {
            if i >= j || j >= r {
                return Err(Error::Index(format!(
                    "structure pair ({i},{j}) must satisfy i < j < {r}"
                )));
            }
            if v.len() != r {
                return Err(Error::Dimension(format!(
                    "bracket [e{},e{}] needs {r} coefficients",
                    i + 1,
                    j + 1
                )));
            }
            table[pair_index(i, j, r)] = v;
        }
        let alg = Algebroid {
            chart,
            frame,
            anchor,
            structure: table,
        };
        alg.check_variables()?;
        Ok(alg)
    }

    fn check_variables(&self) -> Result<()> {
        let names = self.chart.names();
        let all = self
            .anchor
            .iter()
            .flatten()
            .chain(self.structure.iter().flatten());
        for e in all {
            for v in e.variables() {
                if !names.contains(&v) {
                    return Err(Error::Expr(crate::expr::ExprError::Unbound(v)));
                }
            }
        }
        Ok(())
    }

    pub fn chart(&self) -> &Chart {
        &self.chart
    }

    pub fn rank(&self) -> usize {
        self.frame.len()
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn frame(&self) -> &[String] {
        &self.frame
    }

    pub fn anchor(&self) -> &[Vec<Expr>] {
        &self.anchor
    }

    /// Coefficients of `[e_i, e_j]` for any pair.
    pub fn structure(&self, i: usize, j: usize) -> Vec<Expr> {
        use std::cmp::Ordering::*;
        let r = self.rank();
        match i.cmp(&j) {
            Less => self.structure[pair_index(i, j, r)].clone(),
            Greater => self.structure[pair_index(j, i, r)]
                .iter()
                .map(|e| -e.clone())
                .collect(),
            Equal => vec![Expr::zero(); r],
        }
    }

    pub(crate) fn structure_upper(&self) -> &[Vec<Expr>] {
        &self.structure
    }

    fn check_section(&self, x: &Section) -> Result<()> {
        if x.rank() != self.rank() {
            return Err(Error::Dimension(format!(
                "section of rank {} on an algebroid of rank {}",
                x.rank(),
                self.rank()
            )));
        }
        Ok(())
    }

    pub fn anchor_apply(&self, x: &Section) -> Result<VectorField> {
        self.check_section(x)?;
        Ok((0..self.dim())
            .map(|a| {
                Expr::sum(
                    x.coeffs
                        .iter()
                        .zip(&self.anchor)
                        .filter(|(c, row)| !c.is_zero() && !row[a].is_zero())
                        .map(|(c, row)| c.clone() * row[a].clone()),
                )
            })
            .collect())
    }

    pub fn bracket(&self, x: &Section, y: &Section) -> Result<Section> {
        self.check_section(x)?;
        self.check_section(y)?;
        let r = self.rank();
        let names = self.chart.names();
        let vx = self.anchor_apply(x)?;
        let vy = self.anchor_apply(y)?;
        let mut out: Vec<Expr> = (0..r)
            .map(|k| derivation(&vx, names, &y.coeffs[k]) - derivation(&vy, names, &x.coeffs[k]))
            .collect();
        for i in 0..r {
            for j in (i + 1)..r {
                let w = x.coeffs[i].clone() * y.coeffs[j].clone()
                    - x.coeffs[j].clone() * y.coeffs[i].clone();
                if w.is_zero() {
                    continue;
                }
                for (k, c) in self.structure[pair_index(i, j, r)].iter().enumerate() {
                    if !c.is_zero() {
                        out[k] = out[k].clone() + w.clone() * c.clone();
                    }
                }
            }
        }
        Ok(Section::new(out))
    }

    /// Jacobi residual and anchor compatibility at sampled chart points.
    pub fn check_axioms(&self, n_samples: usize, tol: f64) -> Result<AxiomReport> {
        self.check_axioms_seeded(n_samples, tol, DEFAULT_SEED)
    }

    pub fn check_axioms_seeded(&self, n_samples: usize, tol: f64, seed: u64) -> Result<AxiomReport> {
        let r = self.rank();
        let names = self.chart.names();
        let basis: Vec<Section> = (0..r).map(|i| Section::basis(r, i)).collect();
        let fields: Vec<VectorField> = basis
            .iter()
            .map(|b| self.anchor_apply(b))
            .collect::<Result<_>>()?;

        let mut jacobi = Vec::new();
        for i in 0..r {
            for j in (i + 1)..r {
                for k in (j + 1)..r {
                    let cyc = [(i, j, k), (j, k, i), (k, i, j)];
                    let mut acc = Section::zero(r);
                    for (a, b, c) in cyc {
                        let ab = Section::new(self.structure(a, b));
                        acc = acc.add(&self.bracket(&ab, &basis[c])?);
                    }
                    jacobi.push(([i, j, k], acc));
                }
            }
        }
        let mut anchor_defects = Vec::new();
        for i in 0..r {
            for j in (i + 1)..r {
                let lhs = self.anchor_apply(&Section::new(self.structure(i, j)))?;
                let rhs = vector_bracket(&fields[i], &fields[j], names);
                let diff: Vec<Expr> = lhs.into_iter().zip(rhs).map(|(a, b)| a - b).collect();
                anchor_defects.push(([i, j], diff));
            }
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut report = AxiomReport {
            samples: n_samples,
            tol,
            jacobi_residual: 0.0,
            anchor_residual: 0.0,
            passed: true,
            witness: None,
        };
        for _ in 0..n_samples.max(1) {
            let x = self.chart.sample(&mut rng);
            let env = self.chart.env(&x);
            for (triple, s) in &jacobi {
                let v = norm(&s.eval(&env)?);
                if v > report.jacobi_residual {
                    report.jacobi_residual = v;
                    if v >= tol {
                        report.witness = Some(Witness {
                            point: x.clone(),
                            frame: triple.to_vec(),
                            kind: "jacobi".into(),
                            residual: v,
                        });
                    }
                }
            }
            for (pair, d) in &anchor_defects {
                let vals: Vec<f64> = d
                    .iter()
                    .map(|e| e.eval(&env))
                    .collect::<std::result::Result<_, _>>()?;
                let v = norm(&vals);
                if v > report.anchor_residual {
                    report.anchor_residual = v;
                    if v >= tol && report.witness.is_none() {
                        report.witness = Some(Witness {
                            point: x.clone(),
                            frame: pair.to_vec(),
                            kind: "anchor".into(),
                            residual: v,
                        });
                    }
                }
            }
        }
        report.passed = report.jacobi_residual < tol && report.anchor_residual < tol;
        Ok(report)
    }

    pub fn make_tangent(chart: Chart) -> Algebroid {
        let m = chart.dim();
        let frame = chart.names().iter().map(|n| format!("d{n}")).collect();
        let anchor = (0..m)
            .map(|i| (0..m).map(|a| if a == i { Expr::one() } else { Expr::zero() }).collect())
            .collect();
        Algebroid {
            chart,
            frame,
            anchor,
            structure: vec![vec![Expr::zero(); m]; pair_count(m)],
        }
    }

    /// Constant structure `consts[i][j][k]` with zero anchor. Only the
    /// upper triangle `i < j` is read.
    pub fn make_lie_algebra(chart: Chart, consts: &[Vec<Vec<f64>>]) -> Result<Algebroid> {
        let r = consts.len();
        let m = chart.dim();
        let mut structure = BTreeMap::new();
        for i in 0..r {
            if consts[i].len() != r {
                return Err(Error::Dimension("structure constants must be r x r x r".into()));
            }
            for j in (i + 1)..r {
                if consts[i][j].len() != r {
                    return Err(Error::Dimension("structure constants must be r x r x r".into()));
                }
                structure.insert((i, j), consts[i][j].iter().map(|c| Expr::Const(*c)).collect());
            }
        }
        Algebroid::new(
            chart,
            (1..=r).map(|i| format!("e{i}")).collect(),
            vec![vec![Expr::zero(); m]; r],
            structure,
        )
    }

    /// so(3) with `[e1,e2] = e3` and cyclic.
    pub fn so3(chart: Chart) -> Algebroid {
        let mut c = vec![vec![vec![0.0; 3]; 3]; 3];
        c[0][1][2] = 1.0;
        c[1][2][0] = 1.0;
        c[0][2][1] = -1.0;
        Algebroid::make_lie_algebra(chart, &c).expect("so(3) constants are well formed")
    }

    /// Cotangent algebroid of a bivector: frame `dx_i`, anchor `Π♯`,
    /// `[dx_i, dx_j] = d Π_ij`. Uses `(Π♯α)(f) = Π(α, df)`.
    pub fn make_cotangent_poisson(chart: Chart, pi: &Bivector) -> Result<Algebroid> {
        let m = chart.dim();
        if pi.dim() != m {
            return Err(Error::Dimension(format!(
                "bivector of dimension {} on a chart of dimension {m}",
                pi.dim()
            )));
        }
        let names = chart.names().to_vec();
        let anchor = (0..m).map(|i| (0..m).map(|a| pi.get(i, a)).collect()).collect();
        let mut structure = BTreeMap::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let pij = pi.get(i, j);
                structure.insert((i, j), names.iter().map(|n| pij.diff(n)).collect());
            }
        }
        let frame = names.iter().map(|n| format!("d{n}")).collect();
        Algebroid::new(chart, frame, anchor, structure)
    }

    /// `ℝ ⊕ T*M` with the bracket of a Poisson manifold seen as a Jacobi
    /// manifold: the `ℝ` part is central and `[dx_i, dx_j]` picks up `Π_ij`.
    pub fn make_jacobi_extension(chart: Chart, pi: &Bivector) -> Result<Algebroid> {
        let m = chart.dim();
        let cot = Algebroid::make_cotangent_poisson(chart, pi)?;
        let action = vec![vec![vec![Expr::zero()]]; m];
        let mut cocycle = BTreeMap::new();
        for i in 0..m {
            for j in (i + 1)..m {
                cocycle.insert((i, j), vec![pi.get(i, j)]);
            }
        }
        let mut alg = Algebroid::make_rep_extension(&cot, &action, &cocycle)?;
        alg.frame[0] = "1".into();
        Ok(alg)
    }

    /// `E ⋊_Λ A` for a representation of `A` on a trivial bundle `E` of rank
    /// `d`. `action[i]` is the `d×d` matrix of `∇_{e_i}` on the frame of `E`
    /// (column `s` holds `∇_{e_i} ε_s`), `cocycle[(i,j)]` holds `Λ(e_i,e_j)`.
    /// The frame of the result lists `ε_1..ε_d` first, then `e_1..e_r`.
    pub fn make_rep_extension(
        a: &Algebroid,
        action: &[Vec<Vec<Expr>>],
        cocycle: &BTreeMap<(usize, usize), Vec<Expr>>,
    ) -> Result<Algebroid> {
        let r = a.rank();
        let m = a.dim();
        if action.len() != r {
            return Err(Error::Dimension(format!("action needs {r} matrices")));
        }
        let d = action.first().map_or_else(
            || cocycle.values().next().map_or(0, |v| v.len()),
            |mat| mat.len(),
        );
        if action.iter().any(|mat| mat.len() != d || mat.iter().any(|row| row.len() != d)) {
            return Err(Error::Dimension(format!("action matrices must be {d}x{d}")));
        }
        let n = d + r;
        let mut anchor = vec![vec![Expr::zero(); m]; d];
        anchor.extend(a.anchor.iter().cloned());
        let mut structure = BTreeMap::new();
        for s in 0..d {
            for (i, mat) in action.iter().enumerate() {
                let mut v = vec![Expr::zero(); n];
                for u in 0..d {
                    v[u] = -mat[u][s].clone();
                }
                structure.insert((s, d + i), v);
            }
        }
        for i in 0..r {
            for j in (i + 1)..r {
                let mut v = vec![Expr::zero(); n];
                if let Some(l) = cocycle.get(&(i, j)) {
                    if l.len() != d {
                        return Err(Error::Dimension(format!("cocycle values must have length {d}")));
                    }
                    v[..d].clone_from_slice(l);
                }
                for (k, c) in a.structure(i, j).into_iter().enumerate() {
                    v[d + k] = c;
                }
                structure.insert((d + i, d + j), v);
            }
        }
        for &(i, j) in cocycle.keys() {
            if i >= j || j >= r {
                return Err(Error::Index(format!("cocycle pair ({i},{j})")));
            }
        }
        let mut frame: Vec<String> = (1..=d).map(|s| format!("eps{s}")).collect();
        frame.extend(a.frame.iter().cloned());
        Algebroid::new(a.chart.clone(), frame, anchor, structure)
    }

    /// Product algebroid over the product chart; frame of `self` first.
    pub fn product(&self, other: &Algebroid) -> Result<Algebroid> {
        let chart = self.chart.product(&other.chart)?;
        let (r1, r2) = (self.rank(), other.rank());
        let (m1, m2) = (self.dim(), other.dim());
        let mut anchor = Vec::with_capacity(r1 + r2);
        for row in &self.anchor {
            let mut v = row.clone();
            v.extend(std::iter::repeat(Expr::zero()).take(m2));
            anchor.push(v);
        }
        for row in &other.anchor {
            let mut v = vec![Expr::zero(); m1];
            v.extend(row.iter().cloned());
            anchor.push(v);
        }
        let mut structure = BTreeMap::new();
        for i in 0..r1 {
            for j in (i + 1)..r1 {
                let mut v = self.structure(i, j);
                v.extend(std::iter::repeat(Expr::zero()).take(r2));
                structure.insert((i, j), v);
            }
        }
        for i in 0..r2 {
            for j in (i + 1)..r2 {
                let mut v = vec![Expr::zero(); r1];
                v.extend(other.structure(i, j));
                structure.insert((r1 + i, r1 + j), v);
            }
        }
        let mut frame = self.frame.clone();
        frame.extend(other.frame.iter().cloned());
        Algebroid::new(chart, frame, anchor, structure)
    }

    /// Replace one structure coefficient `c_{ij}^k` (for `i < j`).
    pub fn with_structure_entry(&self, i: usize, j: usize, k: usize, e: Expr) -> Result<Algebroid> {
        let r = self.rank();
        if !(i < j && j < r && k < r) {
            return Err(Error::Index(format!("structure entry ({i},{j},{k})")));
        }
        let mut out = self.clone();
        out.structure[pair_index(i, j, r)][k] = e;
        out.check_variables()?;
        Ok(out)
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Serialize)]
pub struct Witness {
    pub kind: String,
    pub frame: Vec<usize>,
    pub point: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct AxiomReport {
    pub samples: usize,
    pub tol: f64,
    pub jacobi_residual: f64,
    pub anchor_residual: f64,
    pub passed: bool,
    pub witness: Option<Witness>,
}
