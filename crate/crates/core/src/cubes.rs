//! Grid-sampled algebroid cubes `TIⁿ → A`.
//!
//! A cube stores its base map `γ` and one component array per axis on the
//! uniform grid `t = k/N`, boundary included. Node arrays are row-major with
//! the last axis running fastest.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebroid::{norm, Algebroid, Section, DEFAULT_SEED};
use crate::cutoff::{tau, tau_prime};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::interp;
use crate::numeric::{MatrixFn, NumAlgebroid};

#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    n: usize,
    grid: usize,
    r: usize,
    m: usize,
    gamma: Vec<f64>,
    a: Vec<Vec<f64>>,
}

/// Largest morphism defects over interior nodes, with where they occur.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Residual {
    pub structure: f64,
    pub base: f64,
    pub structure_node: usize,
    pub base_node: usize,
}

impl Residual {
    pub fn max(&self) -> f64 {
        self.structure.max(self.base)
    }
}

#[derive(Serialize, Deserialize)]
struct CubeDoc {
    n: usize,
    #[serde(rename = "N")]
    grid: usize,
    r: usize,
    m: usize,
    basepoint: Vec<f64>,
    gamma: Vec<Vec<f64>>,
    a: Vec<Vec<Vec<f64>>>,
}

impl Cube {
    pub fn from_parts(
        n: usize,
        grid: usize,
        r: usize,
        m: usize,
        gamma: Vec<f64>,
        a: Vec<Vec<f64>>,
    ) -> Result<Cube> {
        if grid == 0 && n > 0 {
            return Err(Error::Dimension("grid resolution must be positive".into()));
        }
        let nodes = (grid + 1).pow(n as u32);
        if gamma.len() != nodes * m {
            return Err(Error::Dimension(format!(
                "base path has {} values, expected {}",
                gamma.len(),
                nodes * m
            )));
        }
        if a.len() != n || a.iter().any(|c| c.len() != nodes * r) {
            return Err(Error::Dimension(format!(
                "expected {n} component arrays of {} values",
                nodes * r
            )));
        }
        Ok(Cube {
            n,
            grid,
            r,
            m,
            gamma,
            a,
        })
    }

    /// Build a cube from a function of the grid point returning `γ(t)` and
    /// the `n` components at `t`.
    pub fn from_fn<F>(n: usize, grid: usize, r: usize, m: usize, mut f: F) -> Result<Cube>
    where
        F: FnMut(&[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)>,
    {
        let nodes = (grid + 1).pow(n as u32);
        let mut gamma = Vec::with_capacity(nodes * m);
        let mut a = vec![Vec::with_capacity(nodes * r); n];
        let mut cube = Cube {
            n,
            grid,
            r,
            m,
            gamma: vec![],
            a: vec![],
        };
        for idx in 0..nodes {
            let t = cube.t_of(idx);
            let (g, comps) = f(&t)?;
            if g.len() != m || comps.len() != n || comps.iter().any(|c| c.len() != r) {
                return Err(Error::Dimension("cube generator returned wrong sizes".into()));
            }
            gamma.extend(g);
            for (k, c) in comps.into_iter().enumerate() {
                a[k].extend(c);
            }
        }
        cube.gamma = gamma;
        cube.a = a;
        Ok(cube)
    }

    pub fn zero(n: usize, grid: usize, r: usize, x0: &[f64]) -> Cube {
        let nodes = (grid + 1).pow(n as u32);
        Cube {
            n,
            grid,
            r,
            m: x0.len(),
            gamma: x0.iter().copied().cycle().take(nodes * x0.len()).collect(),
            a: vec![vec![0.0; nodes * r]; n],
        }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    /// Number of grid intervals per axis.
    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn npts(&self) -> usize {
        self.grid + 1
    }

    pub fn node_count(&self) -> usize {
        self.npts().pow(self.n as u32)
    }

    pub fn basepoint(&self) -> &[f64] {
        &self.gamma[..self.m]
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.a
    }

    pub fn gamma_at(&self, idx: usize) -> &[f64] {
        &self.gamma[idx * self.m..(idx + 1) * self.m]
    }

    /// Component `k` (0-based axis) at node `idx`.
    pub fn comp_at(&self, k: usize, idx: usize) -> &[f64] {
        &self.a[k][idx * self.r..(idx + 1) * self.r]
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.npts().pow((self.n - 1 - axis) as u32)
    }

    pub fn multi(&self, mut idx: usize) -> Vec<usize> {
        let p = self.npts();
        let mut out = vec![0; self.n];
        for k in (0..self.n).rev() {
            out[k] = idx % p;
            idx /= p;
        }
        out
    }

    /// Grid coordinate of node `idx` along `axis` (0-based).
    pub fn coord(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.npts()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, k| acc * self.npts() + k)
    }

    pub fn t_of(&self, idx: usize) -> Vec<f64> {
        let h = 1.0 / self.grid.max(1) as f64;
        self.multi(idx).into_iter().map(|k| k as f64 * h).collect()
    }

    fn check_shape(&self, alg: &Algebroid) -> Result<()> {
        if alg.rank() != self.r || alg.dim() != self.m {
            return Err(Error::Dimension(format!(
                "cube of rank {} over dimension {} on an algebroid of rank {} over dimension {}",
                self.r,
                self.m,
                alg.rank(),
                alg.dim()
            )));
        }
        Ok(())
    }

    /// Error if any node of the base map lies outside the chart box.
    pub fn check_chart(&self, alg: &Algebroid) -> Result<()> {
        self.check_shape(alg)?;
        for idx in 0..self.node_count() {
            let g = self.gamma_at(idx);
            if !alg.chart().contains(g) {
                return Err(Error::ChartEscape {
                    node: self.multi(idx),
                    point: g.to_vec(),
                });
            }
        }
        Ok(())
    }

    fn deriv(&self, data: &[f64], width: usize, axis: usize, idx: usize, c: usize) -> f64 {
        let s = self.stride(axis);
        let k = self.coord(idx, axis);
        let base = idx - k * s;
        interp::derivative(
            |q| data[(base + q * s) * width + c],
            k,
            self.npts(),
            1.0 / self.grid as f64,
        )
    }

    /// Morphism defects over interior nodes:
    /// `|∂_j a_i − ∂_i a_j − [a_i, a_j](γ)|` for `i < j` and `|∂_i γ − ♯a_i(γ)|`.
    pub fn morphism_residual(&self, alg: &Algebroid) -> Result<Residual> {
        self.check_chart(alg)?;
        if self.grid < 4 {
            return Err(Error::Precondition("morphism residual needs N >= 4".into()));
        }
        let num = NumAlgebroid::new(alg)?;
        let mut res = Residual {
            structure: 0.0,
            base: 0.0,
            structure_node: 0,
            base_node: 0,
        };
        let (r, m) = (self.r, self.m);
        for idx in 0..self.node_count() {
            if (0..self.n).any(|ax| {
                let k = self.coord(idx, ax);
                k == 0 || k == self.grid
            }) {
                continue;
            }
            let pd = num.at(self.gamma_at(idx))?;
            for i in 0..self.n {
                let ai = self.comp_at(i, idx);
                let sharp = pd.sharp(ai);
                let d: Vec<f64> = (0..m)
                    .map(|c| self.deriv(&self.gamma, m, i, idx, c) - sharp[c])
                    .collect();
                let v = norm(&d);
                if v > res.base {
                    res.base = v;
                    res.base_node = idx;
                }
                for j in (i + 1)..self.n {
                    let aj = self.comp_at(j, idx);
                    let br = pd.bracket(ai, aj);
                    let d: Vec<f64> = (0..r)
                        .map(|c| {
                            self.deriv(&self.a[i], r, j, idx, c) - self.deriv(&self.a[j], r, i, idx, c)
                                - br[c]
                        })
                        .collect();
                    let v = norm(&d);
                    if v > res.structure {
                        res.structure = v;
                        res.structure_node = idx;
                    }
                }
            }
        }
        Ok(res)
    }

    /// Largest `|a_k|` over nodes where some `t_j`, `j ≠ k`, is 0 or 1.
    pub fn sphere_boundary_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for idx in 0..self.node_count() {
            let mi = self.multi(idx);
            for k in 0..self.n {
                let on_face = mi
                    .iter()
                    .enumerate()
                    .any(|(j, &q)| j != k && (q == 0 || q == self.grid));
                if on_face {
                    worst = worst.max(norm(self.comp_at(k, idx)));
                }
            }
        }
        worst
    }

    /// Largest `|a_n|` over nodes where some `t_k`, `k < n`, is 0 or 1.
    pub fn homotopy_boundary_defect(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        let last = self.n - 1;
        let mut worst = 0.0f64;
        for idx in 0..self.node_count() {
            let mi = self.multi(idx);
            if mi[..last].iter().any(|&q| q == 0 || q == self.grid) {
                worst = worst.max(norm(self.comp_at(last, idx)));
            }
        }
        worst
    }

    pub fn is_sphere(&self, alg: &Algebroid, tol: f64) -> bool {
        match self.morphism_residual(alg) {
            Ok(res) => res.max() < tol && self.sphere_boundary_defect() < tol,
            Err(_) => false,
        }
    }

    pub fn is_homotopy(&self, alg: &Algebroid, tol: f64) -> bool {
        match self.morphism_residual(alg) {
            Ok(res) => res.max() < tol && self.homotopy_boundary_defect() < tol,
            Err(_) => false,
        }
    }

    /// Face `d_{p,ε}` (axis `p` is 1-based): restrict to `t_p = ε`, drop `a_p`.
    pub fn face(&self, p: usize, eps: u8) -> Result<Cube> {
        if p == 0 || p > self.n || eps > 1 {
            return Err(Error::Index(format!("face ({p},{eps}) of a {}-cube", self.n)));
        }
        let axis = p - 1;
        let fixed = if eps == 0 { 0 } else { self.grid };
        let mut gamma = Vec::new();
        let mut a: Vec<Vec<f64>> = vec![Vec::new(); self.n - 1];
        for idx in 0..self.node_count() {
            if self.multi(idx)[axis] != fixed {
                continue;
            }
            gamma.extend_from_slice(self.gamma_at(idx));
            let mut q = 0;
            for k in 0..self.n {
                if k != axis {
                    a[q].extend_from_slice(self.comp_at(k, idx));
                    q += 1;
                }
            }
        }
        Cube::from_parts(self.n - 1, self.grid, self.r, self.m, gamma, a)
    }

    /// Degeneracy `s_p` (1-based, `p ≤ n+1`): insert a new axis `p` with a
    /// zero component.
    pub fn degeneracy(&self, p: usize) -> Result<Cube> {
        if p == 0 || p > self.n + 1 {
            return Err(Error::Index(format!("degeneracy {p} of a {}-cube", self.n)));
        }
        let axis = p - 1;
        let n1 = self.n + 1;
        let nodes = self.npts().pow(n1 as u32);
        let zero = vec![0.0; self.r];
        let mut gamma = Vec::with_capacity(nodes * self.m);
        let mut a = vec![Vec::with_capacity(nodes * self.r); n1];
        let npts = self.npts();
        for idx in 0..nodes {
            let mut mi = vec![0; n1];
            let mut rest = idx;
            for k in (0..n1).rev() {
                mi[k] = rest % npts;
                rest /= npts;
            }
            mi.remove(axis);
            let src = self.index(&mi);
            gamma.extend_from_slice(self.gamma_at(src));
            for (k, comp) in a.iter_mut().enumerate() {
                use std::cmp::Ordering::*;
                match k.cmp(&axis) {
                    Less => comp.extend_from_slice(self.comp_at(k, src)),
                    Equal => comp.extend_from_slice(&zero),
                    Greater => comp.extend_from_slice(self.comp_at(k - 1, src)),
                }
            }
        }
        Cube::from_parts(n1, self.grid, self.r, self.m, gamma, a)
    }

    /// Precompose with `t_axis ↦ 1 − t_axis`.
    pub fn reverse_axis(&self, axis: usize) -> Result<Cube> {
        if axis >= self.n {
            return Err(Error::Index(format!("axis {axis} of a {}-cube", self.n)));
        }
        let mut out = self.clone();
        for idx in 0..self.node_count() {
            let mut mi = self.multi(idx);
            mi[axis] = self.grid - mi[axis];
            let src = self.index(&mi);
            out.gamma[idx * self.m..(idx + 1) * self.m].copy_from_slice(self.gamma_at(src));
            for k in 0..self.n {
                let sign = if k == axis { -1.0 } else { 1.0 };
                for c in 0..self.r {
                    out.a[k][idx * self.r + c] = sign * self.a[k][src * self.r + c];
                }
            }
        }
        Ok(out)
    }

    /// Every other node along every axis.
    pub fn subsample(&self) -> Result<Cube> {
        if self.grid % 2 != 0 {
            return Err(Error::Precondition("subsampling needs an even N".into()));
        }
        let coarse = Cube::zero(self.n, self.grid / 2, self.r, self.basepoint());
        let mut out = coarse.clone();
        for idx in 0..coarse.node_count() {
            let mi: Vec<usize> = coarse.multi(idx).into_iter().map(|k| 2 * k).collect();
            let src = self.index(&mi);
            out.gamma[idx * self.m..(idx + 1) * self.m].copy_from_slice(self.gamma_at(src));
            for k in 0..self.n {
                out.a[k][idx * self.r..(idx + 1) * self.r].copy_from_slice(self.comp_at(k, src));
            }
        }
        Ok(out)
    }

    /// Map every component through `f(γ, u)`, keeping the base map.
    pub fn map_components<F>(&self, r_out: usize, mut f: F) -> Result<Cube>
    where
        F: FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
    {
        let mut a = vec![Vec::with_capacity(self.node_count() * r_out); self.n];
        for idx in 0..self.node_count() {
            let g = self.gamma_at(idx);
            for (k, comp) in a.iter_mut().enumerate() {
                let v = f(g, self.comp_at(k, idx))?;
                if v.len() != r_out {
                    return Err(Error::Dimension("component map returned wrong rank".into()));
                }
                comp.extend(v);
            }
        }
        Cube::from_parts(self.n, self.grid, r_out, self.m, self.gamma.clone(), a)
    }

    /// Multiply components by a matrix of expressions in the base coordinates
    /// (`r_out × r`), e.g. a splitting.
    pub fn push_forward(&self, matrix: &[Vec<Expr>], names: &[&str]) -> Result<Cube> {
        let r_out = matrix.len();
        let mf = MatrixFn::new(r_out, self.r, matrix, names)?;
        self.map_components(r_out, |g, u| {
            let mv = mf.eval(g)?;
            Ok(crate::numeric::mat_vec(&mv, r_out, self.r, u))
        })
    }

    /// Resample along `axis`: target node `k` takes its values from `src(k)`
    /// = `(cube, s, factor)`, interpolated at `t_axis = s`, with the axis
    /// component scaled by `factor`.
    fn resample<'c>(&self, axis: usize, src: impl Fn(usize) -> (&'c Cube, f64, f64)) -> Cube {
        let mut out = self.clone();
        let npts = self.npts();
        let stride = self.stride(axis);
        let (m, r) = (self.m, self.r);
        let mut gval = vec![0.0; m];
        let mut aval = vec![0.0; r];
        for base in 0..self.node_count() {
            if self.multi(base)[axis] != 0 {
                continue;
            }
            let gather = |data: &[f64], width: usize| -> Vec<f64> {
                let mut line = Vec::with_capacity(npts * width);
                for q in 0..npts {
                    let i = base + q * stride;
                    line.extend_from_slice(&data[i * width..(i + 1) * width]);
                }
                line
            };
            let mut cache: Vec<(*const Cube, Vec<f64>, Vec<Vec<f64>>)> = Vec::new();
            for k in 0..npts {
                let (c, s, factor) = src(k);
                let key = c as *const Cube;
                let pos = match cache.iter().position(|e| e.0 == key) {
                    Some(p) => p,
                    None => {
                        let g = gather(&c.gamma, m);
                        let comps = (0..self.n).map(|j| gather(&c.a[j], r)).collect();
                        cache.push((key, g, comps));
                        cache.len() - 1
                    }
                };
                let (_, gl, al) = &cache[pos];
                let sg = s * self.grid as f64;
                let dst = base + k * stride;
                interp::line(gl, m, sg, &mut gval);
                out.gamma[dst * m..(dst + 1) * m].copy_from_slice(&gval);
                for j in 0..self.n {
                    interp::line(&al[j], r, sg, &mut aval);
                    let f = if j == axis { factor } else { 1.0 };
                    for c in 0..r {
                        out.a[j][dst * r + c] = f * aval[c];
                    }
                }
            }
        }
        out
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis == 0 || axis > self.n {
            return Err(Error::Index(format!("axis {axis} of a {}-cube", self.n)));
        }
        Ok(())
    }

    /// Precompose with `t_axis ↦ τ(t_axis)` (axis 1-based).
    pub fn reparam_cutoff(&self, axis: usize) -> Result<Cube> {
        self.check_axis(axis)?;
        let h = 1.0 / self.grid as f64;
        Ok(self.resample(axis - 1, |k| {
            let t = k as f64 * h;
            (self, tau(t), tau_prime(t))
        }))
    }

    /// `c1 ⊙ c0` along `axis` (1-based): `c0` on the first half, `c1` on the
    /// second, each reparametrised by `τ`. The faces `t_axis = 1` of `c0` and
    /// `t_axis = 0` of `c1` must agree within `tol`.
    pub fn concat(c1: &Cube, c0: &Cube, axis: usize, tol: f64) -> Result<Cube> {
        c0.check_axis(axis)?;
        if (c0.n, c0.grid, c0.r, c0.m) != (c1.n, c1.grid, c1.r, c1.m) {
            return Err(Error::Dimension("concatenated cubes differ in shape".into()));
        }
        if c0.grid % 2 != 0 {
            return Err(Error::Precondition("concatenation needs an even N".into()));
        }
        let f0 = c0.face(axis, 1)?;
        let f1 = c1.face(axis, 0)?;
        let gap = f0
            .gamma
            .iter()
            .zip(&f1.gamma)
            .chain(f0.a.iter().flatten().zip(f1.a.iter().flatten()))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if gap > tol {
            return Err(Error::Composability { axis, gap });
        }
        let h = 1.0 / c0.grid as f64;
        let half = c0.grid / 2;
        Ok(c0.resample(axis - 1, |k| {
            if k <= half {
                let u = 2.0 * k as f64 * h;
                (c0, tau(u), 2.0 * tau_prime(u))
            } else {
                let u = 2.0 * k as f64 * h - 1.0;
                (c1, tau(u), 2.0 * tau_prime(u))
            }
        }))
    }

    pub fn to_json(&self) -> String {
        let doc = CubeDoc {
            n: self.n,
            grid: self.grid,
            r: self.r,
            m: self.m,
            basepoint: self.basepoint().to_vec(),
            gamma: self.gamma.chunks(self.m.max(1)).map(|c| c.to_vec()).collect(),
            a: self
                .a
                .iter()
                .map(|comp| comp.chunks(self.r.max(1)).map(|c| c.to_vec()).collect())
                .collect(),
        };
        serde_json::to_string(&doc).expect("cube documents serialize")
    }

    pub fn from_json(text: &str) -> Result<Cube> {
        let doc: CubeDoc = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let flat = |rows: Vec<Vec<f64>>, width: usize| -> Result<Vec<f64>> {
            if rows.iter().any(|r| r.len() != width) {
                return Err(Error::Format(format!("node records must have length {width}")));
            }
            Ok(rows.into_iter().flatten().collect())
        };
        let gamma = if doc.m == 0 {
            vec![]
        } else {
            flat(doc.gamma, doc.m)?
        };
        let a = doc
            .a
            .into_iter()
            .map(|c| if doc.r == 0 { Ok(vec![]) } else { flat(c, doc.r) })
            .collect::<Result<Vec<_>>>()?;
        let cube = Cube::from_parts(doc.n, doc.grid, doc.r, doc.m, gamma, a)
            .map_err(|e| Error::Format(e.to_string()))?;
        if doc.basepoint.len() != doc.m
            || doc
                .basepoint
                .iter()
                .zip(cube.basepoint())
                .any(|(a, b)| (a - b).abs() > 1e-12 * (1.0 + a.abs()))
        {
            return Err(Error::Format("basepoint differs from the base map at the origin".into()));
        }
        Ok(cube)
    }
}

/// Time-dependent sections `α_1..α_n` in the chart coordinates and `t1..tn`.
#[derive(Debug, Clone)]
pub struct TimeSections {
    alg: Algebroid,
    sections: Vec<Section>,
}

pub fn time_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("t{i}")).collect()
}

impl TimeSections {
    pub fn new(alg: &Algebroid, sections: Vec<Section>) -> Result<Self> {
        let n = sections.len();
        let tn = time_names(n);
        for s in &sections {
            if s.rank() != alg.rank() {
                return Err(Error::Dimension(format!(
                    "section of rank {} on an algebroid of rank {}",
                    s.rank(),
                    alg.rank()
                )));
            }
            for e in &s.coeffs {
                for v in e.variables() {
                    if !alg.chart().names().contains(&v) && !tn.contains(&v) {
                        return Err(Error::Expr(crate::expr::ExprError::Unbound(v)));
                    }
                }
            }
        }
        Ok(TimeSections {
            alg: alg.clone(),
            sections,
        })
    }

    pub fn order(&self) -> usize {
        self.sections.len()
    }

    pub fn algebroid(&self) -> &Algebroid {
        &self.alg
    }

    fn names(&self) -> Vec<String> {
        let mut names = self.alg.chart().names().to_vec();
        names.extend(time_names(self.order()));
        names
    }

    /// Max over samples of `|[α_i,α_j] − ∂α_i/∂t_j + ∂α_j/∂t_i|`.
    pub fn commutation_residual(&self, samples: usize) -> Result<f64> {
        self.commutation_residual_seeded(samples, DEFAULT_SEED)
    }

    pub fn commutation_residual_seeded(&self, samples: usize, seed: u64) -> Result<f64> {
        let n = self.order();
        let tn = time_names(n);
        let mut defects = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let br = self.alg.bracket(&self.sections[i], &self.sections[j])?;
                let dt = self.sections[i].diff(&tn[j]).sub(&self.sections[j].diff(&tn[i]));
                defects.push(br.sub(&dt));
            }
        }
        if defects.is_empty() {
            return Ok(0.0);
        }
        let names = self.names();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst = 0.0f64;
        for _ in 0..samples.max(1) {
            let mut x = self.alg.chart().sample(&mut rng);
            x.extend((0..n).map(|_| rng.gen_range(0.0..1.0)));
            let env = names.iter().cloned().zip(x).collect();
            for d in &defects {
                worst = worst.max(norm(&d.eval(&env)?));
            }
        }
        Ok(worst)
    }

    /// Morphism `Σ a_i dt_i` with `a_i(t) = α_i^t(γ(t))`, where `γ` composes
    /// the flows of `♯α_i` axis by axis in `order` (0-based axis indices).
    pub fn cube_from_sections(
        &self,
        x0: &[f64],
        grid: usize,
        tol: f64,
        order: Option<&[usize]>,
    ) -> Result<Cube> {
        let n = self.order();
        let residual = self.commutation_residual(64)?;
        if residual > tol {
            return Err(Error::NotCommuting { residual, tol });
        }
        if x0.len() != self.alg.dim() {
            return Err(Error::Dimension("basepoint has the wrong dimension".into()));
        }
        let default: Vec<usize> = (0..n).collect();
        let order = order.unwrap_or(&default);
        let mut seen = order.to_vec();
        seen.sort_unstable();
        if seen != default {
            return Err(Error::Index("axis order must be a permutation".into()));
        }
        let names = self.names();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let m = self.alg.dim();
        let r = self.alg.rank();
        let fields: Vec<MatrixFn> = self
            .sections
            .iter()
            .map(|s| {
                let v = self.alg.anchor_apply(s)?;
                MatrixFn::new(m, 1, &v.into_iter().map(|e| vec![e]).collect::<Vec<_>>(), &refs)
            })
            .collect::<Result<_>>()?;
        let comps: Vec<MatrixFn> = self
            .sections
            .iter()
            .map(|s| {
                MatrixFn::new(
                    r,
                    1,
                    &s.coeffs.iter().map(|e| vec![e.clone()]).collect::<Vec<_>>(),
                    &refs,
                )
            })
            .collect::<Result<_>>()?;

        let mut cube = Cube::zero(n, grid, r, x0);
        let h = 1.0 / grid as f64;
        let chart = self.alg.chart();
        let mut vars = vec![0.0; m + n];
        for (step, &axis) in order.iter().enumerate() {
            let stride = cube.stride(axis);
            for base in 0..cube.node_count() {
                let mi = cube.multi(base);
                if order[step..].iter().any(|&ax| mi[ax] != 0) {
                    continue;
                }
                let mut t: Vec<f64> = mi.iter().map(|&k| k as f64 * h).collect();
                let mut x = cube.gamma_at(base).to_vec();
                for k in 0..grid {
                    t[axis] = k as f64 * h;
                    let mut f = |tt: f64, y: &[f64]| -> Result<Vec<f64>> {
                        vars[..m].copy_from_slice(y);
                        vars[m..].copy_from_slice(&t);
                        vars[m + axis] = tt;
                        fields[axis].eval(&vars)
                    };
                    x = rk4_step(&mut f, k as f64 * h, &x, h)?;
                    let dst = base + (k + 1) * stride;
                    if !chart.contains(&x) {
                        return Err(Error::ChartEscape {
                            node: cube.multi(dst),
                            point: x,
                        });
                    }
                    cube.gamma[dst * m..(dst + 1) * m].copy_from_slice(&x);
                }
            }
        }
        for idx in 0..cube.node_count() {
            vars[..m].copy_from_slice(cube.gamma_at(idx));
            let t = cube.t_of(idx);
            vars[m..].copy_from_slice(&t);
            for (i, c) in comps.iter().enumerate() {
                let v = c.eval(&vars)?;
                cube.a[i][idx * r..(idx + 1) * r].copy_from_slice(&v);
            }
        }
        Ok(cube)
    }
}

/// Node data of a cube as a function of `t ∈ Iⁿ`: base point and components.
pub type CubeData = (Vec<f64>, Vec<Vec<f64>>);

/// Pointwise form of [`Cube::concat`] for cubes given by closed-form
/// generators: `f0` on the first half of `axis` (1-based), `f1` on the
/// second, each through `τ`. Sampling the result avoids interpolating.
pub fn concat_fn<F1, F0>(f1: F1, f0: F0, axis: usize) -> impl Fn(&[f64]) -> Result<CubeData>
where
    F1: Fn(&[f64]) -> Result<CubeData>,
    F0: Fn(&[f64]) -> Result<CubeData>,
{
    let ax = axis - 1;
    move |t: &[f64]| {
        let mut s = t.to_vec();
        let (u, first) = if t[ax] <= 0.5 {
            (2.0 * t[ax], true)
        } else {
            (2.0 * t[ax] - 1.0, false)
        };
        s[ax] = tau(u);
        let (g, mut comps) = if first { f0(&s)? } else { f1(&s)? };
        let factor = 2.0 * tau_prime(u);
        comps[ax].iter_mut().for_each(|v| *v *= factor);
        Ok((g, comps))
    }
}

/// One classical fourth-order Runge–Kutta step for `y' = f(t, y)`.
pub fn rk4_step<F>(f: &mut F, t: f64, y: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64]) -> Result<Vec<f64>>,
{
    let add = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    let k1 = f(t, y)?;
    let k2 = f(t + 0.5 * h, &add(y, &k1, 0.5 * h))?;
    let k3 = f(t + 0.5 * h, &add(y, &k2, 0.5 * h))?;
    let k4 = f(t + h, &add(y, &k3, h))?;
    Ok(y.iter()
        .enumerate()
        .map(|(i, v)| v + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::Chart;
    use std::f64::consts::PI;

    fn plane() -> Algebroid {
        Algebroid::make_tangent(Chart::symmetric(&["x", "y"], 3.0).unwrap())
    }

    /// Tangent lift of `(sin πt₁ sin πt₂, t₁t₂(1−t₁)(1−t₂))`.
    fn tangent_lift(grid: usize) -> Cube {
        Cube::from_fn(2, grid, 2, 2, |t| {
            let (a, b) = (t[0], t[1]);
            let (s1, s2) = ((PI * a).sin(), (PI * b).sin());
            let (c1, c2) = ((PI * a).cos(), (PI * b).cos());
            let q = a * b * (1.0 - a) * (1.0 - b);
            let g = vec![s1 * s2, q];
            let d1 = vec![PI * c1 * s2, b * (1.0 - b) * (1.0 - 2.0 * a)];
            let d2 = vec![PI * s1 * c2, a * (1.0 - a) * (1.0 - 2.0 * b)];
            Ok((g, vec![d1, d2]))
        })
        .unwrap()
    }

    #[test]
    fn zero_cube_is_a_sphere() {
        let z = Cube::zero(2, 8, 2, &[0.5, -0.5]);
        let res = z.morphism_residual(&plane()).unwrap();
        assert_eq!(res.max(), 0.0);
        assert!(z.is_sphere(&plane(), 1e-12));
    }

    #[test]
    fn tangent_lift_residual_is_second_order() {
        let r1 = tangent_lift(32).morphism_residual(&plane()).unwrap().max();
        let r2 = tangent_lift(64).morphism_residual(&plane()).unwrap().max();
        let ratio = r1 / r2;
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        assert!(tangent_lift(64).is_sphere(&plane(), 1e-2));
    }

    #[test]
    fn constant_noncommuting_components() {
        let g = Algebroid::so3(Chart::point());
        for grid in [8, 16] {
            let c = Cube::from_fn(2, grid, 3, 0, |_| {
                Ok((vec![], vec![vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]))
            })
            .unwrap();
            let res = c.morphism_residual(&g).unwrap();
            assert!((res.structure - 1.0).abs() < 1e-14);
            assert!(!c.is_sphere(&g, 1e-3));
        }
    }

    #[test]
    fn face_of_degeneracy_is_identity() {
        let c = tangent_lift(6);
        for p in 1..=3 {
            let d = c.degeneracy(p).unwrap();
            assert_eq!(d.order(), 3);
            assert_eq!(d.face(p, 0).unwrap(), c);
            assert_eq!(d.face(p, 1).unwrap(), c);
        }
        assert!(c.face(3, 0).is_err());
        assert!(c.degeneracy(4).is_err());
    }

    #[test]
    fn degeneracy_is_a_homotopy() {
        let c = tangent_lift(16);
        let d = c.degeneracy(3).unwrap();
        assert!(d.is_homotopy(&plane(), 1e-1));
        assert_eq!(d.homotopy_boundary_defect(), 0.0);
    }

    #[test]
    fn cutoff_flattens_ends() {
        let c = tangent_lift(128).reparam_cutoff(2).unwrap();
        for idx in 0..c.node_count() {
            let k = c.multi(idx)[1];
            if k <= 2 || k >= 126 {
                assert!(norm(c.comp_at(1, idx)) < 1e-8);
            }
        }
        let r1 = c.morphism_residual(&plane()).unwrap().max();
        let fine = tangent_lift(256).reparam_cutoff(2).unwrap();
        let r2 = fine.morphism_residual(&plane()).unwrap().max();
        assert!(r2 < r1 / 3.0, "{r1} {r2}");
    }

    #[test]
    fn concat_checks_composability() {
        let a = tangent_lift(8);
        let shifted = a.map_components(2, |_, u| Ok(vec![u[0] + 1.0, u[1]])).unwrap();
        assert!(matches!(
            Cube::concat(&shifted, &a, 2, 1e-9),
            Err(Error::Composability { .. })
        ));
        let z = Cube::zero(2, 8, 2, &[0.0, 0.0]);
        assert_eq!(Cube::concat(&z, &z, 1, 1e-12).unwrap(), z);
    }

    #[test]
    fn json_round_trip() {
        let c = tangent_lift(4);
        let back = Cube::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert!(Cube::from_json("{\"n\":1}").is_err());
    }

    #[test]
    fn reversal_is_an_involution() {
        let c = tangent_lift(6);
        assert_eq!(c.reverse_axis(0).unwrap().reverse_axis(0).unwrap(), c);
    }

    #[test]
    fn linear_flow() {
        let ts = TimeSections::new(
            &plane(),
            vec![Section::constant(&[1.0, 0.0]), Section::constant(&[0.0, 1.0])],
        )
        .unwrap();
        let c = ts.cube_from_sections(&[0.25, -0.5], 16, 1e-12, None).unwrap();
        for idx in 0..c.node_count() {
            let t = c.t_of(idx);
            let g = c.gamma_at(idx);
            assert!((g[0] - 0.25 - t[0]).abs() < 1e-12 && (g[1] + 0.5 - t[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn commutation_residual_of_time_shear() {
        let g = Algebroid::so3(Chart::point());
        let ts = TimeSections::new(
            &g,
            vec![
                Section::parse(&["0", "2*t2", "0"]).unwrap(),
                Section::zero(3),
            ],
        )
        .unwrap();
        assert!((ts.commutation_residual(16).unwrap() - 2.0).abs() < 1e-14);
        assert!(matches!(
            ts.cube_from_sections(&[], 8, 1e-6, None),
            Err(Error::NotCommuting { .. })
        ));
    }

    #[test]
    fn flow_escape_is_an_error() {
        let ts = TimeSections::new(&plane(), vec![Section::constant(&[10.0, 0.0])]).unwrap();
        assert!(matches!(
            ts.cube_from_sections(&[0.0, 0.0], 16, 1e-9, None),
            Err(Error::ChartEscape { .. })
        ));
    }
}
