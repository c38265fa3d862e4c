//! Compiled, numeric views of symbolic data.

use crate::algebroid::{pair_index, Algebroid};
use crate::error::Result;
use crate::expr::{Compiled, Expr};

/// A matrix of compiled expressions, evaluated densely, skipping zeros.
#[derive(Debug, Clone)]
pub struct MatrixFn {
    pub rows: usize,
    pub cols: usize,
    entries: Vec<(usize, Compiled)>,
}

impl MatrixFn {
    pub fn new(rows: usize, cols: usize, m: &[Vec<Expr>], names: &[&str]) -> Result<Self> {
        let mut entries = Vec::new();
        for (i, row) in m.iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                if !e.is_zero() {
                    entries.push((i * cols + j, e.compile(names)?));
                }
            }
        }
        Ok(MatrixFn { rows, cols, entries })
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (k, c) in &self.entries {
            out[*k] = c.eval(x)?;
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows * self.cols];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }
}

pub fn mat_vec(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|i| (0..cols).map(|j| m[i * cols + j] * v[j]).sum())
        .collect()
}

pub fn mat_t_vec(m: &[f64], rows: usize, cols: usize, v: &[f64]) -> Vec<f64> {
    (0..cols)
        .map(|j| (0..rows).map(|i| m[i * cols + j] * v[i]).sum())
        .collect()
}

/// Anchor and structure functions compiled against the chart coordinates.
#[derive(Debug, Clone)]
pub struct NumAlgebroid {
    r: usize,
    m: usize,
    anchor: MatrixFn,
    structure: Vec<((usize, usize), usize, Compiled)>,
}

/// Anchor (`r×m`) and dense antisymmetric structure (`r×r×r`) at a point.
pub struct PointData {
    pub anchor: Vec<f64>,
    pub c: Vec<f64>,
    r: usize,
    m: usize,
}

impl PointData {
    /// `♯u`
    pub fn sharp(&self, u: &[f64]) -> Vec<f64> {
        mat_t_vec(&self.anchor, self.r, self.m, u)
    }

    /// Pointwise bracket `Σ u^i v^j c_ij`.
    pub fn bracket(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let r = self.r;
        let mut out = vec![0.0; r];
        for i in 0..r {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..r {
                let w = u[i] * v[j];
                if w == 0.0 || i == j {
                    continue;
                }
                let base = (i * r + j) * r;
                for k in 0..r {
                    out[k] += w * self.c[base + k];
                }
            }
        }
        out
    }
}

impl NumAlgebroid {
    pub fn new(alg: &Algebroid) -> Result<Self> {
        let names = alg.chart().name_refs();
        let (r, m) = (alg.rank(), alg.dim());
        let anchor = MatrixFn::new(r, m, alg.anchor(), &names)?;
        let mut structure = Vec::new();
        for i in 0..r {
            for j in (i + 1)..r {
                for (k, e) in alg.structure_upper()[pair_index(i, j, r)].iter().enumerate() {
                    if !e.is_zero() {
                        structure.push(((i, j), k, e.compile(&names)?));
                    }
                }
            }
        }
        Ok(NumAlgebroid { r, m, anchor, structure })
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn at(&self, x: &[f64]) -> Result<PointData> {
        let r = self.r;
        let anchor = self.anchor.eval(x)?;
        let mut c = vec![0.0; r * r * r];
        for ((i, j), k, e) in &self.structure {
            let v = e.eval(x)?;
            c[(i * r + j) * r + k] = v;
            c[(j * r + i) * r + k] = -v;
        }
        Ok(PointData {
            anchor,
            c,
            r,
            m: self.m,
        })
    }

    pub fn sharp(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let a = self.anchor.eval(x)?;
        Ok(mat_t_vec(&a, self.r, self.m, u))
    }
}
