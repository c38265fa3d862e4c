//! Fibrations of algebroids `π: A_E → A_B` with an Ehresmann connection.
//!
//! The total chart has coordinates `(x, y)` and the base chart `x`; the
//! submersion is the coordinate projection. `π`, the splitting `σ` and the
//! kernel frame `K` are matrices of expressions over the total chart.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebroid::{norm, pair_count, pair_index, Algebroid, Chart, Section, DEFAULT_SEED};
use crate::cubes::{rk4_step, Cube};
use crate::error::{Error, Result};
use crate::expr::{Env, Expr};
use crate::interp;
use crate::linalg::{self, SymMatrix};
use crate::numeric::{mat_vec, MatrixFn, NumAlgebroid};

const KERNEL_TOL: f64 = 1e-8;
const KERNEL_SAMPLES: usize = 16;

#[derive(Debug, Clone)]
pub struct Fibration {
    total: Algebroid,
    base: Algebroid,
    pi: SymMatrix,
    sigma: SymMatrix,
    kernel: SymMatrix,
    left: SymMatrix,
}

/// `ω(e_i, e_j)` in kernel coordinates for `i < j`.
#[derive(Debug, Clone)]
pub struct Curvature2Form {
    rank: usize,
    d: usize,
    upper: Vec<Vec<Expr>>,
}

impl Curvature2Form {
    pub fn get(&self, i: usize, j: usize) -> Vec<Expr> {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.upper[pair_index(i, j, self.rank)].clone(),
            Greater => self.upper[pair_index(j, i, self.rank)]
                .iter()
                .map(|e| -e.clone())
                .collect(),
            Equal => vec![Expr::zero(); self.d],
        }
    }

    pub fn base_rank(&self) -> usize {
        self.rank
    }

    pub fn kernel_rank(&self) -> usize {
        self.d
    }

    pub fn is_zero(&self) -> bool {
        self.upper.iter().flatten().all(Expr::is_zero)
    }

    /// `pair_count(r) × d` matrix for compilation.
    fn rows(&self) -> &[Vec<Expr>] {
        &self.upper
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub pi_sigma: f64,
    pub pi_kernel: f64,
    pub bracket_morphism: f64,
    pub anchor_morphism: f64,
    pub tol: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    pub curvature_identity: f64,
    pub bianchi: f64,
    pub tol: f64,
    pub passed: bool,
}

fn column(m: &SymMatrix, j: usize) -> Vec<Expr> {
    m.iter().map(|row| row[j].clone()).collect()
}

fn eval_all(v: &[Expr], env: &Env) -> Result<Vec<f64>> {
    Ok(v.iter()
        .map(|e| e.eval(env))
        .collect::<std::result::Result<_, _>>()?)
}

fn sample_points(chart: &Chart, n: usize, seed: u64) -> Vec<Env> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n.max(1))
        .map(|_| {
            let x = chart.sample(&mut rng);
            chart.env(&x)
        })
        .collect()
}

impl Fibration {
    /// `sigma = None` picks the pointwise least-squares right inverse of `π`.
    pub fn new(
        total: Algebroid,
        base: Algebroid,
        pi: SymMatrix,
        sigma: Option<SymMatrix>,
        kernel: SymMatrix,
    ) -> Result<Self> {
        let (re, rb) = (total.rank(), base.rank());
        let bn = base.chart().names();
        if total.chart().names().len() < bn.len() || &total.chart().names()[..bn.len()] != bn {
            return Err(Error::Dimension(
                "base coordinates must be the leading coordinates of the total chart".into(),
            ));
        }
        if pi.len() != rb || pi.iter().any(|row| row.len() != re) {
            return Err(Error::Dimension(format!("projection must be {rb}x{re}")));
        }
        let sigma = match sigma {
            Some(s) => s,
            None => linalg::right_inverse(&pi)?,
        };
        if sigma.len() != re || sigma.iter().any(|row| row.len() != rb) {
            return Err(Error::Dimension(format!("splitting must be {re}x{rb}")));
        }
        let d = re.checked_sub(rb).ok_or_else(|| {
            Error::Dimension("total rank is smaller than base rank".into())
        })?;
        if kernel.len() != re || kernel.iter().any(|row| row.len() != d) {
            return Err(Error::Dimension(format!("kernel frame must be {re}x{d}")));
        }
        let names = total.chart().names();
        for e in pi.iter().chain(&sigma).chain(&kernel).flatten() {
            for v in e.variables() {
                if !names.contains(&v) {
                    return Err(Error::Expr(crate::expr::ExprError::Unbound(v)));
                }
            }
        }
        let left = if d == 0 { vec![] } else { linalg::left_inverse(&kernel)? };
        Ok(Fibration {
            total,
            base,
            pi,
            sigma,
            kernel,
            left,
        })
    }

    /// `A_B × K → A_B` with the trivial splitting.
    pub fn product(base: &Algebroid, fiber: &Algebroid) -> Result<Self> {
        let total = base.product(fiber)?;
        let (rb, d) = (base.rank(), fiber.rank());
        let re = rb + d;
        let unit = |i: usize, j: usize| if i == j { Expr::one() } else { Expr::zero() };
        let pi = (0..rb).map(|i| (0..re).map(|j| unit(i, j)).collect()).collect();
        let sigma = (0..re).map(|i| (0..rb).map(|j| unit(i, j)).collect()).collect();
        let kernel = (0..re).map(|i| (0..d).map(|s| unit(i, rb + s)).collect()).collect();
        Fibration::new(total, base.clone(), pi, Some(sigma), kernel)
    }

    /// Extension `E ⋊ A → A` whose frame lists the `d` kernel elements first.
    pub fn extension(total: &Algebroid, base: &Algebroid) -> Result<Self> {
        let (re, rb) = (total.rank(), base.rank());
        let d = re.checked_sub(rb).ok_or_else(|| {
            Error::Dimension("total rank is smaller than base rank".into())
        })?;
        let unit = |i: usize, j: usize| if i == j { Expr::one() } else { Expr::zero() };
        let pi = (0..rb).map(|i| (0..re).map(|j| unit(d + i, j)).collect()).collect();
        let sigma = (0..re).map(|i| (0..rb).map(|j| unit(i, d + j)).collect()).collect();
        let kernel = (0..re).map(|i| (0..d).map(|s| unit(i, s)).collect()).collect();
        Fibration::new(total.clone(), base.clone(), pi, Some(sigma), kernel)
    }

    /// `♯: A_L → TL` for an algebroid over a leaf, with a splitting of the
    /// anchor and a frame of its kernel.
    pub fn from_anchor(leaf: &Algebroid, sigma: SymMatrix, kernel: SymMatrix) -> Result<Self> {
        let base = Algebroid::make_tangent(leaf.chart().clone());
        let pi = linalg::transpose(&leaf.anchor().to_vec());
        Fibration::new(leaf.clone(), base, pi, Some(sigma), kernel)
    }

    /// Same fibration with another splitting.
    pub fn with_sigma(&self, sigma: SymMatrix) -> Result<Self> {
        Fibration::new(
            self.total.clone(),
            self.base.clone(),
            self.pi.clone(),
            Some(sigma),
            self.kernel.clone(),
        )
    }

    /// `σ + KΔ` for `Δ` given in kernel coordinates (`d × r_B`).
    pub fn perturbed(&self, delta: &SymMatrix) -> Result<Self> {
        let kd = linalg::mul(&self.kernel, delta);
        let sigma = self
            .sigma
            .iter()
            .zip(kd)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.clone() + y).collect())
            .collect();
        self.with_sigma(sigma)
    }

    pub fn total(&self) -> &Algebroid {
        &self.total
    }

    pub fn base(&self) -> &Algebroid {
        &self.base
    }

    pub fn pi(&self) -> &SymMatrix {
        &self.pi
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn kernel_frame(&self) -> &SymMatrix {
        &self.kernel
    }

    pub fn kernel_rank(&self) -> usize {
        self.total.rank() - self.base.rank()
    }

    /// Number of fiber coordinates.
    pub fn fiber_dim(&self) -> usize {
        self.total.dim() - self.base.dim()
    }

    /// `σ(α)` for a base section.
    pub fn horizontal(&self, alpha: &Section) -> Section {
        Section::new(linalg::mul_vec(&self.sigma, &alpha.coeffs))
    }

    /// The kernel section with coordinates `coords`.
    pub fn kernel_section(&self, coords: &[Expr]) -> Section {
        Section::new(linalg::mul_vec(&self.kernel, coords))
    }

    fn kernel_basis(&self, u: usize) -> Section {
        Section::new(column(&self.kernel, u))
    }

    /// Kernel coordinates of `x`; errors if `x` leaves the kernel at a
    /// sampled point by more than the tolerance.
    pub fn kernel_coords(&self, x: &Section) -> Result<Vec<Expr>> {
        let coords = linalg::mul_vec(&self.left, &x.coeffs);
        let back = linalg::mul_vec(&self.kernel, &coords);
        let off: Vec<Expr> = x
            .coeffs
            .iter()
            .zip(back)
            .map(|(a, b)| a.clone() - b)
            .collect();
        if !off.iter().all(Expr::is_zero) {
            for env in sample_points(self.total.chart(), KERNEL_SAMPLES, DEFAULT_SEED) {
                let v = norm(&eval_all(&off, &env)?);
                if v > KERNEL_TOL {
                    return Err(Error::NonKernel { residual: v });
                }
            }
        }
        Ok(coords)
    }

    pub fn validate(&self, samples: usize, tol: f64) -> Result<ValidationReport> {
        let (re, rb, d) = (self.total.rank(), self.base.rank(), self.kernel_rank());
        let pb = self.base.dim();
        let ps = linalg::mul(&self.pi, &self.sigma);
        let pk = linalg::mul(&self.pi, &self.kernel);

        let mut gens: Vec<(Section, Option<usize>)> = (0..rb)
            .map(|i| (self.horizontal(&Section::basis(rb, i)), Some(i)))
            .collect();
        gens.extend((0..d).map(|u| (self.kernel_basis(u), None)));
        let mut bracket_defects = Vec::new();
        for a in 0..gens.len() {
            for b in (a + 1)..gens.len() {
                let br = self.total.bracket(&gens[a].0, &gens[b].0)?;
                let mut proj = linalg::mul_vec(&self.pi, &br.coeffs);
                if let (Some(i), Some(j)) = (gens[a].1, gens[b].1) {
                    for (p, c) in proj.iter_mut().zip(self.base.structure(i, j)) {
                        *p = p.clone() - c;
                    }
                }
                bracket_defects.push(proj);
            }
        }
        let mut anchor_defects = Vec::new();
        for a in 0..re {
            let ea = Section::basis(re, a);
            let up = self.total.anchor_apply(&ea)?;
            let down = self
                .base
                .anchor_apply(&Section::new(column(&self.pi, a)))?;
            anchor_defects.push(
                (0..pb)
                    .map(|k| up[k].clone() - down[k].clone())
                    .collect::<Vec<_>>(),
            );
        }

        let mut rep = ValidationReport {
            pi_sigma: 0.0,
            pi_kernel: 0.0,
            bracket_morphism: 0.0,
            anchor_morphism: 0.0,
            tol,
            passed: false,
        };
        for env in sample_points(self.total.chart(), samples, DEFAULT_SEED) {
            for i in 0..rb {
                for j in 0..rb {
                    let target = if i == j { 1.0 } else { 0.0 };
                    rep.pi_sigma = rep.pi_sigma.max((ps[i][j].eval(&env)? - target).abs());
                }
            }
            for row in &pk {
                for e in row {
                    rep.pi_kernel = rep.pi_kernel.max(e.eval(&env)?.abs());
                }
            }
            for v in &bracket_defects {
                rep.bracket_morphism = rep.bracket_morphism.max(norm(&eval_all(v, &env)?));
            }
            for v in &anchor_defects {
                rep.anchor_morphism = rep.anchor_morphism.max(norm(&eval_all(v, &env)?));
            }
        }
        rep.passed = rep.pi_sigma < tol
            && rep.pi_kernel < tol
            && rep.bracket_morphism < tol
            && rep.anchor_morphism < tol;
        Ok(rep)
    }

    /// `D_α κ = [σα, κ]` in kernel coordinates.
    pub fn covariant_derivative(&self, alpha: &Section, kappa: &[Expr]) -> Result<Vec<Expr>> {
        if alpha.rank() != self.base.rank() || kappa.len() != self.kernel_rank() {
            return Err(Error::Dimension("covariant derivative arguments".into()));
        }
        let br = self
            .total
            .bracket(&self.horizontal(alpha), &self.kernel_section(kappa))?;
        self.kernel_coords(&br)
    }

    /// `Θ_i` with column `u` holding the kernel coordinates of `D_{e_i} κ_u`.
    pub fn connection_matrices(&self) -> Result<Vec<SymMatrix>> {
        let (rb, d) = (self.base.rank(), self.kernel_rank());
        (0..rb)
            .map(|i| {
                let mut theta = vec![vec![Expr::zero(); d]; d];
                for u in 0..d {
                    let mut ku = vec![Expr::zero(); d];
                    ku[u] = Expr::one();
                    let col = self.covariant_derivative(&Section::basis(rb, i), &ku)?;
                    for (v, e) in col.into_iter().enumerate() {
                        theta[v][u] = e;
                    }
                }
                Ok(theta)
            })
            .collect()
    }

    /// `ω(α, β) = [σα, σβ] − σ[α, β]` on the base frame.
    pub fn curvature(&self) -> Result<Curvature2Form> {
        let rb = self.base.rank();
        let mut upper = Vec::with_capacity(pair_count(rb));
        for i in 0..rb {
            for j in (i + 1)..rb {
                let si = self.horizontal(&Section::basis(rb, i));
                let sj = self.horizontal(&Section::basis(rb, j));
                let br = self.total.bracket(&si, &sj)?;
                let down = self.horizontal(&Section::new(self.base.structure(i, j)));
                upper.push(self.kernel_coords(&br.sub(&down))?);
            }
        }
        Ok(Curvature2Form {
            rank: rb,
            d: self.kernel_rank(),
            upper,
        })
    }

    fn kernel_bracket(&self, a: &[Expr], b: &[Expr]) -> Result<Vec<Expr>> {
        let br = self
            .total
            .bracket(&self.kernel_section(a), &self.kernel_section(b))?;
        self.kernel_coords(&br)
    }

    /// Residuals of `Curv_D(ξ₁,ξ₂)κ = [ω(ξ₁,ξ₂), κ]` and of
    /// `∮ D_{ξ₁}ω(ξ₂,ξ₃) − ω([ξ₁,ξ₂],ξ₃) = 0` on frame elements.
    pub fn identity_residuals(&self, samples: usize, tol: f64) -> Result<IdentityReport> {
        let (rb, d) = (self.base.rank(), self.kernel_rank());
        let omega = self.curvature()?;
        let basis = |i: usize| Section::basis(rb, i);
        let unit = |u: usize| {
            let mut v = vec![Expr::zero(); d];
            v[u] = Expr::one();
            v
        };
        let mut curv_defects = Vec::new();
        for i in 0..rb {
            for j in (i + 1)..rb {
                let cij = Section::new(self.base.structure(i, j));
                for u in 0..d {
                    let ku = unit(u);
                    let dj = self.covariant_derivative(&basis(j), &ku)?;
                    let di = self.covariant_derivative(&basis(i), &ku)?;
                    let didj = self.covariant_derivative(&basis(i), &dj)?;
                    let djdi = self.covariant_derivative(&basis(j), &di)?;
                    let dc = self.covariant_derivative(&cij, &ku)?;
                    let rhs = self.kernel_bracket(&omega.get(i, j), &ku)?;
                    curv_defects.push(
                        (0..d)
                            .map(|v| {
                                didj[v].clone() - djdi[v].clone() - dc[v].clone() - rhs[v].clone()
                            })
                            .collect::<Vec<_>>(),
                    );
                }
            }
        }
        let mut bianchi_defects = Vec::new();
        for i in 0..rb {
            for j in (i + 1)..rb {
                for k in (j + 1)..rb {
                    let mut acc = vec![Expr::zero(); d];
                    for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                        let dw = self.covariant_derivative(&basis(a), &omega.get(b, c))?;
                        let cab = self.base.structure(a, b);
                        for v in 0..d {
                            let mut t = dw[v].clone();
                            for (l, cl) in cab.iter().enumerate() {
                                if !cl.is_zero() {
                                    t = t - cl.clone() * omega.get(l, c)[v].clone();
                                }
                            }
                            acc[v] = acc[v].clone() + t;
                        }
                    }
                    bianchi_defects.push(acc);
                }
            }
        }
        let mut rep = IdentityReport {
            curvature_identity: 0.0,
            bianchi: 0.0,
            tol,
            passed: false,
        };
        for env in sample_points(self.total.chart(), samples, DEFAULT_SEED) {
            for v in &curv_defects {
                rep.curvature_identity = rep.curvature_identity.max(norm(&eval_all(v, &env)?));
            }
            for v in &bianchi_defects {
                rep.bianchi = rep.bianchi.max(norm(&eval_all(v, &env)?));
            }
        }
        rep.passed = rep.curvature_identity < tol && rep.bianchi < tol;
        Ok(rep)
    }

    /// Max deviation of the curvature of `σ + KΔ` from
    /// `ω + d_D Δ + [Δ, Δ]` at sampled points.
    pub fn curvature_change_residual(&self, delta: &SymMatrix, samples: usize) -> Result<f64> {
        let (rb, d) = (self.base.rank(), self.kernel_rank());
        let col = |j: usize| column(delta, j);
        let omega = self.curvature()?;
        let omega2 = self.perturbed(delta)?.curvature()?;
        let mut defects = Vec::new();
        for i in 0..rb {
            for j in (i + 1)..rb {
                let di = self.covariant_derivative(&Section::basis(rb, i), &col(j))?;
                let dj = self.covariant_derivative(&Section::basis(rb, j), &col(i))?;
                let dc = linalg::mul_vec(delta, &self.base.structure(i, j));
                let quad = self.kernel_bracket(&col(i), &col(j))?;
                let (w, w2) = (omega.get(i, j), omega2.get(i, j));
                defects.push(
                    (0..d)
                        .map(|v| {
                            w2[v].clone()
                                - w[v].clone()
                                - (di[v].clone() - dj[v].clone() - dc[v].clone())
                                - quad[v].clone()
                        })
                        .collect::<Vec<_>>(),
                );
            }
        }
        let mut worst = 0.0f64;
        for env in sample_points(self.total.chart(), samples, DEFAULT_SEED) {
            for v in &defects {
                worst = worst.max(norm(&eval_all(v, &env)?));
            }
        }
        Ok(worst)
    }

    /// Kernel abelian, or curvature central, at sampled points.
    pub fn centrality_residual(&self, samples: usize) -> Result<(f64, f64)> {
        let (rb, d) = (self.base.rank(), self.kernel_rank());
        let unit = |u: usize| {
            let mut v = vec![Expr::zero(); d];
            v[u] = Expr::one();
            v
        };
        let mut abel = Vec::new();
        for u in 0..d {
            for w in (u + 1)..d {
                abel.push(self.kernel_bracket(&unit(u), &unit(w))?);
            }
        }
        let omega = self.curvature()?;
        let mut central = Vec::new();
        for i in 0..rb {
            for j in (i + 1)..rb {
                for u in 0..d {
                    central.push(self.kernel_bracket(&omega.get(i, j), &unit(u))?);
                }
            }
        }
        let (mut a, mut c) = (0.0f64, 0.0f64);
        for env in sample_points(self.total.chart(), samples, DEFAULT_SEED) {
            for v in &abel {
                a = a.max(norm(&eval_all(v, &env)?));
            }
            for v in &central {
                c = c.max(norm(&eval_all(v, &env)?));
            }
        }
        Ok((a, c))
    }

    pub fn numeric(&self) -> Result<NumFibration> {
        NumFibration::new(self)
    }

    /// Horizontal lift of a base cube from an initial `(n−1)`-cube in `A_E`
    /// over the face `t_n = 0`.
    ///
    /// The lift is `ã_n = σ a_n`, `ã_i = σ a_i + K κ_i`, with the fiber
    /// coordinates following `♯ σ a_n` and the kernel coordinates solving
    /// `∂_n κ_i = ω(a_i, a_n) − Θ(a_n) κ_i` along each line in `t_n`.
    pub fn lift_cube(&self, c: &Cube, init: &Cube, tol: f64) -> Result<Cube> {
        let n = c.order();
        if n == 0 {
            return Err(Error::Precondition("cannot lift a 0-cube".into()));
        }
        c.check_chart(&self.base)?;
        let (re, me, mb) = (self.total.rank(), self.total.dim(), self.base.dim());
        if init.order() != n - 1 || init.grid() != c.grid() || init.rank() != re || init.dim() != me
        {
            return Err(Error::Dimension("initial face does not match the cube".into()));
        }
        let nf = self.numeric()?;
        let face = c.face(n, 0)?;
        for idx in 0..init.node_count() {
            let y = init.gamma_at(idx);
            let gap = y[..mb]
                .iter()
                .zip(face.gamma_at(idx))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            if gap > tol {
                return Err(Error::Precondition(format!(
                    "initial face lies over another path (gap {gap:e})"
                )));
            }
            let p = nf.pi.eval(y)?;
            for k in 0..n - 1 {
                let down = mat_vec(&p, nf.rb, re, init.comp_at(k, idx));
                let gap = norm(
                    &down
                        .iter()
                        .zip(face.comp_at(k, idx))
                        .map(|(a, b)| a - b)
                        .collect::<Vec<_>>(),
                );
                if gap > tol {
                    return Err(Error::Precondition(format!(
                        "initial face does not project onto the cube face (gap {gap:e})"
                    )));
                }
            }
        }
        lift_lines(self, &nf, c, init)
    }

    /// Transport `v`, a kernel vector over the end of `path`, back to its
    /// start along the horizontal lift starting at fiber point `y0`.
    pub fn parallel_transport(&self, path: &Cube, v: &[f64], y0: &[f64]) -> Result<Vec<f64>> {
        if path.order() != 1 {
            return Err(Error::Dimension("transport needs a 1-cube".into()));
        }
        if v.len() != self.kernel_rank() || y0.len() != self.fiber_dim() {
            return Err(Error::Dimension("transport vector or fiber point".into()));
        }
        let nf = self.numeric()?;
        let (_, p) = nf.transport_row(self, path, 0, y0)?;
        let d = self.kernel_rank();
        Ok(mat_vec(&p[path.grid() * d * d..], d, d, v))
    }
}

/// Compiled fibration data over the total chart.
pub struct NumFibration {
    pub e: NumAlgebroid,
    pub rb: usize,
    pub d: usize,
    pub pi: MatrixFn,
    pub sigma: MatrixFn,
    pub left: MatrixFn,
    pub kernel: MatrixFn,
    pub omega: MatrixFn,
    pub theta: Vec<MatrixFn>,
}

impl NumFibration {
    fn new(f: &Fibration) -> Result<Self> {
        let names = f.total.chart().name_refs();
        let (re, rb, d) = (f.total.rank(), f.base.rank(), f.kernel_rank());
        let omega = f.curvature()?;
        let theta = f
            .connection_matrices()?
            .iter()
            .map(|t| MatrixFn::new(d, d, t, &names))
            .collect::<Result<_>>()?;
        Ok(NumFibration {
            e: NumAlgebroid::new(&f.total)?,
            rb,
            d,
            pi: MatrixFn::new(rb, re, &f.pi, &names)?,
            sigma: MatrixFn::new(re, rb, &f.sigma, &names)?,
            left: MatrixFn::new(d, re, &f.left, &names)?,
            kernel: MatrixFn::new(re, d, &f.kernel, &names)?,
            omega: MatrixFn::new(pair_count(rb), d, omega.rows(), &names)?,
            theta,
        })
    }

    pub fn flat(&self) -> bool {
        self.theta.iter().all(MatrixFn::is_zero)
    }

    /// `⟨ω(y), u ∧ v⟩` in kernel coordinates.
    pub fn omega_pair(&self, y: &[f64], u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        let w = self.omega.eval(y)?;
        let mut out = vec![0.0; self.d];
        for i in 0..self.rb {
            for j in (i + 1)..self.rb {
                let c = u[i] * v[j] - u[j] * v[i];
                if c == 0.0 {
                    continue;
                }
                let row = &w[pair_index(i, j, self.rb) * self.d..];
                for s in 0..self.d {
                    out[s] += c * row[s];
                }
            }
        }
        Ok(out)
    }

    /// `Θ(u) = Σ u^i Θ_i(y)`.
    pub fn theta_at(&self, y: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.d * self.d];
        for (ui, t) in u.iter().zip(&self.theta) {
            if *ui == 0.0 || t.is_zero() {
                continue;
            }
            for (o, v) in out.iter_mut().zip(t.eval(y)?) {
                *o += ui * v;
            }
        }
        Ok(out)
    }

    /// Along the row `line` (last axis) of a base cube, lift horizontally
    /// from fiber point `y0` and integrate `P' = P Θ(a)` with `P(0) = I`.
    /// Returns the lifted points and `P` at every node of the row.
    pub fn transport_row(
        &self,
        f: &Fibration,
        c: &Cube,
        line: usize,
        y0: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let (rb, d) = (self.rb, self.d);
        let npts = c.npts();
        let last = c.order() - 1;
        let base_line = line * npts;
        let mut p = vec![0.0; npts * d * d];
        for s in 0..d {
            p[s * d + s] = 1.0;
        }
        if self.flat() && y0.is_empty() {
            for k in 1..npts {
                p.copy_within(0..d * d, k * d * d);
            }
            let pts = c.gamma()[base_line * c.dim()..(base_line + npts) * c.dim()].to_vec();
            return Ok((pts, p));
        }
        let (re, me, mb) = (f.total.rank(), f.total.dim(), c.dim());
        let q = me - mb;
        let xl = &c.gamma()[base_line * mb..(base_line + npts) * mb];
        let a_line = &c.components()[last][base_line * rb..(base_line + npts) * rb];
        let h = 1.0 / c.grid() as f64;
        let mut au = vec![0.0; rb];
        let mut xs = vec![0.0; mb];
        let mut pts = vec![0.0; npts * me];
        pts[..mb].copy_from_slice(&xl[..mb]);
        pts[mb..me].copy_from_slice(y0);
        // state: fiber coordinates followed by P
        let mut state: Vec<f64> = y0.iter().chain(&p[..d * d]).copied().collect();
        for k in 0..c.grid() {
            let mut rhs = |s: f64, st: &[f64]| -> Result<Vec<f64>> {
                interp::line(a_line, rb, s / h, &mut au);
                interp::line(xl, mb, s / h, &mut xs);
                let mut yy = xs.clone();
                yy.extend_from_slice(&st[..q]);
                let mut out = Vec::with_capacity(st.len());
                if q > 0 {
                    let lifted = mat_vec(&self.sigma.eval(&yy)?, re, rb, &au);
                    out.extend_from_slice(&self.e.sharp(&yy, &lifted)?[mb..]);
                }
                let th = self.theta_at(&yy, &au)?;
                let pm = &st[q..];
                for i in 0..d {
                    for j in 0..d {
                        out.push((0..d).map(|l| pm[i * d + l] * th[l * d + j]).sum());
                    }
                }
                Ok(out)
            };
            state = rk4_step(&mut rhs, k as f64 * h, &state, h)?;
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    node: c.multi(base_line + k + 1),
                });
            }
            let pt = &mut pts[(k + 1) * me..(k + 2) * me];
            pt[..mb].copy_from_slice(&xl[(k + 1) * mb..(k + 2) * mb]);
            pt[mb..].copy_from_slice(&state[..q]);
            if !f.total.chart().contains(pt) {
                return Err(Error::ChartEscape {
                    node: c.multi(base_line + k + 1),
                    point: pt.to_vec(),
                });
            }
            p[(k + 1) * d * d..(k + 2) * d * d].copy_from_slice(&state[q..]);
        }
        Ok((pts, p))
    }
}

fn wedge(u: &[f64], v: &[f64], out: &mut Vec<f64>) {
    for i in 0..u.len() {
        for j in (i + 1)..u.len() {
            out.push(u[i] * v[j] - u[j] * v[i]);
        }
    }
}

fn lift_lines(f: &Fibration, nf: &NumFibration, c: &Cube, init: &Cube) -> Result<Cube> {
    let n = c.order();
    let last = n - 1;
    let (re, rb, d) = (f.total.rank(), nf.rb, nf.d);
    let (me, mb) = (f.total.dim(), c.dim());
    let q = me - mb;
    let pc = pair_count(rb);
    let grid = c.grid();
    let npts = c.npts();
    let h = 1.0 / grid as f64;
    let lines = init.node_count();
    let mut gamma = vec![0.0; lines * npts * me];
    let mut comps = vec![vec![0.0; lines * npts * re]; n];
    let probe = Cube::zero(n, grid, 0, &[]);

    let mut xs = vec![0.0; mb];
    let mut an = vec![0.0; rb];
    let mut wv = vec![0.0; pc];
    for line in 0..lines {
        let base = line * npts;
        let xl = &c.gamma()[base * mb..(base + npts) * mb];
        let al = &c.components()[last][base * rb..(base + npts) * rb];
        let wedges: Vec<Vec<f64>> = (0..last)
            .map(|i| {
                let mut w = Vec::with_capacity(npts * pc);
                for k in 0..npts {
                    wedge(c.comp_at(i, base + k), &al[k * rb..(k + 1) * rb], &mut w);
                }
                w
            })
            .collect();

        let y0 = init.gamma_at(line);
        let mut state: Vec<f64> = y0[mb..].to_vec();
        let sg0 = nf.sigma.eval(y0)?;
        let l0 = nf.left.eval(y0)?;
        for i in 0..last {
            let horiz = mat_vec(&sg0, re, rb, c.comp_at(i, base));
            let diff: Vec<f64> = init.comp_at(i, line).iter().zip(horiz).map(|(a, b)| a - b).collect();
            state.extend(mat_vec(&l0, d, re, &diff));
        }
        let mut states = Vec::with_capacity(npts * state.len());
        states.extend_from_slice(&state);

        for k in 0..grid {
            let mut rhs = |s: f64, st: &[f64]| -> Result<Vec<f64>> {
                let sg = s / h;
                interp::line(xl, mb, sg, &mut xs);
                interp::line(al, rb, sg, &mut an);
                let mut pt = xs.clone();
                pt.extend_from_slice(&st[..q]);
                let mut out = Vec::with_capacity(st.len());
                if q > 0 {
                    let lifted = mat_vec(&nf.sigma.eval(&pt)?, re, rb, &an);
                    out.extend_from_slice(&nf.e.sharp(&pt, &lifted)?[mb..]);
                }
                let th = nf.theta_at(&pt, &an)?;
                let om = nf.omega.eval(&pt)?;
                for (i, wl) in wedges.iter().enumerate() {
                    interp::line(wl, pc, sg, &mut wv);
                    let kap = &st[q + i * d..q + (i + 1) * d];
                    for v in 0..d {
                        let mut acc: f64 = (0..pc).map(|p| wv[p] * om[p * d + v]).sum();
                        acc -= (0..d).map(|u| th[v * d + u] * kap[u]).sum::<f64>();
                        out.push(acc);
                    }
                }
                Ok(out)
            };
            state = rk4_step(&mut rhs, k as f64 * h, &state, h)?;
            let node = base + k + 1;
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    node: probe.multi(node),
                });
            }
            let mut pt = xl[(k + 1) * mb..(k + 2) * mb].to_vec();
            pt.extend_from_slice(&state[..q]);
            if !f.total.chart().contains(&pt) {
                return Err(Error::ChartEscape {
                    node: probe.multi(node),
                    point: pt,
                });
            }
            states.extend_from_slice(&state);
        }

        let width = state.len();
        for k in 0..npts {
            let node = base + k;
            let st = &states[k * width..(k + 1) * width];
            let pt = &mut gamma[node * me..(node + 1) * me];
            pt[..mb].copy_from_slice(&xl[k * mb..(k + 1) * mb]);
            pt[mb..].copy_from_slice(&st[..q]);
            let pt = &gamma[node * me..(node + 1) * me];
            let sg = nf.sigma.eval(pt)?;
            let kf = nf.kernel.eval(pt)?;
            comps[last][node * re..(node + 1) * re]
                .copy_from_slice(&mat_vec(&sg, re, rb, &al[k * rb..(k + 1) * rb]));
            for i in 0..last {
                let mut v = mat_vec(&sg, re, rb, c.comp_at(i, node));
                let kv = mat_vec(&kf, re, d, &st[q + i * d..q + (i + 1) * d]);
                v.iter_mut().zip(kv).for_each(|(a, b)| *a += b);
                comps[i][node * re..(node + 1) * re].copy_from_slice(&v);
            }
        }
    }
    Cube::from_parts(n, grid, re, me, gamma, comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebroid::Bivector;

    fn plane(half: f64) -> Chart {
        Chart::symmetric(&["x", "y"], half).unwrap()
    }

    fn jacobi_fibration() -> Fibration {
        let pi = Bivector::planar(Expr::one());
        let base = Algebroid::make_cotangent_poisson(plane(3.0), &pi).unwrap();
        let total = Algebroid::make_jacobi_extension(plane(3.0), &pi).unwrap();
        Fibration::extension(&total, &base).unwrap()
    }

    #[test]
    fn product_fibration_is_flat() {
        let base = Algebroid::make_tangent(plane(2.0));
        let fib = Fibration::product(&base, &Algebroid::so3(Chart::point())).unwrap();
        let v = fib.validate(20, 1e-12).unwrap();
        assert!(v.passed, "{v:?}");
        assert!(fib.curvature().unwrap().is_zero());
        let ids = fib.identity_residuals(20, 1e-12).unwrap();
        assert_eq!(ids.curvature_identity, 0.0);
    }

    #[test]
    fn product_derivative_is_directional() {
        let base = Algebroid::make_tangent(plane(2.0));
        let fib = Fibration::product(&base, &Algebroid::so3(Chart::point())).unwrap();
        let alpha = Section::parse(&["y", "1"]).unwrap();
        let kappa = vec![Expr::parse("x^2").unwrap(), Expr::zero(), Expr::var("y")];
        let d = fib.covariant_derivative(&alpha, &kappa).unwrap();
        let env: Env = [("x".to_string(), 0.5), ("y".to_string(), 2.0)].into();
        let vals: Vec<f64> = d.iter().map(|e| e.eval(&env).unwrap()).collect();
        assert_eq!(vals, vec![2.0 * 0.5 * 2.0, 0.0, 1.0]);
    }

    #[test]
    fn jacobi_extension_curvature_is_one() {
        let fib = jacobi_fibration();
        assert!(fib.validate(20, 1e-12).unwrap().passed);
        let w = fib.curvature().unwrap();
        assert_eq!(w.get(0, 1), vec![Expr::one()]);
        assert_eq!(w.get(1, 0), vec![-Expr::one()]);
    }

    #[test]
    fn bad_splitting_fails_validation() {
        let fib = jacobi_fibration();
        let mut sigma = fib.sigma().clone();
        sigma[1][0] = Expr::Const(2.0);
        let v = fib.with_sigma(sigma).unwrap().validate(10, 1e-9).unwrap();
        assert!(!v.passed);
        assert!((v.pi_sigma - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_cube_lifts_to_zero() {
        let fib = jacobi_fibration();
        let c = Cube::zero(2, 8, 2, &[0.1, 0.2]);
        let init = Cube::zero(1, 8, 3, &[0.1, 0.2]);
        let lift = fib.lift_cube(&c, &init, 1e-12).unwrap();
        assert_eq!(lift, Cube::zero(2, 8, 3, &[0.1, 0.2]));
    }

    #[test]
    fn trivial_transport_is_identity() {
        let fib = jacobi_fibration();
        let path = Cube::from_fn(1, 16, 2, 2, |t| {
            Ok((vec![t[0], t[0] * t[0]], vec![vec![2.0 * t[0], -1.0]]))
        })
        .unwrap();
        let v = fib.parallel_transport(&path, &[3.5], &[]).unwrap();
        assert_eq!(v, vec![3.5]);
    }
}
