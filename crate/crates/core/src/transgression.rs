//! Transgression of 2-spheres into the kernel, monodromy periods, and the
//! splitting of paths into kernel and horizontal parts.

use serde::Serialize;

use crate::algebroid::norm;
use crate::cubes::Cube;
use crate::cutoff::{tau, tau_prime};
use crate::error::{Error, Result};
use crate::fibration::{Fibration, NumFibration};
use crate::interp;
use crate::numeric::mat_vec;

const CENTRALITY_TOL: f64 = 1e-8;
const CENTRALITY_SAMPLES: usize = 16;
const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lift,
    Formula,
    Period,
}

#[derive(Debug, Clone, Serialize)]
pub struct TransgressionResult {
    pub value: Vec<f64>,
    pub method: Method,
    #[serde(rename = "N")]
    pub grid: usize,
    pub estimated_error: f64,
    /// Morphism residual of the input sphere.
    pub sphere_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl TransgressionResult {
    fn new(value: Vec<f64>, method: Method, grid: usize, coarse: &[f64], residual: f64) -> Self {
        let diff: Vec<f64> = value.iter().zip(coarse).map(|(a, b)| a - b).collect();
        TransgressionResult {
            value,
            method,
            grid,
            estimated_error: norm(&diff),
            sphere_residual: residual,
            config_hash: None,
            seed: None,
        }
    }

    pub fn with_provenance(mut self, config_hash: &str, seed: u64) -> Self {
        self.config_hash = Some(config_hash.to_string());
        self.seed = Some(seed);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PairDiagnostic {
    pub first: String,
    pub second: String,
    pub ratio: Option<f64>,
    /// Best small-denominator approximation `p/q` of the ratio, if close.
    pub rational: Option<(i64, i64)>,
    pub commensurate: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MonodromyReport {
    pub basepoint: Vec<f64>,
    pub labels: Vec<String>,
    pub periods: Vec<Vec<f64>>,
    pub errors: Vec<f64>,
    pub pairs: Vec<PairDiagnostic>,
    pub lattice_rank: usize,
    pub discrete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

fn check_kernel(f: &Fibration) -> Result<()> {
    let (abelian, central) = f.centrality_residual(CENTRALITY_SAMPLES)?;
    if abelian > CENTRALITY_TOL && central > CENTRALITY_TOL {
        return Err(Error::Precondition(format!(
            "kernel is not abelian ({abelian:e}) and curvature is not central ({central:e})"
        )));
    }
    Ok(())
}

fn check_sphere(f: &Fibration, s: &Cube) -> Result<f64> {
    if s.order() != 2 {
        return Err(Error::Dimension(format!("expected a 2-sphere, got a {}-cube", s.order())));
    }
    check_boundary(f, s)
}

fn check_boundary(f: &Fibration, s: &Cube) -> Result<f64> {
    s.check_chart(f.base())?;
    let defect = s.sphere_boundary_defect();
    if defect > BOUNDARY_TOL {
        return Err(Error::Precondition(format!(
            "cube does not vanish on its boundary faces ({defect:e})"
        )));
    }
    if s.grid() % 2 != 0 {
        return Err(Error::Precondition("error estimate needs an even N".into()));
    }
    Ok(s.morphism_residual(f.base())?.max())
}

/// Exchange the two axes of a 2-cube.
fn swap_axes(s: &Cube) -> Result<Cube> {
    let (npts, r, m) = (s.npts(), s.rank(), s.dim());
    let mut gamma = vec![0.0; s.node_count() * m];
    let mut a = vec![vec![0.0; s.node_count() * r]; 2];
    for i in 0..npts {
        for j in 0..npts {
            let (src, dst) = (i * npts + j, j * npts + i);
            gamma[dst * m..(dst + 1) * m].copy_from_slice(s.gamma_at(src));
            a[0][dst * r..(dst + 1) * r].copy_from_slice(s.comp_at(1, src));
            a[1][dst * r..(dst + 1) * r].copy_from_slice(s.comp_at(0, src));
        }
    }
    Cube::from_parts(2, s.grid(), r, m, gamma, a)
}

/// Sum of `terms` taking mirror pairs `k`, `n − 1 − k` first, so reversing
/// the order of the terms does not change the rounding.
fn mirror_sum(terms: &[Vec<f64>], d: usize) -> Vec<f64> {
    let n = terms.len();
    let mut out = vec![0.0; d];
    for k in 0..n / 2 {
        for (c, o) in out.iter_mut().enumerate() {
            *o += terms[k][c] + terms[n - 1 - k][c];
        }
    }
    if n % 2 == 1 {
        for (o, x) in out.iter_mut().zip(&terms[n / 2]) {
            *o += x;
        }
    }
    out
}

fn formula_value(f: &Fibration, nf: &NumFibration, s: &Cube, y0: &[f64]) -> Result<Vec<f64>> {
    let d = nf.d;
    let npts = s.npts();
    let me = f.total().dim();
    // rows along t1 become lines along the last axis
    let swapped = swap_axes(s)?;
    let mut rows = Vec::with_capacity(npts);
    for k2 in 0..npts {
        let (pts, p) = nf.transport_row(f, &swapped, k2, y0)?;
        let w2 = interp::trapezoid_weight(k2, npts);
        let mut terms = Vec::with_capacity(npts);
        for k1 in 0..npts {
            let idx = k1 * npts + k2;
            let w = interp::trapezoid_weight(k1, npts);
            let om = nf.omega_pair(&pts[k1 * me..(k1 + 1) * me], s.comp_at(0, idx), s.comp_at(1, idx))?;
            let moved = mat_vec(&p[k1 * d * d..(k1 + 1) * d * d], d, d, &om);
            terms.push(moved.into_iter().map(|x| w * x).collect());
        }
        rows.push(mirror_sum(&terms, d).into_iter().map(|x| w2 * x).collect());
    }
    Ok(mirror_sum(&rows, d))
}

/// `∫ P(t)·⟨ω(γ̃), a₁∧a₂⟩ dt` over `I²`, where `P(t)` transports the kernel
/// back along the row through `t` to `t₁ = 0`. `y0` is the fiber point over
/// the basepoint.
pub fn transgress2_formula(f: &Fibration, s: &Cube, y0: &[f64]) -> Result<TransgressionResult> {
    check_kernel(f)?;
    let residual = check_sphere(f, s)?;
    let nf = f.numeric()?;
    let fine = formula_value(f, &nf, s, y0)?;
    let coarse = formula_value(f, &nf, &s.subsample()?, y0)?;
    Ok(TransgressionResult::new(fine, Method::Formula, s.grid(), &coarse, residual))
}

fn lift_face(f: &Fibration, s: &Cube, y0: &[f64]) -> Result<Cube> {
    let n = s.order();
    let x0: Vec<f64> = s.basepoint().iter().chain(y0).copied().collect();
    let init = Cube::zero(n - 1, s.grid(), f.total().rank(), &x0);
    f.lift_cube(s, &init, BOUNDARY_TOL)?.face(n, 1)
}

/// Kernel coordinates of the components of a cube in `A_E`.
fn kernel_part(nf: &NumFibration, c: &Cube) -> Result<Cube> {
    let re = c.rank();
    c.map_components(nf.d, |y, u| Ok(mat_vec(&nf.left.eval(y)?, nf.d, re, u)))
}

fn face_integral(face: &Cube) -> Vec<f64> {
    let npts = face.npts();
    let mut value = vec![0.0; face.rank()];
    if face.order() != 1 {
        return value;
    }
    for k in 0..npts {
        let w = interp::trapezoid_weight(k, npts);
        for (v, x) in value.iter_mut().zip(face.comp_at(0, k)) {
            *v += w * x;
        }
    }
    value
}

/// Lift `s` from the zero face at `(x0, y0)` and read off the face
/// `t_n = 1`, returned in kernel coordinates. For `n = 2` and an abelian
/// kernel the value is the integral of that path; higher `n` reports zero.
pub fn transgress_lift(f: &Fibration, s: &Cube, y0: &[f64]) -> Result<(TransgressionResult, Cube)> {
    check_kernel(f)?;
    if s.order() < 2 {
        return Err(Error::Dimension("transgression needs a sphere of order at least 2".into()));
    }
    let residual = check_boundary(f, s)?;
    let nf = f.numeric()?;
    let face = kernel_part(&nf, &lift_face(f, s, y0)?)?;
    let coarse = kernel_part(&nf, &lift_face(f, &s.subsample()?, y0)?)?;
    let result = TransgressionResult::new(
        face_integral(&face),
        Method::Lift,
        s.grid(),
        &face_integral(&coarse),
        residual,
    );
    Ok((result, face))
}

/// Largest off-kernel part of the components of a cube in `A_E`.
pub fn kernel_defect(f: &Fibration, c: &Cube) -> Result<f64> {
    let nf = f.numeric()?;
    let re = c.rank();
    let mut worst = 0.0f64;
    for idx in 0..c.node_count() {
        let p = nf.pi.eval(c.gamma_at(idx))?;
        for k in 0..c.order() {
            worst = worst.max(norm(&mat_vec(&p, nf.rb, re, c.comp_at(k, idx))));
        }
    }
    Ok(worst)
}

fn period_value(nf: &NumFibration, s: &Cube) -> Result<Vec<f64>> {
    let npts = s.npts();
    let mut rows = Vec::with_capacity(npts);
    for k1 in 0..npts {
        let mut terms = Vec::with_capacity(npts);
        for k2 in 0..npts {
            let idx = k1 * npts + k2;
            let w = interp::trapezoid_weight(k2, npts);
            let om = nf.omega_pair(s.gamma_at(idx), s.comp_at(0, idx), s.comp_at(1, idx))?;
            terms.push(om.into_iter().map(|x| w * x).collect());
        }
        let w1 = interp::trapezoid_weight(k1, npts);
        rows.push(mirror_sum(&terms, nf.d).into_iter().map(|x| w1 * x).collect());
    }
    Ok(mirror_sum(&rows, nf.d))
}

/// `∫ ω(∂₁γ, ∂₂γ)` for a sphere in the leaf, where `f` is the anchor
/// fibration of an algebroid over the leaf chart.
pub fn monodromy_period(f: &Fibration, s: &Cube) -> Result<TransgressionResult> {
    if f.fiber_dim() != 0 {
        return Err(Error::Precondition("leaf algebroid and leaf must share a chart".into()));
    }
    check_kernel(f)?;
    let residual = check_sphere(f, s)?;
    let nf = f.numeric()?;
    let fine = period_value(&nf, s)?;
    let coarse = period_value(&nf, &s.subsample()?)?;
    Ok(TransgressionResult::new(fine, Method::Period, s.grid(), &coarse, residual))
}

/// Continued-fraction convergents of `x` up to denominator `max_den`; the
/// first within `tol` (relative) of `x`.
pub fn rational_approx(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut rest = x;
    for _ in 0..64 {
        let a = rest.floor();
        if a.abs() > 1e12 {
            break;
        }
        let a = a as i64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den {
            break;
        }
        if (x - p2 as f64 / q2 as f64).abs() <= tol * x.abs().max(1.0) {
            return Some((p2, q2));
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = rest - a as f64;
        if frac.abs() < 1e-15 {
            break;
        }
        rest = 1.0 / frac;
    }
    None
}

const MAX_DENOMINATOR: i64 = 16;

/// `λ` with `v ≈ λu`, if `v` is parallel to `u`.
fn proportion(v: &[f64], u: &[f64], tol: f64) -> Option<f64> {
    let uu: f64 = u.iter().map(|x| x * x).sum();
    if uu == 0.0 {
        return None;
    }
    let lam = v.iter().zip(u).map(|(a, b)| a * b).sum::<f64>() / uu;
    let off: Vec<f64> = v.iter().zip(u).map(|(a, b)| a - lam * b).collect();
    (norm(&off) <= tol * norm(v).max(1e-300)).then_some(lam)
}

/// Periods of the given generators and a heuristic discreteness check of
/// the group they span.
pub fn monodromy_group(f: &Fibration, generators: &[(String, Cube)]) -> Result<MonodromyReport> {
    let mut periods = Vec::new();
    let mut errors = Vec::new();
    for (_, s) in generators {
        let r = monodromy_period(f, s)?;
        errors.push(r.estimated_error);
        periods.push(r.value);
    }
    let rel = |i: usize| errors[i] / norm(&periods[i]).max(1e-300);
    let mut pairs = Vec::new();
    for i in 0..generators.len() {
        for j in (i + 1)..generators.len() {
            let tol = (rel(i) + rel(j)).max(1e-6);
            let ratio = proportion(&periods[j], &periods[i], tol);
            let rational = ratio.and_then(|x| rational_approx(x, MAX_DENOMINATOR, tol));
            pairs.push(PairDiagnostic {
                first: generators[i].0.clone(),
                second: generators[j].0.clone(),
                ratio,
                rational,
                commensurate: rational.is_some(),
            });
        }
    }
    let mut basis: Vec<usize> = Vec::new();
    for i in 0..generators.len() {
        if norm(&periods[i]) <= 3.0 * errors[i] {
            continue;
        }
        let dependent = basis.iter().any(|&b| {
            let tol = (rel(i) + rel(b)).max(1e-6);
            proportion(&periods[i], &periods[b], tol)
                .and_then(|x| rational_approx(x, MAX_DENOMINATOR, tol))
                .is_some()
        });
        if !dependent {
            basis.push(i);
        }
    }
    let d = f.kernel_rank();
    Ok(MonodromyReport {
        basepoint: generators
            .first()
            .map(|(_, s)| s.basepoint().to_vec())
            .unwrap_or_default(),
        labels: generators.iter().map(|(l, _)| l.clone()).collect(),
        periods,
        errors,
        pairs,
        lattice_rank: basis.len(),
        discrete: basis.len() <= d,
        config_hash: None,
        seed: None,
    })
}

/// `a ≃ h ⊙ k` for a path `a` in `A_E`: `k` is a kernel path from the start
/// of `a`, `h` a horizontal path ending at the end of `a`, and `witness` a
/// homotopy from `a` to their concatenation.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub k_path: Cube,
    pub h_path: Cube,
    pub witness: Cube,
}

impl Decomposition {
    pub fn reconstruction(&self, tol: f64) -> Result<Cube> {
        Cube::concat(&self.h_path, &self.k_path, 1, tol)
    }
}

pub fn decompose_path(f: &Fibration, a: &Cube) -> Result<Decomposition> {
    if a.order() != 1 {
        return Err(Error::Dimension("decomposition needs a 1-cube".into()));
    }
    a.check_chart(f.total())?;
    let nf = f.numeric()?;
    let (re, rb) = (f.total().rank(), f.base().rank());
    let grid = a.grid();
    let npts = a.npts();
    let h = 1.0 / grid as f64;

    let mb = f.base().dim();
    let mut b = Vec::with_capacity(npts * rb);
    let mut xa = Vec::with_capacity(npts * mb);
    for k in 0..npts {
        let p = nf.pi.eval(a.gamma_at(k))?;
        b.extend(mat_vec(&p, rb, re, a.comp_at(0, k)));
        xa.extend_from_slice(&a.gamma_at(k)[..mb]);
    }
    // the base path pulled back along (t1, t2) ↦ t1(1 − t2)
    let mut xv = vec![0.0; mb];
    let mut bv = vec![0.0; rb];
    let pulled = Cube::from_fn(2, grid, rb, mb, |t| {
        let psi = t[0] * (1.0 - t[1]);
        interp::line(&xa, mb, psi * grid as f64, &mut xv);
        interp::line(&b, rb, psi * grid as f64, &mut bv);
        let c1 = bv.iter().map(|v| (1.0 - t[1]) * v).collect();
        let c2 = bv.iter().map(|v| -t[0] * v).collect();
        Ok((xv.clone(), vec![c1, c2]))
    })?;
    let lambda = f.lift_cube(&pulled, a, BOUNDARY_TOL)?;

    let k_path = lambda.face(2, 1)?;
    let edge = lambda.face(1, 1)?;
    let h_path = Cube::from_fn(1, grid, re, f.total().dim(), |t| {
        let k = grid - (t[0] * grid as f64).round() as usize;
        let y = edge.gamma_at(k);
        let sg = nf.sigma.eval(y)?;
        Ok((y.to_vec(), vec![mat_vec(&sg, re, rb, &b[(grid - k) * rb..(grid - k + 1) * rb])]))
    })?;

    let m = f.total().dim();
    let mut gval = vec![0.0; m];
    let mut l1 = vec![0.0; re];
    let mut l2 = vec![0.0; re];
    // the corner path P(s) through (0,1), (1,1), (1,0) and its velocity
    let corner: Vec<([f64; 2], [f64; 2])> = (0..npts)
        .map(|k| {
            let s = k as f64 * h;
            if s <= 0.5 {
                ([tau(2.0 * s), 1.0], [2.0 * tau_prime(2.0 * s), 0.0])
            } else {
                ([1.0, 1.0 - tau(2.0 * s - 1.0)], [0.0, -2.0 * tau_prime(2.0 * s - 1.0)])
            }
        })
        .collect();
    let witness = Cube::from_fn(2, grid, re, m, |t| {
        let (s, u) = (t[0], t[1]);
        let (p, dp) = corner[(s * grid as f64).round() as usize];
        let phi = [(1.0 - u) * s + u * p[0], u * p[1]];
        let ds = [(1.0 - u) + u * dp[0], u * dp[1]];
        let du = [p[0] - s, p[1]];
        let (g1, g2) = (phi[0] * grid as f64, phi[1] * grid as f64);
        interp::grid2(lambda.gamma(), m, npts, npts, g1, g2, &mut gval);
        interp::grid2(&lambda.components()[0], re, npts, npts, g1, g2, &mut l1);
        interp::grid2(&lambda.components()[1], re, npts, npts, g1, g2, &mut l2);
        let comb = |c: [f64; 2]| -> Vec<f64> {
            l1.iter().zip(&l2).map(|(x, y)| c[0] * x + c[1] * y).collect()
        };
        Ok((gval.clone(), vec![comb(ds), comb(du)]))
    })?;

    Ok(Decomposition {
        k_path,
        h_path,
        witness,
    })
}
