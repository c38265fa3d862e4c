//! Ready-made algebroids, fibrations and spheres used by the examples and
//! tests.
//!
//! The spheres here are radial maps `I² → ℝ²` that send the boundary of the
//! square to a centre point and wrap around it once. They are smooth except
//! at one interior point `c`, chosen off the grid, where the whole circle of
//! maximal radius is attained. Their signed areas have closed forms.

use std::collections::BTreeMap;

use crate::algebroid::{Algebroid, Bivector, Chart};
use crate::cubes::{Cube, CubeData};
use crate::error::Result;
use crate::expr::Expr;
use crate::fibration::Fibration;

pub const DEFAULT_DEFECT: [f64; 2] = [0.4713, 0.5291];

/// Single-hump profile on `[0, 1]` vanishing at the ends with its maximum 1
/// at `c`. Returns value and derivative.
fn hump(t: f64, c: f64) -> (f64, f64) {
    let k = (2.0 * c - 1.0) / (3.0 * c * (1.0 - c) - 0.5);
    let raw = |t: f64| t * (1.0 - t) * (1.0 + k * (t - 0.5));
    let d = (1.0 - 2.0 * t) * (1.0 + k * (t - 0.5)) + k * t * (1.0 - t);
    let norm = raw(c);
    (raw(t) / norm, d / norm)
}

/// Radial sphere `γ = x0 + R(w)(cos φ, sin φ)` with components `∂_iγ`, as
/// a function of `t ∈ I²`. `radius(w)` returns `R(w)` and `R'(w)`.
pub fn radial_fn<F>(x0: [f64; 2], c: [f64; 2], radius: F) -> impl Fn(&[f64]) -> Result<CubeData>
where
    F: Fn(f64) -> (f64, f64),
{
    move |t: &[f64]| {
        let (b1, db1) = hump(t[0], c[0]);
        let (b2, db2) = hump(t[1], c[1]);
        let w = b1 * b2;
        let dw = [db1 * b2, b1 * db2];
        let (s1, s2) = (t[0] - c[0], t[1] - c[1]);
        let r2 = s1 * s1 + s2 * s2;
        let phi = s1.atan2(s2);
        let dphi = [s2 / r2, -s1 / r2];
        let (cs, sn) = (phi.cos(), phi.sin());
        let (rad, drad) = radius(w);
        let comp = |i: usize| {
            vec![
                drad * dw[i] * cs - rad * dphi[i] * sn,
                drad * dw[i] * sn + rad * dphi[i] * cs,
            ]
        };
        Ok((vec![x0[0] + rad * cs, x0[1] + rad * sn], vec![comp(0), comp(1)]))
    }
}

/// Sphere in `Tℝ²` sweeping the disk of radius `rho` about `x0`; signed
/// area `π rho²`.
pub fn disk_fn(rho: f64, x0: [f64; 2]) -> impl Fn(&[f64]) -> Result<CubeData> {
    radial_fn(x0, DEFAULT_DEFECT, move |w| {
        (rho * w * (2.0 - w), rho * (2.0 - 2.0 * w))
    })
}

/// Degree-one sphere on the round unit `S²` in stereographic coordinates,
/// missing a cap of angular radius `eps` about the projection pole. Its
/// area is `2π(1 + cos eps)`.
pub fn s2_fn(eps: f64) -> impl Fn(&[f64]) -> Result<CubeData> {
    let top = std::f64::consts::PI - eps;
    radial_fn([0.0, 0.0], DEFAULT_DEFECT, move |w| {
        let theta = top * w * (2.0 - w);
        let dtheta = top * (2.0 - 2.0 * w);
        let half = 0.5 * theta;
        (half.tan(), 0.5 * dtheta / (half.cos() * half.cos()))
    })
}

/// Compose a `Tℝ²` generator with `v ↦ (v₂, −v₁)`, the covector whose
/// Hamiltonian vector field for `Π = ∂x∧∂y` is `v`.
pub fn cotangent_fn<F>(f: F) -> impl Fn(&[f64]) -> Result<CubeData>
where
    F: Fn(&[f64]) -> Result<CubeData>,
{
    move |t: &[f64]| {
        let (g, comps) = f(t)?;
        Ok((g, comps.into_iter().map(|v| vec![v[1], -v[0]]).collect()))
    }
}

pub fn disk_sphere(grid: usize, rho: f64, x0: [f64; 2]) -> Result<Cube> {
    Cube::from_fn(2, grid, 2, 2, disk_fn(rho, x0))
}

pub fn s2_sphere(grid: usize, eps: f64) -> Result<Cube> {
    Cube::from_fn(2, grid, 2, 2, s2_fn(eps))
}

/// [`disk_sphere`] moved into `T*ℝ²` with `Π = ∂x∧∂y`.
pub fn area_sphere(grid: usize, rho: f64, x0: [f64; 2]) -> Result<Cube> {
    Cube::from_fn(2, grid, 2, 2, cotangent_fn(disk_fn(rho, x0)))
}

/// Move a `Tℝ²` cube into `T*ℝ²` with `Π = ∂x∧∂y`.
pub fn to_cotangent(c: &Cube) -> Result<Cube> {
    c.map_components(2, |_, v| Ok(vec![v[1], -v[0]]))
}

pub fn plane_chart(half: f64) -> Chart {
    Chart::symmetric(&["x", "y"], half).expect("valid chart")
}

/// The Jacobi extension `ℝ ⊕ T*ℝ²` of `Π = p ∂x∧∂y` as a fibration over
/// the cotangent algebroid.
pub fn jacobi_plane(p: Expr, half: f64) -> Result<Fibration> {
    let pi = Bivector::planar(p);
    let base = Algebroid::make_cotangent_poisson(plane_chart(half), &pi)?;
    let total = Algebroid::make_jacobi_extension(plane_chart(half), &pi)?;
    Fibration::extension(&total, &base)
}

/// `ℝ ⊕ T*S²` on the stereographic chart with the round area form, as a
/// fibration over `TS²` through its anchor.
pub fn s2_leaf(half: f64) -> Result<Fibration> {
    let chart = Chart::symmetric(&["u", "v"], half)?;
    let p = Expr::parse("(1 + u^2 + v^2)^2 / 4")?;
    let leaf = Algebroid::make_jacobi_extension(chart, &Bivector::planar(p.clone()))?;
    let inv = Expr::one() / p;
    let sigma = vec![
        vec![Expr::zero(), Expr::zero()],
        vec![Expr::zero(), inv.clone()],
        vec![-inv, Expr::zero()],
    ];
    let kernel = vec![vec![Expr::one()], vec![Expr::zero()], vec![Expr::zero()]];
    Fibration::from_anchor(&leaf, sigma, kernel)
}

/// Trivial line bundle over `Tℝ³` with the flat representation
/// `∇ε = dφ ⊗ ε`, `φ = xy + z`, extended by the closed 2-form
/// `Λ = e^{−φ}(dx∧dy + x dx∧dz)`. With `perturb`, `Λ(∂y, ∂z)` gains `x`,
/// which is no longer closed.
pub fn rep_extension(perturb: bool) -> Result<Fibration> {
    let chart = Chart::symmetric(&["x", "y", "z"], 1.0)?;
    let base = Algebroid::make_tangent(chart);
    let theta = ["y", "x", "1"];
    let action = theta
        .iter()
        .map(|t| Ok(vec![vec![Expr::parse(t)?]]))
        .collect::<Result<Vec<_>>>()?;
    let mut cocycle = BTreeMap::new();
    cocycle.insert((0, 1), vec![Expr::parse("exp(-(x*y + z))")?]);
    cocycle.insert((0, 2), vec![Expr::parse("x*exp(-(x*y + z))")?]);
    if perturb {
        cocycle.insert((1, 2), vec![Expr::var("x")]);
    }
    let total = Algebroid::make_rep_extension(&base, &action, &cocycle)?;
    Fibration::extension(&total, &base)
}
