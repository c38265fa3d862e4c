//! The smooth step `τ` used for reparametrisation and concatenation.
//!
//! `τ(t) = ∫₀ᵗ φ / ∫₀¹ φ` with `φ(s) = exp(−1/(s(1−s)))`, so `τ` is 0 below
//! 0, 1 above 1, strictly increasing in between and flat to all orders at
//! both ends.

use std::num::NonZeroUsize;
use std::sync::OnceLock;

use gauss_quad::GaussLegendre;

const PANELS: usize = 8;

fn rule() -> &'static (GaussLegendre, f64) {
    static RULE: OnceLock<(GaussLegendre, f64)> = OnceLock::new();
    RULE.get_or_init(|| {
        let gl = GaussLegendre::new(NonZeroUsize::new(24).unwrap());
        let z = integrate(&gl, 1.0);
        (gl, z)
    })
}

fn bump(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        (-1.0 / (s * (1.0 - s))).exp()
    }
}

fn integrate(gl: &GaussLegendre, t: f64) -> f64 {
    let h = t / PANELS as f64;
    (0..PANELS)
        .map(|p| gl.integrate(p as f64 * h, (p + 1) as f64 * h, bump))
        .sum()
}

pub fn tau(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let (gl, z) = rule();
    // integrate from the nearer end; the bump is symmetric
    if t <= 0.5 {
        integrate(gl, t) / z
    } else {
        1.0 - integrate(gl, 1.0 - t) / z
    }
}

pub fn tau_prime(t: f64) -> f64 {
    bump(t) / rule().1
}
