use std::f64::consts::PI;
use std::time::Instant;

use algebroid::algebroid::{Algebroid, Chart, Section};
use algebroid::cubes::{Cube, TimeSections};

fn plane(half: f64) -> Algebroid {
    Algebroid::make_tangent(Chart::symmetric(&["x", "y"], half).unwrap())
}

// γ(t) = (s1 s2 (1 + t1), s1² s2) with s_i = sin(π t_i): smooth, and every
// boundary face goes to the origin.
fn collapsing_lift(grid: usize) -> Cube {
    Cube::from_fn(2, grid, 2, 2, |t| {
        let (s1, c1) = ((PI * t[0]).sin(), (PI * t[0]).cos());
        let (s2, c2) = ((PI * t[1]).sin(), (PI * t[1]).cos());
        let g = vec![s1 * s2 * (1.0 + t[0]), s1 * s1 * s2];
        let d1 = vec![PI * c1 * s2 * (1.0 + t[0]) + s1 * s2, 2.0 * PI * s1 * c1 * s2];
        let d2 = vec![PI * s1 * c2 * (1.0 + t[0]), PI * s1 * s1 * c2];
        Ok((g, vec![d1, d2]))
    })
    .unwrap()
}

#[test]
fn morphism_residual_converges_at_second_order() {
    let start = Instant::now();
    let alg = plane(3.0);
    let r64 = collapsing_lift(64).morphism_residual(&alg).unwrap().max();
    let r128 = collapsing_lift(128).morphism_residual(&alg).unwrap().max();
    let ratio = r64 / r128;
    assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} ({r64} / {r128})");
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn boundary_faces_of_collapsing_lift_sit_at_the_origin() {
    let c = collapsing_lift(16);
    for p in 1..=2 {
        for eps in 0..=1 {
            let f = c.face(p, eps).unwrap();
            assert!(f.gamma().iter().all(|v| v.abs() < 1e-15));
        }
    }
}

// α₁ = y∂x and α₂ = t1∂x + ∂y satisfy the commutation relation with the
// time correction; the flow is γ(t) = (x0 + t1 (y0 + t2), y0 + t2).
fn shear_sections() -> TimeSections {
    TimeSections::new(
        &plane(4.0),
        vec![
            Section::parse(&["y", "0"]).unwrap(),
            Section::parse(&["t1", "1"]).unwrap(),
        ],
    )
    .unwrap()
}

#[test]
fn flow_construction_matches_closed_form() {
    let start = Instant::now();
    let ts = shear_sections();
    assert!(ts.commutation_residual(50).unwrap() < 1e-12);
    let x0 = [0.3, -0.4];
    let c = ts.cube_from_sections(&x0, 256, 1e-10, None).unwrap();
    let swapped = ts.cube_from_sections(&x0, 256, 1e-10, Some(&[1, 0])).unwrap();
    let mut err = 0.0f64;
    let mut swap = 0.0f64;
    for idx in 0..c.node_count() {
        let t = c.t_of(idx);
        let want = [x0[0] + t[0] * (x0[1] + t[1]), x0[1] + t[1]];
        let g = c.gamma_at(idx);
        let h = swapped.gamma_at(idx);
        for k in 0..2 {
            err = err.max((g[k] - want[k]).abs());
            swap = swap.max((g[k] - h[k]).abs());
        }
    }
    assert!(err < 1e-8, "path error {err}");
    assert!(swap < 1e-6, "order dependence {swap}");
    let res = c.morphism_residual(&plane(4.0)).unwrap();
    assert!(res.max() < 1e-8, "{res:?}");
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn json_round_trip_is_exact() {
    let c = collapsing_lift(8);
    let back = Cube::from_json(&c.to_json()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn reversed_faces_swap() {
    let c = collapsing_lift(8).map_components(2, |g, u| Ok(vec![u[0] + g[1], u[1]])).unwrap();
    let r = c.reverse_axis(0).unwrap();
    let f0 = c.face(1, 0).unwrap();
    let r1 = r.face(1, 1).unwrap();
    assert_eq!(f0.gamma(), r1.gamma());
}

#[test]
fn concat_of_compatible_squares_converges() {
    let alg = plane(4.0);
    let joined = |grid: usize| {
        let a = collapsing_lift(grid);
        let b = a.reverse_axis(0).unwrap();
        let j = Cube::concat(&b, &a, 1, 1e-12).unwrap();
        assert_eq!(j.face(1, 0).unwrap(), a.face(1, 0).unwrap());
        j.morphism_residual(&alg).unwrap().max()
    };
    let (r1, r2) = (joined(128), joined(256));
    assert!(r1 / r2 > 3.0, "{r1} -> {r2}");
}
