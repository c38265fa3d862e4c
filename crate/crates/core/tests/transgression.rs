use std::f64::consts::PI;

use algebroid::cubes::concat_fn;
use algebroid::samples::{
    area_sphere, cotangent_fn, disk_fn, jacobi_plane, rep_extension, s2_leaf, s2_sphere,
};
use algebroid::transgression::{
    decompose_path, kernel_defect, monodromy_group, monodromy_period, transgress2_formula,
    transgress_lift, Method,
};
use algebroid::{Cube, Expr};

// Area of the stereographic disk of radius R under 4/(1+r²)² du dv, by
// composite Simpson in r.
fn s2_cap_area(eps: f64) -> f64 {
    let big_r = ((PI - eps) / 2.0).tan();
    let n = 200_000;
    let h = big_r / n as f64;
    let g = |r: f64| 2.0 * PI * r * 4.0 / (1.0 + r * r).powi(2);
    let mut s = g(0.0) + g(big_r);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn surface_oracle_matches_cap_formula() {
    let eps = 1e-3;
    assert!((s2_cap_area(eps) - 2.0 * PI * (1.0 + eps.cos())).abs() < 1e-6);
}

#[test]
fn lift_and_formula_recover_the_enclosed_area() {
    let f = jacobi_plane(Expr::one(), 3.0).unwrap();
    let s = area_sphere(128, 1.0, [0.1, -0.2]).unwrap();
    let formula = transgress2_formula(&f, &s, &[]).unwrap();
    let (lift, face) = transgress_lift(&f, &s, &[]).unwrap();
    assert_eq!(formula.method, Method::Formula);
    assert_eq!(lift.method, Method::Lift);
    assert!((formula.value[0] - PI).abs() < 1e-2, "{formula:?}");
    assert!((lift.value[0] - PI).abs() < 1e-2, "{lift:?}");
    assert!((formula.value[0] - lift.value[0]).abs() < 1e-2f64.max(3.0 * formula.estimated_error));
    assert!(formula.estimated_error < 1e-2);
    assert_eq!(face.order(), 1);
    assert!(face.gamma().iter().all(|v| v.is_finite()));
}

#[test]
fn value_scales_with_the_bivector() {
    let f = jacobi_plane(Expr::parse("2").unwrap(), 3.0).unwrap();
    let f1 = jacobi_plane(Expr::one(), 3.0).unwrap();
    let s1 = area_sphere(64, 0.5, [0.0, 0.0]).unwrap();
    let v1 = transgress2_formula(&f1, &s1, &[]).unwrap().value[0];
    // same disk, components halved to stay a morphism for the doubled bivector
    let s = Cube::from_fn(2, 64, 2, 2, |t| {
        let (g, c) = cotangent_fn(disk_fn(0.5, [0.0, 0.0]))(t)?;
        Ok((g, c.into_iter().map(|v| v.iter().map(|x| 0.5 * x).collect()).collect()))
    })
    .unwrap();
    let v = transgress2_formula(&f, &s, &[]).unwrap().value[0];
    assert!((v - 0.5 * v1).abs() < 1e-12, "{v} vs {v1}");
}

#[test]
fn transgression_is_additive_and_odd() {
    let f = jacobi_plane(Expr::one(), 3.0).unwrap();
    let x0 = [0.1, -0.2];
    let single = area_sphere(128, 1.0, x0).unwrap();
    let v = transgress2_formula(&f, &single, &[]).unwrap().value[0];
    for axis in [1, 2] {
        let gen = cotangent_fn(disk_fn(1.0, x0));
        let gen2 = cotangent_fn(disk_fn(1.0, x0));
        let doubled = Cube::from_fn(2, 128, 2, 2, concat_fn(gen, gen2, axis)).unwrap();
        let w = transgress2_formula(&f, &doubled, &[]).unwrap().value[0];
        assert!((w - 2.0 * v).abs() < 1e-2, "axis {axis}: {w} vs {}", 2.0 * v);
    }
    for axis in [0, 1] {
        let r = single.reverse_axis(axis).unwrap();
        let w = transgress2_formula(&f, &r, &[]).unwrap().value[0];
        assert_eq!(w, -v);
    }
}

#[test]
fn splitting_change_by_exact_term_keeps_the_value() {
    let f = jacobi_plane(Expr::one(), 3.0).unwrap();
    // δ · d_A(xy) for the cotangent algebroid, vanishing at the basepoint
    let g = f
        .perturbed(&vec![vec![Expr::parse("0.05*(x - 0.1)").unwrap(), Expr::parse("-0.05*(y + 0.2)").unwrap()]])
        .unwrap();
    let s = area_sphere(128, 1.0, [0.1, -0.2]).unwrap();
    let a = transgress2_formula(&f, &s, &[]).unwrap();
    let b = transgress2_formula(&g, &s, &[]).unwrap();
    let tol = 2.0 * a.estimated_error.max(b.estimated_error);
    assert!((a.value[0] - b.value[0]).abs() < tol, "{} vs {} (tol {tol})", a.value[0], b.value[0]);
}

#[test]
fn rep_extension_sphere_weights_area_by_transport() {
    let f = rep_extension(false).unwrap();
    let (x0, z, rho) = ([0.1, -0.2], 0.2, 0.5);
    let s = Cube::from_fn(2, 128, 3, 3, |t| {
        let (g, c) = disk_fn(rho, x0)(t)?;
        let lift = |v: &Vec<f64>| vec![v[0], v[1], 0.0];
        Ok((vec![g[0], g[1], z], c.iter().map(lift).collect()))
    })
    .unwrap();
    let want = (-(x0[0] * x0[1] + z)).exp() * PI * rho * rho;
    let formula = transgress2_formula(&f, &s, &[]).unwrap();
    let (lift, face) = transgress_lift(&f, &s, &[]).unwrap();
    assert!((formula.value[0] - want).abs() < 2e-3, "{} vs {want}", formula.value[0]);
    assert!((lift.value[0] - want).abs() < 2e-3, "{} vs {want}", lift.value[0]);
    assert_eq!(face.rank(), 1);
    for idx in 0..face.node_count() {
        let g = face.gamma_at(idx);
        assert!((g[0] - x0[0]).abs() < 1e-12 && (g[1] - x0[1]).abs() < 1e-12);
    }
}

#[test]
fn s2_period_matches_surface_integral() {
    let f = s2_leaf(500.0).unwrap();
    let eps = 1e-2;
    let s = s2_sphere(256, eps).unwrap();
    let p = monodromy_period(&f, &s).unwrap();
    let want = s2_cap_area(eps);
    assert!((p.value[0] - want).abs() < 2e-2, "{p:?} vs {want}");
    assert!(p.sphere_residual.is_finite());
}

#[test]
fn monodromy_group_separates_incommensurable_periods() {
    let f = jacobi_plane(Expr::one(), 4.0).unwrap();
    let x0 = [0.0, 0.0];
    let a = area_sphere(256, 2.0, x0).unwrap();
    let b = area_sphere(256, 2.0 * 2f64.powf(0.25), x0).unwrap();
    let gen = || cotangent_fn(disk_fn(2.0, x0));
    let aa = Cube::from_fn(2, 256, 2, 2, concat_fn(gen(), gen(), 1)).unwrap();
    let rep = monodromy_group(
        &f,
        &[("a".into(), a), ("b".into(), b), ("aa".into(), aa)],
    )
    .unwrap();
    assert_eq!(rep.labels, vec!["a", "b", "aa"]);
    assert_eq!(rep.lattice_rank, 2, "{rep:?}");
    assert!(!rep.discrete);
    let pair = |i: &str, j: &str| {
        rep.pairs
            .iter()
            .find(|p| p.first == i && p.second == j)
            .unwrap_or_else(|| panic!("pair {i} {j}"))
    };
    assert!(!pair("a", "b").commensurate);
    assert!(pair("a", "aa").commensurate);
    assert_eq!(pair("a", "aa").rational, Some((2, 1)));
}

#[test]
fn decomposition_reconstructs_the_path() {
    let f = jacobi_plane(Expr::one(), 4.0).unwrap();
    let n = 256;
    let a = Cube::from_fn(1, n, 3, 2, |t| {
        let s = t[0];
        Ok((vec![0.3 - s * s / 2.0, -0.2 + s], vec![vec![0.5 + (3.0 * s).sin(), 1.0, s]]))
    })
    .unwrap();
    let d = decompose_path(&f, &a).unwrap();
    assert!(d.witness.homotopy_boundary_defect() < 1e-9);
    assert!(d.witness.is_homotopy(f.total(), 2e-2));
    // kernel path stays in the fiber over the start point
    assert!(kernel_defect(&f, &d.k_path).unwrap() < 1e-9);
    for idx in 0..d.k_path.node_count() {
        let g = d.k_path.gamma_at(idx);
        assert!((g[0] - 0.3).abs() < 1e-12 && (g[1] + 0.2).abs() < 1e-12);
    }
    let r = d.reconstruction(1e-6).unwrap();
    for (eps, at) in [(0, 0), (1, n)] {
        let (p, q) = (r.gamma_at(at), a.gamma_at(at));
        let gap = p.iter().zip(q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-6, "endpoint {eps}: {gap}");
    }
}
