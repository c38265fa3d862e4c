use std::collections::BTreeMap;
use std::time::Instant;

use algebroid::algebroid::{Algebroid, Chart, Section};
use algebroid::samples::{jacobi_plane, rep_extension};
use algebroid::{Cube, Expr, Fibration};

fn phi(p: &[f64]) -> f64 {
    p[0] * p[1] + p[2]
}

#[test]
fn connection_identities_hold_and_detect_non_closed_cocycle() {
    let start = Instant::now();
    let good = rep_extension(false).unwrap().identity_residuals(200, 1e-8).unwrap();
    assert!(good.passed, "{good:?}");
    assert!(good.curvature_identity < 1e-8 && good.bianchi < 1e-8);
    let bad = rep_extension(true).unwrap().identity_residuals(200, 1e-8).unwrap();
    assert!(bad.bianchi > 1e-3, "{bad:?}");
    assert!(!bad.passed);
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn curvature_of_rep_extension_is_the_cocycle() {
    let f = rep_extension(false).unwrap();
    let w = f.curvature().unwrap();
    let env: BTreeMap<String, f64> =
        [("x", 0.3), ("y", -0.6), ("z", 0.2)].iter().map(|(k, v)| (k.to_string(), *v)).collect();
    let e = (-phi(&[0.3, -0.6, 0.2])).exp();
    let cases = [((0, 1), e), ((0, 2), 0.3 * e), ((1, 2), 0.0)];
    for ((i, j), want) in cases {
        let got = w.get(i, j)[0].eval(&env).unwrap();
        assert!((got - want).abs() < 1e-13, "ω({i},{j}) = {got}, want {want}");
        let back = w.get(j, i)[0].eval(&env).unwrap();
        assert!((back + want).abs() < 1e-13);
    }
}

#[test]
fn jacobi_extension_curvature_tracks_the_bivector() {
    let f = jacobi_plane(Expr::parse("1 + x^2").unwrap(), 2.0).unwrap();
    assert!(f.validate(50, 1e-9).unwrap().passed);
    let w = f.curvature().unwrap();
    assert!(!w.is_zero());
    let env: BTreeMap<String, f64> = [("x".to_string(), 0.5), ("y".to_string(), 1.0)].into();
    let v = w.get(0, 1)[0].eval(&env).unwrap();
    assert!((v.abs() - 1.25).abs() < 1e-13, "{v}");
}

#[test]
fn product_fibration_has_no_curvature_and_trivial_derivative() {
    let line = Algebroid::make_tangent(Chart::symmetric(&["x"], 1.0).unwrap());
    let g = Algebroid::so3(Chart::point());
    let f = Fibration::product(&line, &g).unwrap();
    assert!(f.validate(20, 1e-12).unwrap().passed);
    assert!(f.curvature().unwrap().is_zero());
    let (abelian, central) = f.centrality_residual(20).unwrap();
    assert!(abelian > 0.5 && central == 0.0);
}

#[test]
fn curvature_changes_by_the_covariant_differential() {
    let f = jacobi_plane(Expr::one(), 2.0).unwrap();
    let exact = vec![vec![Expr::parse("0.1*x").unwrap(), Expr::parse("-0.1*y").unwrap()]];
    let other = vec![vec![Expr::parse("0.2*y^2").unwrap(), Expr::parse("sin(x)").unwrap()]];
    for delta in [exact, other] {
        assert!(f.curvature_change_residual(&delta, 50).unwrap() < 1e-10);
    }
}

#[test]
fn transport_in_flat_line_bundle_is_exponential() {
    let f = rep_extension(false).unwrap();
    let path = |t: f64| [0.5 * t - 0.2, 0.3 * (2.0 * t).sin(), 0.4 * t * t];
    let c = Cube::from_fn(1, 200, 3, 3, |t| {
        let s = t[0];
        let v = vec![0.5, 0.6 * (2.0 * s).cos(), 0.8 * s];
        Ok((path(s).to_vec(), vec![v]))
    })
    .unwrap();
    let got = f.parallel_transport(&c, &[1.0], &[]).unwrap();
    let want = (phi(&path(1.0)) - phi(&path(0.0))).exp();
    assert!((got[0] - want).abs() < 1e-8, "{} vs {want}", got[0]);
}

#[test]
fn horizontal_sections_project_back() {
    let f = jacobi_plane(Expr::parse("x").unwrap(), 2.0).unwrap();
    let alpha = Section::parse(&["y", "x*y"]).unwrap();
    let h = f.horizontal(&alpha);
    let k = f.kernel_section(&[Expr::parse("x - y").unwrap()]);
    let lifted = h.add(&k);
    let coords = f.kernel_coords(&lifted.sub(&h)).unwrap();
    let env: BTreeMap<String, f64> = [("x".to_string(), 0.7), ("y".to_string(), 0.2)].into();
    assert!((coords[0].eval(&env).unwrap() - 0.5).abs() < 1e-13);
    assert!(f.kernel_coords(&h).is_err());
}
