mod common;

use common::*;
use projprolong::geometry::*;
use projprolong::projective::*;
use projprolong::{Coefficient, Expr, Tensor};

fn ups3(seed: u64) -> Upsilon {
    let mut g = rng(seed);
    Upsilon::exact(3, &random_polynomial(3, &mut g))
}

#[test]
fn transformation_laws_hold() {
    let geom = random_polynomial_metric(3, 31);
    let conn = geom.levi_civita();
    let mut g = rng(32);
    // a non-closed one-form is fine for the laws
    let ups = Upsilon::from_components((0..3).map(|_| random_polynomial(3, &mut g)).collect());
    let omega = Tensor::covector((0..3).map(|_| random_polynomial(3, &mut g)).collect());
    let nu = Tensor::vector((0..3).map(|_| random_polynomial(3, &mut g)).collect());
    let pts = float_points(3, 5, 0.3, 33);
    let r1 = one_form_law_residual(&conn, &ups, &omega).unwrap();
    let r2 = vector_law_residual(&conn, &ups, &nu).unwrap();
    assert!(max_abs_over(&[&r1, &r2], &pts).unwrap() < 1e-12);
}

#[test]
fn changes_compose_additively() {
    let conn = random_polynomial_metric(3, 34).levi_civita();
    let (u1, u2) = (ups3(35), ups3(36));
    let twice = projective_change(&projective_change(&conn, &u1).unwrap(), &u2).unwrap();
    let once = projective_change(&conn, &u1.add(&u2).unwrap()).unwrap();
    let back = projective_change(&projective_change(&conn, &u1).unwrap(), &u1.neg()).unwrap();
    let pts = rational_points(3, 3, 0.25, 37);
    for p in &pts {
        assert_eq!(twice.christoffel().eval(p).unwrap(), once.christoffel().eval(p).unwrap());
        assert_eq!(back.christoffel().eval(p).unwrap(), conn.christoffel().eval(p).unwrap());
    }
}

#[test]
fn weyl_invariant_on_random_metrics() {
    for seed in [41, 42] {
        let geom = random_polynomial_metric(3, seed);
        let r = check_weyl_cotton_invariance(&geom, &ups3(seed + 100), &float_points(3, 4, 0.3, seed)).unwrap();
        assert!(r.weyl < 1e-8, "weyl {}", r.weyl);
    }
}

#[test]
fn cotton_changes_by_weyl_contraction() {
    let geom = random_polynomial_metric(3, 43);
    let (conn, pack) = CurvaturePack::derive(&geom).unwrap();
    let ups = ups3(44);
    let bar = CurvaturePack::from_connection(&projective_change(&conn, &ups).unwrap()).unwrap();
    let n = 3;
    let residual = Tensor::from_fn(n, 0, 3, |i| {
        let (a, b, c) = (i[0], i[1], i[2]);
        let mut e = bar.cotton.get(i).sub(pack.cotton.get(i));
        for d in 0..n {
            e = e.sub(&ups.get(d).mul(pack.weyl.get(&[d, a, b, c])));
        }
        e
    });
    assert!(max_abs_over(&[&residual], &float_points(3, 4, 0.3, 45)).unwrap() < 1e-9);
}

#[test]
fn cotton_invariant_where_weyl_vanishes() {
    let geom = ChartGeometry::round_sphere(2);
    let phi = expr("x0*x1 + x0^2/3", 2);
    let r = check_weyl_cotton_invariance(&geom, &Upsilon::exact(2, &phi), &float_points(2, 10, 0.8, 46)).unwrap();
    assert!(r.weyl < 1e-8 && r.cotton < 1e-7, "{r:?}");
    let r2 = check_weyl_cotton_invariance(&random_polynomial_metric(2, 47), &Upsilon::exact(2, &phi), &float_points(2, 5, 0.3, 48)).unwrap();
    assert!(r2.cotton < 1e-7, "{r2:?}");
}

#[test]
fn weyl_metric_trace_matches_einstein_deviation() {
    let geom = random_polynomial_metric(3, 49);
    let (_, pack) = CurvaturePack::derive(&geom).unwrap();
    let rel = weyl_trace_relation(&geom, &pack).unwrap();
    assert!(max_abs_over(&[&rel], &float_points(3, 4, 0.3, 50)).unwrap() < 1e-10);
}

#[test]
fn einstein_deviation_vanishes_on_sphere() {
    let e = einstein_deviation(&ChartGeometry::round_sphere(3)).unwrap();
    assert!(max_abs_over(&[&e], &float_points(3, 5, 0.8, 51)).unwrap() < 1e-10);
    let ne = einstein_deviation(&diag_metric(&["1", "1+x0^2", "1"])).unwrap();
    assert!(max_abs_over(&[&ne], &float_points(3, 5, 0.8, 52)).unwrap() > 1e-3);
}

#[test]
fn torsion_rejected() {
    let mut gamma = Tensor::<Expr>::zeros(2, 1, 2).into_components();
    gamma[1] = Expr::int(1); // Γ^0_01
    let t = Tensor::new(2, 1, 2, gamma).unwrap();
    assert!(matches!(AffineConnection::new(t), Err(GeometryError::Torsion)));
}
