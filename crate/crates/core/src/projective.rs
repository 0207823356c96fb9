//! Projective changes of connection and the projectively invariant parts of
//! curvature.
//!
//! A change by a one-form `Υ_a` acts on Christoffel symbols as
//! `Γ̄^c_{ab} = Γ^c_{ab} + δ^c_a Υ_b + δ^c_b Υ_a`. On one-forms this gives
//! `∇̄_a ω_b = ∇_a ω_b − Υ_a ω_b − Υ_b ω_a`; the vector law
//! `∇̄_a ν^b = ∇_a ν^b + Υ_a ν^b + δ_a^b Υ_c ν^c` follows from it by Leibniz.

use crate::expr::Expr;
use crate::geometry::{
    covariant_derivative, max_abs_diff, AffineConnection, ChartGeometry, CurvaturePack, DiffCache, GeometryError, Result,
};
use crate::scalar::{Coefficient, Scalar};
use crate::tensor::{Tensor, TensorField};

/// A one-form `Υ_a`.
#[derive(Debug, Clone)]
pub struct Upsilon {
    form: TensorField,
}

impl Upsilon {
    pub fn new(form: TensorField) -> Result<Self> {
        form.expect_valence(0, 1)?;
        Ok(Upsilon { form })
    }

    pub fn from_components(components: Vec<Expr>) -> Self {
        Upsilon { form: Tensor::covector(components) }
    }

    /// `Υ = dφ`.
    pub fn exact(dim: usize, phi: &Expr) -> Self {
        let cache = DiffCache::default();
        Upsilon { form: Tensor::from_fn(dim, 0, 1, |i| cache.diff(phi, i[0])) }
    }

    pub fn zero(dim: usize) -> Self {
        Upsilon { form: Tensor::zeros(dim, 0, 1) }
    }

    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn form(&self) -> &TensorField {
        &self.form
    }

    pub fn get(&self, a: usize) -> &Expr {
        self.form.get(&[a])
    }

    pub fn add(&self, other: &Upsilon) -> Result<Upsilon> {
        Ok(Upsilon { form: self.form.add(&other.form)? })
    }

    pub fn neg(&self) -> Upsilon {
        Upsilon { form: self.form.neg() }
    }
}

/// `Γ̄^c_{ab} = Γ^c_{ab} + δ^c_a Υ_b + δ^c_b Υ_a`.
pub fn projective_change(conn: &AffineConnection, ups: &Upsilon) -> Result<AffineConnection> {
    let n = conn.dim();
    if ups.dim() != n {
        return Err(GeometryError::DimensionMismatch(n, ups.dim()));
    }
    let gamma = conn.christoffel();
    let changed = Tensor::from_fn(n, 1, 2, |i| {
        let (c, a, b) = (i[0], i[1], i[2]);
        let mut terms = vec![gamma.get(i).clone()];
        if c == a {
            terms.push(ups.get(b).clone());
        }
        if c == b {
            terms.push(ups.get(a).clone());
        }
        Expr::sum(terms)
    });
    AffineConnection::new(changed)
}

/// Max-abs differences of Weyl and Cotton between the Levi-Civita connection
/// and its projective change by `ups`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct InvarianceReport {
    pub weyl: f64,
    pub cotton: f64,
}

pub fn check_weyl_cotton_invariance<S: Scalar>(geom: &ChartGeometry, ups: &Upsilon, points: &[Vec<S>]) -> Result<InvarianceReport> {
    let (conn, pack) = CurvaturePack::derive(geom)?;
    let changed = projective_change(&conn, ups)?;
    let bar = CurvaturePack::from_connection(&changed)?;
    Ok(InvarianceReport {
        weyl: max_abs_diff(&pack.weyl, &bar.weyl, points)?,
        cotton: max_abs_diff(&pack.cotton, &bar.cotton, points)?,
    })
}

/// `E_ab = R_ab − (1/n) g_ab R`.
pub fn einstein_deviation(geom: &ChartGeometry) -> Result<TensorField> {
    let (_, pack) = CurvaturePack::derive(geom)?;
    Ok(einstein_deviation_from(geom, &pack))
}

pub fn einstein_deviation_from(geom: &ChartGeometry, pack: &CurvaturePack) -> TensorField {
    let n = geom.dim();
    let scalar = pack.scalar.as_ref().expect("pack derived from a metric").scalar_value().clone();
    Tensor::from_fn(n, 0, 2, |i| {
        pack.ricci.get(i).sub(&geom.metric().get(i).mul(&scalar).scale(1, n as i64))
    })
}

/// `W_ab^c_d g^{bd} − (n/(n−1)) g^{cd} E_ad`, stored `[c][a]`.
pub fn weyl_trace_relation(geom: &ChartGeometry, pack: &CurvaturePack) -> Result<TensorField> {
    let n = geom.dim();
    let ginv = geom.inverse();
    let e = einstein_deviation_from(geom, pack);
    Ok(Tensor::from_fn(n, 1, 1, |i| {
        let (c, a) = (i[0], i[1]);
        let mut terms = Vec::new();
        for b in 0..n {
            for d in 0..n {
                terms.push(pack.weyl.get(&[c, a, b, d]).mul(ginv.get(&[b, d])));
            }
        }
        for d in 0..n {
            terms.push(ginv.get(&[c, d]).mul(e.get(&[a, d])).scale(-(n as i64), n as i64 - 1));
        }
        Expr::sum(terms)
    }))
}

/// `∇̄_a ω_b − (∇_a ω_b − Υ_a ω_b − Υ_b ω_a)` for a one-form `ω`.
pub fn one_form_law_residual(conn: &AffineConnection, ups: &Upsilon, omega: &TensorField) -> Result<TensorField> {
    let bar = projective_change(conn, ups)?;
    let lhs = covariant_derivative(&bar, omega)?;
    let rhs = covariant_derivative(conn, omega)?;
    Ok(Tensor::from_fn(conn.dim(), 0, 2, |i| {
        let (a, b) = (i[0], i[1]);
        let expected = rhs
            .get(i)
            .sub(&ups.get(a).mul(omega.get(&[b])))
            .sub(&ups.get(b).mul(omega.get(&[a])));
        lhs.get(i).sub(&expected)
    }))
}

/// `∇̄_a ν^b − (∇_a ν^b + Υ_a ν^b + δ_a^b Υ_c ν^c)`, stored `[b][a]`.
pub fn vector_law_residual(conn: &AffineConnection, ups: &Upsilon, nu: &TensorField) -> Result<TensorField> {
    let n = conn.dim();
    let bar = projective_change(conn, ups)?;
    let lhs = covariant_derivative(&bar, nu)?;
    let rhs = covariant_derivative(conn, nu)?;
    let pairing = Expr::sum((0..n).map(|c| ups.get(c).mul(nu.get(&[c]))).collect::<Vec<_>>());
    Ok(Tensor::from_fn(n, 1, 1, |i| {
        let (b, a) = (i[0], i[1]);
        let mut expected = rhs.get(i).add(&ups.get(a).mul(nu.get(&[b])));
        if a == b {
            expected = expected.add(&pairing);
        }
        lhs.get(i).sub(&expected)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::geometry::torsion;
    use num_rational::BigRational;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn zero_change_is_identity() {
        let conn = ChartGeometry::round_sphere(2).levi_civita();
        let bar = projective_change(&conn, &Upsilon::zero(2)).unwrap();
        let p = [q(1, 3), q(-2, 5)];
        assert_eq!(bar.christoffel().eval(&p).unwrap(), conn.christoffel().eval(&p).unwrap());
    }

    #[test]
    fn change_stays_torsion_free() {
        let conn = ChartGeometry::flat(3).levi_civita();
        let ups = Upsilon::from_components(vec![parse("x1", 3).unwrap(), parse("x0^2", 3).unwrap(), Expr::int(2)]);
        let bar = projective_change(&conn, &ups).unwrap();
        let t = torsion(&bar).eval(&[q(1, 2), q(3, 1), q(-1, 7)]).unwrap();
        assert!(t.components().iter().all(Coefficient::is_zero));
    }

    #[test]
    fn exact_upsilon_is_gradient() {
        let phi = parse("x0^2 * x1", 2).unwrap();
        let ups = Upsilon::exact(2, &phi);
        assert_eq!(ups.get(0).eval(&[q(3, 1), q(2, 1)]).unwrap(), q(12, 1));
        assert_eq!(ups.get(1).eval(&[q(3, 1), q(2, 1)]).unwrap(), q(9, 1));
    }

    #[test]
    fn flat_einstein_deviation_vanishes() {
        let e = einstein_deviation(&ChartGeometry::flat(3)).unwrap();
        assert!(e.is_structurally_zero());
    }
}
