//! Tractor-type bundles over a chart and their connections.
//!
//! Every bundle here is a direct sum of tensor bundles, written as a tuple of
//! slots in a fixed splitting. Density weights are trivialised (the
//! connections used are special), so every slot is an ordinary tensor field.
//!
//! | section | slots | rank |
//! |---|---|---|
//! | [`TractorSection`] | `(ν^b, ρ)` | `n+1` |
//! | [`CotractorSection`] | `(σ, μ_a)` | `n+1` |
//! | [`S2TractorSection`] | `(t^{bc}, ν^c, ρ)` | `n(n+1)/2 + n + 1` |
//! | [`S2CotractorSection`] | `(β_{bc}, μ_c, σ)` | `n(n+1)/2 + n + 1` |
//! | [`SkewSection`] | `(β^{bc}, ν^b, ρ)` | `n(n−1)/2 + n + 1` |
//!
//! The same tractor slot pair is reused for the prolongation of
//! `tf(∇_a ν^c) = 0`, where the scalar slot holds `μ`.
//!
//! Connections return one section per direction `a` (the "indexed family").
//! [`BundleConnection`] flattens sections to coefficient vectors so that
//! transport can treat all bundles alike; symmetric and skew slots keep only
//! the components with `b ≤ c` (respectively `b < c`).

use std::sync::Arc;

use serde::Serialize;

use crate::expr::Expr;
use crate::geometry::{
    covariant_derivative, max_abs_over, riemann, AffineConnection, ChartGeometry, CurvaturePack, GeometryError, Result,
};
use crate::projective::Upsilon;
use crate::scalar::{Coefficient, Scalar};
use crate::tensor::{Symmetry, Tensor, TensorError, TensorField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BundleKind {
    Tractor,
    Cotractor,
    S2Tractor,
    S2Cotractor,
    Skew,
}

impl BundleKind {
    pub fn rank(self, n: usize) -> usize {
        match self {
            BundleKind::Tractor | BundleKind::Cotractor => n + 1,
            BundleKind::S2Tractor | BundleKind::S2Cotractor => n * (n + 1) / 2 + n + 1,
            BundleKind::Skew => n * n.saturating_sub(1) / 2 + n + 1,
        }
    }

    /// Converts a flat coefficient vector at a point to its JSON form.
    pub fn section_json<S: Scalar>(self, n: usize, flat: &[S]) -> Result<serde_json::Value> {
        let v = match self {
            BundleKind::Tractor => serde_json::to_value(TractorSection::from_flat(n, flat)?),
            BundleKind::Cotractor => serde_json::to_value(CotractorSection::from_flat(n, flat)?),
            BundleKind::S2Tractor => serde_json::to_value(S2TractorSection::from_flat(n, flat)?),
            BundleKind::S2Cotractor => serde_json::to_value(S2CotractorSection::from_flat(n, flat)?),
            BundleKind::Skew => serde_json::to_value(SkewSection::from_flat(n, flat)?),
        };
        Ok(v.expect("sections serialise"))
    }
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(GeometryError::Tensor(TensorError::ComponentCount { expected, got }))
    }
}

fn sym_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |b| (b..n).map(move |c| (b, c)))
}

fn skew_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |b| (b + 1..n).map(move |c| (b, c)))
}

fn sym_from_flat<T: Coefficient>(n: usize, upper: usize, flat: &[T]) -> Tensor<T> {
    let mut data = vec![T::zero(); n * n];
    for (k, (b, c)) in sym_pairs(n).enumerate() {
        data[b * n + c] = flat[k].clone();
        data[c * n + b] = flat[k].clone();
    }
    Tensor::new(n, upper, 2 - upper, data).expect("n x n")
}

fn skew_from_flat<T: Coefficient>(n: usize, flat: &[T]) -> Tensor<T> {
    let mut data = vec![T::zero(); n * n];
    for (k, (b, c)) in skew_pairs(n).enumerate() {
        data[b * n + c] = flat[k].clone();
        data[c * n + b] = flat[k].neg();
    }
    Tensor::new(n, 2, 0, data).expect("n x n")
}

/// Tractor section `(ν^b, ρ)`.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "Tensor<T>: Serialize")]
pub struct TractorSection<T = Expr> {
    pub nu: Tensor<T>,
    pub rho: Tensor<T>,
}

/// Cotractor section `(σ, μ_a)`.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "Tensor<T>: Serialize")]
pub struct CotractorSection<T = Expr> {
    pub sigma: Tensor<T>,
    pub mu: Tensor<T>,
}

/// Section `(t^{bc}, ν^c, ρ)` of the symmetric square of the tractor bundle.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "Tensor<T>: Serialize")]
pub struct S2TractorSection<T = Expr> {
    pub t: Tensor<T>,
    pub nu: Tensor<T>,
    pub rho: Tensor<T>,
}

/// Section `(β_{bc}, μ_c, σ)` of the symmetric square of the cotractor bundle.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "Tensor<T>: Serialize")]
pub struct S2CotractorSection<T = Expr> {
    pub beta: Tensor<T>,
    pub mu: Tensor<T>,
    pub sigma: Tensor<T>,
}

/// Section `(β^{bc}, ν^b, ρ)` with `β` skew.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "Tensor<T>: Serialize")]
pub struct SkewSection<T = Expr> {
    pub beta: Tensor<T>,
    pub nu: Tensor<T>,
    pub rho: Tensor<T>,
}

impl<T: Coefficient> TractorSection<T> {
    pub fn new(nu: Tensor<T>, rho: Tensor<T>) -> Result<Self> {
        nu.expect_valence(1, 0)?;
        rho.expect_valence(0, 0)?;
        same_dim(&[&nu, &rho])?;
        Ok(TractorSection { nu, rho })
    }

    pub fn zero(n: usize) -> Self {
        TractorSection { nu: Tensor::zeros(n, 1, 0), rho: Tensor::scalar(n, T::zero()) }
    }

    pub fn dim(&self) -> usize {
        self.nu.dim()
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut v = self.nu.components().to_vec();
        v.push(self.rho.scalar_value().clone());
        v
    }

    pub fn from_flat(n: usize, flat: &[T]) -> Result<Self> {
        check_len(n + 1, flat.len())?;
        Ok(TractorSection { nu: Tensor::vector(flat[..n].to_vec()), rho: Tensor::scalar(n, flat[n].clone()) })
    }
}

impl<T: Coefficient> CotractorSection<T> {
    pub fn new(sigma: Tensor<T>, mu: Tensor<T>) -> Result<Self> {
        sigma.expect_valence(0, 0)?;
        mu.expect_valence(0, 1)?;
        same_dim(&[&sigma, &mu])?;
        Ok(CotractorSection { sigma, mu })
    }

    pub fn zero(n: usize) -> Self {
        CotractorSection { sigma: Tensor::scalar(n, T::zero()), mu: Tensor::zeros(n, 0, 1) }
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn to_flat(&self) -> Vec<T> {
        let mut v = vec![self.sigma.scalar_value().clone()];
        v.extend_from_slice(self.mu.components());
        v
    }

    pub fn from_flat(n: usize, flat: &[T]) -> Result<Self> {
        check_len(n + 1, flat.len())?;
        Ok(CotractorSection { sigma: Tensor::scalar(n, flat[0].clone()), mu: Tensor::covector(flat[1..].to_vec()) })
    }
}

impl<T: Coefficient> S2TractorSection<T> {
    pub fn new(t: Tensor<T>, nu: Tensor<T>, rho: Tensor<T>) -> Result<Self> {
        t.expect_valence(2, 0)?;
        nu.expect_valence(1, 0)?;
        rho.expect_valence(0, 0)?;
        same_dim(&[&t, &nu, &rho])?;
        let t = t.with_symmetry(Symmetry::symmetric(0, 1))?;
        Ok(S2TractorSection { t, nu, rho })
    }

    pub fn zero(n: usize) -> Self {
        S2TractorSection { t: Tensor::zeros(n, 2, 0), nu: Tensor::zeros(n, 1, 0), rho: Tensor::scalar(n, T::zero()) }
    }

    pub fn dim(&self) -> usize {
        self.nu.dim()
    }

    pub fn to_flat(&self) -> Vec<T> {
        let n = self.dim();
        let mut v: Vec<T> = sym_pairs(n).map(|(b, c)| self.t.get(&[b, c]).clone()).collect();
        v.extend_from_slice(self.nu.components());
        v.push(self.rho.scalar_value().clone());
        v
    }

    pub fn from_flat(n: usize, flat: &[T]) -> Result<Self> {
        check_len(BundleKind::S2Tractor.rank(n), flat.len())?;
        let m = n * (n + 1) / 2;
        Ok(S2TractorSection {
            t: sym_from_flat(n, 2, &flat[..m]),
            nu: Tensor::vector(flat[m..m + n].to_vec()),
            rho: Tensor::scalar(n, flat[m + n].clone()),
        })
    }
}

impl<T: Coefficient> S2CotractorSection<T> {
    pub fn new(beta: Tensor<T>, mu: Tensor<T>, sigma: Tensor<T>) -> Result<Self> {
        beta.expect_valence(0, 2)?;
        mu.expect_valence(0, 1)?;
        sigma.expect_valence(0, 0)?;
        same_dim(&[&beta, &mu, &sigma])?;
        let beta = beta.with_symmetry(Symmetry::symmetric(0, 1))?;
        Ok(S2CotractorSection { beta, mu, sigma })
    }

    pub fn zero(n: usize) -> Self {
        S2CotractorSection { beta: Tensor::zeros(n, 0, 2), mu: Tensor::zeros(n, 0, 1), sigma: Tensor::scalar(n, T::zero()) }
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn to_flat(&self) -> Vec<T> {
        let n = self.dim();
        let mut v: Vec<T> = sym_pairs(n).map(|(b, c)| self.beta.get(&[b, c]).clone()).collect();
        v.extend_from_slice(self.mu.components());
        v.push(self.sigma.scalar_value().clone());
        v
    }

    pub fn from_flat(n: usize, flat: &[T]) -> Result<Self> {
        check_len(BundleKind::S2Cotractor.rank(n), flat.len())?;
        let m = n * (n + 1) / 2;
        Ok(S2CotractorSection {
            beta: sym_from_flat(n, 0, &flat[..m]),
            mu: Tensor::covector(flat[m..m + n].to_vec()),
            sigma: Tensor::scalar(n, flat[m + n].clone()),
        })
    }
}

impl<T: Coefficient> SkewSection<T> {
    pub fn new(beta: Tensor<T>, nu: Tensor<T>, rho: Tensor<T>) -> Result<Self> {
        beta.expect_valence(2, 0)?;
        nu.expect_valence(1, 0)?;
        rho.expect_valence(0, 0)?;
        same_dim(&[&beta, &nu, &rho])?;
        let beta = beta.with_symmetry(Symmetry::skew(0, 1))?;
        Ok(SkewSection { beta, nu, rho })
    }

    pub fn dim(&self) -> usize {
        self.nu.dim()
    }

    pub fn to_flat(&self) -> Vec<T> {
        let n = self.dim();
        let mut v: Vec<T> = skew_pairs(n).map(|(b, c)| self.beta.get(&[b, c]).clone()).collect();
        v.extend_from_slice(self.nu.components());
        v.push(self.rho.scalar_value().clone());
        v
    }

    pub fn from_flat(n: usize, flat: &[T]) -> Result<Self> {
        check_len(BundleKind::Skew.rank(n), flat.len())?;
        let m = n * n.saturating_sub(1) / 2;
        Ok(SkewSection {
            beta: skew_from_flat(n, &flat[..m]),
            nu: Tensor::vector(flat[m..m + n].to_vec()),
            rho: Tensor::scalar(n, flat[m + n].clone()),
        })
    }
}

fn same_dim<T>(parts: &[&Tensor<T>]) -> Result<()> {
    let n = parts[0].dim();
    for p in parts {
        if p.dim() != n {
            return Err(GeometryError::DimensionMismatch(n, p.dim()));
        }
    }
    Ok(())
}

macro_rules! eval_section {
    ($ty:ident { $($f:ident),* }) => {
        impl $ty<Expr> {
            /// Evaluates every slot at `point`.
            pub fn eval<S: Scalar>(&self, point: &[S]) -> Result<$ty<S>> {
                Ok($ty { $($f: self.$f.eval(point)?),* })
            }
        }
    };
}

eval_section!(TractorSection { nu, rho });
eval_section!(CotractorSection { sigma, mu });
eval_section!(S2TractorSection { t, nu, rho });
eval_section!(S2CotractorSection { beta, mu, sigma });
eval_section!(SkewSection { beta, nu, rho });

/// A torsion-free connection together with its curvature, which is all the
/// tractor-type connections need.
#[derive(Debug, Clone)]
pub struct ProjectiveContext {
    conn: AffineConnection,
    pack: Arc<CurvaturePack>,
}

impl ProjectiveContext {
    pub fn from_geometry(geom: &ChartGeometry) -> Result<Self> {
        let (conn, pack) = CurvaturePack::derive(geom)?;
        Ok(ProjectiveContext { conn, pack: Arc::new(pack) })
    }

    pub fn from_connection(conn: AffineConnection) -> Result<Self> {
        let pack = CurvaturePack::from_connection(&conn)?;
        Ok(ProjectiveContext { conn, pack: Arc::new(pack) })
    }

    pub fn dim(&self) -> usize {
        self.conn.dim()
    }

    pub fn connection(&self) -> &AffineConnection {
        &self.conn
    }

    pub fn pack(&self) -> &CurvaturePack {
        &self.pack
    }

    fn nabla(&self, t: &TensorField) -> Result<TensorField> {
        covariant_derivative(&self.conn, t)
    }

    fn p(&self, a: usize, b: usize) -> &Expr {
        self.pack.schouten.get(&[a, b])
    }

    fn w(&self, c: usize, a: usize, b: usize, d: usize) -> &Expr {
        self.pack.weyl.get(&[c, a, b, d])
    }

    fn cot(&self, a: usize, b: usize, c: usize) -> &Expr {
        self.pack.cotton.get(&[a, b, c])
    }
}

fn sum(terms: Vec<Expr>) -> Expr {
    Expr::sum(terms.into_iter().filter(|t| !t.is_const_zero()).collect::<Vec<_>>())
}

/// Tractor connection: `(∇_a ν^b + ρ δ_a^b, ∇_a ρ − P_ab ν^b)`.
pub fn tractor_nabla(ctx: &ProjectiveContext, s: &TractorSection) -> Result<Vec<TractorSection>> {
    let n = ctx.dim();
    let dnu = ctx.nabla(&s.nu)?;
    let drho = ctx.nabla(&s.rho)?;
    let rho = s.rho.scalar_value();
    Ok((0..n)
        .map(|a| {
            let top = Tensor::from_fn(n, 1, 0, |i| {
                let b = i[0];
                let mut terms = vec![dnu.get(&[b, a]).clone()];
                if a == b {
                    terms.push(rho.clone());
                }
                sum(terms)
            });
            let mut bottom = vec![drho.get(&[a]).clone()];
            for b in 0..n {
                bottom.push(ctx.p(a, b).mul(s.nu.get(&[b])).neg());
            }
            TractorSection { nu: top, rho: Tensor::scalar(n, sum(bottom)) }
        })
        .collect())
}

/// Cotractor connection: `(∇_a σ − μ_a, ∇_a μ_b + P_ab σ)`.
pub fn cotractor_nabla(ctx: &ProjectiveContext, s: &CotractorSection) -> Result<Vec<CotractorSection>> {
    let n = ctx.dim();
    let dsigma = ctx.nabla(&s.sigma)?;
    let dmu = ctx.nabla(&s.mu)?;
    let sigma = s.sigma.scalar_value();
    Ok((0..n)
        .map(|a| CotractorSection {
            sigma: Tensor::scalar(n, dsigma.get(&[a]).sub(s.mu.get(&[a]))),
            mu: Tensor::from_fn(n, 0, 1, |i| dmu.get(&[a, i[0]]).add(&ctx.p(a, i[0]).mul(sigma))),
        })
        .collect())
}

/// Change of splitting `(σ, μ_a) ↦ (σ, μ_a + Υ_a σ)`.
pub fn splitting_transform(s: &CotractorSection, ups: &Upsilon) -> Result<CotractorSection> {
    let n = s.dim();
    if ups.dim() != n {
        return Err(GeometryError::DimensionMismatch(n, ups.dim()));
    }
    let sigma = s.sigma.scalar_value();
    Ok(CotractorSection {
        sigma: s.sigma.clone(),
        mu: Tensor::from_fn(n, 0, 1, |i| s.mu.get(i).add(&ups.get(i[0]).mul(sigma))),
    })
}

/// Pairing `σ ρ + μ_b ν^b` of a cotractor with a tractor.
pub fn tractor_pairing(u: &CotractorSection, v: &TractorSection) -> Expr {
    let n = u.dim();
    let mut terms = vec![u.sigma.scalar_value().mul(v.rho.scalar_value())];
    for b in 0..n {
        terms.push(u.mu.get(&[b]).mul(v.nu.get(&[b])));
    }
    sum(terms)
}

/// Pairing `β_bc t^{bc} + μ_c ν^c + σ ρ`.
pub fn s2_pairing(u: &S2CotractorSection, v: &S2TractorSection) -> Expr {
    let n = u.dim();
    let mut terms = vec![u.sigma.scalar_value().mul(v.rho.scalar_value())];
    for b in 0..n {
        terms.push(u.mu.get(&[b]).mul(v.nu.get(&[b])));
        for c in 0..n {
            terms.push(u.beta.get(&[b, c]).mul(v.t.get(&[b, c])));
        }
    }
    sum(terms)
}

/// Curvature of the tractor connection on `(ν, ρ)`:
/// `(W_ab^c_d ν^d, −C_abd ν^d)`, indexed by `a * n + b`.
pub fn tractor_curvature(ctx: &ProjectiveContext, s: &TractorSection) -> Vec<TractorSection> {
    let n = ctx.dim();
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let top = Tensor::from_fn(n, 1, 0, |i| sum((0..n).map(|d| ctx.w(i[0], a, b, d).mul(s.nu.get(&[d]))).collect()));
            let bottom = sum((0..n).map(|d| ctx.cot(a, b, d).mul(s.nu.get(&[d])).neg()).collect());
            out.push(TractorSection { nu: top, rho: Tensor::scalar(n, bottom) });
        }
    }
    out
}

/// Curvature of the cotractor connection on `(σ, μ)`:
/// `(0, −W_ab^d_c μ_d + C_abc σ)`, indexed by `a * n + b`.
pub fn cotractor_curvature(ctx: &ProjectiveContext, s: &CotractorSection) -> Vec<CotractorSection> {
    let n = ctx.dim();
    let sigma = s.sigma.scalar_value();
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            let bottom = Tensor::from_fn(n, 0, 1, |i| {
                let c = i[0];
                let mut terms: Vec<Expr> = (0..n).map(|d| ctx.w(d, a, b, c).mul(s.mu.get(&[d])).neg()).collect();
                terms.push(ctx.cot(a, b, c).mul(sigma));
                sum(terms)
            });
            out.push(CotractorSection { sigma: Tensor::scalar(n, Expr::int(0)), mu: bottom });
        }
    }
    out
}

/// Prolongation of `tf(∇_a ν^c) = 0` on `(ν^c, μ)` (scalar slot `rho` holds
/// `μ`): `(∇_a ν^c − δ_a^c μ, ∇_a μ + R_ad ν^d/(n−1))`.
///
/// With `μ = −ρ` and the scalar output negated this is [`tractor_nabla`].
pub fn proj_prolong_nabla(ctx: &ProjectiveContext, s: &TractorSection) -> Result<Vec<TractorSection>> {
    let n = ctx.dim();
    if n < 2 {
        return Err(GeometryError::DimensionTooSmall { min: 2, dim: n });
    }
    let dnu = ctx.nabla(&s.nu)?;
    let dmu = ctx.nabla(&s.rho)?;
    let mu = s.rho.scalar_value();
    let ricci = &ctx.pack().ricci;
    Ok((0..n)
        .map(|a| {
            let top = Tensor::from_fn(n, 1, 0, |i| {
                let c = i[0];
                let mut terms = vec![dnu.get(&[c, a]).clone()];
                if a == c {
                    terms.push(mu.neg());
                }
                sum(terms)
            });
            let mut bottom = vec![dmu.get(&[a]).clone()];
            for d in 0..n {
                bottom.push(ricci.get(&[a, d]).mul(s.nu.get(&[d])).scale(1, n as i64 - 1));
            }
            TractorSection { nu: top, rho: Tensor::scalar(n, sum(bottom)) }
        })
        .collect())
}

/// Prolongation connection of the metrisability equation on `(t, ν, ρ)`:
/// ```text
/// ∇_a t^{bc} + δ_a^b ν^c + δ_a^c ν^b
/// ∇_a ν^c + δ_a^c ρ − P_ab t^{cb} + (1/n) W_ab^c_d t^{bd}
/// ∇_a ρ − 2 P_ad ν^d − (2/n) t^{bd} C_abd
/// ```
pub fn metrisability_prolong_nabla(ctx: &ProjectiveContext, s: &S2TractorSection) -> Result<Vec<S2TractorSection>> {
    s.t.require_symmetry(Symmetry::symmetric(0, 1))?;
    let n = ctx.dim();
    let ni = n as i64;
    let dt = ctx.nabla(&s.t)?;
    let dnu = ctx.nabla(&s.nu)?;
    let drho = ctx.nabla(&s.rho)?;
    let rho = s.rho.scalar_value();
    Ok((0..n)
        .map(|a| {
            let t_slot = s2_top(n, a, &dt, &s.nu);
            let nu_slot = Tensor::from_fn(n, 1, 0, |i| {
                let c = i[0];
                let mut terms = vec![dnu.get(&[c, a]).clone()];
                if a == c {
                    terms.push(rho.clone());
                }
                for b in 0..n {
                    terms.push(ctx.p(a, b).mul(s.t.get(&[c, b])).neg());
                    for d in 0..n {
                        terms.push(ctx.w(c, a, b, d).mul(s.t.get(&[b, d])).scale(1, ni));
                    }
                }
                sum(terms)
            });
            let mut r = vec![drho.get(&[a]).clone()];
            for d in 0..n {
                r.push(ctx.p(a, d).mul(s.nu.get(&[d])).scale(-2, 1));
                for b in 0..n {
                    r.push(s.t.get(&[b, d]).mul(ctx.cot(a, b, d)).scale(-2, ni));
                }
            }
            S2TractorSection { t: t_slot, nu: nu_slot, rho: Tensor::scalar(n, sum(r)) }
        })
        .collect())
}

fn s2_top(n: usize, a: usize, dt: &TensorField, nu: &TensorField) -> TensorField {
    Tensor::from_fn(n, 2, 0, |i| {
        let (b, c) = (i[0], i[1]);
        let mut terms = vec![dt.get(&[b, c, a]).clone()];
        if a == b {
            terms.push(nu.get(&[c]).clone());
        }
        if a == c {
            terms.push(nu.get(&[b]).clone());
        }
        sum(terms)
    })
}

/// Tractor connection on the symmetric square, written directly:
/// ```text
/// ∇_e t^{bc} + δ_e^b ν^c + δ_e^c ν^b
/// ∇_e ν^c − P_eb t^{bc} + δ_e^c ρ
/// ∇_e ρ − 2 P_eb ν^b
/// ```
pub fn s2_tractor_nabla(ctx: &ProjectiveContext, s: &S2TractorSection) -> Result<Vec<S2TractorSection>> {
    let n = ctx.dim();
    let dt = ctx.nabla(&s.t)?;
    let dnu = ctx.nabla(&s.nu)?;
    let drho = ctx.nabla(&s.rho)?;
    let rho = s.rho.scalar_value();
    Ok((0..n)
        .map(|e| {
            let nu_slot = Tensor::from_fn(n, 1, 0, |i| {
                let c = i[0];
                let mut terms = vec![dnu.get(&[c, e]).clone()];
                for b in 0..n {
                    terms.push(ctx.p(e, b).mul(s.t.get(&[b, c])).neg());
                }
                if e == c {
                    terms.push(rho.clone());
                }
                sum(terms)
            });
            let mut r = vec![drho.get(&[e]).clone()];
            for b in 0..n {
                r.push(ctx.p(e, b).mul(s.nu.get(&[b])).scale(-2, 1));
            }
            S2TractorSection { t: s2_top(n, e, &dt, &s.nu), nu: nu_slot, rho: Tensor::scalar(n, sum(r)) }
        })
        .collect())
}

/// One of the two canonical maps in a product of splitting maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitMap {
    /// `X^B`
    X,
    /// `W^B_b`; its index is carried by the coefficient tensor.
    W,
}

/// A term `M^B M'^C c` in the expansion of a section of the symmetric square.
/// The coefficient has one contravariant slot per `W` (in map order) and, after
/// differentiation, one covariant slot for the direction.
#[derive(Debug, Clone)]
pub struct SplitTerm {
    pub maps: [SplitMap; 2],
    pub coeff: TensorField,
}

/// Expands `∇_e` of `W_a W_d t^{ad} + X W_a ν^a + W_a X ν^a + X X ρ` with
/// the rules `∇_e X = W_e` and `∇_e W_b = −P_eb X`, then collects terms by
/// map pattern.
pub fn expand_s2_tractor_derivative(ctx: &ProjectiveContext, s: &S2TractorSection) -> Result<Vec<SplitTerm>> {
    use SplitMap::{W, X};
    let terms = vec![
        SplitTerm { maps: [W, W], coeff: s.t.clone() },
        SplitTerm { maps: [X, W], coeff: s.nu.clone() },
        SplitTerm { maps: [W, X], coeff: s.nu.clone() },
        SplitTerm { maps: [X, X], coeff: s.rho.clone() },
    ];
    let mut out: Vec<SplitTerm> = Vec::new();
    for term in &terms {
        out.push(SplitTerm { maps: term.maps, coeff: ctx.nabla(&term.coeff)? });
        for pos in 0..2 {
            out.push(differentiate_map(ctx, term, pos));
        }
    }
    // collect by pattern
    let mut grouped: Vec<SplitTerm> = Vec::new();
    for t in out {
        match grouped.iter_mut().find(|g| g.maps == t.maps) {
            Some(g) => g.coeff = g.coeff.add(&t.coeff)?,
            None => grouped.push(t),
        }
    }
    Ok(grouped)
}

// Applies ∇_e to the map at `pos`, leaving the coefficient undifferentiated.
// The result carries the direction as its covariant slot.
fn differentiate_map(ctx: &ProjectiveContext, term: &SplitTerm, pos: usize) -> SplitTerm {
    let n = ctx.dim();
    let c = &term.coeff;
    let p = c.valence().0;
    // contravariant slot of the coefficient that belongs to `pos`
    let w_slot = term.maps[..pos].iter().filter(|m| **m == SplitMap::W).count();
    let mut maps = term.maps;
    match term.maps[pos] {
        SplitMap::X => {
            // X ↦ W_e: new contravariant slot δ^w_e at w_slot
            maps[pos] = SplitMap::W;
            let coeff = Tensor::from_fn(n, p + 1, 1, |i| {
                let e = i[p + 1];
                if i[w_slot] != e {
                    return Expr::int(0);
                }
                let mut src: Vec<usize> = i[..p + 1].to_vec();
                src.remove(w_slot);
                c.get(&src).clone()
            });
            SplitTerm { maps, coeff }
        }
        SplitMap::W => {
            // W_b ↦ −P_eb X: contract the slot with −P_e.
            maps[pos] = SplitMap::X;
            let coeff = Tensor::from_fn(n, p - 1, 1, |i| {
                let e = i[p - 1];
                let terms = (0..n)
                    .map(|b| {
                        let mut src: Vec<usize> = i[..p - 1].to_vec();
                        src.insert(w_slot, b);
                        ctx.p(e, b).mul(c.get(&src)).neg()
                    })
                    .collect();
                sum(terms)
            });
            SplitTerm { maps, coeff }
        }
    }
}

/// Tractor connection on the symmetric square obtained from the splitting-map
/// expansion. Fails if the two mixed patterns disagree.
pub fn s2_tractor_nabla_expanded(ctx: &ProjectiveContext, s: &S2TractorSection) -> Result<Vec<S2TractorSection>> {
    use SplitMap::{W, X};
    let n = ctx.dim();
    let groups = expand_s2_tractor_derivative(ctx, s)?;
    let find = |m: [SplitMap; 2]| groups.iter().find(|g| g.maps == m).map(|g| &g.coeff).expect("all patterns occur");
    let ww = find([W, W]);
    let xw = find([X, W]);
    let wx = find([W, X]);
    let xx = find([X, X]);
    if !xw.components().iter().zip(wx.components()).all(|(a, b)| a.approx_eq(b)) {
        return Err(GeometryError::Input("mixed splitting patterns disagree".into()));
    }
    Ok((0..n)
        .map(|e| S2TractorSection {
            t: Tensor::from_fn(n, 2, 0, |i| ww.get(&[i[0], i[1], e]).clone()),
            nu: Tensor::from_fn(n, 1, 0, |i| xw.get(&[i[0], e]).clone()),
            rho: Tensor::scalar(n, xx.get(&[e]).clone()),
        })
        .collect())
}

/// `(−(1/n) W_ab^c_d t^{bd}, (2/n) C_abd t^{bd})`, stored `[c][a]` and `[a]`.
pub fn metrisability_obstruction(ctx: &ProjectiveContext, t: &TensorField) -> Result<(TensorField, TensorField)> {
    t.expect_valence(2, 0)?;
    t.require_symmetry(Symmetry::symmetric(0, 1))?;
    let n = ctx.dim();
    let ni = n as i64;
    let vector = Tensor::from_fn(n, 1, 1, |i| {
        let (c, a) = (i[0], i[1]);
        let mut terms = Vec::new();
        for b in 0..n {
            for d in 0..n {
                terms.push(ctx.w(c, a, b, d).mul(t.get(&[b, d])).scale(-1, ni));
            }
        }
        sum(terms)
    });
    let scalar = Tensor::from_fn(n, 0, 1, |i| {
        let a = i[0];
        let mut terms = Vec::new();
        for b in 0..n {
            for d in 0..n {
                terms.push(ctx.cot(a, b, d).mul(t.get(&[b, d])).scale(2, ni));
            }
        }
        sum(terms)
    });
    Ok((vector, scalar))
}

/// Dual connection on `(β_bc, μ_c, σ)`, fixed by the Leibniz rule against
/// [`metrisability_prolong_nabla`] under [`s2_pairing`]:
/// ```text
/// ∇_a β_bc + ½(μ_c P_ab + μ_b P_ac) − (1/2n)(μ_e W_ab^e_c + μ_e W_ac^e_b) + (1/n) σ (C_abc + C_acb)
/// ∇_a μ_c − 2 β_ac + 2 P_ac σ
/// ∇_a σ − μ_a
/// ```
pub fn s2_dual_nabla(ctx: &ProjectiveContext, s: &S2CotractorSection) -> Result<Vec<S2CotractorSection>> {
    s.beta.require_symmetry(Symmetry::symmetric(0, 1))?;
    let n = ctx.dim();
    let ni = n as i64;
    let dbeta = ctx.nabla(&s.beta)?;
    let dmu = ctx.nabla(&s.mu)?;
    let dsigma = ctx.nabla(&s.sigma)?;
    let sigma = s.sigma.scalar_value();
    Ok((0..n)
        .map(|a| {
            let beta = Tensor::from_fn(n, 0, 2, |i| {
                let (b, c) = (i[0], i[1]);
                let mut terms = vec![
                    dbeta.get(&[a, b, c]).clone(),
                    s.mu.get(&[c]).mul(ctx.p(a, b)).scale(1, 2),
                    s.mu.get(&[b]).mul(ctx.p(a, c)).scale(1, 2),
                ];
                for e in 0..n {
                    terms.push(s.mu.get(&[e]).mul(ctx.w(e, a, b, c)).scale(-1, 2 * ni));
                    terms.push(s.mu.get(&[e]).mul(ctx.w(e, a, c, b)).scale(-1, 2 * ni));
                }
                terms.push(sigma.mul(&ctx.cot(a, b, c).add(ctx.cot(a, c, b))).scale(1, ni));
                sum(terms)
            });
            let mu = Tensor::from_fn(n, 0, 1, |i| {
                let c = i[0];
                sum(vec![
                    dmu.get(&[a, c]).clone(),
                    s.beta.get(&[a, c]).scale(-2, 1),
                    ctx.p(a, c).mul(sigma).scale(2, 1),
                ])
            });
            let sig = Tensor::scalar(n, dsigma.get(&[a]).sub(s.mu.get(&[a])));
            S2CotractorSection { beta, mu, sigma: sig }
        })
        .collect())
}

impl S2TractorSection {
    /// Completes `t^{bc}` to the section determined by it:
    /// `ν^c = −(1/(n+1)) ∇_d t^{dc}`, `ρ = −(1/n) ∇_a ν^a + (1/n) P_de t^{ed}`.
    pub fn lift(ctx: &ProjectiveContext, t: TensorField) -> Result<Self> {
        let n = ctx.dim();
        let ni = n as i64;
        t.expect_valence(2, 0)?;
        let t = t.with_symmetry(Symmetry::symmetric(0, 1))?;
        let dt = ctx.nabla(&t)?; // [d][c][a]
        let nu = Tensor::from_fn(n, 1, 0, |i| sum((0..n).map(|d| dt.get(&[d, i[0], d]).scale(-1, ni + 1)).collect()));
        let dnu = ctx.nabla(&nu)?;
        let mut r: Vec<Expr> = (0..n).map(|a| dnu.get(&[a, a]).scale(-1, ni)).collect();
        for d in 0..n {
            for e in 0..n {
                r.push(ctx.p(d, e).mul(t.get(&[e, d])).scale(1, ni));
            }
        }
        Ok(S2TractorSection { t, nu, rho: Tensor::scalar(n, sum(r)) })
    }
}

impl TractorSection {
    /// Completes `ν^c` for the prolongation of `tf(∇ν) = 0`: `μ = (1/n) ∇_c ν^c`.
    pub fn lift_prolong(ctx: &ProjectiveContext, nu: TensorField) -> Result<Self> {
        let n = ctx.dim();
        let dnu = ctx.nabla(&nu)?;
        let mu = sum((0..n).map(|c| dnu.get(&[c, c]).scale(1, n as i64)).collect());
        TractorSection::new(nu, Tensor::scalar(n, mu))
    }
}

impl CotractorSection {
    /// `(σ, ∇σ)`.
    pub fn lift(ctx: &ProjectiveContext, sigma: Expr) -> Result<Self> {
        let n = ctx.dim();
        let s = Tensor::scalar(n, sigma);
        let mu = ctx.nabla(&s)?;
        CotractorSection::new(s, mu)
    }
}

/// Max-abs Riemann curvature of `conn` over `points`.
pub fn curvature_max<S: Scalar>(conn: &AffineConnection, points: &[Vec<S>]) -> Result<f64> {
    max_abs_over(&[&riemann(conn)], points)
}

/// Prolongation of `tf(∇_a β^{bc}) = 0` for skew `β` on a flat connection.
#[derive(Debug, Clone)]
pub struct FlatSkewProlongation {
    conn: AffineConnection,
}

pub const FLATNESS_TOL: f64 = 1e-12;

impl FlatSkewProlongation {
    /// Checks flatness at `probe` points and `n ≥ 3`.
    pub fn new<S: Scalar>(conn: AffineConnection, probe: &[Vec<S>]) -> Result<Self> {
        let n = conn.dim();
        if n < 3 {
            return Err(GeometryError::DimensionTooSmall { min: 3, dim: n });
        }
        let k = curvature_max(&conn, probe)?;
        if !(k < FLATNESS_TOL) {
            return Err(GeometryError::NotFlat(k));
        }
        Ok(FlatSkewProlongation { conn })
    }

    pub fn dim(&self) -> usize {
        self.conn.dim()
    }

    pub fn connection(&self) -> &AffineConnection {
        &self.conn
    }

    /// `ν^c = (1/(n−1)) ∇_d β^{dc}`, `ρ = (1/(n−2)) ∇_b ν^b`.
    pub fn lift(&self, beta: TensorField) -> Result<SkewSection> {
        let n = self.dim();
        let ni = n as i64;
        let beta = beta.with_symmetry(Symmetry::skew(0, 1))?;
        let db = covariant_derivative(&self.conn, &beta)?; // [d][c][a]
        let nu = Tensor::from_fn(n, 1, 0, |i| sum((0..n).map(|d| db.get(&[d, i[0], d]).scale(1, ni - 1)).collect()));
        let dnu = covariant_derivative(&self.conn, &nu)?;
        let rho = sum((0..n).map(|b| dnu.get(&[b, b]).scale(1, ni - 2)).collect());
        Ok(SkewSection { beta, nu, rho: Tensor::scalar(n, rho) })
    }

    /// `(∇_a β^{bc} − δ_a^b ν^c + δ_a^c ν^b, ∇_a ν^b − δ_a^b ρ, ∇_a ρ)`.
    pub fn nabla(&self, s: &SkewSection) -> Result<Vec<SkewSection>> {
        s.beta.require_symmetry(Symmetry::skew(0, 1))?;
        let n = self.dim();
        let db = covariant_derivative(&self.conn, &s.beta)?;
        let dnu = covariant_derivative(&self.conn, &s.nu)?;
        let drho = covariant_derivative(&self.conn, &s.rho)?;
        let rho = s.rho.scalar_value();
        Ok((0..n)
            .map(|a| {
                let beta = Tensor::from_fn(n, 2, 0, |i| {
                    let (b, c) = (i[0], i[1]);
                    let mut terms = vec![db.get(&[b, c, a]).clone()];
                    if a == b {
                        terms.push(s.nu.get(&[c]).neg());
                    }
                    if a == c {
                        terms.push(s.nu.get(&[b]).clone());
                    }
                    sum(terms)
                });
                let nu = Tensor::from_fn(n, 1, 0, |i| {
                    let mut terms = vec![dnu.get(&[i[0], a]).clone()];
                    if i[0] == a {
                        terms.push(rho.neg());
                    }
                    sum(terms)
                });
                SkewSection { beta, nu, rho: Tensor::scalar(n, drho.get(&[a]).clone()) }
            })
            .collect())
    }
}

/// Uniform view of a bundle connection on flattened sections.
pub trait BundleConnection: Send + Sync {
    fn kind(&self) -> BundleKind;
    fn dim(&self) -> usize;
    fn name(&self) -> &'static str;

    fn rank(&self) -> usize {
        self.kind().rank(self.dim())
    }

    /// `D_a s` for each direction `a`, flattened.
    fn apply(&self, section: &[Expr]) -> Result<Vec<Vec<Expr>>>;
}

/// The connections available through [`BundleConnection`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConnectionKind {
    Tractor,
    Cotractor,
    Prolong,
    Metrisability,
    S2Dual,
    S2Tractor,
    Skew,
}

impl ConnectionKind {
    pub const ALL: [ConnectionKind; 7] = [
        ConnectionKind::Tractor,
        ConnectionKind::Cotractor,
        ConnectionKind::Prolong,
        ConnectionKind::Metrisability,
        ConnectionKind::S2Dual,
        ConnectionKind::S2Tractor,
        ConnectionKind::Skew,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConnectionKind::Tractor => "tractor",
            ConnectionKind::Cotractor => "cotractor",
            ConnectionKind::Prolong => "prolong",
            ConnectionKind::Metrisability => "metrisability",
            ConnectionKind::S2Dual => "s2dual",
            ConnectionKind::S2Tractor => "s2tractor",
            ConnectionKind::Skew => "skew",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn bundle(self) -> BundleKind {
        match self {
            ConnectionKind::Tractor | ConnectionKind::Prolong => BundleKind::Tractor,
            ConnectionKind::Cotractor => BundleKind::Cotractor,
            ConnectionKind::Metrisability | ConnectionKind::S2Tractor => BundleKind::S2Tractor,
            ConnectionKind::S2Dual => BundleKind::S2Cotractor,
            ConnectionKind::Skew => BundleKind::Skew,
        }
    }
}

/// A [`ProjectiveContext`] bound to one of its connections.
#[derive(Debug, Clone)]
pub struct ContextConnection {
    ctx: ProjectiveContext,
    kind: ConnectionKind,
}

impl ContextConnection {
    /// `Skew` is not available here; use [`FlatSkewProlongation`].
    pub fn new(ctx: ProjectiveContext, kind: ConnectionKind) -> Result<Self> {
        if kind == ConnectionKind::Skew {
            return Err(GeometryError::Input("the skew prolongation needs a flat connection".into()));
        }
        Ok(ContextConnection { ctx, kind })
    }

    pub fn context(&self) -> &ProjectiveContext {
        &self.ctx
    }
}

impl BundleConnection for ContextConnection {
    fn kind(&self) -> BundleKind {
        self.kind.bundle()
    }

    fn dim(&self) -> usize {
        self.ctx.dim()
    }

    fn name(&self) -> &'static str {
        self.kind.name()
    }

    fn apply(&self, section: &[Expr]) -> Result<Vec<Vec<Expr>>> {
        let n = self.dim();
        let ctx = &self.ctx;
        Ok(match self.kind {
            ConnectionKind::Tractor => {
                tractor_nabla(ctx, &TractorSection::from_flat(n, section)?)?.iter().map(TractorSection::to_flat).collect()
            }
            ConnectionKind::Prolong => proj_prolong_nabla(ctx, &TractorSection::from_flat(n, section)?)?
                .iter()
                .map(TractorSection::to_flat)
                .collect(),
            ConnectionKind::Cotractor => cotractor_nabla(ctx, &CotractorSection::from_flat(n, section)?)?
                .iter()
                .map(CotractorSection::to_flat)
                .collect(),
            ConnectionKind::Metrisability => metrisability_prolong_nabla(ctx, &S2TractorSection::from_flat(n, section)?)?
                .iter()
                .map(S2TractorSection::to_flat)
                .collect(),
            ConnectionKind::S2Tractor => s2_tractor_nabla(ctx, &S2TractorSection::from_flat(n, section)?)?
                .iter()
                .map(S2TractorSection::to_flat)
                .collect(),
            ConnectionKind::S2Dual => s2_dual_nabla(ctx, &S2CotractorSection::from_flat(n, section)?)?
                .iter()
                .map(S2CotractorSection::to_flat)
                .collect(),
            ConnectionKind::Skew => unreachable!("rejected in new"),
        })
    }
}

impl BundleConnection for FlatSkewProlongation {
    fn kind(&self) -> BundleKind {
        BundleKind::Skew
    }

    fn dim(&self) -> usize {
        self.conn.dim()
    }

    fn name(&self) -> &'static str {
        "skew"
    }

    fn apply(&self, section: &[Expr]) -> Result<Vec<Vec<Expr>>> {
        let s = SkewSection::from_flat(self.dim(), section)?;
        Ok(self.nabla(&s)?.iter().map(SkewSection::to_flat).collect())
    }
}

/// `D_a D_b s − D_b D_a s`, flattened, indexed by `a * n + b`.
pub fn commutator(conn: &dyn BundleConnection, section: &[Expr]) -> Result<Vec<Vec<Expr>>> {
    let n = conn.dim();
    let first = conn.apply(section)?;
    let second: Vec<Vec<Vec<Expr>>> = first.iter().map(|s| conn.apply(s)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(n * n);
    for a in 0..n {
        for b in 0..n {
            // second[b][a] = D_a (D_b s)
            out.push(second[b][a].iter().zip(&second[a][b]).map(|(x, y)| x.sub(y)).collect());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use num_rational::BigRational;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn flat_ctx(n: usize) -> ProjectiveContext {
        ProjectiveContext::from_geometry(&ChartGeometry::flat(n)).unwrap()
    }

    #[test]
    fn ranks() {
        assert_eq!(BundleKind::Tractor.rank(3), 4);
        assert_eq!(BundleKind::S2Tractor.rank(2), 6);
        assert_eq!(BundleKind::S2Cotractor.rank(3), 10);
        assert_eq!(BundleKind::Skew.rank(3), 7);
    }

    #[test]
    fn flat_round_trip() {
        let flat: Vec<Expr> = (0..6).map(Expr::int).collect();
        let s = S2TractorSection::from_flat(2, &flat).unwrap();
        assert_eq!(s.t.get(&[1, 0]).as_const(), Some(&q(1)));
        assert_eq!(s.to_flat().len(), 6);
        let k = SkewSection::from_flat(3, &(0..7).map(Expr::int).collect::<Vec<_>>()).unwrap();
        assert_eq!(k.beta.get(&[2, 1]).eval(&[q(0)]).unwrap(), q(-2));
        assert!(TractorSection::<Expr>::from_flat(2, &flat).is_err());
    }

    #[test]
    fn position_field_cancels_delta_term() {
        // ν^b = −c x^b, ρ = c gives a vanishing top slot
        let ctx = flat_ctx(2);
        let s = TractorSection::new(
            Tensor::vector(vec![parse("-3*x0", 2).unwrap(), parse("-3*x1", 2).unwrap()]),
            Tensor::scalar(2, Expr::int(3)),
        )
        .unwrap();
        for d in tractor_nabla(&ctx, &s).unwrap() {
            assert!(d.nu.is_structurally_zero() || d.nu.eval(&[q(1), q(2)]).unwrap().components().iter().all(Coefficient::is_zero));
        }
    }

    #[test]
    fn linear_sigma_is_cotractor_parallel() {
        let ctx = flat_ctx(2);
        let s = CotractorSection::lift(&ctx, parse("1 + x0 - 2*x1", 2).unwrap()).unwrap();
        for d in cotractor_nabla(&ctx, &s).unwrap() {
            let v = d.eval(&[q(3), q(-1)]).unwrap();
            assert!(v.to_flat().iter().all(Coefficient::is_zero));
        }
    }

    #[test]
    fn splitting_transform_examples() {
        let s = CotractorSection::new(Tensor::scalar(2, Expr::int(1)), Tensor::zeros(2, 0, 1)).unwrap();
        let ups = Upsilon::from_components(vec![Expr::int(1), Expr::int(0)]);
        let t = splitting_transform(&s, &ups).unwrap();
        assert!(t.mu.get(&[0]).is_const_one());
        assert!(t.mu.get(&[1]).is_const_zero());
        let back = splitting_transform(&t, &ups.neg()).unwrap();
        assert_eq!(back.mu.eval(&[q(0), q(0)]).unwrap().components(), &[q(0), q(0)]);
    }

    #[test]
    fn constant_symmetric_t_is_parallel_on_flat_space() {
        let ctx = flat_ctx(3);
        let t = Tensor::from_fn(3, 2, 0, |i| Expr::int((i[0] + i[1]) as i64));
        let s = S2TractorSection::new(t, Tensor::zeros(3, 1, 0), Tensor::scalar(3, Expr::int(0))).unwrap();
        for d in metrisability_prolong_nabla(&ctx, &s).unwrap() {
            assert!(d.to_flat().iter().all(Expr::is_const_zero));
        }
    }

    #[test]
    fn asymmetric_t_rejected() {
        let t = Tensor::from_fn(2, 2, 0, |i| Expr::int((2 * i[0] + i[1]) as i64));
        assert!(S2TractorSection::new(t, Tensor::zeros(2, 1, 0), Tensor::scalar(2, Expr::int(0))).is_err());
    }

    #[test]
    fn skew_prolongation_needs_dimension_three_and_flatness() {
        let probe = vec![vec![0.1f64, 0.2]];
        assert!(matches!(
            FlatSkewProlongation::new(AffineConnection::flat(2), &probe),
            Err(GeometryError::DimensionTooSmall { .. })
        ));
        let sphere = ChartGeometry::round_sphere(3).levi_civita();
        let probe = vec![vec![0.1f64, 0.2, 0.3]];
        assert!(matches!(FlatSkewProlongation::new(sphere, &probe), Err(GeometryError::NotFlat(_))));
    }

    #[test]
    fn constant_skew_section_is_parallel() {
        let probe = vec![vec![0.0f64; 3]];
        let skew = FlatSkewProlongation::new(AffineConnection::flat(3), &probe).unwrap();
        let beta = Tensor::from_fn(3, 2, 0, |i| Expr::int(i[0] as i64 - i[1] as i64));
        let s = skew.lift(beta).unwrap();
        for d in skew.nabla(&s).unwrap() {
            assert!(d.to_flat().iter().all(Expr::is_const_zero));
        }
    }

    #[test]
    fn connection_kind_names_round_trip() {
        for k in ConnectionKind::ALL {
            assert_eq!(ConnectionKind::parse(k.name()), Some(k));
        }
        assert_eq!(ConnectionKind::parse("nope"), None);
    }

    #[test]
    fn section_json_is_keyed_by_slot() {
        let v = BundleKind::Cotractor.section_json(2, &[1.0f64, 2.0, 3.0]).unwrap();
        assert_eq!(v["sigma"]["components"], serde_json::json!([1.0]));
        assert_eq!(v["mu"]["valence"], serde_json::json!([0, 1]));
    }
}
