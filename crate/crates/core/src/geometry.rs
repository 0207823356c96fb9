//! Metric geometry on a single chart: the Levi-Civita connection, covariant
//! differentiation of tensor fields and the curvature tensors.
//!
//! Index conventions (storage order, uppers first):
//!
//! | field | stored as |
//! |---|---|
//! | `Γ^c_{ab}` | `[c][a][b]` |
//! | `R_{ab}{}^c{}_d` | `[c][a][b][d]` |
//! | `W_{ab}{}^c{}_d` | `[c][a][b][d]` |
//! | `C_{abc}` | `[a][b][c]` |
//! | `∇_a T^{..}_{..}` | `[uppers][a][lowers]` |
//!
//! Curvature follows `(∇_a∇_b − ∇_b∇_a)ν^c = R_{ab}{}^c{}_d ν^d` and
//! `R_{ab} = R_{ca}{}^c{}_b`.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::expr::{Differentiator, EvalError, Expr, Tape};
use crate::scalar::{Coefficient, Scalar};
use crate::tensor::{inverse_metric, multi_indices, Symmetry, Tensor, TensorError, TensorField};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("metric is not symmetric")]
    AsymmetricMetric,
    #[error("metric is singular at {point:?}")]
    SingularAt { point: Vec<f64> },
    #[error("needs dimension at least {min}, got {dim}")]
    DimensionTooSmall { min: usize, dim: usize },
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("connection has torsion")]
    Torsion,
    #[error("connection is not flat (max curvature {0:e})")]
    NotFlat(f64),
    #[error("{0}")]
    Input(String),
}

pub type Result<T, E = GeometryError> = std::result::Result<T, E>;

/// Shared symbolic differentiation cache.
#[derive(Clone, Default)]
pub struct DiffCache(Arc<Mutex<Differentiator>>);

impl DiffCache {
    pub fn diff(&self, e: &Expr, coord: usize) -> Expr {
        self.0.lock().expect("diff cache poisoned").diff(e, coord)
    }
}

impl std::fmt::Debug for DiffCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("DiffCache")
    }
}

/// A metric `g_ab` on an `n`-dimensional chart.
#[derive(Debug, Clone)]
pub struct ChartGeometry {
    metric: TensorField,
    inverse: TensorField,
    cache: DiffCache,
}

impl ChartGeometry {
    pub fn new(metric: TensorField) -> Result<Self> {
        metric.expect_valence(0, 2)?;
        if metric.dim() == 0 {
            return Err(GeometryError::DimensionTooSmall { min: 1, dim: 0 });
        }
        let metric = metric
            .with_symmetry(Symmetry::symmetric(0, 1))
            .map_err(|_| GeometryError::AsymmetricMetric)?;
        let inverse = inverse_metric(&metric)?;
        Ok(ChartGeometry { metric, inverse, cache: DiffCache::default() })
    }

    /// Parses an `n x n` grid of expression strings.
    pub fn parse(rows: &[Vec<String>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(GeometryError::Input(format!("metric row {i} has {} entries, expected {n}", row.len())));
            }
            for (j, text) in row.iter().enumerate() {
                let e = crate::expr::parse(text, n)
                    .map_err(|err| GeometryError::Input(format!("metric[{i}][{j}]: {err}")))?;
                data.push(e);
            }
        }
        Self::new(Tensor::new(n, 0, 2, data)?)
    }

    /// Euclidean metric `δ_ab`.
    pub fn flat(n: usize) -> Self {
        let g = Tensor::from_fn(n, 0, 2, |i| Expr::int(i64::from(i[0] == i[1])));
        Self::new(g).expect("identity metric")
    }

    /// `factor · δ_ab`.
    pub fn conformally_flat(n: usize, factor: Expr) -> Result<Self> {
        Self::new(Tensor::from_fn(n, 0, 2, |i| if i[0] == i[1] { factor.clone() } else { Expr::int(0) }))
    }

    /// Round sphere of curvature +1 in stereographic coordinates,
    /// `g = 4/(1+|x|²)² δ`.
    pub fn round_sphere(n: usize) -> Self {
        let r2 = Expr::sum((0..n).map(|i| Expr::pow(Expr::var(i), 2)).chain([Expr::int(1)]).collect::<Vec<_>>());
        let factor = Expr::product([Expr::int(4), Expr::pow(r2, -2)]);
        Self::conformally_flat(n, factor).expect("sphere metric")
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &TensorField {
        &self.metric
    }

    pub fn inverse(&self) -> &TensorField {
        &self.inverse
    }

    pub fn cache(&self) -> &DiffCache {
        &self.cache
    }

    /// Evaluates the metric at `point` and checks it is invertible there.
    pub fn check_point<S: Scalar>(&self, point: &[S]) -> Result<()> {
        let g = self.metric.eval(point)?;
        S::invert_matrix(self.dim(), g.components())
            .map(|_| ())
            .map_err(|_| GeometryError::SingularAt { point: point.iter().map(Scalar::to_f64).collect() })
    }

    pub fn levi_civita(&self) -> AffineConnection {
        levi_civita(self)
    }
}

/// A linear connection on the tangent bundle given by `Γ^c_{ab}`.
#[derive(Debug, Clone)]
pub struct AffineConnection {
    gamma: TensorField,
    cache: DiffCache,
}

impl AffineConnection {
    /// Torsion-free connection; `Γ` must be symmetric in its lower pair.
    pub fn new(gamma: TensorField) -> Result<Self> {
        gamma.expect_valence(1, 2)?;
        if !gamma.has_symmetry(Symmetry::symmetric(1, 2)) {
            return Err(GeometryError::Torsion);
        }
        Ok(AffineConnection { gamma, cache: DiffCache::default() })
    }

    /// Any connection, torsion allowed.
    pub fn general(gamma: TensorField) -> Result<Self> {
        gamma.expect_valence(1, 2)?;
        Ok(AffineConnection { gamma, cache: DiffCache::default() })
    }

    pub fn flat(n: usize) -> Self {
        AffineConnection { gamma: Tensor::zeros(n, 1, 2), cache: DiffCache::default() }
    }

    pub(crate) fn with_cache(gamma: TensorField, cache: DiffCache) -> Self {
        AffineConnection { gamma, cache }
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    pub fn christoffel(&self) -> &TensorField {
        &self.gamma
    }

    pub fn cache(&self) -> &DiffCache {
        &self.cache
    }

    pub(crate) fn g(&self, c: usize, a: usize, b: usize) -> &Expr {
        self.gamma.get(&[c, a, b])
    }

    /// Componentwise partial derivative, new covariant slot first among lowers.
    pub fn partial(&self, t: &TensorField) -> Result<TensorField> {
        partial(&self.cache, t)
    }

    pub fn covariant_derivative(&self, t: &TensorField) -> Result<TensorField> {
        covariant_derivative(self, t)
    }
}

/// `Γ^c_{ab} = ½ g^{cd}(∂_a g_{db} + ∂_b g_{da} − ∂_d g_{ab})`.
pub fn levi_civita(geom: &ChartGeometry) -> AffineConnection {
    let n = geom.dim();
    let g = geom.metric();
    let ginv = geom.inverse();
    let cache = geom.cache().clone();
    // first-kind symbols Γ_{dab}
    let first: Vec<Expr> = multi_indices(n, 3)
        .map(|i| {
            let (d, a, b) = (i[0], i[1], i[2]);
            let t = cache
                .diff(g.get(&[d, b]), a)
                .add(&cache.diff(g.get(&[d, a]), b))
                .sub(&cache.diff(g.get(&[a, b]), d));
            t.scale(1, 2)
        })
        .collect();
    let gamma = Tensor::from_fn(n, 1, 2, |i| {
        let (c, a, b) = (i[0], i[1], i[2]);
        let terms: Vec<Expr> = (0..n).map(|d| ginv.get(&[c, d]).mul(&first[(d * n + a) * n + b])).collect();
        Expr::sum(terms)
    });
    AffineConnection::with_cache(gamma, cache)
}

pub fn partial(cache: &DiffCache, t: &TensorField) -> Result<TensorField> {
    let n = t.dim();
    let (p, q) = t.valence();
    Ok(Tensor::from_fn(n, p, q + 1, |idx| {
        let a = idx[p];
        let mut src = Vec::with_capacity(p + q);
        src.extend_from_slice(&idx[..p]);
        src.extend_from_slice(&idx[p + 1..]);
        cache.diff(t.get(&src), a)
    }))
}

/// `∇_a T`: partial derivative plus `+Γ` per contravariant slot and `−Γ` per
/// covariant slot. The new covariant slot is first among the lowers.
pub fn covariant_derivative(conn: &AffineConnection, t: &TensorField) -> Result<TensorField> {
    let n = conn.dim();
    if t.dim() != n {
        return Err(GeometryError::DimensionMismatch(n, t.dim()));
    }
    let (p, q) = t.valence();
    let cache = conn.cache();
    Ok(Tensor::from_fn(n, p, q + 1, |idx| {
        let a = idx[p];
        let mut src = Vec::with_capacity(p + q);
        src.extend_from_slice(&idx[..p]);
        src.extend_from_slice(&idx[p + 1..]);
        let mut terms = vec![cache.diff(t.get(&src), a)];
        for slot in 0..p {
            let b = src[slot];
            for e in 0..n {
                let gam = conn.g(b, a, e);
                if gam.is_const_zero() {
                    continue;
                }
                let mut s = src.clone();
                s[slot] = e;
                terms.push(gam.mul(t.get(&s)));
            }
        }
        for slot in p..p + q {
            let c = src[slot];
            for e in 0..n {
                let gam = conn.g(e, a, c);
                if gam.is_const_zero() {
                    continue;
                }
                let mut s = src.clone();
                s[slot] = e;
                terms.push(gam.mul(t.get(&s)).neg());
            }
        }
        Expr::sum(terms)
    }))
}

/// `R_{ab}{}^c{}_d = ∂_a Γ^c_{bd} − ∂_b Γ^c_{ad} + Γ^c_{ae}Γ^e_{bd} − Γ^c_{be}Γ^e_{ad}`.
pub fn riemann(conn: &AffineConnection) -> TensorField {
    let n = conn.dim();
    let cache = conn.cache();
    Tensor::from_fn(n, 1, 3, |i| {
        let (c, a, b, d) = (i[0], i[1], i[2], i[3]);
        let mut terms = vec![cache.diff(conn.g(c, b, d), a), cache.diff(conn.g(c, a, d), b).neg()];
        for e in 0..n {
            terms.push(conn.g(c, a, e).mul(conn.g(e, b, d)));
            terms.push(conn.g(c, b, e).mul(conn.g(e, a, d)).neg());
        }
        Expr::sum(terms)
    })
}

/// `T^c_{ab} = Γ^c_{ab} − Γ^c_{ba}`.
pub fn torsion(conn: &AffineConnection) -> TensorField {
    Tensor::from_fn(conn.dim(), 1, 2, |i| conn.g(i[0], i[1], i[2]).sub(conn.g(i[0], i[2], i[1])))
}

/// The curvature tensors of a connection.
#[derive(Debug, Clone)]
pub struct CurvaturePack {
    pub riemann: TensorField,
    pub ricci: TensorField,
    /// Only available when a metric is known.
    pub scalar: Option<TensorField>,
    pub schouten: TensorField,
    pub weyl: TensorField,
    pub cotton: TensorField,
}

impl CurvaturePack {
    /// Curvature of the Levi-Civita connection of `geom`.
    pub fn derive(geom: &ChartGeometry) -> Result<(AffineConnection, Self)> {
        let conn = levi_civita(geom);
        let mut pack = Self::from_connection(&conn)?;
        let scalar = pack.ricci.raise_with_inverse(0, geom.inverse())?.contract(0, 0)?;
        pack.scalar = Some(scalar);
        Ok((conn, pack))
    }

    /// Curvature of any torsion-free connection. Ricci is symmetrised before
    /// forming the Schouten tensor.
    pub fn from_connection(conn: &AffineConnection) -> Result<Self> {
        let n = conn.dim();
        if n < 2 {
            return Err(GeometryError::DimensionTooSmall { min: 2, dim: n });
        }
        let riemann = riemann(conn);
        let ricci = riemann.contract(0, 0)?;
        let schouten = Tensor::from_fn(n, 0, 2, |i| {
            ricci.get(&[i[0], i[1]]).add(ricci.get(&[i[1], i[0]])).scale(1, 2 * (n as i64 - 1))
        });
        let weyl = Tensor::from_fn(n, 1, 3, |i| {
            let (c, a, b, d) = (i[0], i[1], i[2], i[3]);
            let mut terms = vec![riemann.get(i).clone()];
            if a == c {
                terms.push(schouten.get(&[b, d]).neg());
            }
            if b == c {
                terms.push(schouten.get(&[a, d]).clone());
            }
            Expr::sum(terms)
        });
        let dp = covariant_derivative(conn, &schouten)?;
        let cotton = Tensor::from_fn(n, 0, 3, |i| dp.get(&[i[0], i[1], i[2]]).sub(dp.get(&[i[1], i[0], i[2]])));
        Ok(CurvaturePack { riemann, ricci, scalar: None, schouten, weyl, cotton })
    }
}

/// First Bianchi sum `R_ab^c_d + R_da^c_b + R_bd^c_a`, stored `[c][a][b][d]`.
pub fn first_bianchi(riemann: &TensorField) -> TensorField {
    Tensor::from_fn(riemann.dim(), 1, 3, |i| {
        let (c, a, b, d) = (i[0], i[1], i[2], i[3]);
        Expr::sum(vec![riemann.get(&[c, a, b, d]).clone(), riemann.get(&[c, d, a, b]).clone(), riemann.get(&[c, b, d, a]).clone()])
    })
}

/// Second Bianchi sum `∇_e R_ab^c_d + ∇_b R_ea^c_d + ∇_a R_be^c_d`, stored
/// `[c][e][a][b][d]`.
pub fn second_bianchi(conn: &AffineConnection, riemann: &TensorField) -> Result<TensorField> {
    let dr = covariant_derivative(conn, riemann)?;
    Ok(Tensor::from_fn(riemann.dim(), 1, 4, |i| {
        let (c, e, a, b, d) = (i[0], i[1], i[2], i[3], i[4]);
        Expr::sum(vec![dr.get(&[c, e, a, b, d]).clone(), dr.get(&[c, b, e, a, d]).clone(), dr.get(&[c, a, b, e, d]).clone()])
    }))
}

/// `∇_c W_ab^c_d`, stored `[a][b][d]`.
pub fn weyl_divergence(conn: &AffineConnection, pack: &CurvaturePack) -> Result<TensorField> {
    let dw = covariant_derivative(conn, &pack.weyl)?; // [c][e][a][b][d]
    Ok(dw.contract(0, 0)?)
}

/// `(n−2) C_dab − ∇_c W_ab^c_d` with the Cotton indices in the printed order,
/// stored `[d][a][b]`.
pub fn cotton_relation(conn: &AffineConnection, pack: &CurvaturePack) -> Result<TensorField> {
    let n = conn.dim();
    let div = weyl_divergence(conn, pack)?;
    let k = Expr::int(n as i64 - 2);
    Ok(Tensor::from_fn(n, 0, 3, |i| {
        let (d, a, b) = (i[0], i[1], i[2]);
        k.mul(pack.cotton.get(&[d, a, b])).sub(div.get(&[a, b, d]))
    }))
}

/// `(n−2) C_abd − ∇_c W_ab^c_d`, stored `[a][b][d]`. This is the form the
/// divergence identity takes with the conventions used here.
pub fn cotton_divergence_residual(conn: &AffineConnection, pack: &CurvaturePack) -> Result<TensorField> {
    let n = conn.dim();
    let div = weyl_divergence(conn, pack)?;
    let k = Expr::int(n as i64 - 2);
    Ok(Tensor::from_fn(n, 0, 3, |i| k.mul(pack.cotton.get(i)).sub(div.get(i))))
}

/// Max-abs residuals of the Bianchi identities over a point set.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BianchiReport {
    pub first: f64,
    pub second: f64,
}

pub fn verify_bianchi<S: Scalar>(pack: &CurvaturePack, conn: &AffineConnection, points: &[Vec<S>]) -> Result<BianchiReport> {
    let first = max_abs_over(&[&first_bianchi(&pack.riemann)], points)?;
    let second = max_abs_over(&[&second_bianchi(conn, &pack.riemann)?], points)?;
    Ok(BianchiReport { first, second })
}

/// Evaluates every component of every field at every point (in parallel) and
/// returns the largest absolute value.
pub fn max_abs_over<S: Scalar>(fields: &[&TensorField], points: &[Vec<S>]) -> Result<f64> {
    let roots: Vec<Expr> = fields.iter().flat_map(|f| f.components().iter().cloned()).collect();
    let tape = Tape::compile(&roots);
    let per_point: Vec<Result<f64, EvalError>> = points
        .par_iter()
        .map(|p| Ok(tape.eval(p)?.iter().map(Scalar::abs_f64).fold(0.0, f64::max)))
        .collect();
    let mut best = 0.0f64;
    for r in per_point {
        best = best.max(r?);
    }
    Ok(best)
}

/// Max-abs difference between two fields of equal shape over a point set.
pub fn max_abs_diff<S: Scalar>(a: &TensorField, b: &TensorField, points: &[Vec<S>]) -> Result<f64> {
    let d = a.sub(b)?;
    max_abs_over(&[&d], points)
}
