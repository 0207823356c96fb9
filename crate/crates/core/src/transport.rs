//! Numerical parallel transport along chart curves and loop holonomy.
//!
//! A bundle connection is reduced to its coefficient matrices `A_a(x)`, read
//! off by applying it to constant basis sections, so `D_a s = ∂_a s + A_a s`.
//! Transport along `γ` solves `s'(u) = −γ̇^a A_a(γ(u)) s(u)` with fixed-step
//! classical RK4.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::expr::{EvalError, Expr, Tape};
use crate::geometry::{GeometryError, DiffCache};
use crate::scalar::Coefficient;
use crate::tensor::{SymmetryKind, Tensor};
use crate::tractor::{BundleConnection, BundleKind, ProjectiveContext};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransportError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("loop is not closed (endpoint gap {0:e})")]
    NotClosed(f64),
    #[error("curve leaves the evaluation box at {0:?}")]
    OutOfBox(Vec<f64>),
    #[error("section is not parallel (residual {0:e})")]
    NotParallel(f64),
    #[error("{0}")]
    Input(String),
}

pub type Result<T, E = TransportError> = std::result::Result<T, E>;

/// Endpoint tolerance for closed loops.
pub const CLOSURE_TOL: f64 = 1e-12;
/// Singular values below this count towards the fixed subspace.
pub const SINGULAR_TOL: f64 = 1e-6;
/// Largest connection residual accepted for a parallel section.
pub const PARALLEL_TOL: f64 = 1e-7;
pub const DEFAULT_STEPS: usize = 1000;

/// One smooth piece `u ↦ γ(u)` on `[u0, u1]`; the parameter is variable `x0`.
#[derive(Debug, Clone)]
pub struct Segment {
    comps: Vec<Expr>,
    u0: f64,
    u1: f64,
    tape: Tape,
}

impl Segment {
    pub fn new(comps: Vec<Expr>, u0: f64, u1: f64) -> Result<Self> {
        if comps.iter().any(|c| c.max_var().is_some_and(|v| v > 0)) {
            return Err(TransportError::Input("curve components may only use the parameter x0".into()));
        }
        if !(u1 > u0) {
            return Err(TransportError::Input(format!("empty parameter interval [{u0}, {u1}]")));
        }
        let cache = DiffCache::default();
        let mut roots = comps.clone();
        roots.extend(comps.iter().map(|c| cache.diff(c, 0)));
        let tape = Tape::compile(&roots);
        Ok(Segment { comps, u0, u1, tape })
    }

    pub fn components(&self) -> &[Expr] {
        &self.comps
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.u0, self.u1)
    }

    /// Position and velocity at `u`.
    pub fn eval(&self, u: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut v = self.tape.eval(&[u])?;
        let vel = v.split_off(self.comps.len());
        Ok((v, vel))
    }
}

/// A piecewise smooth curve in the chart.
#[derive(Debug, Clone)]
pub struct Curve {
    dim: usize,
    segments: Vec<Segment>,
}

fn c(v: f64) -> Expr {
    Expr::constant(num_rational::BigRational::from_float(v).expect("finite coordinate"))
}

impl Curve {
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        let dim = segments.first().map(|s| s.comps.len()).ok_or_else(|| TransportError::Input("curve has no segments".into()))?;
        if segments.iter().any(|s| s.comps.len() != dim) {
            return Err(TransportError::Input("segments disagree on dimension".into()));
        }
        Ok(Curve { dim, segments })
    }

    pub fn single(comps: Vec<Expr>, u0: f64, u1: f64) -> Result<Self> {
        Self::new(vec![Segment::new(comps, u0, u1)?])
    }

    /// Straight line `from → to` on `[0, 1]`.
    pub fn line(from: &[f64], to: &[f64]) -> Result<Self> {
        Self::new(vec![line_segment(from, to)?])
    }

    /// Circle in the `(i, j)` coordinate plane starting and ending at `base`,
    /// centred at `base − r e_i`.
    pub fn circle(base: &[f64], plane: (usize, usize), radius: f64) -> Result<Self> {
        let (i, j) = plane;
        let u = Expr::var(0);
        let comps = (0..base.len())
            .map(|k| {
                if k == i {
                    c(base[k] - radius).add(&c(radius).mul(&Expr::cos(u.clone())))
                } else if k == j {
                    c(radius).mul(&Expr::sin(u.clone())).add(&c(base[k]))
                } else {
                    c(base[k])
                }
            })
            .collect();
        Self::single(comps, 0.0, std::f64::consts::TAU)
    }

    /// Axis-aligned rectangle `base → base + w e_i → base + w e_i + h e_j → base + h e_j → base`.
    pub fn rectangle(base: &[f64], plane: (usize, usize), w: f64, h: f64) -> Result<Self> {
        let (i, j) = plane;
        let mut corners = vec![base.to_vec(); 4];
        corners[1][i] += w;
        corners[2][i] += w;
        corners[2][j] += h;
        corners[3][j] += h;
        let segs = (0..4).map(|k| line_segment(&corners[k], &corners[(k + 1) % 4])).collect::<Result<_>>()?;
        Self::new(segs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn start(&self) -> Result<Vec<f64>> {
        let s = &self.segments[0];
        Ok(s.eval(s.u0)?.0)
    }

    pub fn end(&self) -> Result<Vec<f64>> {
        let s = self.segments.last().expect("nonempty");
        Ok(s.eval(s.u1)?.0)
    }

    pub fn closure_gap(&self) -> Result<f64> {
        let (a, b) = (self.start()?, self.end()?);
        Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
    }

    /// The same image traversed backwards: `u ↦ γ(u0 + u1 − u)` per segment,
    /// segments in reverse order.
    pub fn reversed(&self) -> Result<Curve> {
        let segs = self
            .segments
            .iter()
            .rev()
            .map(|s| {
                let flip = Expr::sum([c(s.u0 + s.u1), Expr::neg(Expr::var(0))]);
                let comps = s.comps.iter().map(|e| e.substitute(std::slice::from_ref(&flip))).collect();
                Segment::new(comps, s.u0, s.u1)
            })
            .collect::<Result<_>>()?;
        Curve::new(segs)
    }

    /// Checks that sampled points stay inside `bbox`.
    pub fn check_in_box(&self, bbox: &[(f64, f64)], samples_per_segment: usize) -> Result<()> {
        for s in &self.segments {
            for k in 0..=samples_per_segment {
                let u = s.u0 + (s.u1 - s.u0) * k as f64 / samples_per_segment as f64;
                let (x, _) = s.eval(u)?;
                if x.iter().zip(bbox).any(|(v, (lo, hi))| *v < lo - 1e-12 || *v > hi + 1e-12) {
                    return Err(TransportError::OutOfBox(x));
                }
            }
        }
        Ok(())
    }
}

fn line_segment(from: &[f64], to: &[f64]) -> Result<Segment> {
    let u = Expr::var(0);
    let comps = from
        .iter()
        .zip(to)
        .map(|(a, b)| if a == b { c(*a) } else { c(*a).add(&c(b - a).mul(&u)) })
        .collect();
    Segment::new(comps, 0.0, 1.0)
}

/// Coefficient matrices `A_a(x)` of a bundle connection.
#[derive(Debug, Clone)]
pub struct ConnectionMatrices {
    dim: usize,
    rank: usize,
    tape: Tape,
    zero: bool,
}

impl ConnectionMatrices {
    pub fn new(conn: &dyn BundleConnection) -> Result<Self> {
        let n = conn.dim();
        let r = conn.rank();
        // roots ordered [a][row][col]
        let mut cols: Vec<Vec<Vec<Expr>>> = Vec::with_capacity(r);
        for k in 0..r {
            let basis: Vec<Expr> = (0..r).map(|i| Expr::int(i64::from(i == k))).collect();
            cols.push(conn.apply(&basis)?);
        }
        let mut roots = Vec::with_capacity(n * r * r);
        for a in 0..n {
            for row in 0..r {
                for col in cols.iter() {
                    roots.push(col[a][row].clone());
                }
            }
        }
        let zero = roots.iter().all(Expr::is_const_zero);
        Ok(ConnectionMatrices { dim: n, rank: r, tape: Tape::compile(&roots), zero })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// True when every coefficient is structurally zero.
    pub fn is_trivial(&self) -> bool {
        self.zero
    }

    pub fn at(&self, x: &[f64]) -> Result<Vec<DMatrix<f64>>> {
        let v = self.tape.eval(x)?;
        let r = self.rank;
        Ok((0..self.dim).map(|a| DMatrix::from_row_slice(r, r, &v[a * r * r..(a + 1) * r * r])).collect())
    }

    /// `Σ_a v^a A_a(x)`.
    pub fn along(&self, x: &[f64], v: &[f64]) -> Result<DMatrix<f64>> {
        let r = self.rank;
        if self.zero {
            return Ok(DMatrix::zeros(r, r));
        }
        let vals = self.tape.eval(x)?;
        let mut m = DMatrix::zeros(r, r);
        for (a, va) in v.iter().enumerate() {
            if *va == 0.0 {
                continue;
            }
            let block = &vals[a * r * r..(a + 1) * r * r];
            for row in 0..r {
                for col in 0..r {
                    m[(row, col)] += va * block[row * r + col];
                }
            }
        }
        Ok(m)
    }
}

fn rhs(mats: &ConnectionMatrices, seg: &Segment, u: f64, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (x, v) = seg.eval(u)?;
    Ok(-(mats.along(&x, &v)? * s))
}

/// Splits `steps` over segments in proportion to parameter length.
fn step_split(curve: &Curve, steps: usize) -> Vec<usize> {
    let total: f64 = curve.segments.iter().map(|s| s.u1 - s.u0).sum();
    curve.segments.iter().map(|s| (((s.u1 - s.u0) / total) * steps as f64).round().max(1.0) as usize).collect()
}

fn transport_block(mats: &ConnectionMatrices, curve: &Curve, init: DMatrix<f64>, steps: usize) -> Result<DMatrix<f64>> {
    if steps == 0 {
        return Err(TransportError::Input("steps must be at least 1".into()));
    }
    if curve.dim != mats.dim {
        return Err(GeometryError::DimensionMismatch(mats.dim, curve.dim).into());
    }
    let mut s = init;
    for (seg, k) in curve.segments.iter().zip(step_split(curve, steps)) {
        let h = (seg.u1 - seg.u0) / k as f64;
        for i in 0..k {
            let u = seg.u0 + h * i as f64;
            let k1 = rhs(mats, seg, u, &s)?;
            let k2 = rhs(mats, seg, u + h / 2.0, &(&s + &k1 * (h / 2.0)))?;
            let k3 = rhs(mats, seg, u + h / 2.0, &(&s + &k2 * (h / 2.0)))?;
            let k4 = rhs(mats, seg, u + h, &(&s + &k3 * h))?;
            s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
    }
    Ok(s)
}

/// Transports `initial` along `curve` with `steps` RK4 steps in total.
pub fn transport(mats: &ConnectionMatrices, curve: &Curve, initial: &[f64], steps: usize) -> Result<Vec<f64>> {
    if initial.len() != mats.rank {
        return Err(TransportError::Input(format!("section has {} components, bundle rank is {}", initial.len(), mats.rank)));
    }
    let s = transport_block(mats, curve, DMatrix::from_column_slice(mats.rank, 1, initial), steps)?;
    Ok(s.column(0).iter().copied().collect())
}

/// The linear transport map along `curve` as a `rank x rank` matrix.
pub fn transport_matrix(mats: &ConnectionMatrices, curve: &Curve, steps: usize) -> Result<DMatrix<f64>> {
    transport_block(mats, curve, DMatrix::identity(mats.rank, mats.rank), steps)
}

#[derive(Debug, Clone, Serialize)]
pub struct HolonomyReport {
    pub rank: usize,
    pub loops: usize,
    pub singular_values: Vec<f64>,
    pub fixed_dim: usize,
    pub seed: Option<u64>,
    #[serde(skip)]
    pub matrices: Vec<DMatrix<f64>>,
}

/// Estimates the dimension of the subspace fixed by the holonomy of all
/// `loops`, an upper bound for the space of parallel sections.
pub fn holonomy_dimension(mats: &ConnectionMatrices, loops: &[Curve], steps: usize) -> Result<HolonomyReport> {
    for l in loops {
        let gap = l.closure_gap()?;
        if !(gap <= CLOSURE_TOL) {
            return Err(TransportError::NotClosed(gap));
        }
    }
    let r = mats.rank;
    let matrices: Vec<DMatrix<f64>> = loops.par_iter().map(|l| transport_matrix(mats, l, steps)).collect::<Result<_>>()?;
    let mut stacked = DMatrix::zeros(r * matrices.len().max(1), r);
    for (i, m) in matrices.iter().enumerate() {
        let diff = m - DMatrix::identity(r, r);
        stacked.view_mut((i * r, 0), (r, r)).copy_from(&diff);
    }
    let mut singular_values: Vec<f64> = stacked.svd(false, false).singular_values.iter().copied().collect();
    singular_values.sort_by(|a, b| b.total_cmp(a));
    let fixed_dim = singular_values.iter().filter(|s| **s < SINGULAR_TOL).count();
    Ok(HolonomyReport { rank: r, loops: loops.len(), singular_values, fixed_dim, seed: None, matrices })
}

/// Seeded loops through `base`: circles and axis-aligned rectangles in random
/// coordinate planes, alternating, sized to stay inside `bbox`.
pub fn random_loops(base: &[f64], bbox: &[(f64, f64)], count: usize, seed: u64) -> Result<Vec<Curve>> {
    let n = base.len();
    if n < 2 {
        return Err(TransportError::Input("loops need dimension at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let room = |k: usize, dir: f64| if dir > 0.0 { bbox[k].1 - base[k] } else { base[k] - bbox[k].0 };
    let mut out = Vec::with_capacity(count);
    for idx in 0..count {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if idx % 2 == 0 {
            // circle centred at base − r e_i spans [base_i − 2r, base_i] × [base_j − r, base_j + r]
            let limit = (room(i, -1.0) / 2.0).min(room(j, 1.0)).min(room(j, -1.0));
            let r = limit * rng.gen_range(0.3..0.9);
            out.push(Curve::circle(base, (i, j), r)?);
        } else {
            let si = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let sj = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let w = si * room(i, si) * rng.gen_range(0.3..0.9);
            let h = sj * room(j, sj) * rng.gen_range(0.3..0.9);
            out.push(Curve::rectangle(base, (i, j), w, h)?);
        }
    }
    Ok(out)
}

/// Observed order of convergence from successive step doublings, measured
/// against a run with `16 x` the finest step count.
pub fn observed_orders(mats: &ConnectionMatrices, curve: &Curve, initial: &[f64], ladder: &[usize]) -> Result<Vec<f64>> {
    let finest = *ladder.iter().max().ok_or_else(|| TransportError::Input("empty ladder".into()))?;
    let reference = transport(mats, curve, initial, finest * 16)?;
    let errors: Vec<f64> = ladder
        .iter()
        .map(|&k| {
            let s = transport(mats, curve, initial, k)?;
            Ok(s.iter().zip(&reference).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
        })
        .collect::<Result<_>>()?;
    Ok(errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect())
}

/// A section field defined by transporting `initial` from `base` along
/// straight lines.
#[derive(Debug, Clone)]
pub struct TransportedField<'a> {
    pub mats: &'a ConnectionMatrices,
    pub base: Vec<f64>,
    pub initial: Vec<f64>,
    pub steps: usize,
}

impl TransportedField<'_> {
    pub fn value_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x == self.base.as_slice() {
            return Ok(self.initial.clone());
        }
        transport(self.mats, &Curve::line(&self.base, x)?, &self.initial, self.steps)
    }

    /// Central differences `∂_a s` at `x`, indexed `[a][component]`.
    pub fn derivative(&self, x: &[f64], h: f64) -> Result<Vec<Vec<f64>>> {
        (0..x.len())
            .map(|a| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[a] += h;
                m[a] -= h;
                let (sp, sm) = (self.value_at(&p)?, self.value_at(&m)?);
                Ok(sp.iter().zip(&sm).map(|(u, v)| (u - v) / (2.0 * h)).collect())
            })
            .collect()
    }
}

/// The equation whose solutions a parallel section's top slot should solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// `∇_a ∇_b σ + P_ab σ = 0` on the cotractor bundle.
    Cotractor,
    /// `tf(∇_a ν^c) = 0` on the tractor bundle.
    TraceFreeGradient,
    /// `tf(∇_a t^{bc}) = 0` on the symmetric square.
    Metrisability,
    /// `tf(∇_a β^{bc}) = 0`, `β` skew.
    Skew,
}

impl Equation {
    pub fn bundle(self) -> BundleKind {
        match self {
            Equation::Cotractor => BundleKind::Cotractor,
            Equation::TraceFreeGradient => BundleKind::Tractor,
            Equation::Metrisability => BundleKind::S2Tractor,
            Equation::Skew => BundleKind::Skew,
        }
    }
}

/// A parallel section to test, either symbolic or produced by transport.
#[derive(Debug, Clone)]
pub enum SectionSample<'a> {
    Symbolic(Vec<Expr>),
    Transported(TransportedField<'a>),
}

const FD_STEP: f64 = 1e-4;
const FD_STEP_SECOND: f64 = 1e-3;

/// Checks that `sample` is parallel for `conn` at `points`, then returns the
/// max-abs residual of `equation` on its top slot there.
pub fn solution_correspondence(
    conn: &dyn BundleConnection,
    ctx: &ProjectiveContext,
    sample: &SectionSample<'_>,
    equation: Equation,
    points: &[Vec<f64>],
) -> Result<f64> {
    if conn.kind() != equation.bundle() {
        return Err(TransportError::Input(format!("{} connection does not prolong this equation", conn.name())));
    }
    let n = ctx.dim();
    let rank = conn.rank();
    match sample {
        SectionSample::Symbolic(section) => {
            if section.len() != rank {
                return Err(TransportError::Input(format!("section has {} components, bundle rank is {rank}", section.len())));
            }
            let d = conn.apply(section)?;
            let roots: Vec<Expr> = d.into_iter().flatten().collect();
            let res = crate::geometry::max_abs_over(&[&Tensor::vector(roots)], points)?;
            if !(res < PARALLEL_TOL) {
                return Err(TransportError::NotParallel(res));
            }
            let residual = symbolic_residual(ctx, section, equation)?;
            Ok(crate::geometry::max_abs_over(&[&residual], points)?)
        }
        SectionSample::Transported(field) => {
            let mut worst_parallel = 0.0f64;
            let mut worst = 0.0f64;
            let gamma_tape = Tape::compile(ctx.connection().christoffel().components());
            let p_tape = Tape::compile(ctx.pack().schouten.components());
            for x in points {
                let s = field.value_at(x)?;
                let ds = field.derivative(x, FD_STEP)?;
                let a = field.mats.at(x)?;
                for dir in 0..n {
                    let as_ = &a[dir] * DMatrix::from_column_slice(rank, 1, &s);
                    for k in 0..rank {
                        worst_parallel = worst_parallel.max((ds[dir][k] + as_[(k, 0)]).abs());
                    }
                }
                let gamma = Tensor::new(n, 1, 2, gamma_tape.eval(x)?).map_err(GeometryError::from)?;
                let r = match equation {
                    Equation::Cotractor => {
                        let p = p_tape.eval(x)?;
                        cotractor_residual_fd(field, x, &s, &ds, &gamma, &p)?
                    }
                    Equation::TraceFreeGradient => {
                        let nu: Vec<f64> = s[..n].to_vec();
                        let dnu = |a: usize, c: usize| ds[a][c];
                        let grad = Tensor::from_fn(n, 1, 1, |i| {
                            let (c, a) = (i[0], i[1]);
                            dnu(a, c) + (0..n).map(|e| gamma.get(&[c, a, e]) * nu[e]).sum::<f64>()
                        });
                        let tr: f64 = (0..n).map(|c| grad.get(&[c, c])).sum();
                        let tf = Tensor::from_fn(n, 1, 1, |i| grad.get(i) - if i[0] == i[1] { tr / n as f64 } else { 0.0 });
                        tf.max_abs()
                    }
                    Equation::Metrisability | Equation::Skew => {
                        let kind = if equation == Equation::Metrisability { BundleKind::S2Tractor } else { BundleKind::Skew };
                        let top = |vals: &[f64]| -> Result<Tensor<f64>> {
                            Ok(match kind {
                                BundleKind::S2Tractor => crate::tractor::S2TractorSection::from_flat(n, vals)?.t,
                                _ => crate::tractor::SkewSection::from_flat(n, vals)?.beta,
                            })
                        };
                        let t = top(&s)?;
                        let dts: Vec<Tensor<f64>> = ds.iter().map(|d| top(d)).collect::<Result<_>>()?;
                        let u = Tensor::from_fn(n, 2, 1, |i| {
                            let (b, c, a) = (i[0], i[1], i[2]);
                            dts[a].get(&[b, c])
                                + (0..n).map(|e| gamma.get(&[b, a, e]) * t.get(&[e, c]) + gamma.get(&[c, a, e]) * t.get(&[b, e])).sum::<f64>()
                        });
                        let sym = if kind == BundleKind::S2Tractor { SymmetryKind::Symmetric } else { SymmetryKind::Skew };
                        let projected = match sym {
                            SymmetryKind::Symmetric => u.symmetrize(&[0, 1]).and_then(|v| v.trace_free_sym()),
                            SymmetryKind::Skew => u.antisymmetrize(&[0, 1]).and_then(|v| v.trace_free_skew()),
                        }
                        .map_err(GeometryError::from)?;
                        projected.max_abs()
                    }
                };
                worst = worst.max(r);
            }
            if !(worst_parallel < PARALLEL_TOL) {
                return Err(TransportError::NotParallel(worst_parallel));
            }
            Ok(worst)
        }
    }
}

fn cotractor_residual_fd(
    field: &TransportedField<'_>,
    x: &[f64],
    s: &[f64],
    ds: &[Vec<f64>],
    gamma: &Tensor<f64>,
    p: &[f64],
) -> Result<f64> {
    let n = x.len();
    let h = FD_STEP_SECOND;
    let sigma = |y: &[f64]| -> Result<f64> { Ok(field.value_at(y)?[0]) };
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let second = if a == b {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[a] += h;
                xm[a] -= h;
                (sigma(&xp)? - 2.0 * s[0] + sigma(&xm)?) / (h * h)
            } else {
                let mut acc = 0.0;
                for (sa, sb, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                    let mut y = x.to_vec();
                    y[a] += sa * h;
                    y[b] += sb * h;
                    acc += w * sigma(&y)?;
                }
                acc / (4.0 * h * h)
            };
            let conn_term: f64 = (0..n).map(|e| gamma.get(&[e, a, b]) * ds[e][0]).sum();
            worst = worst.max((second - conn_term + p[a * n + b] * s[0]).abs());
        }
    }
    Ok(worst)
}

/// The equation residual of a symbolic section's top slot, as a field.
pub fn symbolic_residual(ctx: &ProjectiveContext, section: &[Expr], equation: Equation) -> Result<crate::tensor::TensorField> {
    use crate::geometry::covariant_derivative;
    use crate::tractor::{CotractorSection, S2TractorSection, SkewSection, TractorSection};
    let n = ctx.dim();
    let conn = ctx.connection();
    Ok(match equation {
        Equation::Cotractor => {
            let s = CotractorSection::from_flat(n, section)?;
            let dd = covariant_derivative(conn, &covariant_derivative(conn, &s.sigma)?)?; // [a][b]
            let sigma = s.sigma.scalar_value();
            Tensor::from_fn(n, 0, 2, |i| dd.get(i).add(&ctx.pack().schouten.get(i).mul(sigma)))
        }
        Equation::TraceFreeGradient => {
            let s = TractorSection::from_flat(n, section)?;
            let g = covariant_derivative(conn, &s.nu)?; // [c][a]
            let tr = Expr::sum((0..n).map(|c| g.get(&[c, c]).clone()).collect::<Vec<_>>());
            Tensor::from_fn(n, 1, 1, |i| if i[0] == i[1] { g.get(i).sub(&tr.scale(1, n as i64)) } else { g.get(i).clone() })
        }
        Equation::Metrisability => {
            let s = S2TractorSection::from_flat(n, section)?;
            let u = covariant_derivative(conn, &s.t)?.with_symmetry(crate::tensor::Symmetry::symmetric(0, 1)).map_err(GeometryError::from)?;
            u.trace_free_sym().map_err(GeometryError::from)?
        }
        Equation::Skew => {
            let s = SkewSection::from_flat(n, section)?;
            let u = covariant_derivative(conn, &s.beta)?;
            u.trace_free_skew().map_err(GeometryError::from)?
        }
    })
}
