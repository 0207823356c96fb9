//! The verification suites behind `check`, and the `curvature` and
//! `transport` commands.

use num_rational::BigRational;
use projprolong::geometry::{
    covariant_derivative, cotton_divergence_residual, cotton_relation, first_bianchi, max_abs_over, second_bianchi,
    AffineConnection, CurvaturePack, GeometryError,
};
use projprolong::projective::{
    einstein_deviation_from, one_form_law_residual, projective_change, vector_law_residual, weyl_trace_relation, Upsilon,
};
use projprolong::tractor::*;
use projprolong::transport::*;
use projprolong::{Coefficient, Expr, Tensor, TensorField};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::report::ReportBuilder;
use crate::spec::{to_rational, LoadedSpec, Mode};
use crate::CliError;

pub const DUALITY_TOL: f64 = 1e-10;
pub const IDENTITY_TOL: f64 = 1e-10;
pub const FIRST_BIANCHI_TOL: f64 = 1e-8;
pub const SECOND_BIANCHI_TOL: f64 = 1e-7;
pub const COTTON_RELATION_TOL: f64 = 1e-7;
pub const WEYL_TRACE_TOL: f64 = 1e-9;
pub const WEYL_INVARIANCE_TOL: f64 = 1e-8;
pub const COTTON_INVARIANCE_TOL: f64 = 1e-7;
pub const OBSTRUCTION_ZERO: f64 = 1e-8;
pub const OBSTRUCTION_NONZERO: f64 = 1e-3;
pub const CURVATURE_ZERO: f64 = 1e-8;
pub const REVERSE_TOL: f64 = 1e-8;
pub const LOOP_IDENTITY_TOL: f64 = 1e-8;

const RANDOM_SECTIONS: usize = 10;
const LOOPS: usize = 5;
const BOX_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Duality,
    Invariance,
    Einstein,
    Prolong,
    Holonomy,
    Bianchi,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Duality => "duality",
            Suite::Invariance => "invariance",
            Suite::Einstein => "einstein",
            Suite::Prolong => "prolong",
            Suite::Holonomy => "holonomy",
            Suite::Bianchi => "bianchi",
            Suite::All => "all",
        }
    }
}

/// Evaluation points in the chosen arithmetic.
#[derive(Debug, Clone)]
pub enum Points {
    Float(Vec<Vec<f64>>),
    Rational(Vec<Vec<BigRational>>),
}

impl Points {
    pub fn new(float: &[Vec<f64>], mode: Mode) -> Self {
        match mode {
            Mode::Float => Points::Float(float.to_vec()),
            Mode::Rational => Points::Rational(to_rational(float)),
        }
    }

    pub fn max_abs(&self, fields: &[&TensorField]) -> Result<f64, GeometryError> {
        match self {
            Points::Float(p) => max_abs_over(fields, p),
            Points::Rational(p) => max_abs_over(fields, p),
        }
    }

    fn max_abs_exprs(&self, exprs: Vec<Expr>) -> Result<f64, GeometryError> {
        self.max_abs(&[&Tensor::vector(exprs)])
    }
}

/// Everything a suite needs.
pub struct Run<'a> {
    pub spec: &'a LoadedSpec,
    pub mode: Mode,
    pub points: Points,
    pub float_points: Vec<Vec<f64>>,
    pub seed: u64,
    pub steps: usize,
    pub bundle: Option<String>,
}

impl Run<'_> {
    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(salt))
    }

    fn context(&self) -> Result<ProjectiveContext, GeometryError> {
        ProjectiveContext::from_geometry(&self.spec.geometry)
    }
}

/// A polynomial of degree two with small rational coefficients.
pub fn random_polynomial(n: usize, rng: &mut ChaCha8Rng) -> Expr {
    let mut coeff = || Expr::ratio(rng.gen_range(-6..=6), rng.gen_range(1..=5));
    let mut terms = vec![coeff()];
    for a in 0..n {
        terms.push(coeff().mul(&Expr::var(a)));
        for b in a..n {
            terms.push(coeff().mul(&Expr::var(a)).mul(&Expr::var(b)));
        }
    }
    Expr::sum(terms)
}

fn random_flat(n: usize, len: usize, rng: &mut ChaCha8Rng) -> Vec<Expr> {
    (0..len).map(|_| random_polynomial(n, rng)).collect()
}

fn flat_diff(a: &[Expr], b: &[Expr]) -> Vec<Expr> {
    a.iter().zip(b).map(|(x, y)| x.sub(y)).collect()
}

pub fn run_suite(suite: Suite, run: &Run<'_>, b: &mut ReportBuilder<'_>) -> Result<(), CliError> {
    if matches!(suite, Suite::Invariance | Suite::All) && run.spec.upsilon.is_none() {
        return Err(CliError::Input(format!("suite {} needs phi or upsilon in the spec", suite.name())));
    }
    match suite {
        Suite::Bianchi => bianchi(run, b),
        Suite::Duality => duality(run, b),
        Suite::Invariance => invariance(run, b),
        Suite::Einstein => einstein(run, b),
        Suite::Prolong => prolong(run, b),
        Suite::Holonomy => holonomy(run, b)?,
        Suite::All => {
            for s in [Suite::Bianchi, Suite::Duality, Suite::Invariance, Suite::Einstein, Suite::Prolong, Suite::Holonomy] {
                run_suite(s, run, b)?;
            }
        }
    }
    Ok(())
}

fn bianchi(run: &Run<'_>, b: &mut ReportBuilder<'_>) {
    let geom = &run.spec.geometry;
    let (conn, pack) = match CurvaturePack::derive(geom) {
        Ok(x) => x,
        Err(e) => {
            b.below("first_bianchi", FIRST_BIANCHI_TOL, Err::<f64, _>(e));
            return;
        }
    };
    let p = &run.points;
    b.below("first_bianchi", FIRST_BIANCHI_TOL, p.max_abs(&[&first_bianchi(&pack.riemann)]));
    b.below("second_bianchi", SECOND_BIANCHI_TOL, second_bianchi(&conn, &pack.riemann).and_then(|t| p.max_abs(&[&t])));
    b.below("cotton_relation", COTTON_RELATION_TOL, cotton_divergence_residual(&conn, &pack).and_then(|t| p.max_abs(&[&t])));
    if let Ok(v) = cotton_relation(&conn, &pack).and_then(|t| p.max_abs(&[&t])) {
        b.data("cotton_relation_dab_order", json!(v));
    }
    let traces = pack.weyl.contract(0, 0).and_then(|a| Ok((a, pack.weyl.contract(0, 1)?)));
    b.below(
        "weyl_traces",
        WEYL_TRACE_TOL,
        traces.map_err(GeometryError::from).and_then(|(a, c)| p.max_abs(&[&a, &c])),
    );
    b.below("weyl_metric_trace", WEYL_TRACE_TOL, weyl_trace_relation(geom, &pack).and_then(|t| p.max_abs(&[&t])));
    b.below(
        "metric_compatibility",
        IDENTITY_TOL,
        covariant_derivative(&conn, geom.metric()).and_then(|t| p.max_abs(&[&t])),
    );
}

fn duality(run: &Run<'_>, b: &mut ReportBuilder<'_>) {
    let ctx = match run.context() {
        Ok(c) => c,
        Err(e) => {
            b.below("duality_tractor", DUALITY_TOL, Err::<f64, _>(e));
            return;
        }
    };
    let n = ctx.dim();
    let cache = run.spec.geometry.cache();
    let mut rng = run.rng(1);
    let tractor = (|| -> Result<f64, GeometryError> {
        let mut res = Vec::new();
        for _ in 0..RANDOM_SECTIONS {
            let u = CotractorSection::from_flat(n, &random_flat(n, n + 1, &mut rng))?;
            let v = TractorSection::from_flat(n, &random_flat(n, n + 1, &mut rng))?;
            let (du, dv) = (cotractor_nabla(&ctx, &u)?, tractor_nabla(&ctx, &v)?);
            let pair = tractor_pairing(&u, &v);
            for a in 0..n {
                res.push(cache.diff(&pair, a).sub(&tractor_pairing(&du[a], &v)).sub(&tractor_pairing(&u, &dv[a])));
            }
        }
        run.points.max_abs_exprs(res)
    })();
    b.below("duality_tractor", DUALITY_TOL, tractor);
    let s2 = (|| -> Result<f64, GeometryError> {
        let rank = BundleKind::S2Tractor.rank(n);
        let mut res = Vec::new();
        for _ in 0..RANDOM_SECTIONS {
            let u = S2CotractorSection::from_flat(n, &random_flat(n, rank, &mut rng))?;
            let v = S2TractorSection::from_flat(n, &random_flat(n, rank, &mut rng))?;
            let (du, dv) = (s2_dual_nabla(&ctx, &u)?, metrisability_prolong_nabla(&ctx, &v)?);
            let pair = s2_pairing(&u, &v);
            for a in 0..n {
                res.push(cache.diff(&pair, a).sub(&s2_pairing(&du[a], &v)).sub(&s2_pairing(&u, &dv[a])));
            }
        }
        run.points.max_abs_exprs(res)
    })();
    b.below("duality_s2", DUALITY_TOL, s2);
}

fn invariance(run: &Run<'_>, b: &mut ReportBuilder<'_>) {
    let ups: &Upsilon = run.spec.upsilon.as_ref().expect("checked by caller");
    let geom = &run.spec.geometry;
    let n = geom.dim();
    let p = &run.points;
    let derived = CurvaturePack::derive(geom).and_then(|(conn, pack)| {
        let bar_conn = projective_change(&conn, ups)?;
        let bar = CurvaturePack::from_connection(&bar_conn)?;
        Ok((conn, pack, bar))
    });
    let (conn, pack, bar) = match derived {
        Ok(x) => x,
        Err(e) => {
            b.below("weyl_invariance", WEYL_INVARIANCE_TOL, Err::<f64, _>(e));
            return;
        }
    };
    b.below("weyl_invariance", WEYL_INVARIANCE_TOL, bar.weyl.sub(&pack.weyl).map_err(GeometryError::from).and_then(|d| p.max_abs(&[&d])));
    b.below("cotton_invariance", COTTON_INVARIANCE_TOL, bar.cotton.sub(&pack.cotton).map_err(GeometryError::from).and_then(|d| p.max_abs(&[&d])));
    let change = Tensor::from_fn(n, 0, 3, |i| {
        let mut terms = vec![bar.cotton.get(i).clone(), pack.cotton.get(i).neg()];
        for d in 0..n {
            terms.push(ups.get(d).mul(pack.weyl.get(&[d, i[0], i[1], i[2]])).neg());
        }
        Expr::sum(terms)
    });
    b.below("cotton_change_law", IDENTITY_TOL, p.max_abs(&[&change]));
    let mut rng = run.rng(2);
    let omega = Tensor::covector(random_flat(n, n, &mut rng));
    let nu = Tensor::vector(random_flat(n, n, &mut rng));
    b.below("one_form_law", IDENTITY_TOL, one_form_law_residual(&conn, ups, &omega).and_then(|t| p.max_abs(&[&t])));
    b.below("vector_law", IDENTITY_TOL, vector_law_residual(&conn, ups, &nu).and_then(|t| p.max_abs(&[&t])));
}

fn einstein(run: &Run<'_>, b: &mut ReportBuilder<'_>) {
    let geom = &run.spec.geometry;
    let ctx = match run.context() {
        Ok(c) => c,
        Err(e) => {
            b.holds("obstruction_iff_einstein", Err::<bool, _>(e));
            return;
        }
    };
    let n = ctx.dim();
    let p = &run.points;
    let sizes = metrisability_obstruction(&ctx, geom.inverse()).and_then(|(v, s)| {
        let obs = p.max_abs(&[&v, &s])?;
        let dev = p.max_abs(&[&einstein_deviation_from(geom, ctx.pack())])?;
        Ok((obs, dev))
    });
    let verdict = sizes.map(|(obs, dev)| {
        b.data("obstruction_max", json!(obs));
        b.data("einstein_deviation_max", json!(dev));
        b.data("connections_differ", json!(obs > OBSTRUCTION_NONZERO));
        (obs < OBSTRUCTION_ZERO && dev < OBSTRUCTION_ZERO) || (obs > OBSTRUCTION_NONZERO && dev > OBSTRUCTION_NONZERO)
    });
    b.holds("obstruction_iff_einstein", verdict);
    let mut rng = run.rng(3);
    let identity = (|| -> Result<f64, GeometryError> {
        let rank = BundleKind::S2Tractor.rank(n);
        let mut res = Vec::new();
        for _ in 0..RANDOM_SECTIONS {
            let s = S2TractorSection::from_flat(n, &random_flat(n, rank, &mut rng))?;
            let (tr, me) = (s2_tractor_nabla(&ctx, &s)?, metrisability_prolong_nabla(&ctx, &s)?);
            let (ov, os) = metrisability_obstruction(&ctx, &s.t)?;
            for a in 0..n {
                let obs = S2TractorSection::new(
                    Tensor::zeros(n, 2, 0),
                    Tensor::from_fn(n, 1, 0, |i| ov.get(&[i[0], a]).clone()),
                    Tensor::scalar(n, os.get(&[a]).clone()),
                )?;
                res.extend(flat_diff(&flat_diff(&tr[a].to_flat(), &me[a].to_flat()), &obs.to_flat()));
            }
        }
        p.max_abs_exprs(res)
    })();
    b.below("connection_difference", IDENTITY_TOL, identity);
}

fn prolong(run: &Run<'_>, b: &mut ReportBuilder<'_>) {
    let ctx = match run.context() {
        Ok(c) => c,
        Err(e) => {
            b.below("tractor_curvature", IDENTITY_TOL, Err::<f64, _>(e));
            return;
        }
    };
    let n = ctx.dim();
    let p = &run.points;
    let mut rng = run.rng(4);
    let tr_curv = (|| -> Result<f64, GeometryError> {
        let conn = ContextConnection::new(ctx.clone(), ConnectionKind::Tractor)?;
        let s = random_flat(n, n + 1, &mut rng);
        let comm = commutator(&conn, &s)?;
        let curv = tractor_curvature(&ctx, &TractorSection::from_flat(n, &s)?);
        p.max_abs_exprs(comm.iter().zip(&curv).flat_map(|(c, k)| flat_diff(c, &k.to_flat())).collect())
    })();
    b.below("tractor_curvature", IDENTITY_TOL, tr_curv);
    let co_curv = (|| -> Result<f64, GeometryError> {
        let conn = ContextConnection::new(ctx.clone(), ConnectionKind::Cotractor)?;
        let s = random_flat(n, n + 1, &mut rng);
        let comm = commutator(&conn, &s)?;
        let curv = cotractor_curvature(&ctx, &CotractorSection::from_flat(n, &s)?);
        p.max_abs_exprs(comm.iter().zip(&curv).flat_map(|(c, k)| flat_diff(c, &k.to_flat())).collect())
    })();
    b.below("cotractor_curvature", IDENTITY_TOL, co_curv);
    let expansion = (|| -> Result<f64, GeometryError> {
        let s = S2TractorSection::from_flat(n, &random_flat(n, BundleKind::S2Tractor.rank(n), &mut rng))?;
        let (direct, expanded) = (s2_tractor_nabla(&ctx, &s)?, s2_tractor_nabla_expanded(&ctx, &s)?);
        p.max_abs_exprs(direct.iter().zip(&expanded).flat_map(|(x, y)| flat_diff(&x.to_flat(), &y.to_flat())).collect())
    })();
    b.below("splitting_expansion", IDENTITY_TOL, expansion);
    let ident = (|| -> Result<f64, GeometryError> {
        let s = TractorSection::from_flat(n, &random_flat(n, n + 1, &mut rng))?;
        let pro = proj_prolong_nabla(&ctx, &s)?;
        let tr = tractor_nabla(&ctx, &TractorSection::new(s.nu.clone(), s.rho.neg())?)?;
        let mut res = Vec::new();
        for a in 0..n {
            res.extend(flat_diff(pro[a].nu.components(), tr[a].nu.components()));
            res.push(pro[a].rho.scalar_value().add(tr[a].rho.scalar_value()));
        }
        p.max_abs_exprs(res)
    })();
    b.below("prolong_tractor_identification", IDENTITY_TOL, ident);
}

/// Builds the named connection on the spec's Levi-Civita connection.
pub fn connection(run: &Run<'_>, name: &str) -> Result<Box<dyn BundleConnection>, CliError> {
    if name == "skew" {
        let conn: AffineConnection = run.spec.geometry.levi_civita();
        let skew = FlatSkewProlongation::new(conn, &run.float_points).map_err(|e| CliError::Input(format!("bundle skew: {e}")))?;
        return Ok(Box::new(skew));
    }
    let kind = ConnectionKind::parse(name).ok_or_else(|| {
        let names: Vec<&str> = ConnectionKind::ALL.iter().map(|k| k.name()).collect();
        CliError::Input(format!("unknown bundle {name:?}; expected one of {}", names.join(", ")))
    })?;
    let ctx = run.context().map_err(|e| CliError::Input(e.to_string()))?;
    Ok(Box::new(ContextConnection::new(ctx, kind).map_err(|e| CliError::Input(e.to_string()))?))
}

fn curvature_zero(conn: &dyn BundleConnection, points: &[Vec<f64>]) -> Result<f64, GeometryError> {
    let r = conn.rank();
    let mut res = Vec::new();
    for k in 0..r {
        let basis: Vec<Expr> = (0..r).map(|i| Expr::int(i64::from(i == k))).collect();
        res.extend(commutator(conn, &basis)?.into_iter().flatten());
    }
    max_abs_over(&[&Tensor::vector(res)], points)
}

fn holonomy(run: &Run<'_>, b: &mut ReportBuilder<'_>) -> Result<(), CliError> {
    let names: Vec<String> = match &run.bundle {
        Some(n) => vec![n.clone()],
        None => vec!["tractor".into(), "cotractor".into(), "metrisability".into()],
    };
    let center = run.spec.spec.box_center();
    let loops = random_loops(&center, &run.spec.spec.bounds(), LOOPS, run.seed).map_err(|e| CliError::Input(e.to_string()))?;
    let mut reports = serde_json::Map::new();
    for name in names {
        let conn = connection(run, &name)?;
        let result = ConnectionMatrices::new(conn.as_ref()).and_then(|m| holonomy_dimension(&m, &loops, run.steps));
        match result {
            Ok(mut rep) => {
                rep.seed = Some(run.seed);
                b.holds(&format!("holonomy_{name}_bounded"), Ok::<_, String>(rep.fixed_dim <= rep.rank));
                let flat = curvature_zero(conn.as_ref(), &run.float_points).map(|k| k < CURVATURE_ZERO);
                b.holds(&format!("holonomy_{name}_flatness"), flat.map(|f| f == (rep.fixed_dim == rep.rank)));
                reports.insert(name, serde_json::to_value(&rep).expect("serializable"));
            }
            Err(e) => b.holds(&format!("holonomy_{name}_bounded"), Err::<bool, _>(e)),
        }
    }
    b.data("holonomy", Value::Object(reports));
    Ok(())
}

/// Curvature values at each point plus identity residuals.
pub fn curvature(run: &Run<'_>, b: &mut ReportBuilder<'_>) -> Result<(), CliError> {
    let geom = &run.spec.geometry;
    let (_, pack) = CurvaturePack::derive(geom).map_err(|e| CliError::Input(e.to_string()))?;
    let scalar = pack.scalar.clone().expect("derived from a metric");
    let fields: [(&str, &TensorField); 6] = [
        ("riemann", &pack.riemann),
        ("ricci", &pack.ricci),
        ("scalar", &scalar),
        ("schouten", &pack.schouten),
        ("weyl", &pack.weyl),
        ("cotton", &pack.cotton),
    ];
    let mut values = Vec::new();
    let mut errors = Vec::new();
    match &run.points {
        Points::Float(pts) => {
            for p in pts {
                values.push(point_values(&fields, p, &mut errors));
            }
        }
        Points::Rational(pts) => {
            for p in pts {
                values.push(point_values(&fields, p, &mut errors));
            }
        }
    }
    b.data("points", Value::Array(values));
    b.holds("evaluation", if errors.is_empty() { Ok(true) } else { Err(errors.join("; ")) });
    bianchi(run, b);
    Ok(())
}

fn point_values<S: projprolong::Scalar>(fields: &[(&str, &TensorField)], p: &[S], errors: &mut Vec<String>) -> Value {
    let mut m = serde_json::Map::new();
    m.insert("point".into(), json!(p.iter().map(|x| x.exact_string()).collect::<Vec<_>>()));
    for (name, f) in fields {
        match f.eval(p) {
            Ok(t) => {
                m.insert((*name).into(), serde_json::to_value(&t).expect("serializable"));
            }
            Err(e) => errors.push(format!("{name} at {:?}: {e}", p.iter().map(|x| x.to_f64()).collect::<Vec<_>>())),
        }
    }
    Value::Object(m)
}

/// Parses `line:A:B`, `circle:BASE:i,j:R` or `rect:BASE:i,j:W,H`, with
/// comma-separated coordinate lists.
pub fn parse_curve(text: &str, n: usize) -> Result<Curve, CliError> {
    let bad = |m: &str| CliError::Input(format!("curve {text:?}: {m}"));
    let nums = |s: &str| -> Result<Vec<f64>, CliError> {
        s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad(&format!("not a number list: {s:?}")))).collect()
    };
    let point = |s: &str| -> Result<Vec<f64>, CliError> {
        let v = nums(s)?;
        if v.len() != n {
            return Err(bad(&format!("expected {n} coordinates, found {}", v.len())));
        }
        Ok(v)
    };
    let plane = |s: &str| -> Result<(usize, usize), CliError> {
        let v: Vec<usize> = s.split(',').map(|x| x.trim().parse().map_err(|_| bad("plane must be two indices"))).collect::<Result<_, _>>()?;
        match v.as_slice() {
            [i, j] if i != j && *i < n && *j < n => Ok((*i, *j)),
            _ => Err(bad("plane must be two distinct coordinate indices")),
        }
    };
    let parts: Vec<&str> = text.split(':').collect();
    let curve = match parts.as_slice() {
        ["line", a, c] => Curve::line(&point(a)?, &point(c)?),
        ["circle", base, pl, r] => {
            let r = nums(r)?;
            if r.len() != 1 || !(r[0] > 0.0) {
                return Err(bad("radius must be one positive number"));
            }
            Curve::circle(&point(base)?, plane(pl)?, r[0])
        }
        ["rect", base, pl, wh] => match nums(wh)?.as_slice() {
            [w, h] => Curve::rectangle(&point(base)?, plane(pl)?, *w, *h),
            _ => return Err(bad("rectangle needs W,H")),
        },
        _ => return Err(bad("expected line:A:B, circle:BASE:i,j:R or rect:BASE:i,j:W,H")),
    };
    curve.map_err(|e| bad(&e.to_string()))
}

pub struct TransportArgs<'a> {
    pub bundle: &'a str,
    pub curve: Option<&'a str>,
    pub closed: bool,
}

pub fn transport_command(run: &Run<'_>, args: &TransportArgs<'_>, b: &mut ReportBuilder<'_>) -> Result<(), CliError> {
    let n = run.spec.dim();
    let bounds = run.spec.spec.bounds();
    let center = run.spec.spec.box_center();
    let mut rng = run.rng(5);
    let curve = match (args.curve, args.closed) {
        (Some(text), _) => parse_curve(text, n)?,
        (None, true) => random_loops(&center, &bounds, 1, run.seed).map_err(|e| CliError::Input(e.to_string()))?.remove(0),
        (None, false) => {
            let end: Vec<f64> = bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect();
            Curve::line(&center, &end).map_err(|e| CliError::Input(e.to_string()))?
        }
    };
    curve.check_in_box(&bounds, BOX_SAMPLES).map_err(|e| CliError::Input(e.to_string()))?;
    if args.closed {
        let gap = curve.closure_gap().map_err(|e| CliError::Input(e.to_string()))?;
        if !(gap <= CLOSURE_TOL) {
            return Err(CliError::Input(format!("--loop needs a closed curve (endpoint gap {gap:e})")));
        }
    }
    let conn = connection(run, args.bundle)?;
    let mats = ConnectionMatrices::new(conn.as_ref()).map_err(|e| CliError::Input(e.to_string()))?;
    let kind = conn.kind();
    let initial: Vec<f64> = (0..mats.rank()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    b.data("bundle", json!(args.bundle));
    b.data("rank", json!(mats.rank()));
    b.data("steps", json!(run.steps));
    b.data("initial", kind.section_json(n, &initial).expect("rank matches"));
    let outcome = (|| -> Result<(), TransportError> {
        let fin = transport(&mats, &curve, &initial, run.steps)?;
        let back = transport(&mats, &curve.reversed()?, &fin, run.steps)?;
        let rev = fin_diff(&back, &initial);
        b.data("final", kind.section_json(n, &fin).expect("rank matches"));
        b.below("reverse_transport", REVERSE_TOL, Ok::<_, String>(rev));
        if args.closed {
            let m = transport_matrix(&mats, &curve, run.steps)?;
            let r = mats.rank();
            let defect = (0..r).flat_map(|i| (0..r).map(move |j| (i, j))).map(|(i, j)| (m[(i, j)] - f64::from(u8::from(i == j))).abs()).fold(0.0, f64::max);
            b.below("loop_identity", LOOP_IDENTITY_TOL, Ok::<_, String>(defect));
        }
        let base = (run.steps / 16).max(1);
        let orders = observed_orders(&mats, &curve, &initial, &[base, 2 * base, 4 * base])?;
        b.data("observed_orders", json!(orders));
        Ok(())
    })();
    if let Err(e) = outcome {
        b.below("reverse_transport", REVERSE_TOL, Err::<f64, _>(e));
    }
    Ok(())
}

fn fin_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curve_syntax() {
        let c = parse_curve("circle:0,0:0,1:0.5", 2).unwrap();
        assert!(c.closure_gap().unwrap() < 1e-12);
        let r = parse_curve("rect:0.1,0.2:1,0:0.3,0.4", 2).unwrap();
        assert!(r.closure_gap().unwrap() < 1e-12);
        let l = parse_curve("line:0,0:1,1", 2).unwrap();
        assert!(l.closure_gap().unwrap() > 0.5);
        for bad in ["line:0,0", "circle:0,0:0,0:1", "circle:0,0:0,1:-1", "rect:0,0:0,1:1", "spiral:0,0", "line:0:1,1", "line:a,b:1,1"] {
            assert!(parse_curve(bad, 2).is_err(), "{bad}");
        }
    }

    #[test]
    fn random_polynomials_are_seeded() {
        let a = random_polynomial(3, &mut ChaCha8Rng::seed_from_u64(1));
        let b = random_polynomial(3, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a.to_string(), b.to_string());
    }
}
