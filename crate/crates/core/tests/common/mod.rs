//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_rational::BigRational;
use projprolong::geometry::ChartGeometry;
use projprolong::{parse, Expr};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform float points in the cube `[-r, r]^n`.
pub fn float_points(n: usize, count: usize, r: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut g = rng(seed);
    (0..count).map(|_| (0..n).map(|_| g.gen_range(-r..r)).collect()).collect()
}

/// Rational points `k/16` with `|k| ≤ 16 r`.
pub fn rational_points(n: usize, count: usize, r: f64, seed: u64) -> Vec<Vec<BigRational>> {
    let mut g = rng(seed);
    let m = (16.0 * r) as i64;
    (0..count)
        .map(|_| (0..n).map(|_| BigRational::new(g.gen_range(-m..=m).into(), 16.into())).collect())
        .collect()
}

/// `δ_ij` plus small random polynomial terms of degree at most two.
pub fn random_polynomial_metric(n: usize, seed: u64) -> ChartGeometry {
    let mut g = rng(seed);
    let mut rows = vec![vec![String::new(); n]; n];
    for i in 0..n {
        for j in i..n {
            let mut terms = vec![if i == j { "1".to_string() } else { "0".to_string() }];
            for a in 0..n {
                let k: i64 = g.gen_range(-2..=2);
                if k != 0 {
                    terms.push(format!("({k}/10)*x{a}"));
                }
                for b in a..n {
                    let k: i64 = g.gen_range(-2..=2);
                    if k != 0 {
                        terms.push(format!("({k}/10)*x{a}*x{b}"));
                    }
                }
            }
            let s = terms.join(" + ");
            rows[i][j] = s.clone();
            rows[j][i] = s;
        }
    }
    ChartGeometry::parse(&rows).expect("valid metric")
}

pub fn diag_metric(entries: &[&str]) -> ChartGeometry {
    let n = entries.len();
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { entries[i].to_string() } else { "0".to_string() }).collect())
        .collect();
    ChartGeometry::parse(&rows).expect("valid metric")
}

pub fn expr(s: &str, n: usize) -> Expr {
    parse(s, n).expect("valid expression")
}

/// Random polynomial expression in `n` variables with small rational coefficients.
pub fn random_polynomial(n: usize, g: &mut ChaCha8Rng) -> Expr {
    let mut terms = vec![format!("{}/7", g.gen_range(-6..=6))];
    for a in 0..n {
        terms.push(format!("({}/5)*x{a}", g.gen_range(-4..=4)));
        for b in a..n {
            terms.push(format!("({}/9)*x{a}*x{b}", g.gen_range(-4..=4)));
        }
    }
    expr(&terms.join(" + "), n)
}

/// Central-difference Christoffel symbols `[c][a][b]` of a metric given as a
/// function of the point.
pub fn fd_christoffel(metric: &dyn Fn(&[f64]) -> DMatrix<f64>, x: &[f64], h: f64) -> Vec<f64> {
    let n = x.len();
    let dg: Vec<DMatrix<f64>> = (0..n)
        .map(|a| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[a] += h;
            m[a] -= h;
            (metric(&p) - metric(&m)) / (2.0 * h)
        })
        .collect();
    let ginv = metric(x).try_inverse().expect("invertible metric");
    let mut out = vec![0.0; n * n * n];
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += 0.5 * ginv[(c, d)] * (dg[a][(d, b)] + dg[b][(d, a)] - dg[d][(a, b)]);
                }
                out[(c * n + a) * n + b] = s;
            }
        }
    }
    out
}

/// Riemann `[c][a][b][d]` from nested central differences of the Christoffel
/// symbols: `∂_a Γ^c_bd − ∂_b Γ^c_ad + Γ^c_ae Γ^e_bd − Γ^c_be Γ^e_ad`.
pub fn fd_riemann(metric: &dyn Fn(&[f64]) -> DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let (h_out, h_in) = (1e-3, 1e-5);
    let gamma = fd_christoffel(metric, x, h_in);
    let dgamma: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[a] += h_out;
            m[a] -= h_out;
            let gp = fd_christoffel(metric, &p, h_in);
            let gm = fd_christoffel(metric, &m, h_in);
            gp.iter().zip(&gm).map(|(u, v)| (u - v) / (2.0 * h_out)).collect()
        })
        .collect();
    let g = |c: usize, a: usize, b: usize| gamma[(c * n + a) * n + b];
    let mut out = vec![0.0; n * n * n * n];
    for c in 0..n {
        for a in 0..n {
            for b in 0..n {
                for d in 0..n {
                    let mut s = dgamma[a][(c * n + b) * n + d] - dgamma[b][(c * n + a) * n + d];
                    for e in 0..n {
                        s += g(c, a, e) * g(e, b, d) - g(c, b, e) * g(e, a, d);
                    }
                    out[((c * n + a) * n + b) * n + d] = s;
                }
            }
        }
    }
    out
}

/// The round metric `4/(1+|x|²)² δ` in closed form.
pub fn sphere_metric(x: &[f64]) -> DMatrix<f64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    DMatrix::identity(x.len(), x.len()) * (4.0 / (1.0 + r2).powi(2))
}

/// Metric of a geometry as a numeric function, via the library's evaluator.
pub fn metric_fn(geom: &ChartGeometry) -> impl Fn(&[f64]) -> DMatrix<f64> + '_ {
    move |x: &[f64]| {
        let n = geom.dim();
        let m = geom.metric().eval(x).expect("metric evaluates");
        DMatrix::from_row_slice(n, n, m.components())
    }
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    max_abs(a.iter().zip(b).map(|(x, y)| x - y))
}
