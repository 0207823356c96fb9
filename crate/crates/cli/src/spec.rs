//! Geometry-spec files: JSON with expression strings.

use std::path::Path;

use num_rational::BigRational;
use projprolong::geometry::ChartGeometry;
use projprolong::projective::Upsilon;
use projprolong::{parse, Expr, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Float,
    Rational,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Float => "float",
            Mode::Rational => "rational",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Samples {
    Count { count: usize, seed: u64 },
    Points { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub dim: usize,
    #[serde(default)]
    pub coords: Vec<String>,
    pub metric: Vec<Vec<String>>,
    #[serde(default)]
    pub phi: Option<String>,
    #[serde(default)]
    pub upsilon: Option<Vec<String>>,
    #[serde(rename = "box")]
    pub bbox: Vec<[f64; 2]>,
    #[serde(default = "default_samples")]
    pub samples: Samples,
    #[serde(default)]
    pub mode: Mode,
}

fn default_samples() -> Samples {
    Samples::Count { count: 10, seed: 0 }
}

/// Number of points used to check the metric text for symmetry.
const SYMMETRY_PROBES: usize = 5;
const SYMMETRY_RTOL: f64 = 1e-12;

/// A spec after parsing and validation.
#[derive(Debug, Clone)]
pub struct LoadedSpec {
    pub spec: GeometrySpec,
    pub source: String,
    pub digest: String,
    pub geometry: ChartGeometry,
    pub upsilon: Option<Upsilon>,
}

impl GeometrySpec {
    pub fn from_json(text: &str, source: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("{source}: {e}")))
    }

    pub fn coord_names(&self) -> Vec<String> {
        if self.coords.is_empty() {
            (0..self.dim).map(|i| format!("x{i}")).collect()
        } else {
            self.coords.clone()
        }
    }

    /// Parses one expression string, accepting coordinate names as well as
    /// `x0 .. x(n-1)`.
    pub fn parse_expr(&self, text: &str, what: &str, source: &str) -> Result<Expr, CliError> {
        let renamed = rename_coords(text, &self.coord_names());
        parse(&renamed, self.dim).map_err(|e| CliError::Input(format!("{source}: {what}: {e}")))
    }

    pub fn box_center(&self) -> Vec<f64> {
        self.bbox.iter().map(|[lo, hi]| 0.5 * (lo + hi)).collect()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.bbox.iter().map(|[lo, hi]| (*lo, *hi)).collect()
    }

    fn validate_shape(&self, source: &str) -> Result<(), CliError> {
        let n = self.dim;
        let bad = |m: String| Err(CliError::Input(format!("{source}: {m}")));
        if n == 0 {
            return bad("dim must be positive".into());
        }
        if !self.coords.is_empty() && self.coords.len() != n {
            return bad(format!("expected {n} coordinate names, found {}", self.coords.len()));
        }
        if self.metric.len() != n || self.metric.iter().any(|r| r.len() != n) {
            return bad(format!("metric must be a {n}x{n} grid"));
        }
        if self.bbox.len() != n {
            return bad(format!("box needs {n} intervals, found {}", self.bbox.len()));
        }
        if let Some(i) = self.bbox.iter().position(|[lo, hi]| !(lo < hi)) {
            return bad(format!("box[{i}] is empty"));
        }
        if let Some(u) = &self.upsilon {
            if u.len() != n {
                return bad(format!("upsilon needs {n} components, found {}", u.len()));
            }
        }
        if self.phi.is_some() && self.upsilon.is_some() {
            return bad("give either phi or upsilon, not both".into());
        }
        match &self.samples {
            Samples::Count { count: 0, .. } => bad("samples.count must be positive".into()),
            Samples::Points { points } if points.is_empty() => bad("samples.points is empty".into()),
            Samples::Points { points } => match points.iter().position(|p| p.len() != n) {
                Some(i) => bad(format!("samples.points[{i}] has the wrong length")),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// Replaces whole-word coordinate names by `x<i>`.
fn rename_coords(text: &str, names: &[String]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut chars = text.char_indices().peekable();
    while let Some((start, ch)) = chars.next() {
        if ch.is_ascii_alphabetic() || ch == '_' {
            let mut end = start + ch.len_utf8();
            while let Some(&(i, c)) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    end = i + c.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let word = &text[start..end];
            match names.iter().position(|n| n == word) {
                Some(i) => out.push_str(&format!("x{i}")),
                None => out.push_str(word),
            }
        } else {
            out.push(ch);
        }
    }
    out
}

/// Deterministic probe points strictly inside the box.
fn probe_points(bounds: &[(f64, f64)], count: usize) -> Vec<Vec<f64>> {
    let fracs = [0.5, 0.23, 0.71, 0.37, 0.88, 0.12, 0.64];
    (0..count)
        .map(|k| bounds.iter().enumerate().map(|(i, (lo, hi))| lo + (hi - lo) * fracs[(k + 2 * i) % fracs.len()]).collect())
        .collect()
}

impl LoadedSpec {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let source = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{source}: {e}")))?;
        Self::from_text(&text, &source)
    }

    pub fn from_text(text: &str, source: &str) -> Result<Self, CliError> {
        let spec = GeometrySpec::from_json(text, source)?;
        spec.validate_shape(source)?;
        let n = spec.dim;
        let mut entries = Vec::with_capacity(n * n);
        for (i, row) in spec.metric.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                entries.push(spec.parse_expr(cell, &format!("metric[{i}][{j}]"), source)?);
            }
        }
        for (k, p) in probe_points(&spec.bounds(), SYMMETRY_PROBES).iter().enumerate() {
            for i in 0..n {
                for j in i + 1..n {
                    let eval = |e: &Expr| {
                        e.eval::<f64>(p).map_err(|err| CliError::Input(format!("{source}: metric at probe {k}: {err}")))
                    };
                    let (a, b) = (eval(&entries[i * n + j])?, eval(&entries[j * n + i])?);
                    if (a - b).abs() > SYMMETRY_RTOL * (1.0 + a.abs().max(b.abs())) {
                        return Err(CliError::Input(format!(
                            "{source}: metric is not symmetric: metric[{i}][{j}] = {a} but metric[{j}][{i}] = {b} at {p:?}"
                        )));
                    }
                }
            }
        }
        // the text grids agree numerically; use the upper triangle for both halves
        let sym = Tensor::from_fn(n, 0, 2, |idx| {
            let (i, j) = (idx[0].min(idx[1]), idx[0].max(idx[1]));
            entries[i * n + j].clone()
        });
        let geometry = ChartGeometry::new(sym).map_err(|e| CliError::Input(format!("{source}: {e}")))?;
        let upsilon = match (&spec.phi, &spec.upsilon) {
            (Some(phi), _) => Some(Upsilon::exact(n, &spec.parse_expr(phi, "phi", source)?)),
            (None, Some(comps)) => Some(Upsilon::from_components(
                comps
                    .iter()
                    .enumerate()
                    .map(|(i, c)| spec.parse_expr(c, &format!("upsilon[{i}]"), source))
                    .collect::<Result<_, _>>()?,
            )),
            (None, None) => None,
        };
        let canonical: serde_json::Value = serde_json::from_str(text).expect("already parsed");
        let digest = hex(&Sha256::digest(serde_json::to_vec(&canonical).expect("serializable")));
        Ok(LoadedSpec { spec, source: source.to_string(), digest, geometry, upsilon })
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    /// Sample points: explicit ones, or `count` seeded uniform draws in the box.
    /// `seed` overrides the spec's own.
    pub fn float_points(&self, seed: Option<u64>) -> Vec<Vec<f64>> {
        match &self.spec.samples {
            Samples::Points { points } => points.clone(),
            Samples::Count { count, seed: s } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(*s));
                let bounds = self.spec.bounds();
                (0..*count).map(|_| bounds.iter().map(|(lo, hi)| rng.gen_range(*lo..*hi)).collect()).collect()
            }
        }
    }

    pub fn seed(&self, seed: Option<u64>) -> u64 {
        match (&self.spec.samples, seed) {
            (_, Some(s)) => s,
            (Samples::Count { seed, .. }, None) => *seed,
            (Samples::Points { .. }, None) => 0,
        }
    }
}

/// Rational points: each float rounded to the nearest multiple of 1/1024.
pub fn to_rational(points: &[Vec<f64>]) -> Vec<Vec<BigRational>> {
    points
        .iter()
        .map(|p| p.iter().map(|x| BigRational::new(((x * 1024.0).round() as i64).into(), 1024.into())).collect())
        .collect()
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT: &str = r#"{"dim":2,"coords":["u","v"],"metric":[["1","0"],["0","1"]],"box":[[-1,1],[-1,1]]}"#;

    #[test]
    fn coordinate_names_are_renamed() {
        assert_eq!(rename_coords("u^2 + sin(v)*uv", &["u".into(), "v".into()]), "x0^2 + sin(x1)*uv");
    }

    #[test]
    fn loads_minimal_spec() {
        let s = LoadedSpec::from_text(FLAT, "flat").unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s.float_points(None).len(), 10);
        assert_eq!(s.digest.len(), 64);
    }

    #[test]
    fn digest_ignores_formatting() {
        let spaced = FLAT.replace(',', ", ");
        assert_eq!(LoadedSpec::from_text(FLAT, "a").unwrap().digest, LoadedSpec::from_text(&spaced, "b").unwrap().digest);
    }

    #[test]
    fn asymmetric_metric_text_rejected() {
        let bad = FLAT.replace(r#"[["1","0"],["0","1"]]"#, r#"[["1","u"],["0","1"]]"#);
        let err = LoadedSpec::from_text(&bad, "bad").unwrap_err();
        assert!(err.to_string().contains("not symmetric"), "{err}");
    }

    #[test]
    fn empty_box_rejected() {
        let bad = FLAT.replace("[[-1,1],[-1,1]]", "[[1,1],[-1,1]]");
        assert!(LoadedSpec::from_text(&bad, "bad").unwrap_err().to_string().contains("box[0]"));
    }

    #[test]
    fn expression_errors_name_the_entry() {
        let bad = FLAT.replace(r#"["0","1"]]"#, r#"["0","1+"]]"#);
        assert!(LoadedSpec::from_text(&bad, "bad").unwrap_err().to_string().contains("metric[1][1]"));
    }

    #[test]
    fn rational_rounding() {
        let r = to_rational(&[vec![0.5, -0.25]]);
        assert_eq!(r[0][0], BigRational::new(1.into(), 2.into()));
    }
}
