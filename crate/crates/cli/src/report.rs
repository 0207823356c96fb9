//! Check reports and their rendering.

use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = ">")]
    Above,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: Option<f64>,
    pub threshold: f64,
    pub relation: Relation,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub spec: String,
    pub spec_digest: String,
    pub mode: String,
    pub seed: u64,
    pub status: &'static str,
    pub checks: Vec<Check>,
    /// Computed values, keyed by name.
    pub data: serde_json::Map<String, Value>,
}

/// Per-check threshold overrides from `--tol`: `NAME=VALUE` or a bare `VALUE`
/// applying to every check.
#[derive(Debug, Clone, Default)]
pub struct Tolerances {
    all: Option<f64>,
    named: Vec<(String, f64)>,
}

impl Tolerances {
    pub fn parse(items: &[String]) -> Result<Self, String> {
        let mut t = Tolerances::default();
        for item in items {
            let (name, value) = match item.split_once('=') {
                Some((n, v)) => (Some(n.trim().to_string()), v),
                None => (None, item.as_str()),
            };
            let v: f64 = value.trim().parse().map_err(|_| format!("invalid tolerance {item:?}"))?;
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("tolerance must be a nonnegative number: {item:?}"));
            }
            match name {
                Some(n) => t.named.push((n, v)),
                None => t.all = Some(v),
            }
        }
        Ok(t)
    }

    pub fn get(&self, name: &str, default: f64) -> f64 {
        self.named.iter().rev().find(|(n, _)| n == name).map(|(_, v)| *v).or(self.all).unwrap_or(default)
    }
}

/// Accumulates checks for one command.
#[derive(Debug)]
pub struct ReportBuilder<'a> {
    tol: &'a Tolerances,
    checks: Vec<Check>,
    data: serde_json::Map<String, Value>,
}

impl<'a> ReportBuilder<'a> {
    pub fn new(tol: &'a Tolerances) -> Self {
        ReportBuilder { tol, checks: Vec::new(), data: serde_json::Map::new() }
    }

    /// Records `value < threshold`.
    pub fn below<E: std::fmt::Display>(&mut self, name: &str, default: f64, value: Result<f64, E>) {
        self.push(name, default, Relation::Below, value);
    }

    /// Records `value > threshold`.
    pub fn above<E: std::fmt::Display>(&mut self, name: &str, default: f64, value: Result<f64, E>) {
        self.push(name, default, Relation::Above, value);
    }

    /// Records a yes/no outcome as residual 0 (pass) or 1 (fail) against 0.5.
    pub fn holds<E: std::fmt::Display>(&mut self, name: &str, value: Result<bool, E>) {
        let threshold = 0.5;
        match value {
            Ok(ok) => self.checks.push(Check {
                name: name.to_string(),
                residual: Some(if ok { 0.0 } else { 1.0 }),
                threshold,
                relation: Relation::Below,
                pass: ok,
                error: None,
            }),
            Err(e) => self.push(name, threshold, Relation::Below, Err::<f64, _>(e)),
        }
    }

    fn push<E: std::fmt::Display>(&mut self, name: &str, default: f64, relation: Relation, value: Result<f64, E>) {
        let threshold = self.tol.get(name, default);
        let check = match value {
            Ok(v) => {
                let pass = match relation {
                    Relation::Below => v < threshold,
                    Relation::Above => v > threshold,
                };
                Check { name: name.to_string(), residual: Some(v), threshold, relation, pass, error: None }
            }
            Err(e) => Check { name: name.to_string(), residual: None, threshold, relation, pass: false, error: Some(e.to_string()) },
        };
        self.checks.push(check);
    }

    pub fn data(&mut self, key: &str, value: Value) {
        self.data.insert(key.to_string(), value);
    }

    pub fn finish(self, command: &str, spec: &crate::spec::LoadedSpec, mode: &str, seed: u64) -> Report {
        let pass = self.checks.iter().all(|c| c.pass);
        Report {
            command: command.to_string(),
            spec: spec.source.clone(),
            spec_digest: spec.digest.clone(),
            mode: mode.to_string(),
            seed,
            status: if pass { "pass" } else { "fail" },
            checks: self.checks,
            data: self.data,
        }
    }
}

impl Report {
    pub fn passed(&self) -> bool {
        self.status == "pass"
    }

    pub fn render(&self) -> String {
        let mut out = format!("{} on {} ({} mode, seed {})\n", self.command, self.spec, self.mode, self.seed);
        for c in &self.checks {
            let mark = if c.pass { "PASS" } else { "FAIL" };
            let rel = match c.relation {
                Relation::Below => "<",
                Relation::Above => ">",
            };
            match (&c.residual, &c.error) {
                (_, Some(e)) => out.push_str(&format!("  {mark} {}: error: {e}\n", c.name)),
                (Some(r), None) => out.push_str(&format!("  {mark} {}: {r:.3e} ({rel} {:.0e})\n", c.name, c.threshold)),
                (None, None) => out.push_str(&format!("  {mark} {}\n", c.name)),
            }
        }
        for (k, v) in &self.data {
            if v.is_number() || v.is_boolean() || v.is_string() || v.as_array().is_some_and(|a| a.iter().all(Value::is_number)) {
                out.push_str(&format!("  {k} = {v}\n"));
            }
        }
        out.push_str(&format!("status: {}\n", self.status));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_overrides() {
        let t = Tolerances::parse(&["1e-3".into(), "weyl=1e-9".into()]).unwrap();
        assert_eq!(t.get("weyl", 1.0), 1e-9);
        assert_eq!(t.get("cotton", 1.0), 1e-3);
        assert_eq!(Tolerances::default().get("x", 0.5), 0.5);
        assert!(Tolerances::parse(&["weyl=abc".into()]).is_err());
        assert!(Tolerances::parse(&["-1".into()]).is_err());
    }

    #[test]
    fn errors_fail_checks() {
        let t = Tolerances::default();
        let mut b = ReportBuilder::new(&t);
        b.below("ok", 1.0, Ok::<_, String>(0.5));
        b.below("bad", 1.0, Err::<f64, _>("domain"));
        assert!(b.checks[0].pass);
        assert!(!b.checks[1].pass);
        assert_eq!(b.checks[1].error.as_deref(), Some("domain"));
    }
}
