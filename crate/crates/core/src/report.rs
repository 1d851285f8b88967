//! Verification reports: named checks with a measured value, a tolerance
//! and a verdict, plus an environment echo. The structured form is one
//! `key=value` record per line and is byte-stable for fixed inputs.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    /// Passes when `value ≤ tol`.
    Residual,
    /// Passes when `value ≥ −tol`.
    Slack,
}

impl CheckKind {
    fn as_str(self) -> &'static str {
        match self {
            CheckKind::Residual => "residual",
            CheckKind::Slack => "slack",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckRecord {
    pub name: String,
    pub kind: CheckKind,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerificationReport {
    env: Vec<(String, String)>,
    checks: Vec<CheckRecord>,
}

/// Interpretive choices every report carries.
pub const CHOICE_FLAGS: [(&str, &str); 3] = [
    ("choice.iso_range", "appends_defect_of_second_tuple"),
    ("choice.completion", "svd_polar_then_standard_basis_gram_schmidt"),
    ("choice.padding", "solve_equal_dims_else_pad_deficient_side"),
];

fn token(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_whitespace() || c == '=' { '_' } else { c })
        .collect()
}

impl VerificationReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// A report pre-filled with the interpretive-choice flags.
    pub fn with_choices() -> Self {
        let mut r = Self::new();
        for (k, v) in CHOICE_FLAGS {
            r.set_env(k, v);
        }
        r
    }

    pub fn set_env(&mut self, key: &str, value: impl ToString) {
        let key = token(key);
        let value = token(&value.to_string());
        match self.env.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.env.push((key, value)),
        }
    }

    pub fn env(&self) -> &[(String, String)] {
        &self.env
    }

    pub fn env_value(&self, key: &str) -> Option<&str> {
        self.env.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn residual(&mut self, name: &str, value: f64, tol: f64) -> bool {
        let pass = value.is_finite() && value <= tol;
        self.push(name, CheckKind::Residual, value, tol, pass)
    }

    pub fn slack(&mut self, name: &str, value: f64, tol: f64) -> bool {
        let pass = value.is_finite() && value >= -tol;
        self.push(name, CheckKind::Slack, value, tol, pass)
    }

    /// Records a failure that produced no measurement (e.g. an error).
    pub fn failure(&mut self, name: &str, tol: f64) {
        self.push(name, CheckKind::Residual, f64::NAN, tol, false);
    }

    fn push(&mut self, name: &str, kind: CheckKind, value: f64, tol: f64, pass: bool) -> bool {
        self.checks.push(CheckRecord { name: token(name), kind, value, tol, pass });
        pass
    }

    /// Appends the checks and environment of `other`, prefixing every name
    /// with `prefix.` (no prefix when empty). Existing keys are kept.
    pub fn absorb(&mut self, prefix: &str, other: &VerificationReport) {
        let name = |n: &str| if prefix.is_empty() { n.to_string() } else { format!("{}.{}", token(prefix), n) };
        for c in &other.checks {
            let mut c = c.clone();
            c.name = name(&c.name);
            self.checks.push(c);
        }
        for (k, v) in &other.env {
            let k = name(k);
            if self.env_value(&k).is_none() {
                self.env.push((k, v.clone()));
            }
        }
    }

    pub fn checks(&self) -> &[CheckRecord] {
        &self.checks
    }

    pub fn check(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }

    pub fn passed(&self) -> bool {
        self.failed() == 0
    }

    /// Smallest value among slack checks, if any.
    pub fn min_slack(&self) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.kind == CheckKind::Slack)
            .map(|c| c.value)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.min(v))))
    }

    /// Largest value among residual checks, if any.
    pub fn max_residual(&self) -> Option<f64> {
        self.checks
            .iter()
            .filter(|c| c.kind == CheckKind::Residual)
            .map(|c| c.value)
            .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v))))
    }

    /// Line-oriented structured text.
    pub fn to_structured(&self) -> String {
        let mut s = String::from("report version=1\n");
        for (k, v) in &self.env {
            let _ = writeln!(s, "env {k}={v}");
        }
        for c in &self.checks {
            let _ = writeln!(
                s,
                "check name={} kind={} value={:.6e} tol={:.1e} pass={}",
                c.name,
                c.kind.as_str(),
                c.value,
                c.tol,
                c.pass
            );
        }
        let _ = write!(s, "summary checks={} failed={}", self.checks.len(), self.failed());
        if let Some(m) = self.min_slack() {
            let _ = write!(s, " min_slack={m:.6e}");
        }
        if let Some(m) = self.max_residual() {
            let _ = write!(s, " max_residual={m:.6e}");
        }
        let _ = writeln!(s, " pass={}", self.passed());
        s
    }

    /// Aligned table for people.
    pub fn to_table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(5).max(5);
        let mut s = String::new();
        for (k, v) in &self.env {
            let _ = writeln!(s, "  {k}: {v}");
        }
        let _ = writeln!(s, "{:<width$}  {:>8}  {:>13}  {:>8}  verdict", "check", "kind", "value", "tol");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{:<width$}  {:>8}  {:>13.6e}  {:>8.1e}  {}",
                c.name,
                c.kind.as_str(),
                c.value,
                c.tol,
                if c.pass { "ok" } else { "FAIL" }
            );
        }
        let _ = writeln!(
            s,
            "{} checks, {} failed: {}",
            self.checks.len(),
            self.failed(),
            if self.passed() { "PASS" } else { "FAIL" }
        );
        s
    }

    /// Reads the structured form back. Values round to the printed
    /// precision.
    pub fn parse_structured(text: &str) -> Result<Self> {
        let mut r = VerificationReport::new();
        let mut saw_header = false;
        for (ln, line) in text.lines().enumerate() {
            let err = |message: String| Error::Parse { line: ln + 1, column: 1, message };
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let (head, rest) = line.split_once(' ').unwrap_or((line, ""));
            match head {
                "report" => saw_header = true,
                "env" => {
                    let (k, v) = rest.split_once('=').ok_or_else(|| err("env line without '='".into()))?;
                    r.env.push((k.to_string(), v.to_string()));
                }
                "check" => {
                    let mut name = None;
                    let mut kind = None;
                    let mut value = None;
                    let mut tol = None;
                    let mut pass = None;
                    for field in rest.split(' ') {
                        let (k, v) = field.split_once('=').ok_or_else(|| err(format!("malformed field '{field}'")))?;
                        let num = |v: &str| v.parse::<f64>().map_err(|e| err(format!("bad number '{v}': {e}")));
                        match k {
                            "name" => name = Some(v.to_string()),
                            "kind" => {
                                kind = Some(match v {
                                    "residual" => CheckKind::Residual,
                                    "slack" => CheckKind::Slack,
                                    _ => return Err(err(format!("unknown kind '{v}'"))),
                                })
                            }
                            "value" => value = Some(num(v)?),
                            "tol" => tol = Some(num(v)?),
                            "pass" => pass = Some(v == "true"),
                            _ => return Err(err(format!("unknown field '{k}'"))),
                        }
                    }
                    match (name, kind, value, tol, pass) {
                        (Some(name), Some(kind), Some(value), Some(tol), Some(pass)) => {
                            r.checks.push(CheckRecord { name, kind, value, tol, pass })
                        }
                        _ => return Err(err("check line is missing a field".into())),
                    }
                }
                "summary" => {}
                _ => return Err(err(format!("unknown record '{head}'"))),
            }
        }
        if !saw_header {
            return Err(Error::Format("missing 'report' header line".into()));
        }
        Ok(r)
    }
}
