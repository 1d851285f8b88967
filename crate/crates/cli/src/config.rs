//! Experiment configuration in TOML.
//!
//! ```toml
//! pipeline = "verify"          # kernel | dilation | verify | battery
//! level = 6
//!
//! [f]                          # word → coefficient, words written g1g2…
//! g1 = 1.0
//! g1g1 = 1.0
//!
//! [g]
//! g1 = 1.0
//!
//! [tolerances]
//! identity = 1e-9
//! slack = 1e-6
//!
//! [variety]                    # none | commutator | minpoly | custom
//! kind = "minpoly"
//! coefficients = [[0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]
//!
//! [[t1]]                       # one table per matrix of the tuple
//! re = [[0.0, 1.0], [0.0, 0.0]]
//!
//! [[t2]]
//! file = "t2.txt"
//!
//! [battery]
//! seed = 7
//! count = 12
//! kinds = ["jointly-nilpotent"]
//!
//! [polynomials]
//! set = "battery-v1"           # or "none"
//! bipolys = ["z1*w1 - 0.5*z1"]
//! hermitian = ["z1*z1^*"]
//!
//! [output]
//! format = "both"              # structured | table | both
//! ```

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ando_core::ando::PairKind;
use ando_core::bipoly::{BiPolynomial, HermitianBiPolynomial};
use ando_core::polyparse::{parse_bipoly, parse_hermitian, parse_ncpoly};
use ando_core::variety::NcPolynomial;
use ando_core::{CMat, Polynomial, Word};
use num_complex::Complex;
use serde::Deserialize;
use toml::Spanned;

use crate::error::{CliError, Located, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Pipeline {
    Kernel,
    Dilation,
    Verify,
    Battery,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Kernel => "kernel",
            Pipeline::Dilation => "dilation",
            Pipeline::Verify => "verify",
            Pipeline::Battery => "battery",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Structured,
    Table,
    #[default]
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum VarietyKind {
    None,
    Commutator,
    Minpoly,
    Custom,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    pipeline: Option<Pipeline>,
    n: Option<usize>,
    m: Option<usize>,
    level: Option<usize>,
    f: Option<Spanned<BTreeMap<String, Spanned<f64>>>>,
    g: Option<Spanned<BTreeMap<String, Spanned<f64>>>>,
    tolerances: Option<RawTolerances>,
    variety: Option<Spanned<RawVariety>>,
    #[serde(default)]
    t1: Vec<Spanned<RawMatrix>>,
    #[serde(default)]
    t1p: Vec<Spanned<RawMatrix>>,
    #[serde(default)]
    t2: Vec<Spanned<RawMatrix>>,
    battery: Option<RawBattery>,
    polynomials: Option<RawPolynomials>,
    output: Option<RawOutput>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    identity: Option<Spanned<f64>>,
    slack: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVariety {
    kind: VarietyKind,
    coefficients: Option<Vec<[f64; 2]>>,
    generators: Option<Vec<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMatrix {
    re: Option<Vec<Vec<f64>>>,
    im: Option<Vec<Vec<f64>>>,
    file: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBattery {
    seed: Option<u64>,
    count: Option<usize>,
    min_dim: Option<usize>,
    max_dim: Option<usize>,
    kinds: Option<Spanned<Vec<String>>>,
    grid_resolution: Option<usize>,
    grid_allowance: Option<Spanned<f64>>,
    free_level_cap: Option<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPolynomials {
    set: Option<Spanned<String>>,
    #[serde(default)]
    bipolys: Vec<Spanned<String>>,
    #[serde(default)]
    hermitian: Vec<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    format: Option<OutputFormat>,
}

#[derive(Clone, Debug)]
pub enum VarietySpec {
    None,
    Commutator,
    /// Ascending coefficients; computed from `T1` when absent.
    Minpoly(Option<Vec<Complex<f64>>>),
    Custom(Vec<NcPolynomial<f64>>),
}

#[derive(Clone, Debug)]
pub enum MatrixSource {
    Inline(CMat),
    File(PathBuf),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BatterySpec {
    pub seed: Option<u64>,
    pub count: Option<usize>,
    pub min_dim: Option<usize>,
    pub max_dim: Option<usize>,
    pub kinds: Option<Vec<PairKind>>,
    pub grid_resolution: Option<usize>,
    pub grid_allowance: Option<f64>,
    pub free_level_cap: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct PolynomialSelection {
    /// Include the built-in battery.
    pub standard: bool,
    pub bipolys: Vec<(String, BiPolynomial<f64>)>,
    pub hermitian: Vec<(String, HermitianBiPolynomial<f64>)>,
}

impl Default for PolynomialSelection {
    fn default() -> Self {
        PolynomialSelection { standard: true, bipolys: Vec::new(), hermitian: Vec::new() }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub pipeline: Option<Pipeline>,
    pub f: Polynomial,
    pub g: Polynomial,
    pub level: Option<usize>,
    pub identity_tol: Option<f64>,
    pub slack_tol: Option<f64>,
    /// `None` selects the natural variety of `T1`.
    pub variety: Option<VarietySpec>,
    pub t1: Vec<MatrixSource>,
    pub t1p: Vec<MatrixSource>,
    pub t2: Vec<MatrixSource>,
    pub battery: BatterySpec,
    pub polynomials: PolynomialSelection,
    pub format: Option<OutputFormat>,
    /// Directory that relative matrix paths are read from.
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pipeline: None,
            f: Polynomial::linear(1),
            g: Polynomial::linear(1),
            level: None,
            identity_tol: None,
            slack_tol: None,
            variety: None,
            t1: Vec::new(),
            t1p: Vec::new(),
            t2: Vec::new(),
            battery: BatterySpec::default(),
            polynomials: PolynomialSelection::default(),
            format: None,
            base_dir: PathBuf::from("."),
        }
    }
}

fn position(text: &str, offset: usize) -> (usize, usize) {
    let mut end = offset.min(text.len());
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    let before = &text[..end];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

struct Errors<'a> {
    text: &'a str,
    list: Vec<Located>,
}

impl Errors<'_> {
    fn push(&mut self, span: Range<usize>, message: impl Into<String>) {
        let (line, column) = position(self.text, span.start);
        self.list.push(Located { line, column, message: message.into() });
    }
}

fn parse_word(key: &str) -> Option<Word> {
    let rest = key.strip_prefix('g')?;
    if rest == "0" {
        return Some(Word::empty());
    }
    let letters = rest
        .split('g')
        .map(|p| p.parse::<usize>().ok().filter(|&i| i > 0 && !p.starts_with('0')))
        .collect::<Option<Vec<_>>>()?;
    Some(Word::from_letters(&letters))
}

fn polynomial(
    errs: &mut Errors,
    label: &str,
    table: Option<Spanned<BTreeMap<String, Spanned<f64>>>>,
    declared: Option<usize>,
) -> Option<Polynomial> {
    let Some(table) = table else {
        return Some(Polynomial::linear(declared.unwrap_or(1)));
    };
    let span = table.span();
    let before = errs.list.len();
    let mut terms = Vec::new();
    for (key, value) in table.into_inner() {
        let vspan = value.span();
        let v = value.into_inner();
        let Some(w) = parse_word(&key) else {
            errs.push(vspan, format!("{label}: '{key}' is not a word (expected g0 or g1g2…)"));
            continue;
        };
        if w.is_empty() && v != 0.0 {
            errs.push(
                vspan,
                format!("{label}: a_g0 = {v}, but a positive regular polynomial needs a_g0 = 0 and a_gi > 0"),
            );
            continue;
        }
        if let Some(n) = declared {
            if w.max_letter() > n {
                errs.push(vspan, format!("{label}: word {w} uses a letter beyond the declared {n}"));
                continue;
            }
        }
        terms.push((w, v));
    }
    if errs.list.len() > before {
        return None;
    }
    let n = declared.unwrap_or_else(|| terms.iter().map(|(w, _)| w.max_letter()).max().unwrap_or(1));
    match Polynomial::new(n, terms) {
        Ok(p) => Some(p),
        Err(e) => {
            errs.push(span, format!("{label}: {e}"));
            None
        }
    }
}

fn tolerance(errs: &mut Errors, label: &str, v: Option<Spanned<f64>>) -> Option<f64> {
    let v = v?;
    let span = v.span();
    let x = v.into_inner();
    if !(x > 0.0 && x.is_finite()) {
        errs.push(span, format!("{label} must be positive and finite, got {x}"));
        return None;
    }
    Some(x)
}

fn matrix(errs: &mut Errors, label: &str, raw: Spanned<RawMatrix>) -> Option<MatrixSource> {
    let span = raw.span();
    let raw = raw.into_inner();
    match (raw.re, raw.im, raw.file) {
        (None, None, Some(file)) => Some(MatrixSource::File(PathBuf::from(file))),
        (Some(re), im, None) => {
            let rows = re.len();
            let cols = re.first().map_or(0, Vec::len);
            let im = im.unwrap_or_else(|| vec![vec![0.0; cols]; rows]);
            let shape_ok = |m: &[Vec<f64>]| m.len() == rows && m.iter().all(|r| r.len() == cols);
            if rows == 0 || cols == 0 || !shape_ok(&re) || !shape_ok(&im) {
                errs.push(span, format!("{label}: re/im must be nonempty rectangular arrays of one shape"));
                return None;
            }
            if re.iter().chain(&im).flatten().any(|v| !v.is_finite()) {
                errs.push(span, format!("{label}: entries must be finite"));
                return None;
            }
            let data: Vec<Complex<f64>> =
                re.iter().flatten().zip(im.iter().flatten()).map(|(&a, &b)| Complex::new(a, b)).collect();
            Some(MatrixSource::Inline(CMat::from_row_slice(rows, cols, &data)))
        }
        _ => {
            errs.push(span, format!("{label}: give either 're' (and optionally 'im') or 'file'"));
            None
        }
    }
}

fn matrices(errs: &mut Errors, label: &str, raw: Vec<Spanned<RawMatrix>>) -> Vec<MatrixSource> {
    raw.into_iter()
        .enumerate()
        .filter_map(|(i, m)| matrix(errs, &format!("{label}[{}]", i + 1), m))
        .collect()
}

fn variety(errs: &mut Errors, raw: Spanned<RawVariety>, n: usize) -> Option<VarietySpec> {
    let span = raw.span();
    let raw = raw.into_inner();
    let extra = |errs: &mut Errors, field: &str| errs.push(span.clone(), format!("variety: '{field}' does not apply to this kind"));
    match raw.kind {
        VarietyKind::None | VarietyKind::Commutator => {
            if raw.coefficients.is_some() {
                extra(errs, "coefficients");
            }
            if raw.generators.is_some() {
                extra(errs, "generators");
            }
            Some(if raw.kind == VarietyKind::None { VarietySpec::None } else { VarietySpec::Commutator })
        }
        VarietyKind::Minpoly => {
            if raw.generators.is_some() {
                extra(errs, "generators");
            }
            if n != 1 {
                errs.push(span, "variety: minpoly needs a single-letter f");
                return None;
            }
            let coeffs = raw.coefficients.map(|c| c.iter().map(|&[re, im]| Complex::new(re, im)).collect::<Vec<_>>());
            if let Some(c) = &coeffs {
                if c.len() < 2 || c.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || c.last() == Some(&Complex::new(0.0, 0.0)) {
                    errs.push(span, "variety: coefficients must be finite, ascending, of degree at least one");
                    return None;
                }
            }
            Some(VarietySpec::Minpoly(coeffs))
        }
        VarietyKind::Custom => {
            if raw.coefficients.is_some() {
                extra(errs, "coefficients");
            }
            let Some(gens) = raw.generators.filter(|g| !g.is_empty()) else {
                errs.push(span, "variety: custom needs a nonempty 'generators' list");
                return None;
            };
            let mut out = Vec::new();
            for g in &gens {
                match parse_ncpoly(g, n) {
                    Ok(p) => out.push(p),
                    Err(e) => errs.push(span.clone(), format!("variety generator '{g}': {e}")),
                }
            }
            (out.len() == gens.len()).then_some(VarietySpec::Custom(out))
        }
    }
}

fn battery(errs: &mut Errors, raw: RawBattery) -> BatterySpec {
    let kinds = raw.kinds.and_then(|k| {
        let span = k.span();
        let parsed = k.into_inner().iter().map(|s| PairKind::from_str(s)).collect::<Result<Vec<_>, _>>();
        match parsed {
            Ok(v) if !v.is_empty() => Some(v),
            Ok(_) => {
                errs.push(span, "battery.kinds must not be empty");
                None
            }
            Err(e) => {
                errs.push(span, format!("battery.kinds: {e}"));
                None
            }
        }
    });
    let grid_allowance = raw.grid_allowance.and_then(|a| {
        let span = a.span();
        let v = a.into_inner();
        if v >= 0.0 && v.is_finite() {
            Some(v)
        } else {
            errs.push(span, "battery.grid_allowance must be finite and nonnegative");
            None
        }
    });
    BatterySpec {
        seed: raw.seed,
        count: raw.count,
        min_dim: raw.min_dim,
        max_dim: raw.max_dim,
        kinds,
        grid_resolution: raw.grid_resolution,
        grid_allowance,
        free_level_cap: raw.free_level_cap,
    }
}

fn polynomials(errs: &mut Errors, raw: RawPolynomials) -> PolynomialSelection {
    let standard = match raw.set {
        None => true,
        Some(s) => match s.get_ref().as_str() {
            ando_core::ando::BATTERY_VERSION => true,
            "none" => false,
            other => {
                errs.push(s.span(), format!("polynomials.set: unknown set '{other}'"));
                true
            }
        },
    };
    let mut bipolys = Vec::new();
    for (i, p) in raw.bipolys.into_iter().enumerate() {
        match parse_bipoly(p.get_ref()) {
            Ok(q) => bipolys.push((format!("user{}", i + 1), q)),
            Err(e) => errs.push(p.span(), format!("polynomials.bipolys[{}]: {e}", i + 1)),
        }
    }
    let mut hermitian = Vec::new();
    for (i, p) in raw.hermitian.into_iter().enumerate() {
        match parse_hermitian(p.get_ref()) {
            Ok(q) => hermitian.push((format!("user_h{}", i + 1), q)),
            Err(e) => errs.push(p.span(), format!("polynomials.hermitian[{}]: {e}", i + 1)),
        }
    }
    PolynomialSelection { standard, bipolys, hermitian }
}

/// Parses and validates a config. All problems found are reported together,
/// each with its line and column.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| position(text, s.start));
        CliError::config(line, column, e.message().trim_end())
    })?;
    let mut errs = Errors { text, list: Vec::new() };
    let f = polynomial(&mut errs, "f", raw.f, raw.n);
    let g = polynomial(&mut errs, "g", raw.g, raw.m);
    let (identity_tol, slack_tol) = match raw.tolerances {
        Some(t) => (tolerance(&mut errs, "tolerances.identity", t.identity), tolerance(&mut errs, "tolerances.slack", t.slack)),
        None => (None, None),
    };
    let n = f.as_ref().map_or(1, Polynomial::n);
    let variety = raw.variety.and_then(|v| variety(&mut errs, v, n));
    let t1 = matrices(&mut errs, "t1", raw.t1);
    let t1p = matrices(&mut errs, "t1p", raw.t1p);
    let t2 = matrices(&mut errs, "t2", raw.t2);
    let battery = raw.battery.map(|b| battery(&mut errs, b)).unwrap_or_default();
    let polynomials = raw.polynomials.map(|p| polynomials(&mut errs, p)).unwrap_or_default();
    if raw.level == Some(0) {
        errs.push(0..0, "level must be at least 1");
    }
    if !errs.list.is_empty() {
        errs.list.sort_by_key(|e| (e.line, e.column));
        return Err(CliError::Config(errs.list));
    }
    Ok(ExperimentConfig {
        pipeline: raw.pipeline,
        f: f.expect("validated"),
        g: g.expect("validated"),
        level: raw.level,
        identity_tol,
        slack_tol,
        variety,
        t1,
        t1p,
        t2,
        battery,
        polynomials,
        format: raw.output.and_then(|o| o.format),
        base_dir: PathBuf::from("."),
    })
}

/// Reads a config file; matrix paths in it are relative to its directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
    let mut cfg = parse_config(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

/// Values given on the command line (or through the environment).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub pipeline: Option<Pipeline>,
    pub level: Option<usize>,
    pub identity_tol: Option<f64>,
    pub slack_tol: Option<f64>,
    pub battery: BatterySpec,
    pub format: Option<OutputFormat>,
    /// Default identity tolerance, used only when neither the config nor a
    /// flag sets one.
    pub default_tol: Option<f64>,
}

fn fill<T: PartialEq + std::fmt::Debug>(name: &str, slot: &mut Option<T>, flag: Option<T>, warnings: &mut Vec<String>) {
    match (slot.as_ref(), flag) {
        (Some(c), Some(f)) if *c != f => warnings.push(format!("{name}: config value {c:?} overrides flag value {f:?}")),
        (None, Some(f)) => *slot = Some(f),
        _ => {}
    }
}

impl ExperimentConfig {
    /// Fills unset fields from the overrides. Where both are set and differ
    /// the config wins and a warning is returned; the pipeline is the
    /// exception, as it is chosen by the command verb.
    pub fn apply(&mut self, o: Overrides) -> Vec<String> {
        let mut w = Vec::new();
        if let Some(p) = o.pipeline {
            if self.pipeline.is_some_and(|c| c != p) {
                w.push(format!("pipeline: the command selects '{}' over the config's choice", p.name()));
            }
            self.pipeline = Some(p);
        }
        fill("level", &mut self.level, o.level, &mut w);
        fill("tolerances.identity", &mut self.identity_tol, o.identity_tol, &mut w);
        fill("tolerances.slack", &mut self.slack_tol, o.slack_tol, &mut w);
        let b = &mut self.battery;
        fill("battery.seed", &mut b.seed, o.battery.seed, &mut w);
        fill("battery.count", &mut b.count, o.battery.count, &mut w);
        fill("battery.min_dim", &mut b.min_dim, o.battery.min_dim, &mut w);
        fill("battery.max_dim", &mut b.max_dim, o.battery.max_dim, &mut w);
        fill("battery.kinds", &mut b.kinds, o.battery.kinds, &mut w);
        fill("battery.grid_resolution", &mut b.grid_resolution, o.battery.grid_resolution, &mut w);
        fill("battery.grid_allowance", &mut b.grid_allowance, o.battery.grid_allowance, &mut w);
        fill("battery.free_level_cap", &mut b.free_level_cap, o.battery.free_level_cap, &mut w);
        fill("output.format", &mut self.format, o.format, &mut w);
        if self.identity_tol.is_none() {
            self.identity_tol = o.default_tol;
        }
        w
    }

    /// The pipeline to run: explicit, else inferred from which tuples are given.
    pub fn selected_pipeline(&self) -> Pipeline {
        self.pipeline.unwrap_or(if self.t1.is_empty() {
            Pipeline::Battery
        } else if self.t2.is_empty() {
            Pipeline::Kernel
        } else {
            Pipeline::Verify
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn words() {
        assert_eq!(parse_word("g0"), Some(Word::empty()));
        assert_eq!(parse_word("g1g12"), Some(Word::from_letters(&[1, 12])));
        assert_eq!(parse_word("g1g0"), None);
        assert_eq!(parse_word("z1"), None);
        assert_eq!(parse_word("g"), None);
    }

    #[test]
    fn positions() {
        assert_eq!(position("ab\ncd", 4), (2, 2));
        assert_eq!(position("", 0), (1, 1));
    }
}
