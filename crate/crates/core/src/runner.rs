//! Batch experiments: a flat `key = value` configuration, five suites, and
//! deterministic CSV or JSON reports.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde_json::{json, Map, Value as Json};

use crate::corpus::{random_chaos, random_polynomial, random_unit_kernel};
use crate::dirichlet::{verify_h1, verify_h2};
use crate::error::{Error, Result};
use crate::fbm::{distance_for, exact_tv_bound, fit_rate, QuadraticVariationStatistic};
use crate::fourth_moment::{dirichlet_fourth_moment_bound, fourth_moment_report, IDENTITY_TOL};
use crate::laguerre::{
    gamma_mean, laguerre_gamma_polynomial, laguerre_generator_polynomial, LaguerreElement,
    LaguerreStructure,
};
use crate::malliavin::{carre_du_champ_residual, chain_rule_residual, derivative, duality_check};
use crate::rng::substream;
use crate::stein::{shipped_family, verify_solution_bounds, FunctionClass, BOUND_SLACK};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    FourthMomentCorpus,
    FbmRates,
    SteinBounds,
    LaguerreSuite,
    DualitySuite,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::FourthMomentCorpus,
        ExperimentKind::FbmRates,
        ExperimentKind::SteinBounds,
        ExperimentKind::LaguerreSuite,
        ExperimentKind::DualitySuite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::FourthMomentCorpus => "fourth-moment-corpus",
            ExperimentKind::FbmRates => "fbm-rates",
            ExperimentKind::SteinBounds => "stein-bounds",
            ExperimentKind::LaguerreSuite => "laguerre-suite",
            ExperimentKind::DualitySuite => "duality-suite",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ExperimentKind::FourthMomentCorpus => "contraction identities and the fourth moment inequality on random chaos kernels",
            ExperimentKind::FbmRates => "exact TV bounds and rate fits for the fBm quadratic variation",
            ExperimentKind::SteinBounds => "sup-norm certificates for Stein solutions of 30 test functions",
            ExperimentKind::LaguerreSuite => "integration by parts, spectral hypotheses and the fourth moment bound on the Laguerre structure",
            ExperimentKind::DualitySuite => "duality, chain rule and carre du champ identities on random chaos elements",
        }
    }

    /// Keys this experiment reads besides the common ones.
    fn keys(self) -> &'static [&'static str] {
        match self {
            ExperimentKind::FourthMomentCorpus => &["k", "d", "kernels"],
            ExperimentKind::FbmRates => &["H", "n", "samples"],
            ExperimentKind::SteinBounds => &[],
            ExperimentKind::LaguerreSuite => &["nu", "d", "degree", "pairs"],
            ExperimentKind::DualitySuite => &["d", "pairs"],
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(format!("unknown format `{s}` (expected csv or json)")),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
    /// Chaos orders (`k`).
    pub orders: Vec<usize>,
    /// Dimension (`d`).
    pub dim: usize,
    /// Kernels per order (`kernels`).
    pub kernels: usize,
    /// Hurst parameters (`H`).
    pub hurst: Vec<f64>,
    /// Horizons (`n`).
    pub horizons: Vec<usize>,
    /// Monte Carlo draws per `(H, n)`; 0 disables sampling (`samples`).
    pub samples: usize,
    /// Laguerre parameters (`nu`).
    pub nu: Vec<f64>,
    /// Maximal polynomial degree (`degree`).
    pub degree: usize,
    /// Random pairs per setting (`pairs`).
    pub pairs: usize,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            seed: 0,
            output: None,
            format: OutputFormat::Csv,
            orders: vec![2, 3],
            dim: 3,
            kernels: 50,
            hurst: vec![0.55, 0.7, 0.75],
            horizons: vec![128, 256, 512, 1024, 2048],
            samples: 0,
            nu: vec![0.0, 0.5, 2.0],
            degree: 3,
            pairs: 100,
        }
    }

    /// The configuration as ordered `key = value` pairs, restricted to the
    /// keys the experiment reads.
    pub fn echo(&self) -> Vec<(String, String)> {
        let list = |v: &[String]| v.join(",");
        let mut out = vec![
            ("experiment".to_string(), self.experiment.to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("format".to_string(), self.format.to_string()),
        ];
        for &key in self.experiment.keys() {
            let v = match key {
                "k" => list(
                    &self
                        .orders
                        .iter()
                        .map(|k| k.to_string())
                        .collect::<Vec<_>>(),
                ),
                "d" => self.dim.to_string(),
                "kernels" => self.kernels.to_string(),
                "H" => list(&self.hurst.iter().map(|h| h.to_string()).collect::<Vec<_>>()),
                "n" => list(
                    &self
                        .horizons
                        .iter()
                        .map(|n| n.to_string())
                        .collect::<Vec<_>>(),
                ),
                "samples" => self.samples.to_string(),
                "nu" => list(&self.nu.iter().map(|v| v.to_string()).collect::<Vec<_>>()),
                "degree" => self.degree.to_string(),
                "pairs" => self.pairs.to_string(),
                _ => unreachable!("keys() lists only known keys"),
            };
            out.push((key.to_string(), v));
        }
        out
    }

    /// Checks every numeric parameter against its documented range.
    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::ConfigRange {
                key: key.to_string(),
                message,
            })
        };
        match self.experiment {
            ExperimentKind::FourthMomentCorpus => {
                if self.orders.is_empty() || self.orders.iter().any(|&k| !(2..=4).contains(&k)) {
                    return bad("k", "chaos orders must lie in 2..=4".into());
                }
                if !(1..=4).contains(&self.dim) {
                    return bad("d", "dimension must lie in 1..=4".into());
                }
                if !(1..=1000).contains(&self.kernels) {
                    return bad("kernels", "kernel count must lie in 1..=1000".into());
                }
            }
            ExperimentKind::FbmRates => {
                if self.hurst.is_empty() || self.hurst.iter().any(|&h| !(h > 0.0 && h <= 0.75)) {
                    return bad("H", "Hurst parameters must lie in (0, 3/4]".into());
                }
                if self.horizons.is_empty()
                    || self.horizons.iter().any(|&n| !(2..=4096).contains(&n))
                {
                    return bad("n", "horizons must lie in 2..=4096".into());
                }
                if self.horizons.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("n", "horizons must be strictly increasing".into());
                }
                if self.samples > 1_000_000 {
                    return bad("samples", "at most 1000000 samples".into());
                }
            }
            ExperimentKind::SteinBounds => {}
            ExperimentKind::LaguerreSuite => {
                if self.nu.is_empty() || self.nu.iter().any(|&v| !(v > -1.0 && v <= 10.0)) {
                    return bad("nu", "Laguerre parameters must lie in (-1, 10]".into());
                }
                if !(1..=3).contains(&self.dim) {
                    return bad("d", "dimension must lie in 1..=3".into());
                }
                if !(1..=3).contains(&self.degree) {
                    return bad("degree", "degree must lie in 1..=3".into());
                }
                if !(1..=1000).contains(&self.pairs) {
                    return bad("pairs", "pair count must lie in 1..=1000".into());
                }
            }
            ExperimentKind::DualitySuite => {
                if !(1..=4).contains(&self.dim) {
                    return bad("d", "dimension must lie in 1..=4".into());
                }
                if !(1..=1000).contains(&self.pairs) {
                    return bad("pairs", "pair count must lie in 1..=1000".into());
                }
            }
        }
        Ok(())
    }
}

const COMMON_KEYS: [&str; 4] = ["experiment", "seed", "output", "format"];
const ALL_KEYS: [&str; 13] = [
    "experiment",
    "seed",
    "output",
    "format",
    "k",
    "d",
    "kernels",
    "H",
    "n",
    "samples",
    "nu",
    "degree",
    "pairs",
];

fn parse_list<T: FromStr>(value: &str, line: usize, key: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|s| {
            s.trim().parse::<T>().map_err(|_| Error::ConfigParse {
                line,
                message: format!("`{key}`: cannot parse `{}`", s.trim()),
            })
        })
        .collect()
}

fn parse_one<T: FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| Error::ConfigParse {
        line,
        message: format!("`{key}`: cannot parse `{value}`"),
    })
}

/// Parses the flat `key = value` format: one pair per line, `#` starts a
/// comment, lists are comma separated. Keys may not repeat, and keys that
/// the chosen experiment does not read are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut pairs: Vec<(usize, String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::ConfigParse {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if !ALL_KEYS.contains(&key) {
            return Err(Error::ConfigParse {
                line,
                message: format!("unknown key `{key}`"),
            });
        }
        if value.is_empty() {
            return Err(Error::ConfigParse {
                line,
                message: format!("empty value for `{key}`"),
            });
        }
        if let Some((first, _, _)) = pairs.iter().find(|(_, k, _)| k == key) {
            return Err(Error::ConfigParse {
                line,
                message: format!("duplicate key `{key}` (first set on line {first})"),
            });
        }
        pairs.push((line, key.to_string(), value.to_string()));
    }

    let Some((line, _, kind)) = pairs.iter().find(|(_, k, _)| k == "experiment") else {
        return Err(Error::ConfigParse {
            line: 0,
            message: "missing required key `experiment`".into(),
        });
    };
    let kind: ExperimentKind = kind.parse().map_err(|message| Error::ConfigParse {
        line: *line,
        message,
    })?;
    let mut cfg = ExperimentConfig::new(kind);

    for (line, key, value) in &pairs {
        let (line, key, value) = (*line, key.as_str(), value.as_str());
        if !COMMON_KEYS.contains(&key) && !kind.keys().contains(&key) {
            return Err(Error::ConfigParse {
                line,
                message: format!("key `{key}` does not apply to {kind}"),
            });
        }
        match key {
            "experiment" => {}
            "seed" => cfg.seed = parse_one(value, line, key)?,
            "output" => cfg.output = Some(PathBuf::from(value)),
            "format" => {
                cfg.format = value
                    .parse()
                    .map_err(|message| Error::ConfigParse { line, message })?
            }
            "k" => cfg.orders = parse_list(value, line, key)?,
            "d" => cfg.dim = parse_one(value, line, key)?,
            "kernels" => cfg.kernels = parse_one(value, line, key)?,
            "H" => cfg.hurst = parse_list(value, line, key)?,
            "n" => cfg.horizons = parse_list(value, line, key)?,
            "samples" => cfg.samples = parse_one(value, line, key)?,
            "nu" => cfg.nu = parse_list(value, line, key)?,
            "degree" => cfg.degree = parse_one(value, line, key)?,
            "pairs" => cfg.pairs = parse_one(value, line, key)?,
            _ => unreachable!("key checked against ALL_KEYS"),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// A cell of a report row.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Real(v) => format!("{v:.16e}"),
            Cell::Text(s) if s.contains([',', '"', '\n']) => {
                format!("\"{}\"", s.replace('"', "\"\""))
            }
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Json {
        match self {
            Cell::Int(v) => json!(v),
            Cell::Real(v) => serde_json::Number::from_f64(*v).map_or(Json::Null, Json::Number),
            Cell::Text(s) => json!(s),
            Cell::Empty => Json::Null,
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Real)
    }
}

/// One row of output, with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub fields: Vec<(&'static str, Cell)>,
}

impl Record {
    fn new() -> Self {
        Self { fields: Vec::new() }
    }

    fn with(mut self, name: &'static str, value: impl Into<Cell>) -> Self {
        self.fields.push((name, value.into()));
        self
    }
}

/// A checked inequality `margin >= -tolerance`. Identities are recorded with
/// `margin = -|error|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub case: String,
    pub name: String,
    pub margin: f64,
    pub tolerance: f64,
}

impl Assertion {
    fn new(case: impl Into<String>, name: impl Into<String>, margin: f64, tolerance: f64) -> Self {
        Self {
            case: case.into(),
            name: name.into(),
            margin,
            tolerance,
        }
    }

    fn identity(
        case: impl Into<String>,
        name: impl Into<String>,
        error: f64,
        tolerance: f64,
    ) -> Self {
        Self::new(case, name, 0.0 - error.abs(), tolerance)
    }

    pub fn passed(&self) -> bool {
        self.margin >= -self.tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub experiment: ExperimentKind,
    pub config: Vec<(String, String)>,
    pub records: Vec<Record>,
    pub assertions: Vec<Assertion>,
    pub wall_clock_seconds: f64,
    pub version: &'static str,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(Assertion::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Assertion> {
        self.assertions.iter().filter(|a| !a.passed())
    }

    pub fn min_margin(&self) -> f64 {
        self.assertions
            .iter()
            .map(|a| a.margin)
            .fold(f64::INFINITY, f64::min)
    }

    /// Header plus one line per record.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(first) = self.records.first() {
            let header: Vec<&str> = first.fields.iter().map(|(n, _)| *n).collect();
            out.push_str(&header.join(","));
            out.push('\n');
        }
        for r in &self.records {
            let row: Vec<String> = r.fields.iter().map(|(_, c)| c.csv()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Config echo, records, assertions and outcome. The wall clock is
    /// included only on request, since it is the one nondeterministic field.
    pub fn to_json(&self, include_wall_clock: bool) -> Json {
        let config: Map<String, Json> = self
            .config
            .iter()
            .map(|(k, v)| (k.clone(), json!(v)))
            .collect();
        let records: Vec<Json> = self
            .records
            .iter()
            .map(|r| {
                Json::Object(
                    r.fields
                        .iter()
                        .map(|(n, c)| (n.to_string(), c.json()))
                        .collect(),
                )
            })
            .collect();
        let assertions: Vec<Json> = self
            .assertions
            .iter()
            .map(|a| {
                json!({
                    "case": a.case,
                    "name": a.name,
                    "margin": Cell::Real(a.margin).json(),
                    "tolerance": a.tolerance,
                    "passed": a.passed(),
                })
            })
            .collect();
        let mut out = json!({
            "version": self.version,
            "experiment": self.experiment.name(),
            "config": config,
            "records": records,
            "assertions": assertions,
            "passed": self.passed(),
        });
        if include_wall_clock {
            out["wall_clock_seconds"] = json!(self.wall_clock_seconds);
        }
        out
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => {
                let mut s =
                    serde_json::to_string_pretty(&self.to_json(true)).expect("report serializes");
                s.push('\n');
                s
            }
        }
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

/// Runs the configured suite. When the config names an output path the
/// rendered report is written there atomically.
pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let start = Instant::now();
    let (records, assertions) = match config.experiment {
        ExperimentKind::FourthMomentCorpus => fourth_moment_corpus(config)?,
        ExperimentKind::FbmRates => fbm_rates(config)?,
        ExperimentKind::SteinBounds => stein_bounds()?,
        ExperimentKind::LaguerreSuite => laguerre_suite(config)?,
        ExperimentKind::DualitySuite => duality_suite(config)?,
    };
    let report = RunReport {
        experiment: config.experiment,
        config: config.echo(),
        records,
        assertions,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        version: VERSION,
    };
    if let Some(path) = &config.output {
        write_atomic(path, &report.render(config.format))?;
    }
    Ok(report)
}

type Suite = (Vec<Record>, Vec<Assertion>);

fn flatten(parts: Vec<Suite>) -> Suite {
    let mut records = Vec::new();
    let mut assertions = Vec::new();
    for (r, a) in parts {
        records.extend(r);
        assertions.extend(a);
    }
    (records, assertions)
}

fn relative_scale(a: f64, b: f64) -> f64 {
    a.abs().max(b.abs()).max(1.0)
}

fn fourth_moment_corpus(cfg: &ExperimentConfig) -> Result<Suite> {
    let cases: Vec<(usize, usize)> = cfg
        .orders
        .iter()
        .flat_map(|&k| (0..cfg.kernels).map(move |i| (k, i)))
        .collect();
    let parts = cases
        .par_iter()
        .map(|&(k, i)| {
            let case = format!("k{k}-{i:04}");
            let mut rng = substream(cfg.seed, ((k as u64) << 32) | i as u64);
            let f = random_unit_kernel(&mut rng, cfg.dim, k, 6);
            let r = fourth_moment_report(&f).map_err(|e| e.in_case(&case))?;
            let record = Record::new()
                .with("case", case.as_str())
                .with("k", k)
                .with("d", cfg.dim)
                .with("fourth_moment", r.fourth_moment)
                .with("var_stein_kernel", r.var_stein_kernel)
                .with("step1", r.step1_value)
                .with("step2", r.step2_value)
                .with("bound_rhs", r.bound_rhs)
                .with("margin", r.margin())
                .with("tv_bound", r.tv_bound);
            let mut a = vec![
                Assertion::identity(
                    &case,
                    "step1 = Var<DF,-DL^-1F>",
                    r.step1_value - r.var_stein_kernel,
                    IDENTITY_TOL * relative_scale(r.step1_value, r.var_stein_kernel),
                ),
                Assertion::identity(
                    &case,
                    "step2 = E F^4 - 3",
                    r.step2_value - r.moment_cumulant(),
                    IDENTITY_TOL * relative_scale(r.step2_value, r.fourth_moment),
                ),
                Assertion::identity(
                    &case,
                    "E[F^2 Gamma] = (k/3) E F^4",
                    r.mixed_moment - k as f64 / 3.0 * r.fourth_moment,
                    IDENTITY_TOL * relative_scale(r.mixed_moment, r.fourth_moment),
                ),
                Assertion::new(
                    &case,
                    "Var<DF,-DL^-1F> <= (k-1)/(3k)(E F^4 - 3)",
                    r.margin(),
                    IDENTITY_TOL,
                ),
            ];
            if k == 2 {
                a.push(Assertion::identity(
                    &case,
                    "equality at k = 2",
                    r.margin(),
                    IDENTITY_TOL,
                ));
            }
            Ok((vec![record], a))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(flatten(parts))
}

fn fbm_rates(cfg: &ExperimentConfig) -> Result<Suite> {
    let cases: Vec<(usize, usize)> = (0..cfg.hurst.len())
        .flat_map(|hi| (0..cfg.horizons.len()).map(move |ni| (hi, ni)))
        .collect();
    let stats: Vec<(
        QuadraticVariationStatistic,
        Option<crate::stein::DistanceReport>,
    )> = cases
        .par_iter()
        .map(|&(hi, ni)| {
            let (h, n) = (cfg.hurst[hi], cfg.horizons[ni]);
            let case = format!("H{h}-n{n}");
            let stat = exact_tv_bound(h, n).map_err(|e| e.in_case(&case))?;
            let mc = if cfg.samples > 0 {
                let stream = ((hi as u64) << 32) | ni as u64;
                let seed = cfg.seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
                Some(distance_for(&stat, cfg.samples, seed).map_err(|e| e.in_case(&case))?)
            } else {
                None
            };
            Ok((stat, mc))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    let mut assertions = Vec::new();
    for (hi, &h) in cfg.hurst.iter().enumerate() {
        let row: Vec<&(QuadraticVariationStatistic, _)> = stats
            [hi * cfg.horizons.len()..(hi + 1) * cfg.horizons.len()]
            .iter()
            .collect();
        let points: Vec<(usize, f64)> = row.iter().map(|(s, _)| (s.n, s.tv_bound)).collect();
        let fit = fit_rate(h, &points).ok();
        for (s, mc) in &row {
            let case = format!("H{h}-n{}", s.n);
            let mut rec = Record::new()
                .with("H", h)
                .with("n", s.n)
                .with("sigma", s.sigma)
                .with("var_exact", s.variance)
                .with("tv_bound", s.tv_bound)
                .with("slope_fit", fit.map(|f| f.slope));
            if let Some(d) = mc {
                rec = rec
                    .with("kolmogorov", d.kolmogorov)
                    .with("dkw_error", d.monte_carlo_error);
                assertions.push(Assertion::new(
                    &case,
                    "d_K <= tv_bound + 3 dkw",
                    d.tv_upper_bound + 3.0 * d.monte_carlo_error - d.kolmogorov,
                    0.0,
                ));
            }
            records.push(rec);
            if h == 0.5 {
                let closed = 2.0 * (2.0 / s.n as f64).sqrt();
                assertions.push(Assertion::identity(
                    &case,
                    "tv_bound = 2 sqrt(2/n)",
                    s.tv_bound - closed,
                    1e-12,
                ));
            }
        }
        let hcase = format!("H{h}");
        for w in points.windows(2) {
            assertions.push(Assertion::new(
                format!("H{h}-n{}", w[1].0),
                "tv_bound decreasing in n",
                w[0].1 - w[1].1,
                0.0,
            ));
        }
        if let Some(fit) = fit {
            if h < 0.625 {
                assertions.push(Assertion::new(
                    &hcase,
                    "|slope + 1/2| <= 0.15",
                    0.15 - (fit.slope + 0.5).abs(),
                    0.0,
                ));
            } else if h > 0.625 && h < 0.75 {
                let target = 4.0 * h - 3.0;
                assertions.push(Assertion::new(
                    &hcase,
                    "|slope - (4H - 3)| <= 0.15",
                    0.15 - (fit.slope - target).abs(),
                    0.0,
                ));
            } else if h == 0.75 {
                let scaled: Vec<f64> = points.iter().map(|&(n, tv)| tv * (n as f64).ln()).collect();
                let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let min = scaled.iter().copied().fold(f64::INFINITY, f64::min);
                assertions.push(Assertion::new(
                    &hcase,
                    "tv_bound log n varies by < 2x",
                    2.0 - max / min,
                    0.0,
                ));
            }
        }
    }
    Ok((records, assertions))
}

fn stein_bounds() -> Result<Suite> {
    let functions: Vec<_> = [
        FunctionClass::Bounded,
        FunctionClass::AbsolutelyContinuous,
        FunctionClass::Indicator,
    ]
    .into_iter()
    .flat_map(shipped_family)
    .collect();
    let parts = functions
        .par_iter()
        .map(|h| {
            let cert = verify_solution_bounds(h).map_err(|e| e.in_case(h.name()))?;
            let mut records = Vec::new();
            let mut assertions = Vec::new();
            for c in &cert.checks {
                records.push(
                    Record::new()
                        .with("function", h.name())
                        .with("class", h.class().to_string())
                        .with("bound", c.name)
                        .with("observed", c.observed)
                        .with("limit", c.bound)
                        .with("margin", c.margin()),
                );
                assertions.push(Assertion::new(h.name(), c.name, c.margin(), BOUND_SLACK));
            }
            Ok((records, assertions))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(flatten(parts))
}

#[allow(clippy::too_many_arguments)]
fn laguerre_row(
    check: &str,
    nu: f64,
    d: usize,
    degree: usize,
    case: &str,
    lhs: f64,
    rhs: f64,
    margin: f64,
) -> Record {
    Record::new()
        .with("check", check)
        .with("nu", nu)
        .with("d", d)
        .with("degree", degree)
        .with("case", case)
        .with("lhs", lhs)
        .with("rhs", rhs)
        .with("margin", margin)
}

/// `E Γ[X,Y] + E[X LY]` with both expectations from raw Gamma moments.
pub fn integration_by_parts_residual(x: &LaguerreElement, y: &LaguerreElement) -> Result<f64> {
    let nu = x.nu();
    let p = x.to_polynomial()?;
    let q = y.to_polynomial()?;
    let g = gamma_mean(&laguerre_gamma_polynomial(&p, &q)?, nu)?;
    let xly = gamma_mean(&p.mul(&laguerre_generator_polynomial(&q, nu))?, nu)?;
    Ok(g + xly)
}

fn laguerre_suite(cfg: &ExperimentConfig) -> Result<Suite> {
    let settings: Vec<(usize, usize)> = (0..cfg.nu.len())
        .flat_map(|vi| (1..=cfg.dim).map(move |d| (vi, d)))
        .collect();
    let parts = settings
        .par_iter()
        .map(|&(vi, d)| -> Result<Suite> {
            let nu = cfg.nu[vi];
            let s = LaguerreStructure::new(d, nu)?;
            let mut records = Vec::new();
            let mut assertions = Vec::new();

            let mut rng = substream(cfg.seed, ((vi as u64) << 32) | d as u64);
            for i in 0..cfg.pairs {
                let case = format!("nu{nu}-d{d}-ibp{i:04}");
                let x = LaguerreElement::from_polynomial(
                    &random_polynomial(&mut rng, d, cfg.degree, 4)?,
                    nu,
                )?;
                let y = LaguerreElement::from_polynomial(
                    &random_polynomial(&mut rng, d, cfg.degree, 4)?,
                    nu,
                )?;
                let r = integration_by_parts_residual(&x, &y).map_err(|e| e.in_case(&case))?;
                records.push(laguerre_row(
                    "ibp",
                    nu,
                    d,
                    cfg.degree,
                    &case,
                    r,
                    0.0,
                    -r.abs(),
                ));
                assertions.push(Assertion::identity(
                    &case,
                    "E Gamma[X,Y] + E[X LY] = 0",
                    r,
                    1e-9,
                ));
            }

            let case = format!("nu{nu}-d{d}-h1");
            let h1 = verify_h1(&s, 2 * cfg.degree).map_err(|e| e.in_case(&case))?;
            records.push(laguerre_row(
                "h1",
                nu,
                d,
                2 * cfg.degree,
                &case,
                h1.max_residual,
                0.0,
                -h1.max_residual,
            ));
            assertions.push(Assertion::identity(
                &case,
                "eigenbasis residual",
                h1.max_residual,
                1e-9,
            ));

            for p in 1..=cfg.degree {
                let indices = s.indices_of_degree(p);
                let mut corpus: Vec<(String, LaguerreElement)> = Vec::new();
                for (j, _) in indices.iter().enumerate() {
                    let mut w = vec![0.0; indices.len()];
                    w[j] = 1.0;
                    corpus.push((
                        format!("nu{nu}-d{d}-p{p}-basis{j:02}"),
                        s.normalized_eigenfunction(p, &w)?,
                    ));
                }
                let w: Vec<f64> = (0..indices.len())
                    .map(|_| rand::Rng::random_range(&mut rng, -1.0..1.0))
                    .collect();
                corpus.push((
                    format!("nu{nu}-d{d}-p{p}-mixed"),
                    s.normalized_eigenfunction(p, &w)?,
                ));

                for (case, x) in corpus {
                    let lambda = p as f64;
                    let b = dirichlet_fourth_moment_bound(&s, &x, lambda)
                        .map_err(|e| e.in_case(&case))?;
                    records.push(laguerre_row(
                        "fourth-moment",
                        nu,
                        d,
                        p,
                        &case,
                        b.var_gamma,
                        b.rhs,
                        b.margin(),
                    ));
                    assertions.push(Assertion::new(
                        &case,
                        "Var Gamma[X,X] <= (lambda^2/3)(E X^4 - 3)",
                        b.margin(),
                        IDENTITY_TOL * b.rhs.abs().max(1.0),
                    ));
                    let h2 = verify_h2(&s, &x, lambda).map_err(|e| e.in_case(&case))?;
                    let top = h2.support.iter().copied().fold(0.0, f64::max);
                    records.push(laguerre_row(
                        "h2",
                        nu,
                        d,
                        p,
                        &case,
                        top,
                        h2.limit,
                        h2.limit - top,
                    ));
                    assertions.push(Assertion::new(
                        &case,
                        "X^2 spectrum within 2 lambda",
                        h2.limit - top,
                        0.0,
                    ));
                }
            }
            Ok((records, assertions))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(flatten(parts))
}

fn duality_suite(cfg: &ExperimentConfig) -> Result<Suite> {
    let parts = (0..cfg.pairs)
        .into_par_iter()
        .map(|i| -> Result<Suite> {
            let case = format!("pair{i:04}");
            let mut rng = substream(cfg.seed, i as u64);
            let f = random_chaos(&mut rng, cfg.dim, 3, 4);
            let g = random_chaos(&mut rng, cfg.dim, 3, 4);
            let p = random_polynomial(&mut rng, cfg.dim, 4, 5)?;
            let duality = duality_check(&f, &derivative(&g)).map_err(|e| e.in_case(&case))?;
            let gamma_res = carre_du_champ_residual(&f, &g).map_err(|e| e.in_case(&case))?;
            let chain = chain_rule_residual(&p).map_err(|e| e.in_case(&case))?;
            let record = Record::new()
                .with("case", case.as_str())
                .with("d", cfg.dim)
                .with("duality_residual", duality)
                .with("gamma_residual", gamma_res)
                .with("chain_rule_residual", chain);
            let assertions = vec![
                Assertion::identity(&case, "E[F delta DG] = E<DF, DG>", duality, 1e-9),
                Assertion::identity(&case, "2 Gamma = L(FG) - F LG - G LF", gamma_res, 1e-10),
                Assertion::identity(&case, "D P = grad P", chain, 1e-10),
            ];
            Ok((vec![record], assertions))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(flatten(parts))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_example_config() {
        let cfg = parse_config(
            "experiment = fbm-rates\nH = 0.55,0.70\nn = 128,256,512,1024,2048\nseed = 42",
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::FbmRates);
        assert_eq!(cfg.hurst, vec![0.55, 0.7]);
        assert_eq!(cfg.horizons, vec![128, 256, 512, 1024, 2048]);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn rejects_bad_configs() {
        let e = parse_config("experiment = fbm-rates\nH = 0.9").unwrap_err();
        assert!(matches!(&e, Error::ConfigRange { key, .. } if key == "H"));
        let e = parse_config("experiment = fbm-rates\nseed = 1\nseed = 2").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 3, .. }));
        let e = parse_config("experiment = stein-bounds\ncolour = blue").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 2, .. }));
        let e = parse_config("experiment = stein-bounds\nk = 2").unwrap_err();
        assert!(matches!(e, Error::ConfigParse { line: 2, .. }));
        assert!(parse_config("seed = 1").is_err());
        assert!(parse_config("experiment = nope").is_err());
        assert!(parse_config("experiment fbm-rates").is_err());
        assert!(parse_config("experiment = fourth-moment-corpus\nk = 2,x").is_err());
        assert!(e.is_usage());
    }

    #[test]
    fn comments_and_blank_lines() {
        let cfg = parse_config(
            "# corpus\n\nexperiment = fourth-moment-corpus # inline\nk = 2, 3\nd = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.orders, vec![2, 3]);
        assert_eq!(cfg.dim, 2);
    }

    #[test]
    fn csv_formatting() {
        let report = RunReport {
            experiment: ExperimentKind::SteinBounds,
            config: vec![],
            records: vec![Record::new()
                .with("a", 1usize)
                .with("b", 0.1)
                .with("c", "x,y")
                .with("d", None::<f64>)],
            assertions: vec![],
            wall_clock_seconds: 0.0,
            version: VERSION,
        };
        assert_eq!(
            report.to_csv(),
            "a,b,c,d\n1,1.0000000000000001e-1,\"x,y\",\n"
        );
        let back: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn small_runs_pass_and_repeat() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::FourthMomentCorpus);
        cfg.kernels = 5;
        let a = run(&cfg).unwrap();
        assert!(a.passed());
        assert_eq!(a.records.len(), 10);
        assert_eq!(a.to_csv(), run(&cfg).unwrap().to_csv());

        let mut cfg = ExperimentConfig::new(ExperimentKind::DualitySuite);
        cfg.pairs = 5;
        assert!(run(&cfg).unwrap().passed());
    }
}
