//! Run configuration: `key = value` files layered under command-line flags.
//!
//! Keys mirror the long flag names (`n-bar` and `n_bar` are the same key).
//! Precedence is flag > file > per-subcommand default.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use mzfisher_core::fisher::Threshold;
use mzfisher_core::optimize::{Engine, ThresholdRule};

use crate::commands::CliError;

/// Raw, unparsed settings keyed by normalized name.
pub type Layer = BTreeMap<String, String>;

pub const KEYS: &[&str] = &[
    "n_bar",
    "alpha2",
    "n_res",
    "phi",
    "tail_tol",
    "grid_step",
    "seed",
    "format",
    "output",
    "engine",
    "threads",
    "n_max",
    "trials",
    "repetitions",
    "n_from",
    "n_to",
    "n_count",
    "spacing",
    "n_res_rule",
    "objective",
    "input",
    "x_column",
    "y_column",
    "kind",
    "field",
    "cutoff",
    "refine",
    "raw",
];

pub fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

/// Parses a `key = value` file; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<Layer, CliError> {
    let mut layer = Layer::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = normalize_key(key);
        if !KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        layer.insert(key, value.trim().trim_matches('"').to_string());
    }
    Ok(layer)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EngineChoice {
    /// Exact double sum over detectable events
    Exact,
    /// erfc closed-form approximation
    Approx,
    /// Perfect detectors
    Ideal,
}

impl EngineChoice {
    pub fn engine(self) -> Engine {
        match self {
            EngineChoice::Approx => Engine::Approx,
            _ => Engine::Exact,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Objective {
    /// Total QFI over all detectable events, maximized over the split
    Total,
    /// G_N F_N of a single component, maximized over N and the split
    Joint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DistKind {
    /// Photon-number distributions of the two inputs
    Numbers,
    /// Photon-counting outcome probabilities P(N_a, N_b | phi)
    Outcomes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Field {
    Coherent,
    Squeezed,
}

fn parse_enum<T: clap::ValueEnum>(key: &str, value: &str) -> Result<T, CliError> {
    T::from_str(value, true).map_err(|_| CliError::Usage(format!("`{key}`: unrecognized value `{value}`")))
}

pub fn parse_rule(value: &str) -> Result<ThresholdRule, String> {
    if value.trim().eq_ignore_ascii_case("inf") {
        return Ok(ThresholdRule::Infinite);
    }
    match value.trim().parse::<f64>() {
        Ok(k) if k > 0.0 && k.is_finite() => Ok(ThresholdRule::Multiple(k)),
        _ => Err(format!(
            "expected a positive multiple of n_bar or \"inf\", got `{value}`"
        )),
    }
}

pub fn parse_threshold(value: &str) -> Result<Threshold, String> {
    value.parse().map_err(|e: mzfisher_core::Error| e.to_string())
}

/// Fully resolved settings for one subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_bar: f64,
    pub alpha2: Option<f64>,
    pub n_res: Threshold,
    pub phi: Option<f64>,
    pub tail_tol: f64,
    pub grid_step: f64,
    pub seed: Option<u64>,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub engine: EngineChoice,
    pub threads: Option<usize>,
    pub n_max: Option<usize>,
    pub trials: usize,
    pub repetitions: usize,
    pub n_from: f64,
    pub n_to: f64,
    pub n_count: usize,
    pub spacing: Spacing,
    pub n_res_rule: ThresholdRule,
    pub objective: Objective,
    pub input: Option<PathBuf>,
    pub x_column: String,
    pub y_column: String,
    pub kind: DistKind,
    pub field: Field,
    pub cutoff: Option<usize>,
    pub refine: bool,
    pub raw: Option<PathBuf>,
}

struct Lookup<'a> {
    layers: [&'a Layer; 3],
}

impl Lookup<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.layers.iter().find_map(|l| l.get(key)).map(String::as_str)
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::Usage(format!("`{key}`: cannot parse `{v}`")))
            })
            .transpose()
    }

    fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    fn choice<T: clap::ValueEnum>(&self, key: &str, default: T) -> Result<T, CliError> {
        self.raw(key).map_or(Ok(default), |v| parse_enum(key, v))
    }
}

impl RunConfig {
    /// Merges `flags` over `file` over `defaults` and validates the result.
    pub fn resolve(flags: &Layer, file: &Layer, defaults: &Layer) -> Result<Self, CliError> {
        let l = Lookup {
            layers: [flags, file, defaults],
        };
        let n_res = match l.raw("n_res") {
            Some(v) => parse_threshold(v).map_err(|e| CliError::Usage(format!("`n_res`: {e}")))?,
            None => Threshold::Infinite,
        };
        let n_res_rule = match l.raw("n_res_rule") {
            Some(v) => parse_rule(v).map_err(|e| CliError::Usage(format!("`n_res_rule`: {e}")))?,
            None => ThresholdRule::Multiple(1.0),
        };
        let cfg = RunConfig {
            n_bar: l.get("n_bar", 10.0)?,
            alpha2: l.opt("alpha2")?,
            n_res,
            phi: l.opt("phi")?,
            tail_tol: l.get("tail_tol", mzfisher_core::states::DEFAULT_TAIL_TOL)?,
            grid_step: l.get("grid_step", 0.01)?,
            seed: l.opt("seed")?,
            format: l.choice("format", Format::Json)?,
            output: l.opt("output")?,
            engine: l.choice("engine", EngineChoice::Exact)?,
            threads: l.opt("threads")?,
            n_max: l.opt("n_max")?,
            trials: l.get("trials", 10_000)?,
            repetitions: l.get("repetitions", 200)?,
            n_from: l.get("n_from", 1.0)?,
            n_to: l.get("n_to", 100.0)?,
            n_count: l.get("n_count", 100)?,
            spacing: l.choice("spacing", Spacing::Linear)?,
            n_res_rule,
            objective: l.choice("objective", Objective::Total)?,
            input: l.opt("input")?,
            x_column: l.get("x_column", "n_bar".to_string())?,
            y_column: l.get("y_column", "fq_opt".to_string())?,
            kind: l.choice("kind", DistKind::Numbers)?,
            field: l.choice("field", Field::Squeezed)?,
            cutoff: l.opt("cutoff")?,
            refine: l.get("refine", true)?,
            raw: l.opt("raw")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: &str| Err(CliError::Usage(msg.to_string()));
        if !(self.n_bar > 0.0 && self.n_bar.is_finite()) {
            return bad("n_bar must be positive");
        }
        if let Some(a) = self.alpha2 {
            if !(0.0..=self.n_bar).contains(&a) {
                return bad("alpha2 must lie in [0, n_bar]");
            }
        }
        if let Some(phi) = self.phi {
            if !phi.is_finite() {
                return bad("phi must be finite");
            }
        }
        if !(self.tail_tol > 0.0 && self.tail_tol <= 1e-3) {
            return bad("tail_tol must lie in (0, 1e-3]");
        }
        if !(self.grid_step > 0.0 && self.grid_step <= 1.0) {
            return bad("grid_step must lie in (0, 1]");
        }
        if self.trials == 0 {
            return bad("trials must be positive");
        }
        if self.repetitions < 2 {
            return bad("repetitions must be at least 2");
        }
        if !(self.n_from > 0.0 && self.n_to >= self.n_from && self.n_count >= 1) {
            return bad("need 0 < n_from <= n_to and n_count >= 1");
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        Ok(())
    }

    /// `α²`, defaulting to an even split.
    pub fn alpha2_or_half(&self) -> f64 {
        self.alpha2.unwrap_or(0.5 * self.n_bar)
    }

    /// The `n̄` values of a scan.
    pub fn n_values(&self) -> Vec<f64> {
        match self.spacing {
            Spacing::Log => mzfisher_core::optimize::log_spaced(self.n_from, self.n_to, self.n_count),
            Spacing::Linear if self.n_count == 1 => vec![self.n_from],
            Spacing::Linear => (0..self.n_count)
                .map(|i| self.n_from + (self.n_to - self.n_from) * i as f64 / (self.n_count - 1) as f64)
                .collect(),
        }
    }
}

/// Builds a layer from `(key, value)` pairs, skipping absent values.
pub fn layer<'a, I>(pairs: I) -> Layer
where
    I: IntoIterator<Item = (&'a str, Option<String>)>,
{
    pairs
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
        .collect()
}
