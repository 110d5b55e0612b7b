//! Subcommand definitions and their execution.

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use mzfisher_core::fisher::{total_fisher_approx, total_fisher_exact, FisherReport, Threshold};
use mzfisher_core::optimize::{
    default_single_component_n_max, first_classical_crossing, fit_power_law, Engine, ScanOptions, ThresholdRule,
};
use mzfisher_core::rotation::full_outcome_distribution;
use mzfisher_core::states::{
    build_amplitude_table, coherent_number_distribution, squeezed_number_distribution, AmplitudeTable, DistributionMode,
};
use mzfisher_core::LightSource;

use crate::config::{
    layer, parse_config_file, parse_threshold, DistKind, EngineChoice, Field, Format, Layer, Objective, RunConfig,
    Spacing,
};
use crate::formats::{json_text, num, opt_num, Cell, Table};
use crate::parallel;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("domain error: {0}")]
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::BadInput(_) => 3,
            CliError::Domain(_) => 4,
        }
    }
}

fn error_kind(e: &mzfisher_core::Error) -> &'static str {
    use mzfisher_core::Error::*;
    match e {
        InvalidParameter { .. } => "InvalidParameter",
        CutoffOverflow { .. } => "CutoffOverflow",
        ZeroProbability { .. } => "ZeroProbability",
        SizeExceeded { .. } => "SizeExceeded",
        NotPhaseMatched => "NotPhaseMatched",
        Domain(_) => "Domain",
        InsufficientData { .. } => "InsufficientData",
        DegenerateLikelihood => "DegenerateLikelihood",
        NoConvergence { .. } => "NoConvergence",
    }
}

impl From<mzfisher_core::Error> for CliError {
    fn from(e: mzfisher_core::Error) -> Self {
        match e {
            mzfisher_core::Error::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Domain(format!("{}: {e}", error_kind(&e))),
        }
    }
}

/// Result of a subcommand: the main body plus side outputs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Output {
    /// Written to `--output`, or stdout.
    pub body: String,
    pub output: Option<PathBuf>,
    /// Human-readable remarks for stderr.
    pub notes: Vec<String>,
    /// Additional files to write, e.g. raw estimates.
    pub files: Vec<(PathBuf, String)>,
}

/// Fisher information of a coherent ⊗ squeezed-vacuum Mach–Zehnder
/// interferometer read out by number-resolving photon counters.
///
/// Every flag may also be set in a `key = value` config file; flags win.
#[derive(Debug, Parser)]
#[command(name = "mzfisher", version)]
pub struct Cli {
    /// Worker threads [count]; default: available parallelism
    #[arg(long, global = true, value_name = "COUNT")]
    pub threads: Option<usize>,

    /// Config file of `key = value` lines mirroring the long flags [path]
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Budget {
    /// Mean total input photon number n̄ = |α|² + sinh²|ξ| [photons]
    #[arg(long, value_name = "PHOTONS", allow_negative_numbers = true)]
    pub n_bar: Option<f64>,

    /// Coherent mean photon number |α|², in [0, n̄] [photons]
    #[arg(long, value_name = "PHOTONS", allow_negative_numbers = true)]
    pub alpha2: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Emit {
    /// Output format
    #[arg(long, value_enum)]
    pub format: Option<Format>,

    /// Output file [path]; default: stdout
    #[arg(long, short = 'o', value_name = "PATH")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct Tail {
    /// Neglected probability mass of each amplitude tail [probability]
    #[arg(long, value_name = "PROB")]
    pub tail_tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Search {
    /// α² grid step as a fraction of n̄ [dimensionless]
    #[arg(long, value_name = "FRACTION")]
    pub grid_step: Option<f64>,

    /// Polish the grid optimum by golden-section search [true|false]
    #[arg(long, value_name = "BOOL")]
    pub refine: Option<bool>,

    /// Objective engine
    #[arg(long, value_enum)]
    pub engine: Option<EngineChoice>,

    /// What to maximize
    #[arg(long, value_enum)]
    pub objective: Option<Objective>,

    /// Largest component N searched by the joint objective [photons]; default: 4n̄ + 40
    #[arg(long, value_name = "PHOTONS")]
    pub n_max: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Photon-number distributions of the inputs, or outcome probabilities at a phase
    Dist {
        #[command(flatten)]
        budget: Budget,
        /// Largest photon number tabulated [photons] (numbers kind)
        #[arg(long, value_name = "PHOTONS")]
        n_max: Option<usize>,
        /// Which distribution to tabulate
        #[arg(long, value_enum)]
        kind: Option<DistKind>,
        /// Number-resolution threshold N_res [photons] or "inf" (outcomes kind; inf means n_max)
        #[arg(long, value_name = "PHOTONS|inf", value_parser = parse_threshold)]
        n_res: Option<Threshold>,
        /// Interferometer phase φ [rad] (outcomes kind)
        #[arg(long, value_name = "RAD", allow_negative_numbers = true)]
        phi: Option<f64>,
        #[command(flatten)]
        tail: Tail,
        #[command(flatten)]
        emit: Emit,
    },
    /// Total Fisher information at one split and threshold
    Fisher {
        #[command(flatten)]
        budget: Budget,
        /// Number-resolution threshold N_res [photons] or "inf"
        #[arg(long, value_name = "PHOTONS|inf", value_parser = parse_threshold)]
        n_res: Option<Threshold>,
        /// Which total is reported as `value`
        #[arg(long, value_enum)]
        engine: Option<EngineChoice>,
        /// Also evaluate Σ(∂P)²/P from rotated probabilities at this phase [rad]
        #[arg(long, value_name = "RAD", allow_negative_numbers = true)]
        phi: Option<f64>,
        #[command(flatten)]
        tail: Tail,
        #[command(flatten)]
        emit: Emit,
    },
    /// Optimal split of a fixed photon budget
    Optimize {
        /// Mean total input photon number n̄ [photons]
        #[arg(long, value_name = "PHOTONS", allow_negative_numbers = true)]
        n_bar: Option<f64>,
        /// Number-resolution threshold N_res [photons] or "inf" (total objective)
        #[arg(long, value_name = "PHOTONS|inf", value_parser = parse_threshold)]
        n_res: Option<Threshold>,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        tail: Tail,
        #[command(flatten)]
        emit: Emit,
    },
    /// Optimal splits over a range of photon budgets
    Scan {
        /// Smallest n̄ [photons]
        #[arg(long, value_name = "PHOTONS")]
        n_from: Option<f64>,
        /// Largest n̄ [photons]
        #[arg(long, value_name = "PHOTONS")]
        n_to: Option<f64>,
        /// Number of n̄ values [count]
        #[arg(long, value_name = "COUNT")]
        n_count: Option<usize>,
        /// Spacing of the n̄ values
        #[arg(long, value_enum)]
        spacing: Option<Spacing>,
        /// Threshold rule: N_res = round(k n̄) for a multiple k [dimensionless], or "inf"
        #[arg(long, value_name = "K|inf")]
        n_res_rule: Option<String>,
        #[command(flatten)]
        search: Search,
        #[command(flatten)]
        tail: Tail,
        #[command(flatten)]
        emit: Emit,
    },
    /// Power-law fit value ≈ c n̄^p of two columns of a scan CSV
    Fit {
        /// Scan CSV with a header row [path]
        #[arg(long, value_name = "PATH")]
        input: Option<PathBuf>,
        /// Column holding n̄ [photons]
        #[arg(long, value_name = "NAME")]
        x_column: Option<String>,
        /// Column holding the Fisher information [rad⁻²]
        #[arg(long, value_name = "NAME")]
        y_column: Option<String>,
        #[command(flatten)]
        emit: Emit,
    },
    /// Monte-Carlo maximum-likelihood estimation against the Cramér–Rao bound
    Simulate {
        #[command(flatten)]
        budget: Budget,
        /// Number-resolution threshold N_res [photons] or "inf"
        #[arg(long, value_name = "PHOTONS|inf", value_parser = parse_threshold)]
        n_res: Option<Threshold>,
        /// True phase φ in (0, π/2) [rad]
        #[arg(long, value_name = "RAD")]
        phi: Option<f64>,
        /// Events per experiment ν [count]
        #[arg(long, value_name = "COUNT")]
        trials: Option<usize>,
        /// Independent experiments [count]
        #[arg(long, value_name = "COUNT")]
        repetitions: Option<usize>,
        /// RNG seed [integer] (required)
        #[arg(long, value_name = "INT")]
        seed: Option<u64>,
        /// Also write per-repetition estimates as CSV [path]
        #[arg(long, value_name = "PATH")]
        raw: Option<PathBuf>,
        #[command(flatten)]
        tail: Tail,
        #[command(flatten)]
        emit: Emit,
    },
    /// Log-domain Fock amplitudes of one input field
    ExportAmplitudes {
        #[command(flatten)]
        budget: Budget,
        /// Which input field
        #[arg(long, value_enum)]
        field: Option<Field>,
        /// Largest photon number [photons]; default: set by --tail-tol
        #[arg(long, value_name = "PHOTONS")]
        cutoff: Option<usize>,
        #[command(flatten)]
        tail: Tail,
        #[command(flatten)]
        emit: Emit,
    },
}

fn text<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

fn choice<T: ValueEnum>(v: &Option<T>) -> Option<String> {
    v.as_ref()
        .and_then(|v| v.to_possible_value())
        .map(|p| p.get_name().to_string())
}

fn path(v: &Option<PathBuf>) -> Option<String> {
    v.as_ref().map(|p| p.display().to_string())
}

impl Budget {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![("n_bar", text(&self.n_bar)), ("alpha2", text(&self.alpha2))]
    }
}

impl Emit {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![("format", choice(&self.format)), ("output", path(&self.output))]
    }
}

impl Search {
    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("grid_step", text(&self.grid_step)),
            ("refine", text(&self.refine)),
            ("engine", choice(&self.engine)),
            ("objective", choice(&self.objective)),
            ("n_max", text(&self.n_max)),
        ]
    }
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Dist { .. } => "dist",
            Command::Fisher { .. } => "fisher",
            Command::Optimize { .. } => "optimize",
            Command::Scan { .. } => "scan",
            Command::Fit { .. } => "fit",
            Command::Simulate { .. } => "simulate",
            Command::ExportAmplitudes { .. } => "export-amplitudes",
        }
    }

    /// Settings given on the command line.
    pub fn flags(&self) -> Layer {
        let mut p: Vec<(&'static str, Option<String>)> = Vec::new();
        match self {
            Command::Dist {
                budget,
                n_max,
                kind,
                n_res,
                phi,
                tail,
                emit,
            } => {
                p.extend(budget.pairs());
                p.extend([
                    ("n_max", text(n_max)),
                    ("kind", choice(kind)),
                    ("n_res", text(n_res)),
                    ("phi", text(phi)),
                    ("tail_tol", text(&tail.tail_tol)),
                ]);
                p.extend(emit.pairs());
            }
            Command::Fisher {
                budget,
                n_res,
                engine,
                phi,
                tail,
                emit,
            } => {
                p.extend(budget.pairs());
                p.extend([
                    ("n_res", text(n_res)),
                    ("engine", choice(engine)),
                    ("phi", text(phi)),
                    ("tail_tol", text(&tail.tail_tol)),
                ]);
                p.extend(emit.pairs());
            }
            Command::Optimize {
                n_bar,
                n_res,
                search,
                tail,
                emit,
            } => {
                p.extend([
                    ("n_bar", text(n_bar)),
                    ("n_res", text(n_res)),
                    ("tail_tol", text(&tail.tail_tol)),
                ]);
                p.extend(search.pairs());
                p.extend(emit.pairs());
            }
            Command::Scan {
                n_from,
                n_to,
                n_count,
                spacing,
                n_res_rule,
                search,
                tail,
                emit,
            } => {
                p.extend([
                    ("n_from", text(n_from)),
                    ("n_to", text(n_to)),
                    ("n_count", text(n_count)),
                    ("spacing", choice(spacing)),
                    ("n_res_rule", n_res_rule.clone()),
                    ("tail_tol", text(&tail.tail_tol)),
                ]);
                p.extend(search.pairs());
                p.extend(emit.pairs());
            }
            Command::Fit {
                input,
                x_column,
                y_column,
                emit,
            } => {
                p.extend([
                    ("input", path(input)),
                    ("x_column", x_column.clone()),
                    ("y_column", y_column.clone()),
                ]);
                p.extend(emit.pairs());
            }
            Command::Simulate {
                budget,
                n_res,
                phi,
                trials,
                repetitions,
                seed,
                raw,
                tail,
                emit,
            } => {
                p.extend(budget.pairs());
                p.extend([
                    ("n_res", text(n_res)),
                    ("phi", text(phi)),
                    ("trials", text(trials)),
                    ("repetitions", text(repetitions)),
                    ("seed", text(seed)),
                    ("raw", path(raw)),
                    ("tail_tol", text(&tail.tail_tol)),
                ]);
                p.extend(emit.pairs());
            }
            Command::ExportAmplitudes {
                budget,
                field,
                cutoff,
                tail,
                emit,
            } => {
                p.extend(budget.pairs());
                p.extend([
                    ("field", choice(field)),
                    ("cutoff", text(cutoff)),
                    ("tail_tol", text(&tail.tail_tol)),
                ]);
                p.extend(emit.pairs());
            }
        }
        layer(p)
    }

    /// Per-subcommand defaults beneath the config file.
    pub fn defaults(&self) -> Layer {
        let owned = |pairs: &[(&'static str, &str)]| -> Layer {
            pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
        };
        match self {
            // reference point |α|² = 2 sinh²|ξ| = 10
            Command::Dist { .. } => owned(&[
                ("n_bar", "15"),
                ("alpha2", "10"),
                ("n_max", "40"),
                ("format", "csv"),
                ("phi", &FRAC_PI_4.to_string()),
            ]),
            Command::Scan { .. } | Command::ExportAmplitudes { .. } => owned(&[("format", "csv")]),
            Command::Simulate { .. } => owned(&[("phi", "0.6")]),
            _ => Layer::new(),
        }
    }
}

/// Executes the parsed command line.
pub fn run(cli: &Cli) -> Result<Output, CliError> {
    let file = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
            parse_config_file(&text)?
        }
        None => Layer::new(),
    };
    let mut flags = cli.command.flags();
    if let Some(t) = cli.threads {
        flags.insert("threads".into(), t.to_string());
    }
    let cfg = RunConfig::resolve(&flags, &file, &cli.command.defaults())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {} worker threads: {e}", cfg.threads.unwrap_or(0))))?;
    let mut out = pool.install(|| execute(&cli.command, &cfg))?;
    out.output = cfg.output.clone();
    Ok(out)
}

/// Runs one subcommand on an already resolved configuration.
pub fn execute(cmd: &Command, cfg: &RunConfig) -> Result<Output, CliError> {
    match cmd {
        Command::Dist { .. } => cmd_dist(cfg),
        Command::Fisher { .. } => cmd_fisher(cfg),
        Command::Optimize { .. } => cmd_optimize(cfg),
        Command::Scan { .. } => cmd_scan(cfg),
        Command::Fit { .. } => cmd_fit(cfg),
        Command::Simulate { .. } => cmd_simulate(cfg),
        Command::ExportAmplitudes { .. } => cmd_export(cfg),
    }
    .map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("{}: {m}", cmd.name())),
        other => other,
    })
}

fn emit_table(cfg: &RunConfig, table: &Table, extra: Value) -> String {
    match cfg.format {
        Format::Csv => table.to_csv(),
        Format::Json => {
            let mut v = table.to_json();
            if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
                m.extend(e);
            }
            json_text(&v)
        }
    }
}

fn threshold_json(t: Threshold) -> Value {
    match t {
        Threshold::Finite(n) => Value::from(n),
        Threshold::Infinite => Value::String("inf".into()),
    }
}

fn threshold_cell(t: Threshold) -> Cell {
    match t {
        Threshold::Finite(n) => Cell::from(n),
        Threshold::Infinite => Cell::Text("inf".into()),
    }
}

fn engine_name(e: EngineChoice) -> String {
    choice(&Some(e)).unwrap_or_default()
}

fn source(cfg: &RunConfig) -> Result<LightSource, CliError> {
    Ok(LightSource::from_split(cfg.n_bar, cfg.alpha2_or_half())?)
}

fn cmd_dist(cfg: &RunConfig) -> Result<Output, CliError> {
    let src = source(cfg)?;
    let n_max = cfg.n_max.unwrap_or(40);
    let mut notes = Vec::new();
    let table = match cfg.kind {
        DistKind::Numbers => {
            let pc = coherent_number_distribution(src.alpha_mag(), n_max);
            let pe = squeezed_number_distribution(src.xi_mag(), n_max, DistributionMode::Exact);
            let ps = squeezed_number_distribution(src.xi_mag(), n_max, DistributionMode::Stirling);
            let mut t = Table::new(&["n", "k", "p_coherent", "p_squeezed_exact", "p_squeezed_stirling"]);
            for n in 0..=n_max {
                t.push(vec![
                    n.into(),
                    (n as f64 / 2.0).into(),
                    pc[n].into(),
                    pe[n].into(),
                    ps[n].into(),
                ]);
            }
            let (na, nb) = (src.coherent_mean(), src.squeezed_mean());
            let (vc, vs) = (na, 2.0 * nb * (nb + 1.0));
            let cmp = if vs > vc { "wider" } else { "not wider" };
            notes.push(format!(
                "photon-number variance: coherent {} (mean {}), squeezed {} (mean {}); the squeezed distribution is {cmp}",
                crate::formats::fmt12(vc),
                crate::formats::fmt12(na),
                crate::formats::fmt12(vs),
                crate::formats::fmt12(nb),
            ));
            t
        }
        DistKind::Outcomes => {
            let n_res = cfg.n_res.finite().unwrap_or(n_max);
            let phi = cfg.phi.unwrap_or(FRAC_PI_4);
            let base = build_amplitude_table(&src, cfg.tail_tol)?;
            let amps = if base.cutoff() < n_res {
                AmplitudeTable::for_source(&src, n_res)?
            } else {
                base
            };
            let dist = full_outcome_distribution(&amps, n_res, phi)?;
            let mut t = Table::new(&["N", "N_a", "N_b", "probability"]);
            for o in dist.outcomes() {
                t.push(vec![o.total_n.into(), o.n_a.into(), o.n_b.into(), o.probability.into()]);
            }
            notes.push(format!(
                "overflow probability (N > {n_res}): {}",
                crate::formats::fmt12(dist.overflow())
            ));
            t
        }
    };
    Ok(Output {
        body: emit_table(cfg, &table, json!({})),
        notes,
        ..Output::default()
    })
}

fn per_n_table(report: &FisherReport) -> Table {
    let mut t = Table::new(&["N", "fisher", "gen_prob", "weighted"]);
    for r in &report.per_n {
        t.push(vec![
            r.total_n.into(),
            r.fisher.into(),
            r.gen_prob.into(),
            r.weighted.into(),
        ]);
    }
    t
}

fn cmd_fisher(cfg: &RunConfig) -> Result<Output, CliError> {
    let src = source(cfg)?;
    let amps = build_amplitude_table(&src, cfg.tail_tol)?;
    let mut report = total_fisher_exact(&amps, &src, cfg.n_res)?;
    if let Some(phi) = cfg.phi {
        report = report.with_numeric_check(&amps, phi)?;
    }
    let value = match cfg.engine {
        EngineChoice::Exact => report.total_exact,
        EngineChoice::Ideal => report.total_ideal,
        EngineChoice::Approx => total_fisher_approx(&src, cfg.n_res)?,
    };
    let body = match cfg.format {
        Format::Csv => per_n_table(&report).to_csv(),
        Format::Json => {
            let per_n: Vec<Value> = report
                .per_n
                .iter()
                .map(|r| json!({"N": r.total_n, "fisher": num(r.fisher), "gen_prob": num(r.gen_prob), "weighted": num(r.weighted)}))
                .collect();
            json_text(&json!({
                "engine": engine_name(cfg.engine),
                "value": num(value),
                "n_bar": num(report.n_bar),
                "n_bar_a": num(report.n_bar_a),
                "n_bar_b": num(report.n_bar_b),
                "n_res": threshold_json(report.n_res),
                "cutoff": report.cutoff,
                "total_exact": num(report.total_exact),
                "total_ideal": num(report.total_ideal),
                "total_approx": opt_num(report.total_approx),
                "phi": opt_num(report.phi),
                "total_numeric": opt_num(report.total_numeric),
                "per_n": per_n,
            }))
        }
    };
    Ok(Output {
        body,
        notes: vec![format!(
            "{} total Fisher information: {}",
            engine_name(cfg.engine),
            crate::formats::fmt12(value)
        )],
        ..Output::default()
    })
}

fn scan_options(cfg: &RunConfig) -> ScanOptions {
    ScanOptions {
        grid_step: cfg.grid_step,
        tail_tol: cfg.tail_tol,
        refine: cfg.refine,
    }
}

/// Engine and threshold actually optimized; "ideal" is the infinite threshold.
fn engine_and_threshold(cfg: &RunConfig, n_res: Threshold) -> (Engine, Threshold) {
    match cfg.engine {
        EngineChoice::Ideal => (Engine::Approx, Threshold::Infinite),
        e => (e.engine(), n_res),
    }
}

fn cmd_optimize(cfg: &RunConfig) -> Result<Output, CliError> {
    match cfg.objective {
        Objective::Total => {
            let (engine, n_res) = engine_and_threshold(cfg, cfg.n_res);
            let scan = parallel::optimize_alpha_par(cfg.n_bar, n_res, engine, &scan_options(cfg))?;
            let mut grid = Table::new(&["alpha2", "fq"]);
            for &(a, f) in &scan.grid {
                grid.push(vec![a.into(), f.into()]);
            }
            let body = match cfg.format {
                Format::Csv => grid.to_csv(),
                Format::Json => json_text(&json!({
                    "objective": "total",
                    "engine": engine_name(cfg.engine),
                    "n_bar": num(cfg.n_bar),
                    "n_res": threshold_json(n_res),
                    "alpha2_opt": num(scan.argmax),
                    "alpha2_ratio": num(scan.argmax / cfg.n_bar),
                    "fq_opt": num(scan.max_value),
                    "resolution": num(scan.resolution),
                    "grid": grid.to_json()["rows"].clone(),
                })),
            };
            Ok(Output {
                body,
                notes: vec![format!(
                    "optimum alpha2 = {} (alpha2/n_bar = {}), F = {}",
                    crate::formats::fmt12(scan.argmax),
                    crate::formats::fmt12(scan.argmax / cfg.n_bar),
                    crate::formats::fmt12(scan.max_value)
                )],
                ..Output::default()
            })
        }
        Objective::Joint => {
            let n_max = cfg.n_max.unwrap_or_else(|| default_single_component_n_max(cfg.n_bar));
            let best = parallel::single_component_par(cfg.n_bar, cfg.grid_step, n_max)?;
            let mut t = Table::new(&["n_bar", "n_star", "alpha2_opt", "fq_opt"]);
            t.push(vec![
                best.n_bar.into(),
                best.total_n.into(),
                best.alpha2.into(),
                best.value.into(),
            ]);
            let body = match cfg.format {
                Format::Csv => t.to_csv(),
                Format::Json => json_text(&json!({
                    "objective": "joint",
                    "n_bar": num(best.n_bar),
                    "n_max": n_max,
                    "n_star": best.total_n,
                    "alpha2_opt": num(best.alpha2),
                    "alpha2_ratio": num(best.alpha2 / cfg.n_bar),
                    "fq_opt": num(best.value),
                })),
            };
            Ok(Output {
                body,
                ..Output::default()
            })
        }
    }
}

fn cmd_scan(cfg: &RunConfig) -> Result<Output, CliError> {
    let ns = cfg.n_values();
    let mut notes = Vec::new();
    let (table, extra) = match cfg.objective {
        Objective::Total => {
            let rule = match cfg.engine {
                EngineChoice::Ideal => ThresholdRule::Infinite,
                _ => cfg.n_res_rule,
            };
            let (engine, _) = engine_and_threshold(cfg, Threshold::Infinite);
            let points = parallel::scaling_scan_par(&ns, rule, engine, &scan_options(cfg))?;
            let mut t = Table::new(&["n_bar", "n_res", "alpha2_opt", "fq_opt", "fq_ideal"]);
            for p in &points {
                t.push(vec![
                    p.n_bar.into(),
                    threshold_cell(p.n_res),
                    p.alpha2_opt.into(),
                    p.fq_opt.into(),
                    p.fq_ideal.into(),
                ]);
            }
            let crossing = first_classical_crossing(&points);
            notes.push(match crossing {
                Some(n) => format!("first n_bar with F_opt > n_bar: {}", crate::formats::fmt12(n)),
                None => "F_opt never exceeds n_bar in this scan".to_string(),
            });
            (t, json!({ "classical_crossing": opt_num(crossing) }))
        }
        Objective::Joint => {
            let fixed = cfg.n_max;
            let best = parallel::single_component_scan_par(&ns, cfg.grid_step, |n| {
                fixed.unwrap_or_else(|| default_single_component_n_max(n))
            })?;
            let mut t = Table::new(&["n_bar", "n_star", "alpha2_opt", "fq_opt"]);
            for b in &best {
                t.push(vec![b.n_bar.into(), b.total_n.into(), b.alpha2.into(), b.value.into()]);
            }
            (t, json!({}))
        }
    };
    Ok(Output {
        body: emit_table(cfg, &table, extra),
        notes,
        ..Output::default()
    })
}

/// `(x, y)` pairs from two named columns of a CSV with a header row.
pub fn read_columns(text: &str, x: &str, y: &str) -> Result<Vec<(f64, f64)>, CliError> {
    let bad = |m: String| CliError::BadInput(m);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| bad(format!("unreadable header: {e}")))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| bad(format!("no column `{name}` in header")))
    };
    let (ix, iy) = (col(x)?, col(y)?);
    let mut points = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| bad(format!("row {}: {e}", i + 2)))?;
        let field = |j: usize| -> Result<f64, CliError> {
            let s = rec.get(j).unwrap_or("").trim();
            s.parse()
                .map_err(|_| bad(format!("row {}: `{s}` is not a number", i + 2)))
        };
        points.push((field(ix)?, field(iy)?));
    }
    Ok(points)
}

fn cmd_fit(cfg: &RunConfig) -> Result<Output, CliError> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Usage("--input is required".into()))?;
    let text =
        fs::read_to_string(input).map_err(|e| CliError::BadInput(format!("cannot read {}: {e}", input.display())))?;
    let points = read_columns(&text, &cfg.x_column, &cfg.y_column)?;
    let fit = fit_power_law(&points).map_err(|e| CliError::BadInput(e.to_string()))?;
    let body = match cfg.format {
        Format::Json => json_text(&json!({
            "c": num(fit.prefactor),
            "p": num(fit.exponent),
            "rms": num(fit.residual),
            "n_min": num(fit.n_range.0),
            "n_max": num(fit.n_range.1),
            "points": points.len(),
            "classical_crossing": opt_num(fit.classical_crossing()),
        })),
        Format::Csv => {
            let mut t = Table::new(&["c", "p", "rms", "n_min", "n_max"]);
            t.push(vec![
                fit.prefactor.into(),
                fit.exponent.into(),
                fit.residual.into(),
                fit.n_range.0.into(),
                fit.n_range.1.into(),
            ]);
            t.to_csv()
        }
    };
    Ok(Output {
        body,
        ..Output::default()
    })
}

fn cmd_simulate(cfg: &RunConfig) -> Result<Output, CliError> {
    let seed = cfg
        .seed
        .ok_or_else(|| CliError::Usage("--seed is required for reproducibility".into()))?;
    let phi = cfg.phi.unwrap_or(0.6);
    let mut notes = Vec::new();
    let alpha2 = match cfg.alpha2 {
        Some(a) => a,
        None => {
            let best = parallel::optimize_alpha_par(cfg.n_bar, cfg.n_res, Engine::Exact, &ScanOptions::default())?;
            notes.push(format!(
                "alpha2 set to the optimal split {}",
                crate::formats::fmt12(best.argmax)
            ));
            best.argmax
        }
    };
    let src = LightSource::from_split(cfg.n_bar, alpha2)?;
    let run = parallel::crb_experiment_par(&src, cfg.n_res, phi, cfg.trials, cfg.repetitions, seed, cfg.tail_tol)?;
    let body = match cfg.format {
        Format::Json => json_text(&json!({
            "n_bar": num(cfg.n_bar),
            "alpha2": num(alpha2),
            "true_phi": num(run.true_phi),
            "trials": run.trials,
            "repetitions": run.repetitions,
            "n_res": run.n_res,
            "seed": seed,
            "fisher": num(run.fisher),
            "empirical_variance": num(run.empirical_variance),
            "crb": num(run.crb),
            "ratio": num(run.ratio()),
            "bias": num(run.bias()),
        })),
        Format::Csv => {
            let mut t = Table::new(&[
                "true_phi",
                "trials",
                "repetitions",
                "n_res",
                "fisher",
                "empirical_variance",
                "crb",
                "ratio",
                "bias",
            ]);
            t.push(vec![
                run.true_phi.into(),
                run.trials.into(),
                run.repetitions.into(),
                run.n_res.into(),
                run.fisher.into(),
                run.empirical_variance.into(),
                run.crb.into(),
                run.ratio().into(),
                run.bias().into(),
            ]);
            t.to_csv()
        }
    };
    let mut files = Vec::new();
    if let Some(raw) = &cfg.raw {
        let mut t = Table::new(&["repetition", "estimate"]);
        for (i, e) in run.estimates.iter().enumerate() {
            t.push(vec![i.into(), (*e).into()]);
        }
        files.push((raw.clone(), t.to_csv()));
    }
    notes.push(format!("variance / CRB = {}", crate::formats::fmt12(run.ratio())));
    Ok(Output {
        body,
        notes,
        files,
        ..Output::default()
    })
}

fn cmd_export(cfg: &RunConfig) -> Result<Output, CliError> {
    let src = source(cfg)?;
    let amps = match cfg.cutoff {
        Some(c) => AmplitudeTable::for_source(&src, c)?,
        None => build_amplitude_table(&src, cfg.tail_tol)?,
    };
    let values = match cfg.field {
        Field::Coherent => amps.coherent_table(),
        Field::Squeezed => amps.squeezed_table(),
    };
    let mut t = Table::new(&["index", "log_magnitude", "sign"]);
    for (i, v) in values.iter().enumerate() {
        t.push(vec![i.into(), v.log_magnitude().into(), v.sign().into()]);
    }
    Ok(Output {
        body: emit_table(cfg, &t, json!({ "cutoff": amps.cutoff() })),
        ..Output::default()
    })
}
