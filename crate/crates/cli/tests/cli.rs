use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mzfisher::commands::read_columns;
use mzfisher::formats::{fmt12, round12};
use proptest::prelude::*;
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mzfisher"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).expect("valid JSON")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn schema(name: &str) -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(name);
    let text = std::fs::read_to_string(&path).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    jsonschema::JSONSchema::compile(&schema).expect("schema compiles")
}

fn assert_valid(schema_name: &str, v: &Value) {
    let s = schema(schema_name);
    let msgs: Vec<String> = match s.validate(v) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{e} at {}", e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "{schema_name}: {msgs:?}");
}

const SUBCOMMANDS: &[&str] = &[
    "dist",
    "fisher",
    "optimize",
    "scan",
    "fit",
    "simulate",
    "export-amplitudes",
];

#[test]
fn help_gives_units_for_every_flag() {
    for sub in SUBCOMMANDS {
        let help = ok(&[sub, "--help"]);
        // one block per option, starting at its `-x`/`--name` line
        let mut blocks: Vec<String> = Vec::new();
        for line in help.lines() {
            let t = line.trim_start();
            if t.starts_with("--") || (t.starts_with('-') && t.chars().nth(1).is_some_and(|c| c.is_alphabetic())) {
                blocks.push(t.to_string());
            } else if let Some(last) = blocks.last_mut() {
                last.push(' ');
                last.push_str(t);
            }
        }
        assert!(blocks.len() > 3, "{sub}: {help}");
        for b in blocks
            .iter()
            .filter(|b| !b.contains("--help") && !b.contains("--version"))
        {
            assert!(
                b.contains('[') || b.contains("Possible values:"),
                "{sub}: no unit or value list in `{b}`"
            );
        }
    }
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["fisher", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["fisher", "--n-bar", "-1"]).status.code(), Some(2));
    assert_eq!(run(&["fisher", "--n-bar", "5", "--alpha2", "6"]).status.code(), Some(2));
    assert_eq!(run(&["fisher", "--n-res", "many"]).status.code(), Some(2));
    let out = run(&["simulate", "--n-bar", "2", "--trials", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
    assert_eq!(run(&["fit"]).status.code(), Some(2));
}

#[test]
fn malformed_fit_input_exits_3() {
    let bad = scratch("bad.csv");
    std::fs::write(&bad, "n_bar,fq_opt\n1,2\n2,oops\n").unwrap();
    assert_eq!(run(&["fit", "--input", bad.to_str().unwrap()]).status.code(), Some(3));
    std::fs::write(&bad, "x,y\n1,2\n").unwrap();
    assert_eq!(run(&["fit", "--input", bad.to_str().unwrap()]).status.code(), Some(3));
    std::fs::write(&bad, "n_bar,fq_opt\n1,1\n2,2\n").unwrap();
    assert_eq!(run(&["fit", "--input", bad.to_str().unwrap()]).status.code(), Some(3));
    let missing = scratch("does-not-exist.csv");
    assert_eq!(
        run(&["fit", "--input", missing.to_str().unwrap()]).status.code(),
        Some(3)
    );
}

#[test]
fn overflow_only_simulation_exits_4() {
    // with N_res = 0 every event is vacuum or overflow
    let out = run(&[
        "simulate",
        "--n-bar",
        "10",
        "--alpha2",
        "6",
        "--n-res",
        "0",
        "--seed",
        "1",
        "--trials",
        "200",
        "--repetitions",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("DegenerateLikelihood"));
}

#[test]
fn outputs_are_deterministic() {
    let sim = [
        "simulate",
        "--n-bar",
        "6",
        "--alpha2",
        "4",
        "--n-res",
        "12",
        "--seed",
        "42",
        "--trials",
        "500",
        "--repetitions",
        "8",
    ];
    assert_eq!(ok(&sim), ok(&sim));
    let fisher = [
        "fisher", "--n-bar", "10", "--alpha2", "6", "--n-res", "20", "--phi", "0.6",
    ];
    assert_eq!(ok(&fisher), ok(&fisher));
    let scan = ["scan", "--n-from", "1", "--n-to", "12", "--n-count", "6"];
    assert_eq!(ok(&scan), ok(&scan));
}

#[test]
fn thread_count_does_not_change_results() {
    for args in [
        vec!["optimize", "--n-bar", "12", "--n-res", "24"],
        vec!["optimize", "--n-bar", "8", "--objective", "joint"],
        vec![
            "scan",
            "--n-from",
            "2",
            "--n-to",
            "30",
            "--n-count",
            "8",
            "--n-res-rule",
            "2",
        ],
        vec![
            "simulate",
            "--n-bar",
            "6",
            "--alpha2",
            "4",
            "--n-res",
            "12",
            "--seed",
            "3",
            "--trials",
            "400",
            "--repetitions",
            "6",
        ],
    ] {
        let mut one = vec!["--threads", "1"];
        one.extend(&args);
        let mut four = vec!["--threads", "4"];
        four.extend(&args);
        assert_eq!(ok(&one), ok(&four), "{args:?}");
    }
}

#[test]
fn json_outputs_match_schemas() {
    let fisher = json(&[
        "fisher", "--n-bar", "10", "--alpha2", "6", "--n-res", "20", "--phi", "0.6",
    ]);
    assert_valid("fisher.schema.json", &fisher);
    assert_valid(
        "fisher.schema.json",
        &json(&["fisher", "--n-bar", "4", "--engine", "ideal"]),
    );
    assert_valid(
        "optimize.schema.json",
        &json(&["optimize", "--n-bar", "10", "--n-res", "20"]),
    );
    assert_valid(
        "optimize.schema.json",
        &json(&["optimize", "--n-bar", "8", "--objective", "joint"]),
    );
    let sim = json(&[
        "simulate",
        "--n-bar",
        "6",
        "--alpha2",
        "4",
        "--n-res",
        "12",
        "--seed",
        "1",
        "--trials",
        "300",
        "--repetitions",
        "5",
    ]);
    assert_valid("simulate.schema.json", &sim);
    for args in [
        vec!["dist", "--format", "json"],
        vec!["dist", "--kind", "outcomes", "--n-res", "6", "--format", "json"],
        vec![
            "scan",
            "--n-from",
            "1",
            "--n-to",
            "10",
            "--n-count",
            "4",
            "--format",
            "json",
        ],
        vec!["export-amplitudes", "--n-bar", "3", "--format", "json"],
    ] {
        assert_valid("table.schema.json", &json(&args));
    }

    let scan = scratch("schema-scan.csv");
    std::fs::write(&scan, ok(&["scan", "--n-from", "1", "--n-to", "20", "--n-count", "8"])).unwrap();
    assert_valid("fit.schema.json", &json(&["fit", "--input", scan.to_str().unwrap()]));
}

#[test]
fn schemas_reject_malformed_reports() {
    let mut fisher = json(&["fisher", "--n-bar", "3", "--n-res", "4"]);
    fisher["n_res"] = Value::String("infinite".into());
    assert!(!schema("fisher.schema.json").is_valid(&fisher));
    let fit = serde_json::json!({"c": 1.0, "p": 1.0});
    assert!(!schema("fit.schema.json").is_valid(&fit));
}

#[test]
fn infinite_threshold_is_spelled_inf() {
    let v = json(&["fisher", "--n-bar", "10", "--alpha2", "6", "--n-res", "inf"]);
    assert_eq!(v["n_res"], "inf");
    let exact = v["total_exact"].as_f64().unwrap();
    let ideal = v["total_ideal"].as_f64().unwrap();
    assert!((exact / ideal - 1.0).abs() < 1e-8, "{exact} vs {ideal}");
    let csv = ok(&[
        "scan",
        "--n-from",
        "1",
        "--n-to",
        "3",
        "--n-count",
        "3",
        "--n-res-rule",
        "inf",
    ]);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(1) == Some("inf")), "{csv}");
}

#[test]
fn config_file_sits_under_flags() {
    let cfg = scratch("run.conf");
    std::fs::write(&cfg, "# shared settings\nn-bar = 12\nalpha2 = 3\nn_res = 30\n").unwrap();
    let c = cfg.to_str().unwrap();
    let from_file = json(&["fisher", "--config", c]);
    assert_eq!(from_file["n_bar"], 12.0);
    assert_eq!(from_file["n_bar_a"], 3.0);
    assert_eq!(from_file["n_res"], 30);
    let overridden = json(&["fisher", "--config", c, "--alpha2", "4"]);
    assert_eq!(overridden["n_bar"], 12.0);
    assert_eq!(overridden["n_bar_a"], 4.0);

    std::fs::write(&cfg, "n_bar = 12\nwhatever = 1\n").unwrap();
    assert_eq!(run(&["fisher", "--config", c]).status.code(), Some(2));
}

#[test]
fn output_flag_writes_file() {
    let out = scratch("fisher.json");
    let _ = std::fs::remove_file(&out);
    let stdout = ok(&["fisher", "--n-bar", "5", "-o", out.to_str().unwrap()]);
    assert!(stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["n_bar"], 5.0);

    let raw = scratch("raw.csv");
    ok(&[
        "simulate",
        "--n-bar",
        "6",
        "--alpha2",
        "4",
        "--n-res",
        "12",
        "--seed",
        "9",
        "--trials",
        "300",
        "--repetitions",
        "4",
        "--raw",
        raw.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&raw).unwrap();
    assert_eq!(text.lines().next(), Some("repetition,estimate"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn dist_reproduces_number_distributions() {
    let csv = ok(&["dist"]);
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("n,k,p_coherent,p_squeezed_exact,p_squeezed_stirling")
    );
    assert_eq!(lines.count(), 41);
    let vacuum = ok(&["dist", "--n-bar", "5", "--alpha2", "0", "--n-max", "3"]);
    assert!(vacuum.lines().nth(1).unwrap().starts_with("0,0,1,"), "{vacuum}");

    // the stirling column follows sech ξ tanh^{2k} ξ / √(πk), here sinh² ξ = 5
    let xi = 5f64.sqrt().asinh();
    for line in csv.lines().skip(3).step_by(2) {
        let f: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let k = f[1];
        let want = xi.tanh().powf(2.0 * k) / xi.cosh() / (std::f64::consts::PI * k).sqrt();
        assert!((f[4] / want - 1.0).abs() < 1e-11, "{line}");
    }
    let notes = String::from_utf8(run(&["dist"]).stderr).unwrap();
    assert!(notes.contains("squeezed distribution is wider"), "{notes}");
}

#[test]
fn outcome_table_is_complete() {
    let out = run(&[
        "dist", "--kind", "outcomes", "--n-bar", "2", "--alpha2", "1", "--n-res", "30", "--phi", "0.3",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("N,N_a,N_b,probability\n"));
    let total: f64 = text
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    let stderr = String::from_utf8(out.stderr).unwrap();
    let overflow: f64 = stderr.trim().rsplit(' ').next().unwrap().parse().unwrap();
    assert!((total + overflow - 1.0).abs() < 1e-9, "{total} + {overflow}");
    assert_eq!(text.lines().count(), 1 + 31 * 32 / 2);
}

#[test]
fn fit_recovers_exact_power_law() {
    let path = scratch("power.csv");
    let mut text = String::from("n_bar,fq_opt\n");
    for i in 1..=12 {
        let n = 1.5 * i as f64;
        text.push_str(&format!("{},{}\n", fmt12(n), fmt12(0.52 * n.powf(1.08))));
    }
    std::fs::write(&path, text).unwrap();
    let v = json(&["fit", "--input", path.to_str().unwrap()]);
    assert!((v["c"].as_f64().unwrap() - 0.52).abs() < 1e-9);
    assert!((v["p"].as_f64().unwrap() - 1.08).abs() < 1e-9);
    assert!(v["rms"].as_f64().unwrap() < 1e-10);
    let crossing = v["classical_crossing"].as_f64().unwrap();
    assert!((0.52 * crossing.powf(1.08) / crossing - 1.0).abs() < 1e-9);
}

#[test]
fn scan_reports_classical_crossing() {
    let out = run(&["scan", "--n-from", "1", "--n-to", "20", "--n-count", "20"]);
    assert!(out.status.success());
    let notes = String::from_utf8(out.stderr).unwrap();
    assert!(notes.contains("first n_bar with F_opt > n_bar"), "{notes}");
    let v = json(&[
        "scan",
        "--n-from",
        "1",
        "--n-to",
        "20",
        "--n-count",
        "20",
        "--format",
        "json",
    ]);
    let crossing = v["classical_crossing"].as_f64().unwrap();
    for row in v["rows"].as_array().unwrap() {
        let (n, f) = (row["n_bar"].as_f64().unwrap(), row["fq_opt"].as_f64().unwrap());
        assert_eq!(f > n, n >= crossing, "{row}");
    }
}

#[test]
fn amplitude_export_matches_core() {
    let csv = ok(&[
        "export-amplitudes",
        "--n-bar",
        "4",
        "--alpha2",
        "2",
        "--field",
        "coherent",
        "--cutoff",
        "10",
    ]);
    assert!(csv.starts_with("index,log_magnitude,sign\n"));
    let rows: Vec<Vec<f64>> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    // Poisson amplitude: ln c_n = -α²/2 + n ln α - ln n!/2
    let mut log_fact = 0.0;
    for (n, r) in rows.iter().enumerate() {
        if n > 0 {
            log_fact += (n as f64).ln();
        }
        let want = -1.0 + n as f64 * 0.5 * 2f64.ln() - 0.5 * log_fact;
        assert!((r[1] - want).abs() < 1e-11, "n = {n}");
        assert_eq!(r[2], 1.0);
    }
}

#[test]
fn parallel_drivers_match_sequential() {
    use mzfisher::parallel;
    use mzfisher_core::fisher::Threshold;
    use mzfisher_core::optimize::{
        optimize_alpha, optimize_single_component, scaling_scan, Engine, ScanOptions, ThresholdRule,
    };
    use mzfisher_core::simulate::crb_experiment;

    let opts = ScanOptions::default();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    pool.install(|| {
        let n_res = Threshold::Finite(15);
        assert_eq!(
            parallel::optimize_alpha_par(9.0, n_res, Engine::Exact, &opts).unwrap(),
            optimize_alpha(9.0, n_res, Engine::Exact, &opts).unwrap()
        );
        let ns = [2.0, 5.0, 11.0];
        let rule = ThresholdRule::Multiple(1.0);
        assert_eq!(
            parallel::scaling_scan_par(&ns, rule, Engine::Approx, &opts).unwrap(),
            scaling_scan(&ns, rule, Engine::Approx, &opts).unwrap()
        );
        assert_eq!(
            parallel::single_component_par(5.0, 0.02, 30).unwrap(),
            optimize_single_component(5.0, 0.02, 30).unwrap()
        );
        let src = mzfisher_core::LightSource::from_split(6.0, 4.0).unwrap();
        assert_eq!(
            parallel::crb_experiment_par(&src, Threshold::Finite(12), 0.6, 300, 6, 5, 1e-12).unwrap(),
            crb_experiment(&src, Threshold::Finite(12), 0.6, 300, 6, 5, 1e-12).unwrap()
        );
    });
}

proptest! {
    #[test]
    fn rounding_is_idempotent_and_tight(x in prop::num::f64::NORMAL) {
        let r = round12(x);
        prop_assert_eq!(round12(r), r);
        prop_assert!(((r - x) / x).abs() <= 5e-12);
        let text = fmt12(x);
        prop_assert_eq!(text.parse::<f64>().unwrap(), r);
    }

    #[test]
    fn csv_columns_round_trip(points in prop::collection::vec((1e-3f64..1e6, 1e-3f64..1e6), 1..20)) {
        let mut text = String::from("extra,n_bar,fq_opt\n");
        for (x, y) in &points {
            text.push_str(&format!("a,{x},{y}\n"));
        }
        prop_assert_eq!(read_columns(&text, "n_bar", "fq_opt").unwrap(), points);
    }
}
