//! End-to-end tests of the binary: worked examples, exit codes, artifact
//! atomicity, config-file merging, and byte-identical reruns across
//! parallelism levels.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn episim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_episim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json_of(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn estimate_worked_example() {
    let v = json_of(&episim(&["estimate", "--z", "583", "--n", "1000"]));
    assert!((v["r0"].as_f64().unwrap() - 1.500290).abs() < 1e-6);
    assert!((v["r0_se"].as_f64().unwrap() - 0.089298).abs() < 1e-6);
    assert!((v["vc"].as_f64().unwrap() - 0.333462).abs() < 1e-6);
    assert!((v["vc_se"].as_f64().unwrap() - 0.039673).abs() < 1e-6);
    // Provenance envelope.
    assert_eq!(v["version"].as_str().unwrap(), env!("CARGO_PKG_VERSION"));
    assert!(v["argv"].as_array().unwrap().iter().any(|t| t == "--z"));
    assert!(v["master_seed"].is_null());
}

#[test]
fn asymptotics_worked_example() {
    let v = json_of(&episim(&[
        "asymptotics", "--lambda", "1.5", "--dist", "exp:1", "--m", "1",
    ]));
    assert!((v["r0"].as_f64().unwrap() - 1.5).abs() < 1e-12);
    assert!((v["extinction_probability"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-6);
    assert!((v["final_size_fraction"].as_f64().unwrap() - 0.5828).abs() < 1e-4);
    assert!(v["clt_sd"].is_null(), "no n given, no CLT spread");
}

#[test]
fn missing_required_flag_exits_2_with_usage() {
    let out = episim(&["estimate", "--z", "583"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("Usage"), "stderr was: {err}");
    assert!(err.contains("--n"), "stderr was: {err}");
}

#[test]
fn violated_precondition_exits_1_verbatim() {
    let out = episim(&["simulate", "--n", "1", "--m", "2", "--lambda", "1", "--dist", "exp:1"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("n >= m >= 1"), "stderr was: {err}");
    assert!(out.stdout.is_empty(), "no summary on failure");
}

#[test]
fn bad_duration_spec_exits_2() {
    let out = episim(&["simulate", "--n", "10", "--lambda", "1", "--dist", "weibull:1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duration spec"));
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str, csv: &Path| {
        Command::new(env!("CARGO_BIN_EXE_episim"))
            .args([
                "simulate", "--n", "300", "--lambda", "1.5", "--dist", "gamma:2:2",
                "--reps", "500", "--seed", "42",
            ])
            .arg("--histogram")
            .arg(csv)
            .env("EPISIM_THREADS", threads)
            .output()
            .expect("binary runs")
    };
    let csv1 = dir.path().join("one.csv");
    let csv2 = dir.path().join("two.csv");
    let a = run("1", &csv1);
    let b = run("3", &csv2);
    assert!(a.status.success() && b.status.success());
    // The histogram path differs between the runs, so compare everything
    // except the argv line-by-line.
    let strip = |out: &Output| -> Vec<String> {
        String::from_utf8_lossy(&out.stdout)
            .lines()
            .filter(|l| !l.contains(".csv"))
            .map(str::to_owned)
            .collect()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_eq!(
        std::fs::read(&csv1).unwrap(),
        std::fs::read(&csv2).unwrap(),
        "histograms differ across thread counts"
    );

    // Same invocation again: identical bytes end to end.
    let c = run("1", &csv1);
    assert_eq!(a.stdout, c.stdout);
}

#[test]
fn invalid_thread_cap_exits_2() {
    let out = Command::new(env!("CARGO_BIN_EXE_episim"))
        .args(["estimate", "--z", "583", "--n", "1000"])
        .env("EPISIM_THREADS", "many")
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("EPISIM_THREADS"));
}

#[test]
fn artifacts_are_atomic() {
    // Unwritable target: the run fails without creating anything.
    let out = episim(&[
        "simulate", "--n", "20", "--lambda", "1", "--dist", "exp:1", "--reps", "10",
        "--histogram", "/nonexistent-dir/h.csv",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!Path::new("/nonexistent-dir/h.csv").exists());

    // Writable target: the file appears and no temporary is left behind.
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("h.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_episim"))
        .args(["simulate", "--n", "20", "--lambda", "1", "--dist", "exp:1", "--reps", "10"])
        .arg("--histogram")
        .arg(&csv)
        .output()
        .expect("binary runs");
    assert!(out.status.success());
    assert!(csv.exists());
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .filter(|name| name.to_string_lossy().contains(".tmp."))
        .collect();
    assert!(leftovers.is_empty(), "leftover temporaries: {leftovers:?}");
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"z": 583, "n": 1000}"#).unwrap();

    let out = Command::new(env!("CARGO_BIN_EXE_episim"))
        .args(["estimate", "--config"])
        .arg(&cfg)
        .output()
        .expect("binary runs");
    let v = json_of(&out);
    assert_eq!(v["z"].as_u64().unwrap(), 583);

    let out = Command::new(env!("CARGO_BIN_EXE_episim"))
        .args(["estimate", "--config"])
        .arg(&cfg)
        .args(["--z", "700"])
        .output()
        .expect("binary runs");
    let v = json_of(&out);
    assert_eq!(v["z"].as_u64().unwrap(), 700, "explicit flag beats config");
}

#[test]
fn exact_pmf_csv_is_a_distribution() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pmf.csv");
    let out = Command::new(env!("CARGO_BIN_EXE_episim"))
        .args(["exact-pmf", "--n", "8", "--m", "2", "--lambda", "1.2", "--dist", "gamma:2:2"])
        .arg("--out")
        .arg(&csv)
        .output()
        .expect("binary runs");
    let v = json_of(&out);
    assert!(v["max_residual"].as_f64().unwrap() < 1e-12);

    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("k,probability"));
    let rows: Vec<(u64, f64)> = lines
        .map(|l| {
            let (k, p) = l.split_once(',').unwrap();
            (k.parse().unwrap(), p.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 7, "final sizes 0..=n-m");
    let total: f64 = rows.iter().map(|(_, p)| p).sum();
    assert!((total - 1.0).abs() < 1e-10);
}

#[test]
fn vaccinate_reports_achievability() {
    let v = json_of(&episim(&["vaccinate", "--r0", "1.5", "--v", "0.4"]));
    assert!((v["r_v"].as_f64().unwrap() - 0.9).abs() < 1e-12);
    assert!((v["v_c"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["achievable"], Value::Bool(true));

    let v = json_of(&episim(&[
        "vaccinate", "--r0", "4", "--v", "0.5", "--efficacy", "0.5",
    ]));
    assert!(v["v_c"].is_null());
    assert_eq!(v["achievable"], Value::Bool(false));
    assert!((v["required_coverage"].as_f64().unwrap() - 1.5).abs() < 1e-12);
}

#[test]
fn ode_reaches_the_balance_fraction() {
    let v = json_of(&episim(&["ode", "--lambda", "1.5", "--i0", "0.01"]));
    assert!((v["ultimate_infected_fraction"].as_f64().unwrap() - 0.583).abs() < 2e-3);
}

#[test]
fn multitype_needs_a_scenario_file() {
    let out = episim(&["multitype"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
}

#[test]
fn multitype_scenario_runs_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.json");
    std::fs::write(
        &cfg,
        r#"{
            "fractions": [0.5, 0.5],
            "matrix": [[2.0, 1.0], [1.0, 2.0]],
            "dists": ["exp:1", "exp:1"],
            "seeds": [1, 0],
            "n": 200,
            "reps": 300
        }"#,
    )
    .unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_episim"))
        .args(["multitype", "--config"])
        .arg(&cfg)
        .args(["--seed", "5"])
        .output()
        .expect("binary runs");
    let v = json_of(&out);
    // Symmetric matrix: Perron root is row sum x E(I) x fraction.
    assert!((v["r0"].as_f64().unwrap() - 1.5).abs() < 1e-9);
    assert_eq!(v["is_reducible"], Value::Bool(false));
    assert_eq!(v["simulation"]["replicates"].as_u64().unwrap(), 300);
    assert_eq!(v["master_seed"].as_u64().unwrap(), 5);
}

#[test]
fn households_reports_the_pair_mean() {
    let v = json_of(&episim(&[
        "households", "--size-dist", "0,1", "--lambda-h", "1", "--lambda-g", "1", "--dist", "exp:1",
    ]));
    assert!((v["mu_h"].as_f64().unwrap() - 1.5).abs() < 1e-9);
    assert!((v["r0"].as_f64().unwrap() - 1.5).abs() < 1e-9);
    assert!(v.get("simulation").is_none(), "no simulation without --households");
}

#[test]
fn endemic_reports_equilibrium_and_runs() {
    let v = json_of(&episim(&[
        "endemic", "--n", "10000", "--lambda", "2", "--mu", "0.01",
        "--t-max", "50", "--reps", "10", "--seed", "9",
    ]));
    assert!((v["r0"].as_f64().unwrap() - 200.0 / 101.0).abs() < 1e-12);
    assert_eq!(v["equilibrium"]["counts"]["i"].as_u64().unwrap(), 49);
    assert_eq!(v["replicates"].as_u64().unwrap(), 10);
    let surviving = v["surviving_runs"].as_u64().unwrap();
    assert!(surviving <= 10);
}
