use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn bmv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmv"))
        .args(args)
        .current_dir(fixtures())
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    dir
}

/// Exactly one stderr line, of the form `error[kind]: message`.
fn diagnostic(out: &Output) -> (String, String) {
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {err}");
    let rest = lines[0].strip_prefix("error[").expect("prefix");
    let (kind, msg) = rest.split_once("]: ").expect("kind delimiter");
    (kind.to_string(), msg.to_string())
}

#[test]
fn error_paths_exit_two_with_one_line() {
    let cases: &[(&[&str], &str)] = &[
        (&["metric"], "config"),
        (&["metric", "start.measure", "absent.measure"], "io"),
        (&["metric", "--config", "unknown_key.metric"], "config"),
        (&["metric", "start.measure", "other.measure", "--lambda", "5"], "config"),
        (&["simulate", "--bogus"], "usage"),
        (&["frobnicate"], "usage"),
        (&["suite", "nonexistent"], "suite"),
        (&["check", "--suite", "all"], "suite"),
        (&["simulate", "--model", "minimal.model", "--config", "minimal.run", "--dt", "0"], "config"),
        (&["simulate", "--model", "minimal.run"], "config"),
        (&["simulate", "--model", "bad_pmf.model", "--config", "minimal.run"], "bound"),
    ];
    for (args, kind) in cases {
        let out = bmv(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
        let (got, msg) = diagnostic(&out);
        assert_eq!(&got, kind, "{args:?}: {msg}");
    }
}

#[test]
fn empty_metric_config_lists_required_keys() {
    let (_, msg) = diagnostic(&bmv(&["metric"]));
    assert!(msg.contains("metric.a") && msg.contains("metric.b"), "{msg}");
}

#[test]
fn unknown_key_reports_its_line() {
    let (_, msg) = diagnostic(&bmv(&["metric", "--config", "unknown_key.metric"]));
    assert!(msg.contains("line 3") && msg.contains("metric.bogus"), "{msg}");
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(bmv(&["--help"]).status.code(), Some(0));
    assert_eq!(bmv(&["--version"]).status.code(), Some(0));
}

#[test]
fn minimal_simulate_manifest_matches_golden() {
    let dir = scratch("golden_simulate");
    let out = bmv(&["simulate", "--model", "minimal.model", "--config", "minimal.run", "--out-dir", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let got = std::fs::read_to_string(dir.join("manifest.json")).unwrap();
    let want = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/simulate_minimal_manifest.json"))
        .unwrap();
    assert_eq!(got, want);
}

#[test]
fn manifest_rerun_is_bitwise_identical() {
    let args = |d: &Path| {
        vec![
            "--seed".to_string(),
            "11".into(),
            "simulate".into(),
            "--model".into(),
            "minimal.model".into(),
            "--config".into(),
            "minimal.run".into(),
            "--stride".into(),
            "2".into(),
            "--replicas".into(),
            "50".into(),
            "--out-dir".into(),
            d.display().to_string(),
        ]
    };
    let (a, b) = (scratch("rerun_a"), scratch("rerun_b"));
    for d in [&a, &b] {
        let v = args(d);
        let out = bmv(&v.iter().map(String::as_str).collect::<Vec<_>>());
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["manifest.json", "report.json", "moments.csv", "positions.csv", "events.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let run = |threads: &str| {
        bmv(&["--threads", threads, "--seed", "5", "simulate", "--model", "minimal.model", "--config", "minimal.run"]).stdout
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn flags_override_file_lines() {
    let out = bmv(&["simulate", "--model", "minimal.model", "--config", "minimal.run", "--T", "0.05", "--replicas", "10"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let cfg = &v["manifest"]["config"];
    assert_eq!(cfg["run.t_end"]["value"], 0.05);
    assert_eq!(cfg["run.t_end"]["source"], "flag");
    assert_eq!(cfg["run.replicas"]["value"], 10);
    assert_eq!(v["result"]["t_end"], 0.05);
}

#[test]
fn metric_record_fields() {
    let out = bmv(&["metric", "start.measure", "other.measure", "--lambda-auto", "--constant"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = &v["result"];
    for k in ["value", "scheme", "tail_bound", "constant_C"] {
        assert!(!r[k].is_null(), "{k}");
    }
    // delta_0 against 2 delta_0.5 + 0.5 delta_-1: closed form computed independently
    let kernel = |r: f64| (15.0 + 15.0 * r + 6.0 * r * r + r * r * r) * (-r).exp() / 96.0;
    let atoms = [(0.0, 1.0), (0.5, -2.0), (-1.0, -0.5)];
    let mut e = 0.0;
    for (x, a) in atoms {
        for (y, b) in atoms {
            e += a * b * kernel((x - y as f64).abs());
        }
    }
    assert!((r["value"].as_f64().unwrap() - e.sqrt()).abs() < 1e-12);

    let grid = bmv(&["metric", "start.measure", "other.measure", "--quadrature", "grid", "--nodes", "20001"]);
    let g: serde_json::Value = serde_json::from_slice(&grid.stdout).unwrap();
    assert!((g["result"]["value"].as_f64().unwrap() - e.sqrt()).abs() < 1e-8);
}

#[test]
fn csv_format_prints_first_table() {
    let out = bmv(&["--format", "csv", "simulate", "--model", "minimal.model", "--config", "minimal.run", "--replicas", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("time,mass,first_moment_1\n"), "{text}");
    assert_eq!(text.lines().count(), 1 + 11);

    let metric = bmv(&["--format", "csv", "metric", "start.measure", "other.measure"]);
    assert_eq!(metric.status.code(), Some(2));
}

#[test]
fn check_battery_reports_budgets() {
    let out = bmv(&["check", "--suite", "aux"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = v["result"]["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 1);
    assert_eq!(checks[0]["passed"], true);
    assert!(checks[0]["budget"]["threshold_tolerance"].is_number());
}
