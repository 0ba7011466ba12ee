use std::path::Path;
use std::process::{Command, Output};

use iptm::sim::mean;

fn iptm(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_iptm"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

#[test]
fn validate_params_accepts_shipped_config() {
    let dir = tempfile::tempdir().unwrap();
    let shipped = concat!(env!("CARGO_MANIFEST_DIR"), "/config/default.json");
    let o = iptm(dir.path(), &["validate-params", "--config", shipped]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn validate_params_lists_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"rules": {"soc_low": 0.9}, "q_heat_fixed": 5000}"#).unwrap();
    let o = iptm(dir.path(), &["validate-params", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("q_heat_fixed"), "{}", stderr(&o));
}

#[test]
fn bogus_formulation_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = iptm(dir.path(), &["solve", "--formulation", "bogus"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("possible values"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unreadable_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = iptm(dir.path(), &["simulate", "--cycle", "missing.csv"]);
    assert_eq!(code(&o), 1);
    let o = iptm(dir.path(), &["simulate", "--config", "missing.json"]);
    assert_eq!(code(&o), 1);
    let o = iptm(dir.path(), &["simulate", "--policy", "missing.policy"]);
    assert_eq!(code(&o), 1);
    std::fs::write(dir.path().join("cfg.json"), "{ not json").unwrap();
    let o = iptm(dir.path(), &["validate-params", "--config", "cfg.json"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn infeasible_problem_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = iptm(
        dir.path(),
        &[
            "solve",
            "--formulation",
            "baseline",
            "--grid-override",
            "modes=off",
            "--grid-override",
            "soc.min=0.55",
        ],
    );
    assert_eq!(code(&o), 2, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn solve_writes_policy_summary_and_trace_then_replays() {
    let dir = tempfile::tempdir().unwrap();
    let o = iptm(dir.path(), &["solve", "--formulation", "thermal", "--out", "run", "--workers", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let run = dir.path().join("run");
    for f in ["thermal.policy", "thermal_summary.json", "thermal_trace.csv"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }

    let (header, rows) = read_csv(&run.join("thermal_trace.csv"));
    assert_eq!(
        header,
        ["t", "v", "p_trac", "mode", "p_bat", "q_heat", "soc", "t_cl", "t_cab", "w_f", "cumulative_fuel_g"]
    );
    assert_eq!(rows.len(), 961);

    let summary: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(run.join("thermal_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["name"], "thermal");
    assert_eq!(summary["dp"]["formulation"], "thermal");
    assert_eq!(summary["violations"], 0);
    let fuel = summary["fuel_g"].as_f64().unwrap();
    let last: f64 = rows.last().unwrap()[10].parse().unwrap();
    assert!((fuel - last).abs() <= 1e-9 * fuel);

    // the saved policy reproduces the solver's rollout
    let o = iptm(dir.path(), &["simulate", "--policy", "run/thermal.policy", "--out", "replay"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, replayed) = read_csv(&dir.path().join("replay/thermal_trace.csv"));
    assert_eq!(replayed, rows);
}

#[test]
fn policy_horizon_must_match_cycle() {
    let dir = tempfile::tempdir().unwrap();
    let cycle = dir.path().join("short.csv");
    let mut csv = String::from("time_s,speed_mps\n");
    for k in 0..=30 {
        csv.push_str(&format!("{k},{}\n", if k < 15 { k as f64 * 0.5 } else { (30 - k) as f64 * 0.5 }));
    }
    std::fs::write(&cycle, csv).unwrap();
    let o = iptm(dir.path(), &["solve", "--formulation", "baseline", "--cycle", "short.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = iptm(dir.path(), &["simulate", "--policy", "out/baseline.policy"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("steps"), "{}", stderr(&o));
}

#[test]
fn rule_simulation_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let o = iptm(dir.path(), &["simulate"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let (_, rows) = read_csv(&dir.path().join("out/rule-based_trace.csv"));
    let soc: Vec<f64> = rows.iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(mean(&soc) > 0.5);

    let o = iptm(dir.path(), &["compare", "--formulation", "baseline", "--formulation", "thermal"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let c: serde_json::Value =
        serde_json::from_reader(std::fs::File::open(dir.path().join("out/comparison.json")).unwrap()).unwrap();
    let names: Vec<&str> = c["strategies"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(names, ["baseline", "thermal", "rule-based"]);
    assert_eq!(c["non_comparable"].as_array().unwrap().len(), 0);
    // thermal (row 1) saves fuel against the rule-based controller (column 2)
    assert!(c["savings_pct"][1][2].as_f64().unwrap() > 1.0);
    assert_eq!(c["dp"].as_array().unwrap().len(), 2);
}
