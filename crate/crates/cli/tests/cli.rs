use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const DETERMINISTIC: &str = r#"{
  "horizon": 4,
  "costs": {"a": 500, "v": 0, "h": 1},
  "service": {"measure": "alpha", "level": 0.95},
  "shortage": "backorder",
  "demand": [
    {"kind": "grid", "points": [100], "probs": [1]},
    {"kind": "grid", "points": [100], "probs": [1]},
    {"kind": "grid", "points": [100], "probs": [1]},
    {"kind": "grid", "points": [100], "probs": [1]}
  ]
}"#;

const SINGLE_ALPHA: &str = r#"{
  "horizon": 1,
  "costs": {"a": 100, "v": 0, "h": 1},
  "service": {"measure": "alpha", "level": 0.95},
  "shortage": "backorder",
  "demand": [{"kind": "normal", "mean": 100, "stdev": 10}]
}"#;

const TIGHT_FILL: &str = r#"{
  "horizon": 1,
  "costs": {"a": 100, "v": 0, "h": 1},
  "service": {"measure": "beta_cyc", "level": 0.999},
  "shortage": "backorder",
  "demand": [{"kind": "normal", "mean": 100, "stdev": 30}]
}"#;

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stodyn"))
        .args(args)
        .env_remove("STODYN_SOLVER")
        .env_remove("STODYN_TIME_LIMIT")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Value of `key = value` in a key-value block.
fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in:\n{text}"))
        .to_string()
}

fn num(text: &str, key: &str) -> f64 {
    field(text, key).parse().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn solve_deterministic_instance() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "det.json", DETERMINISTIC);
    let o = run(&["solve", "--instance", p(&f), "--direction", "ub", "--segments", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "ub_policy"), "{1: 400}");
    assert!((num(&out, "ub_objective") - 1100.0).abs() < 1e-6);
    assert_eq!(field(&out, "ub_status"), "optimal");
    assert!(!out.contains("lb_status"));
}

#[test]
fn solve_writes_lp_files() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "det.json", DETERMINISTIC);
    let prefix = dir.path().join("model");
    let o = run(&["solve", "--instance", p(&f), "--lp", p(&prefix)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for tag in ["lb", "ub"] {
        let lp = std::fs::read_to_string(dir.path().join(format!("model_{tag}.lp"))).unwrap();
        assert!(lp.contains("delta_1"));
    }
}

#[test]
fn bounds_bracket_exact_cost() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "alpha.json", SINGLE_ALPHA);
    for w in ["2", "7", "11"] {
        let o = run(&["bounds", "--instance", p(&f), "--segments", w]);
        assert!(o.status.success(), "{}", stderr(&o));
        let out = stdout(&o);
        let (lb, ub) = (num(&out, "lb_objective"), num(&out, "ub_objective"));
        let exact = num(&out, "exact_cost");
        assert!(lb <= 116.66 && 116.66 <= ub, "{out}");
        assert!(lb <= exact + 1e-9 && exact <= ub + 1e-9);
        assert!(num(&out, "gap") >= 0.0);
        assert_eq!(field(&out, "evaluated_policy"), "ub");
    }
}

#[test]
fn infeasible_service_exits_two() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "tight.json", TIGHT_FILL);
    let o = run(&["bounds", "--instance", p(&f), "--segments", "2", "--strategy", "uniform"]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert_eq!(field(&stdout(&o), "ub_status"), "infeasible");
}

#[test]
fn evaluate_and_simulate_agree() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "alpha.json", SINGLE_ALPHA);
    let policy = "{1: 116.449}";
    let e = run(&["evaluate", "--instance", p(&f), "--policy", policy]);
    assert!(e.status.success(), "{}", stderr(&e));
    let exact = num(&stdout(&e), "expected_cost");
    assert!((exact - 116.66).abs() < 5e-3);
    let s = run(&["simulate", "--instance", p(&f), "--policy", policy, "--reps", "20000", "--seed", "3"]);
    assert!(s.status.success(), "{}", stderr(&s));
    let out = stdout(&s);
    let (sim, se) = (num(&out, "expected_cost"), num(&out, "expected_cost_se"));
    assert_eq!(field(&out, "replications"), "20000");
    assert!((sim - exact).abs() <= 4.0 * se);
    let csv = run(&["evaluate", "--instance", p(&f), "--policy", policy, "--format", "csv"]);
    let text = stdout(&csv);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("expected_cost,"));
    let json = run(&["evaluate", "--instance", p(&f), "--policy", policy, "--format", "json"]);
    assert!(stdout(&json).contains("\"kind\": \"cost\""));
}

#[test]
fn evaluate_reports_achieved_alpha() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "alpha.json", SINGLE_ALPHA);
    let o = run(&["evaluate", "--instance", p(&f), "--policy", "{1: 100}"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((num(&stdout(&o), "alpha_1") - 0.5).abs() < 1e-12);
    let bad = run(&["evaluate", "--instance", p(&f), "--policy", "{1: -5}"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("policy"), "{}", stderr(&bad));
}

#[test]
fn partition_dump_feeds_back_into_bounds() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "alpha.json", SINGLE_ALPHA);
    let dump = dir.path().join("partition.txt");
    let o = run(&[
        "partition",
        "--segments",
        "3",
        "--population",
        "50",
        "--inputs",
        r#"{"kind":"normal","mean":0,"stdev":1}"#,
        p(&f),
        "--out",
        p(&dump),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&dump).unwrap();
    let masses: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(masses.len(), 3);
    assert!((masses.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    let err = num(&text.replace("# ", ""), "minimax_error");
    let uniform = num(&text.replace("# ", ""), "uniform_error");
    assert!(err <= uniform);
    let b = run(&["bounds", "--instance", p(&f), "--partition", p(&dump)]);
    assert!(b.status.success(), "{}", stderr(&b));
    assert_eq!(field(&stdout(&b), "segments"), "3");
}

#[test]
fn bench_runs_small_study() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bench.json",
        r#"{"testbed": {"patterns": ["STA"], "horizon": 4, "a_levels": [500], "v_levels": [2],
            "levels": [0.9], "cv_levels": [0.2]},
           "segments": [2, 4], "strategies": ["uniform", "normal_table"]}"#,
    );
    let rows = dir.path().join("rows.csv");
    let summary = dir.path().join("summary.csv");
    let o = run(&["bench", "--config", p(&cfg), "--out", p(&rows), "--summary", p(&summary)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&rows).unwrap();
    assert!(text.starts_with(
        "instance_id,pattern,a,v,measure,level,cv,shortage,W,partition_strategy,lb_objective,ub_objective,gap,exact_cost_of_ub_policy,build_ms,solve_ms,status"
    ));
    assert_eq!(text.lines().count(), 5);
    assert_eq!(std::fs::read_to_string(&summary).unwrap().lines().count(), 5);
}

#[test]
fn bench_heterogeneous_demand() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "bench.json",
        r#"{"testbed": {"patterns": ["LCY1"], "horizon": 4, "a_levels": [500], "v_levels": [2],
            "levels": [0.9], "cv_levels": [0.3]},
           "demand": "heterogeneous", "segments": [3]}"#,
    );
    let rows = dir.path().join("rows.csv");
    let o = run(&["bench", "--config", p(&cfg), "--out", p(&rows)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("W,partition_strategy,rows"));
    assert!(std::fs::read_to_string(&rows).unwrap().contains(",optimal"));
}

#[test]
fn bench_with_empty_patterns_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "bench.json", r#"{"testbed": {"patterns": []}}"#);
    let o = run(&["bench", "--config", p(&cfg), "--out", p(&dir.path().join("r.csv"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("configuration error"), "{}", stderr(&o));
}

#[test]
fn malformed_instance_names_the_key() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "bad.json", &SINGLE_ALPHA.replace("\"shortage\"", "\"shortfall\""));
    let o = run(&["bounds", "--instance", p(&f)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("shortfall"), "{}", stderr(&o));
}

#[test]
fn unknown_solver_adapter_is_an_environment_error() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "alpha.json", SINGLE_ALPHA);
    let o = Command::new(env!("CARGO_BIN_EXE_stodyn"))
        .args(["solve", "--instance", p(&f)])
        .env("STODYN_SOLVER", "cplex")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("solver environment error"), "{}", stderr(&o));
}

#[test]
fn microlp_adapter_agrees() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "det.json", DETERMINISTIC);
    let o = Command::new(env!("CARGO_BIN_EXE_stodyn"))
        .args(["solve", "--instance", p(&f), "--direction", "lb"])
        .env("STODYN_SOLVER", "microlp")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((num(&stdout(&o), "lb_objective") - 1100.0).abs() < 1e-6);
}
