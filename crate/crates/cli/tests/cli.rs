use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ader(args: &[&str], out_env: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ader"));
    cmd.args(args).env_remove("ADER_OUT_DIR");
    if let Some(dir) = out_env {
        cmd.env("ADER_OUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn golden() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn minimal_config_matches_golden_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = golden().join("minimal.json");
    let o = ader(&["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let trace = "traces/ader-basic__quadratic-tracking__T20__seed7.csv";
    for name in ["summary.csv", "summary.json", trace] {
        let got = std::fs::read(tmp.path().join(name)).unwrap();
        let want = std::fs::read(golden().join("minimal").join(name)).unwrap();
        assert!(got == want, "{name} differs from the golden copy");
    }
    assert_eq!(std::fs::read_dir(tmp.path().join("traces")).unwrap().count(), 1);
    let summary = std::fs::read_to_string(tmp.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(!summary.contains('\r'));
}

#[test]
fn schema_headers_are_fixed() {
    let summary = std::fs::read_to_string(golden().join("minimal/summary.csv")).unwrap();
    assert_eq!(
        summary.lines().next().unwrap(),
        "algorithm,environment,T,seed,comparator,regret,path_length,dynamic_path_length,theorem,bound,slack,ratio,cumulative_loss,grad_queries,value_queries"
    );
    let trace =
        std::fs::read_to_string(golden().join("minimal/traces/ader-basic__quadratic-tracking__T20__seed7.csv")).unwrap();
    assert_eq!(
        trace.lines().next().unwrap(),
        "round,loss,cum_loss,cum_regret_per-round-minimizer,path_length_so_far_per-round-minimizer,grad_queries"
    );
    assert_eq!(trace.lines().count(), 21);
}

#[test]
fn unknown_algorithm_is_a_usage_error_listing_names() {
    let o = ader(&["run", "--algo", "ader-turbo"], None);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    for name in ["ogd-baseline", "ader-basic", "ader-improved", "ader-dynamical"] {
        assert!(e.contains(name), "{e}");
    }
}

#[test]
fn bad_config_reports_line_and_column() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "bad.json",
        "{\n  \"algorithms\": [\"ader-basic\"],\n  \"horizon\": [10]\n}\n",
    );
    let o = ader(&["run", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("bad.json:3:"), "{e}");
    assert!(e.contains("horizon"), "{e}");

    let cfg = write(
        tmp.path(),
        "empty.json",
        "{\n  \"algorithms\": [\"ader-basic\"],\n  \"environments\": [{\"family\": \"linear-adversary\"}],\n  \"horizons\": [10],\n  \"seeds\": []\n}\n",
    );
    let o = ader(&["run", "--config", cfg.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("empty.json:5:3: `seeds` needs at least one entry"), "{}", stderr(&o));
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = golden().join("minimal.json");
    let out = tmp.path().join("o");
    let o = ader(
        &[
            "run", "--config", cfg.to_str().unwrap(), "--algo", "ader-improved", "--t", "15", "--seed", "3", "--dim",
            "4", "--out", out.to_str().unwrap(),
        ],
        None,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..5], &["ader-improved", "quadratic-tracking", "15", "3", "per-round-minimizer"]);
    assert_eq!(row[13], "15");
}

#[test]
fn output_root_defaults_to_environment_variable() {
    let tmp = tempfile::tempdir().unwrap();
    let o = ader(&["run", "--t", "10"], Some(tmp.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(tmp.path().join("summary.csv").is_file());
    // An explicit --out wins over the variable.
    let explicit = tmp.path().join("explicit");
    let o = ader(&["run", "--t", "10", "--out", explicit.to_str().unwrap()], Some(tmp.path()));
    assert!(o.status.success());
    assert!(explicit.join("summary.json").is_file());
}

#[test]
fn non_finite_values_exit_with_runtime_status_naming_the_round() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "huge.json",
        r#"{"algorithms": ["ader-basic"], "environments": [{"family": "quadratic-tracking", "drift": 0.1}],
            "horizons": [10], "seeds": [0], "diameter": 1e300, "loss_range": 1.0}"#,
    );
    let o = ader(&["run", "--config", cfg.to_str().unwrap(), "--out", tmp.path().to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("at round 1"), "{}", stderr(&o));
}

#[test]
fn sweep_needs_two_horizons_and_writes_the_ratio_table() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = ader(&["sweep", "--t", "100", "--out", out], None);
    assert_eq!(o.status.code(), Some(2));

    let o = ader(&["sweep", "--t", "50", "100", "--algo", "ader-basic", "ogd-baseline", "--out", out], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(tmp.path().join("sweep.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "algorithm,environment,comparator,seed,T,P_T,regret,bound,ratio");
    assert_eq!(lines.count(), 4);
    for line in table.lines().skip(1) {
        let f: Vec<f64> = line.split(',').skip(4).map(|x| x.parse().unwrap()).collect();
        let (t, p, regret, ratio) = (f[0], f[1], f[2], f[4]);
        assert!((ratio - regret / (t * (1.0 + p)).sqrt()).abs() <= 1e-12 * ratio.abs().max(1.0));
    }
}

#[test]
fn lower_bound_edge_cases() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = ader(&["lower-bound", "--t", "64", "--seeds", "0", "--out", out], None);
    assert_eq!(o.status.code(), Some(2));
    let o = ader(&["lower-bound", "--t", "64", "--tau", "1000", "--out", out], None);
    assert_eq!(o.status.code(), Some(2));

    let o = ader(&["lower-bound", "--t", "64", "--tau", "0", "--seeds", "4", "--out", out], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(tmp.path().join("lowerbound.csv")).unwrap();
    assert_eq!(table.lines().count(), 6);
    for line in table.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[4].parse::<f64>().unwrap(), 0.0, "realized tau");
        assert_eq!(f[12], "", "ratio to G√(TDτ) is undefined at τ = 0");
        assert!(f[8].parse::<f64>().unwrap() >= 0.0, "slack");
    }
}

#[test]
fn custom_and_dynamical_comparators() {
    let tmp = tempfile::tempdir().unwrap();
    let points: Vec<[f64; 2]> = (0..30).map(|i| [0.01 * i as f64, -0.2]).collect();
    write(tmp.path(), "path.json", &serde_json::to_string(&points).unwrap());
    let cfg = write(
        tmp.path(),
        "dyn.json",
        r#"{
  "algorithms": ["ader-dynamical", "ader-basic"],
  "environments": [{"family": "model-tracking", "model": [{"kind": "rotation", "plane": [0, 1], "angle": 0.3}]}],
  "horizons": [30],
  "seeds": [0],
  "comparators": [{"kind": "follow-dynamics"}, {"kind": "custom", "path": "path.json"}, {"kind": "constant-best"}]
}"#,
    );
    let out = tmp.path().join("out");
    let o = ader(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary = std::fs::read_to_string(out.join("summary.csv")).unwrap();
    let rows: Vec<Vec<&str>> = summary.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    let follow = rows.iter().find(|r| r[0] == "ader-dynamical" && r[4] == "follow-dynamics").unwrap();
    assert_eq!(follow[7].parse::<f64>().unwrap(), 0.0);
    assert_eq!(follow[8], "5");
    assert!(rows.iter().any(|r| r[4] == "custom-path"));

    let missing = write(
        tmp.path(),
        "missing.json",
        r#"{"algorithms": ["ader-basic"], "environments": [{"family": "linear-adversary"}], "horizons": [5],
            "seeds": [0], "comparators": [{"kind": "custom", "path": "nope.json"}]}"#,
    );
    let o = ader(&["run", "--config", missing.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("does not exist"));
}
