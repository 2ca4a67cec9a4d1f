use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const RESTART: &str = r#"
[model]
kind = "restart"

[process]
kind = "renewal"
sizes = "exp(2)"

[marks]
law = "exp(1)"

[run]
iterations = 20000
replications = 2
seed = 7
"#;

fn failsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_failsim")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn run(scenario: &str, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", scenario, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    failsim(&args)
}

fn summary(out: &Path) -> Value {
    serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap()
}

#[test]
fn pareto_marks_rejected_for_universal() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "u.toml",
        "[model]\nkind = \"universal\"\n[process]\nkind = \"renewal\"\nsizes = \"exp(1)\"\n[marks]\nlaw = \"pareto(1,2)\"\n[run]\niterations = 1000\n",
    );
    let out = failsim(&["validate", &sc]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("marks.law"));
}

#[test]
fn override_shrinks_run() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "r.toml", RESTART);
    let out = dir.path().join("out");
    assert!(run(&sc, &out, &["--override", "N=1000"]).status.success());
    let s = summary(&out);
    assert_eq!(s["n_iterations"], 1000);
    let hash = s["scenario_hash"].clone();
    // the hash covers the overridden document
    let out2 = dir.path().join("out2");
    assert!(run(&sc, &out2, &[]).status.success());
    assert_ne!(summary(&out2)["scenario_hash"], hash);
}

#[test]
fn summaries_validate_against_schema() {
    let schema: Value = serde_json::from_slice(&failsim(&["schema"]).stdout).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let scenarios = [
        ("restart", RESTART.to_owned()),
        ("checkpoint", RESTART.replace("\"restart\"", "\"checkpoint\"")),
        ("universal", RESTART.replace("\"restart\"", "\"universal\"").replace("exp(2)", "exp(1)")),
        ("rwalk", RESTART.replace("kind = \"restart\"", "kind = \"rwalk\"\np = 0.25")),
        ("analytic", RESTART.replace("\"restart\"", "\"analytic\"")),
        (
            "mixture",
            "[model]\nkind = \"restart\"\n[process]\nkind = \"mixture\"\nsizes = \"exp(1)\"\np0 = 0.5\n[marks]\nregime0 = \"exp(1)\"\nregime1 = \"exp(0.5)\"\n[run]\niterations = 5000\nreplications = 4\n"
                .to_owned(),
        ),
    ];
    for (name, text) in scenarios {
        let sc = write(dir.path(), &format!("{name}.toml"), &text);
        let out = dir.path().join(name);
        let status = run(&sc, &out, &[]);
        assert!(status.status.success(), "{name}: {}", String::from_utf8_lossy(&status.stderr));
        let s = summary(&out);
        let errors: Vec<String> = validator.iter_errors(&s).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{name}: {errors:?}");
        if name != "analytic" {
            assert!(out.join("efficiency_curve.csv").exists(), "{name}");
        }
    }
}

#[test]
fn traces_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "r.toml", RESTART);
    let out = dir.path().join("out");
    assert!(run(&sc, &out, &["--override", "N=100"]).status.success());
    let trace = fs::read_to_string(out.join("trace_r0.csv")).unwrap();
    assert!(trace.starts_with("n,ideal,failures,actual,state,regime"));
    assert_eq!(trace.lines().count(), 101);
}

#[test]
fn pathology_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let text = RESTART
        .replace("exp(2)", "exp(1)")
        .replace("kind = \"restart\"", "kind = \"restart\"\nsampling = \"exact\"\nattempt_cap = 1");
    let sc = write(dir.path(), "p.toml", &text);
    let out = run(&sc, &dir.path().join("out"), &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn compare_rows() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "r.toml", &RESTART.replace("20000", "200000"));
    let out = failsim(&["compare", &sc, "--json"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    let find = |q: &str| rows.iter().find(|r| r["quantity"].as_str().unwrap().starts_with(q)).unwrap().clone();
    let t = find("E[T^R]");
    assert!((t["analytic"].as_f64().unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(t["flag"], "agree");
    let e = find("e");
    assert!((e["analytic"].as_f64().unwrap() - 0.5).abs() < 1e-6);
    assert_eq!(e["flag"], "agree");

    let sc = write(dir.path(), "inf.toml", &RESTART.replace("exp(2)", "exp(1)"));
    let out = failsim(&["compare", &sc, "--json"]);
    let rows: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    let t = rows.iter().find(|r| r["quantity"].as_str().unwrap().starts_with("E[T^R]")).unwrap();
    assert_eq!(t["classification"], "InfiniteProved");
    assert_eq!(t["flag"], "growing");
}

#[test]
fn bad_override_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "r.toml", RESTART);
    let out = failsim(&["validate", &sc, "--override", "N"]);
    assert_eq!(out.status.code(), Some(2));
}
