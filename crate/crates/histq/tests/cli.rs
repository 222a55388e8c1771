use std::path::PathBuf;
use std::process::{Command, Output};

fn histq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_histq"))
        .args(args)
        .env("HISTQ_NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn example(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn missing_file() {
    let o = histq(&["run", "missing.hqs"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("file not found"), "{}", stderr(&o));
}

#[test]
fn unknown_example_lists_names() {
    let o = histq(&["examples", "nosuch"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("unknown example `nosuch`"), "{err}");
    assert!(err.contains("spin-z") && err.contains("epr-x"), "{err}");
}

#[test]
fn examples_all_passes() {
    let o = histq(&["examples", "all"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("9/9 examples passed"));
    let o = histq(&["examples", "all", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["examples"].as_array().unwrap().len(), 9);
}

#[test]
fn list_examples() {
    let o = histq(&["list-examples"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 9);
}

#[test]
fn trine_json() {
    let o = histq(&["run", &example("trine.hqs"), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let marginals = v["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["query_id"] == "marginals")
        .unwrap();
    assert_eq!(marginals["kind"], "probabilities");
    let p: Vec<f64> = marginals["rows"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["probability"].as_f64().unwrap())
        .collect();
    assert_eq!(p.len(), 3);
    assert!((p[0] - 2.0 / 3.0).abs() < 1e-9);
    assert!((p[1] - 1.0 / 6.0).abs() < 1e-9);
    assert!((p[2] - 1.0 / 6.0).abs() < 1e-9);
    // complex matrices are [re, im] pairs
    let q = &v["results"][0]["elements"][1]["matrix"][0][1];
    assert_eq!(q.as_array().unwrap().len(), 2);
}

#[test]
fn epr_x_conditionals() {
    let o = histq(&["run", &example("epr.hqs"), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let halves = out
        .lines()
        .filter(|l| l.starts_with("x_inferred,") && l.ends_with(",0.5,"))
        .count();
    assert_eq!(halves, 4, "{out}");
}

#[test]
fn machine_output_is_stable() {
    for fmt in ["json", "csv"] {
        let a = histq(&["run", &example("weak.hqs"), "--format", fmt]);
        let b = histq(&["run", &example("weak.hqs"), "--format", fmt]);
        assert_eq!(a.stdout, b.stdout);
        assert!(!stdout(&a).contains("ms"));
    }
}

#[test]
fn parse_failure_exits_1_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.hqs");
    std::fs::write(&path, "space S dim 2;\nket a in S = [1, ;\n").unwrap();
    let o = histq(&["run", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("2:18"), "{}", stderr(&o));
    let o = histq(&["validate", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn query_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("q.hqs");
    std::fs::write(
        &path,
        "space S dim 2;\nket zp in S = [1, 0]; ket zm in S = [0, 1];\n\
         ket xp in S = (zp + zm) / sqrt(2); ket xm in S = (zp - zm) / sqrt(2);\n\
         family H = xp (.) {zp, zm} (.) {xp, xm} (.) {zp, zm};\n\
         query p: probabilities H;\nquery c: consistency H;\n",
    )
    .unwrap();
    let o = histq(&["run", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["results"][0]["status"], "error");
    assert_eq!(v["results"][1]["verdict"], "inconsistent");
}

#[test]
fn output_file_and_tolerance_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let o = histq(&[
        "run",
        &example("spin-z.hqs"),
        "--format",
        "json",
        "--consistency-tol",
        "1e-6",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["results"][0]["tolerance"].as_f64(), Some(1e-6));

    let o = histq(&["run", &example("spin-z.hqs"), "--numeric-tol=-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("positive"));
}

#[test]
fn quiet_suppresses_payload() {
    let o = histq(&["run", &example("spin-z.hqs"), "--quiet"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn validate_all_examples() {
    let files: Vec<String> = std::fs::read_dir(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples"))
        .unwrap()
        .map(|e| e.unwrap().path().display().to_string())
        .filter(|p| p.ends_with(".hqs"))
        .collect();
    let mut args = vec!["validate"];
    args.extend(files.iter().map(String::as_str));
    let o = histq(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), files.len());
}
