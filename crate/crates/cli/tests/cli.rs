use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gimvi-dyn"))
}

struct Run {
    code: i32,
    json: Value,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let Output { status, stdout, stderr } = bin().args(args).output().unwrap();
    let stdout = String::from_utf8(stdout).unwrap();
    Run {
        code: status.code().unwrap(),
        json: serde_json::from_str(&stdout).unwrap_or(Value::Null),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn config(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, body).unwrap();
    path
}

fn with_config(cmd: &str, cfg: &Path, out: &Path, extra: &[&str]) -> Run {
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    run(&args)
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn validate_canonical_instance() {
    let dir = TempDir::new().unwrap();
    let r = run(&["validate", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(r.code, 0);
    assert_eq!(r.json["c"], 0.5);
    assert!((r.json["c1"].as_f64().unwrap() - 1.0 / 18.0).abs() < 1e-15);
    assert!((r.json["delta"].as_f64().unwrap() - 1296.0).abs() < 1e-9);
    assert!(r.json["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn validate_rejects_zero_g() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "zero_g.toml",
        "[instance]\nsource = \"recipe\"\ndim = 2\n\
         [instance.recipe]\nfamily = \"scaled-identity\"\nf_scale = 1.0\ng_scale = 0.0\ngamma = 1.0\n",
    );
    let r = with_config("validate", &cfg, dir.path(), &[]);
    assert_eq!(r.code, 2);
    let failed: Vec<&Value> = r.json["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["pass"] == false)
        .collect();
    assert_eq!(failed[0]["reason"], "zeta nonpositive");
}

#[test]
fn validate_rejects_step_above_root() {
    // c(γ) = γ − γ²/2 on the canonical instance, negative past γ = 2
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "gamma.json",
        r#"{"instance": {"source": "canonical", "gamma": 2.5}}"#,
    );
    let r = with_config("validate", &cfg, dir.path(), &[]);
    assert_eq!(r.code, 2);
    assert_eq!(r.json["c"], -0.625);
    assert!(r.stderr.contains("c ≤ 0"));
}

#[test]
fn solve_discrete_linear_rate() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "d.toml", "mode = \"discrete\"\n[params]\nsource = \"cor43\"\n");
    let r = with_config("solve", &cfg, dir.path(), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["verdict"], "PASS");
    assert!(r.json["max_consistency"].as_f64().unwrap() <= 1e-12);
    let csv = fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(csv.starts_with("k,w0,residual_norm,x,y1,y2,y3\n"));
    assert_eq!(csv.lines().count(), r.json["iterations"].as_u64().unwrap() as usize + 1);
    assert_eq!(read_json(dir.path().join("verdict.json"))["verdict"], "PASS");
}

#[test]
fn solve_double_rate_slope() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "e.toml",
        "mode = \"continuous-3rd\"\n[params]\nsource = \"eps2\"\n",
    );
    let r = with_config("solve", &cfg, dir.path(), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let fit = read_json(dir.path().join("fit.json"));
    assert!(fit["fit"]["slope"].as_f64().unwrap() <= -1.75);
    assert_eq!(fit["verdict"], "PASS");
    assert!(dir.path().join("trajectory.csv").exists());
}

#[test]
fn solve_explicit_infeasible_is_not_applicable() {
    // stable (a₂a₁ > a₀) but outside every certified region
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "x.toml",
        "mode = \"continuous-3rd\"\n[params]\nsource = \"explicit\"\na0 = 0.5\na1 = 1.0\na2 = 1.0\n",
    );
    let r = with_config("solve", &cfg, dir.path(), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["verdict"], "NOT_APPLICABLE");
}

#[test]
fn solve_divergence_exits_three() {
    // a₂a₁ < a₀: the linearized system is unstable
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "u.toml",
        "mode = \"continuous-3rd\"\n[params]\nsource = \"explicit\"\na0 = 5.0\na1 = 0.1\na2 = 0.1\n",
    );
    let r = with_config("solve", &cfg, dir.path(), &[]);
    assert_eq!(r.code, 3);
    assert!(r.stderr.contains("diverged"));
}

#[test]
fn solve_baselines() {
    let dir = TempDir::new().unwrap();
    for (mode, expected) in [("continuous-1st", -1.0), ("continuous-2nd", -1.0)] {
        let cfg = config(&dir, "b.toml", &format!("mode = \"{mode}\"\n"));
        let r = with_config("solve", &cfg, dir.path(), &[]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let slope = r.json["fit"]["slope"].as_f64().unwrap();
        assert!((slope - expected).abs() < 0.1, "{mode}: {slope}");
    }
}

#[test]
fn solve_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "d.toml", "mode = \"discrete\"\n[params]\nsource = \"cor43\"\n");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(with_config("solve", &cfg, &a, &["--seed", "3"]).code, 0);
    assert_eq!(with_config("solve", &cfg, &b, &["--seed", "3"]).code, 0);
    for file in ["history.csv", "fit.json", "verdict.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
}

#[test]
fn compare_orders_default_tunings() {
    let dir = TempDir::new().unwrap();
    let r = run(&["compare", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let slope = |k: &str| r.json["fits"][k]["slope"].as_f64().unwrap();
    let (s1, s2, s3) = (slope("first_order"), slope("second_order"), slope("third_order"));
    assert!(s3 <= s2 && s2 <= s1 + 0.1, "{s1} {s2} {s3}");
    assert_eq!(r.json["ordered"], true);
}

#[test]
fn compare_row_count_follows_flags() {
    let dir = TempDir::new().unwrap();
    let r = run(&[
        "compare",
        "--horizon",
        "5",
        "--dt",
        "0.02",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 251);
    assert_eq!(r.json["rows"], 251);
}

#[test]
fn compare_from_solution_gives_identical_columns() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "s.toml", "init = [0.0]\nhorizon = 2.0\n");
    let r = with_config("compare", &cfg, dir.path(), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert!(cols[1] == cols[2] && cols[2] == cols[3], "{line}");
    }
}

#[test]
fn tune_canonical_instance() {
    let dir = TempDir::new().unwrap();
    let r = run(&["tune", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let regions = r.json["regions"].as_array().unwrap();
    assert_eq!(regions.len(), 5);
    assert!(regions.iter().all(|e| e["pass"] == true));
    let eps = |name: &str| {
        regions.iter().find(|e| e["region"] == name).unwrap()["max_feasible_eps"]
            .as_f64()
            .unwrap()
    };
    assert!(eps("unit-rate") >= 1.0);
    assert!(eps("double-rate") >= 2.0);
}

#[test]
fn audit_canonical_instance() {
    let dir = TempDir::new().unwrap();
    let r = run(&["audit", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.json["passed"], true);
    assert_eq!(read_json(dir.path().join("audit.json")), r.json);
}

#[test]
fn audit_catches_halved_eta() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "h.toml",
        "[instance]\nsource = \"canonical\"\n[instance.constants]\neta = 0.5\n",
    );
    let r = with_config("audit", &cfg, dir.path(), &[]);
    assert_eq!(r.code, 5);
    let check = r.json["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == "constants.lipschitz-F")
        .unwrap();
    assert_eq!(check["passed"], false);
}

#[test]
fn audit_whole_space_prox_is_exact() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("inst.json"),
        r#"{"dim": 2, "M": [[1.0, 0.0], [0.0, 1.0]], "b": [0.5, -0.5],
            "G": [[1.0, 0.0], [0.0, 1.0]], "d": [0.0, 0.0],
            "omega": {"variant": "whole-space"}, "h": {"variant": "zero"}, "gamma": 1.0,
            "constants": {"eta": 1.0, "beta": 1.0, "lambda": 1.0, "zeta": 1.0}}"#,
    )
    .unwrap();
    let cfg = config(&dir, "w.toml", "[instance]\nsource = \"file\"\npath = \"inst.json\"\n");
    let r = with_config("audit", &cfg, dir.path(), &[]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    for check in r.json["checks"].as_array().unwrap() {
        if check["name"].as_str().unwrap().starts_with("prox.") && check["applicable"] == true {
            assert_eq!(check["worst_slack"], 0.0, "{check}");
        }
    }
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["bogus"]).code, 1);
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "bad.toml", "mode = \"discrete\"\n[params]\nsource = \"eps2\"\n");
    assert_eq!(with_config("solve", &cfg, dir.path(), &[]).code, 1);
    assert_eq!(run(&["solve", "--config", "/nonexistent.toml"]).code, 1);
    assert_eq!(run(&["--help"]).code, 0);
}
