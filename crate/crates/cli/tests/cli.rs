use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cqlqg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cqlqg")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Template written to `dir/scenario.json` with `sets` applied.
fn template(dir: &Path, sets: &[&str]) -> PathBuf {
    let mut args = vec!["validate", "--emit-template"];
    for s in sets {
        args.extend(["--set", s]);
    }
    let out = cqlqg(&args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let path = dir.join("scenario.json");
    fs::write(&path, &out.stdout).unwrap();
    path
}

fn run(command: &str, scenario: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![command, "--scenario", scenario.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend(extra);
    cqlqg(&args)
}

fn summary(dir: &Path) -> Vec<String> {
    let text = fs::read_to_string(dir.join("summary.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("cost,iterations,converged"));
    lines.next().unwrap().split(',').map(String::from).collect()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn template_reparses_losslessly() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &[]);
    let first: Value = json(&path);
    assert_eq!(first["schema"], "cqlqg.scenario/v1");
    let out = run("validate", &path, &tmp.path().join("v"), &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let again = cqlqg(&["validate", "--emit-template"]);
    assert_eq!(again.stdout, fs::read(&path).unwrap());
}

#[test]
fn validate_reports_small_residuals() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &[]);
    let out_dir = tmp.path().join("out");
    let out = run("validate", &path, &out_dir, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = json(&out_dir.join("validate.json"));
    assert_eq!(report["schema"], "cqlqg.report/v1");
    assert_eq!(report["pass"], true);
    assert!(report["plant_pr"]["max_res1"].as_f64().unwrap() < 1e-12);
    assert!(report["plant_pr"]["max_res2"].as_f64().unwrap() < 1e-12);
    assert!(report["initial_covariance_margin"].as_f64().unwrap() >= 0.0);
}

#[test]
fn validate_rejects_non_realizable_plant() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &["plant.a.0.0=5.0"]);
    let out_dir = tmp.path().join("out");
    let out = run("validate", &path, &out_dir, &[]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let report = json(&out_dir.join("validate.json"));
    assert_eq!(report["pass"], false);
    assert_eq!(report["plant_pr"]["failing_nodes"], serde_json::json!([0]));

    let out = run("optimize", &path, &tmp.path().join("opt"), &[]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn optimize_is_deterministic_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &["grid.steps=40"]);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let out = run("optimize", &path, &a, &["--threads", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = run("optimize", &path, &b, &["--threads", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for file in ["trajectory.csv", "gains.csv", "summary.csv", "optimize.json"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }

    let traj = fs::read_to_string(a.join("trajectory.csv")).unwrap();
    let header = traj.lines().next().unwrap();
    assert!(header.starts_with("node,t,p_1_1,p_1_2"));
    assert!(header.ends_with(",cost_to_date"));
    assert_eq!(traj.lines().count(), 42);
    let gains = fs::read_to_string(a.join("gains.csv")).unwrap();
    assert!(gains.lines().next().unwrap().starts_with("node,t,b_1_1,b_2_1"));
    let row = summary(&a);
    assert_eq!(row[2], "true");
}

#[test]
fn zero_weights_give_zero_cost() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &["grid.steps=20"]);
    let mut doc = json(&path);
    for w in ["f", "g"] {
        let m = doc["weights"][w].as_array_mut().unwrap();
        for row in m {
            for x in row.as_array_mut().unwrap() {
                *x = 0.0.into();
            }
        }
    }
    fs::write(&path, doc.to_string()).unwrap();
    let out_dir = tmp.path().join("out");
    let out = run("optimize", &path, &out_dir, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(summary(&out_dir)[0].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn simulate_matches_optimized_cost() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &["grid.steps=30"]);
    let opt = tmp.path().join("opt");
    assert_eq!(code(&run("optimize", &path, &opt, &[])), 0);

    let gains = fs::read_to_string(opt.join("gains.csv")).unwrap();
    let mut doc = json(&path);
    let n = doc["dims"]["n"].as_u64().unwrap() as usize;
    let p2 = doc["dims"]["p2"].as_u64().unwrap() as usize;
    let m2 = doc["dims"]["m2"].as_u64().unwrap() as usize;
    let unstack = |vals: &[f64], cols: usize| -> Vec<Vec<f64>> {
        (0..n).map(|i| (0..cols).map(|j| vals[j * n + i]).collect()).collect()
    };
    let (mut bs, mut es) = (Vec::new(), Vec::new());
    for line in gains.lines().skip(1) {
        let vals: Vec<f64> = line.split(',').skip(2).map(|x| x.parse().unwrap()).collect();
        bs.push(unstack(&vals[..n * m2], m2));
        es.push(unstack(&vals[n * m2..], p2));
    }
    doc["controller"] = serde_json::json!({"b": bs, "e": es});
    fs::write(&path, doc.to_string()).unwrap();

    let sim = tmp.path().join("sim");
    let out = run("simulate", &path, &sim, &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let (c_opt, c_sim): (f64, f64) = (summary(&opt)[0].parse().unwrap(), summary(&sim)[0].parse().unwrap());
    assert!((c_opt - c_sim).abs() <= 1e-12 * c_opt, "{c_opt} vs {c_sim}");
    let row = summary(&sim);
    assert_eq!((row[1].as_str(), row[2].as_str()), ("", ""));
    let report = json(&sim.join("simulate.json"));
    assert!(report["theta_drift"].as_f64().unwrap() < 1e-10);

    let out = run("validate", &path, &tmp.path().join("v"), &[]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(json(&tmp.path().join("v/validate.json"))["controller_pr"]["pass"].as_bool().unwrap());
}

#[test]
fn simulate_requires_controller() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &["grid.steps=10"]);
    let out = run("simulate", &path, &tmp.path().join("o"), &[]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("controller"));
}

#[test]
fn verify_passes_on_template() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &[]);
    let out_dir = tmp.path().join("out");
    let out = run("verify", &path, &out_dir, &[]);
    assert_eq!(code(&out), 0, "{}\n{}", String::from_utf8_lossy(&out.stdout), stderr(&out));
    let report = json(&out_dir.join("verify.json"));
    assert_eq!(report["suite"]["pass"], true);
    assert_eq!(report["solve"]["converged"], true);
}

#[test]
fn not_converged_exits_two() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &["grid.steps=20", "solver.max_iterations=2"]);
    let out_dir = tmp.path().join("out");
    let out = run("optimize", &path, &out_dir, &[]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert_eq!(summary(&out_dir)[1..], ["2", "false"]);
}

#[test]
fn overrides_apply_on_load() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &[]);
    let out_dir = tmp.path().join("out");
    let out = run("optimize", &path, &out_dir, &["--set", "grid.steps=12", "--set", "solver.relaxation=0.6"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let traj = fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 14);
}

#[test]
fn parse_errors_exit_four_with_field_path() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &[]);
    let out = run("optimize", &path, &tmp.path().join("o"), &["--set", "grid.steps=\"many\""]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("grid.steps"), "{}", stderr(&out));

    let out = run("optimize", &path, &tmp.path().join("o"), &["--set", "plant.b.7.0=1"]);
    assert_eq!(code(&out), 4);

    let bad = tmp.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&run("validate", &bad, &tmp.path().join("o"), &[])), 4);

    let missing = tmp.path().join("missing.json");
    let out = run("validate", &missing, &tmp.path().join("o"), &[]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("missing.json"));

    assert_eq!(code(&cqlqg(&["frobnicate", "--scenario", "x", "--out", "y"])), 4);
    assert_eq!(code(&cqlqg(&["optimize"])), 4);
    assert_eq!(code(&cqlqg(&["--help"])), 0);
}

#[test]
fn invalid_solver_settings_exit_three() {
    let tmp = TempDir::new().unwrap();
    let path = template(tmp.path(), &["grid.steps=10", "solver.relaxation=0"]);
    let out = run("optimize", &path, &tmp.path().join("o"), &[]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}
