use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mvlp_core::mps::read_mps_str;
use mvlp_core::solve::write_solution_file;
use mvlp_core::{build_lp, load_scenario, solve, Tolerances};
use serde_json::Value;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn mvlp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvlp"))
        .args(args)
        .env_remove("MVLP_OUT_DIR")
        .output()
        .expect("run mvlp")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_bundled_examples() {
    for name in ["fig1_no_policy.json", "desk_week.json"] {
        let out = mvlp(&["validate", s(&example(name))]);
        assert_eq!(code(&out), 0, "{name}: {}", stderr(&out));
    }
}

#[test]
fn solve_fig1_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvlp(&["solve", s(&example("fig1_no_policy.json")), "--out", s(dir.path()), "--emit-lp"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let metrics = read_json(&dir.path().join("fig1_no_policy.metrics.json"));
    let solar = metrics["technologies"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["name"] == "solar")
        .unwrap();
    let (mv, lcoe) = (solar["market_value"].as_f64().unwrap(), solar["lcoe"].as_f64().unwrap());
    assert!((mv - lcoe).abs() <= 1e-6 * lcoe, "{mv} vs {lcoe}");

    let verification = read_json(&dir.path().join("fig1_no_policy.verification.json"));
    assert_eq!(verification["verdict"], "pass");
    let solution = read_json(&dir.path().join("fig1_no_policy.solution.json"));
    assert_eq!(solution["status"], "optimal");
    let csv = fs::read_to_string(dir.path().join("fig1_no_policy.metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);

    let mps = fs::read_to_string(dir.path().join("fig1_no_policy.mps")).unwrap();
    let lp = read_mps_str(&mps).unwrap();
    let sc = load_scenario(&example("fig1_no_policy.json")).unwrap();
    let built = build_lp(&sc.system, &sc.policy, sc.options.formulation()).unwrap();
    assert_eq!(lp.num_rows(), built.num_rows());
    assert_eq!(lp.num_columns(), built.num_columns());
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mvlp"))
        .args(["solve", s(&example("fig1_no_policy.json"))])
        .env("MVLP_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(dir.path().join("fig1_no_policy.metrics.json").exists());
}

#[test]
fn malformed_json_reports_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\n  \"nodes\": [\"DE\"],\n  \"snapshots\": ,\n}\n").unwrap();
    let out = mvlp(&["solve", s(&path), "--out", s(dir.path())]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn schema_errors_are_listed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"nodes": ["DE"], "snapshots": 2, "demand": {"DE": [1, 2, 3]},
            "technologies": [{"node": "DE", "default": "gas turbine"}]}"#,
    )
    .unwrap();
    let out = mvlp(&["validate", s(&path)]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("demand.DE") && err.contains("gas turbine"), "{err}");
    assert!(err.contains("OCGT") && err.contains("nuclear"), "{err}");
}

#[test]
fn infeasible_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tight.json");
    fs::write(
        &path,
        r#"{"nodes": ["DE"], "snapshots": 2, "voll": null, "demand": {"DE": [10, 10]},
            "technologies": [{"node": "DE", "default": "CCGT", "max_potential": 5}]}"#,
    )
    .unwrap();
    let out = mvlp(&["solve", s(&path), "--out", s(dir.path())]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let out = mvlp(&["verify", s(&path)]);
    assert_eq!(code(&out), 3);
}

#[test]
fn external_solution_is_verified() {
    let dir = tempfile::tempdir().unwrap();
    let sc = load_scenario(&example("fig1_no_policy.json")).unwrap();
    let lp = build_lp(&sc.system, &sc.policy, sc.options.formulation()).unwrap();
    let mut sol = solve(&lp, &Tolerances::default()).unwrap();

    let good = dir.path().join("good.sol");
    write_solution_file(&lp, &sol, fs::File::create(&good).unwrap()).unwrap();
    let out = mvlp(&["solve", s(&example("fig1_no_policy.json")), "--out", s(dir.path()), "--external-solution", s(&good)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    // a shifted price breaks stationarity
    sol.dual[0] += 5.0;
    let bad = dir.path().join("bad.sol");
    write_solution_file(&lp, &sol, fs::File::create(&bad).unwrap()).unwrap();
    let out = mvlp(&["solve", s(&example("fig1_no_policy.json")), "--out", s(dir.path()), "--external-solution", s(&bad)]);
    assert_eq!(code(&out), 2, "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn emit_lp_to_stdout() {
    let out = mvlp(&["emit-lp", s(&example("fig1_no_policy.json"))]);
    assert_eq!(code(&out), 0);
    let lp = read_mps_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(lp.num_rows() > 48);
}

fn column(csv: &str, name: &str) -> Vec<Option<f64>> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let i = header.iter().position(|h| *h == name).unwrap_or_else(|| panic!("no column {name}"));
    lines.map(|l| l.split(',').nth(i).unwrap().parse().ok()).collect()
}

#[test]
fn support_sweep_is_deterministic_and_declining() {
    let plan = example("support_sweep.json");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out = mvlp(&["sweep", s(&plan), "--out", s(a.path()), "--jobs", "1"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = mvlp(&["sweep", s(&plan), "--out", s(b.path()), "--jobs", "3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv_a = fs::read_to_string(a.path().join("support_sweep.csv")).unwrap();
    let csv_b = fs::read_to_string(b.path().join("support_sweep.csv")).unwrap();
    assert_eq!(csv_a, csv_b);

    for tech in ["wind@DE", "solar@DE"] {
        let mv: Vec<f64> = column(&csv_a, &format!("mv[{tech}]")).into_iter().flatten().collect();
        assert!(mv.len() >= 2);
        assert!(mv.windows(2).all(|w| w[1] <= w[0] + 1e-6 * w[0].abs().max(1.0)), "{tech}: {mv:?}");
    }
    let mu: Vec<f64> = column(&csv_a, "support_price").into_iter().flatten().collect();
    assert!(mu.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{mu:?}");

    let manifest = read_json(&a.path().join("support_sweep.manifest.json"));
    let hash = manifest["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert_eq!(manifest, read_json(&b.path().join("support_sweep.manifest.json")));
    let points = manifest["points"].as_array().unwrap();
    assert_eq!(points.len(), 8);
    assert!(points.iter().all(|p| p["verdict"] == "pass"));
}

#[test]
fn co2_sweep_with_flexibility_prices_vre_at_cost() {
    let dir = tempfile::tempdir().unwrap();
    let out = mvlp(&["sweep", s(&example("co2_sweep_flex.json")), "--out", s(dir.path())]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = fs::read_to_string(dir.path().join("co2_sweep_flex.csv")).unwrap();
    let status = column(&csv, "status");
    assert_eq!(status.len(), 7);
    for tech in ["wind@DE", "solar@DE"] {
        let mv = column(&csv, &format!("mv[{tech}]"));
        let lcoe = column(&csv, &format!("lcoe[{tech}]"));
        let mut checked = 0;
        for (m, l) in mv.iter().zip(&lcoe) {
            if let (Some(m), Some(l)) = (m, l) {
                assert!((m - l).abs() <= 1e-6 * l.abs().max(1.0), "{tech}: {m} vs {l}");
                checked += 1;
            }
        }
        assert!(checked > 0, "{tech} never built");
    }
    let cost: Vec<f64> = column(&csv, "system_cost").into_iter().flatten().collect();
    assert!(cost.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9)), "{cost:?}");
}
