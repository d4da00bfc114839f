//! End-to-end runs of the command-line front end on the shipped scenarios.

use std::path::{Path, PathBuf};
use std::process::Command;

use hyperbolic1d::cli::{run, EXIT_CONDITION, EXIT_NONCONVERGENCE, EXIT_PASS, EXIT_USAGE};
use hyperbolic1d::report::load_field_csv;
use serde_json::Value;

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn scenario(name: &str) -> PathBuf {
    root().join("scenarios").join(format!("{name}.json"))
}

fn invoke(cmd: &str, scenario: &Path, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![
        "hyperbolic1d".to_string(),
        cmd.to_string(),
        "--scenario".into(),
        scenario.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    run(args)
}

fn report(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn check_passes_on_coupled_reflection_system() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke("check", &scenario("sys_c"), dir.path(), &[]), EXIT_PASS);
    let r = report(dir.path());
    assert_eq!(r["status"], "pass");
    assert_eq!(r["result"]["iso"]["min_margin"].as_f64().unwrap(), 0.75);
    assert!(dir.path().join("timing.json").exists());
}

#[test]
fn vanishing_speed_fails_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke("check", &scenario("bad_speed"), dir.path(), &[]), EXIT_CONDITION);
    let hyp = &report(dir.path())["result"]["hyperbolicity"];
    assert_eq!(hyp["l1_ok"], false);
    assert!(hyp["l1_witness"]["x"].as_f64().unwrap() < 0.5);
}

#[test]
fn malformed_and_unknown_inputs_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{ \"system\": ").unwrap();
    assert_eq!(invoke("check", &broken, dir.path(), &[]), EXIT_USAGE);
    let text = std::fs::read_to_string(scenario("sys_c")).unwrap().replace("\"m\": 1", "\"m\": 1, \"speeds\": []");
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, text).unwrap();
    assert_eq!(invoke("check", &unknown, dir.path(), &[]), EXIT_USAGE);
    assert_eq!(invoke("check", &scenario("sys_c"), dir.path(), &["--resolution", "12"]), EXIT_USAGE);
    assert_eq!(run(["hyperbolic1d", "check"]), EXIT_USAGE);
    assert_eq!(run(["hyperbolic1d", "explode"]), EXIT_USAGE);
    // a scenario without trace seeds cannot be traced
    assert_eq!(invoke("trace", &scenario("bad_speed"), dir.path(), &[]), EXIT_USAGE);
}

#[test]
fn transport_dump_matches_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke("simulate", &scenario("transport"), dir.path(), &[]), EXIT_PASS);
    let text = std::fs::read_to_string(dir.path().join("field.csv")).unwrap();
    assert!(text.starts_with("x,t,u_1\n"));
    assert!(!text.contains('\r'));
    let u = load_field_csv(&dir.path().join("field.csv"), false).unwrap();
    assert_eq!((u.nx(), u.nt()), (201, 201));
    let mut err: f64 = 0.0;
    for (k, &t) in u.ts().iter().enumerate() {
        for (i, &x) in u.xs().iter().enumerate() {
            err = err.max((u.get(0, i, k) - (t - x).sin()).abs());
        }
    }
    assert!(err <= 1e-6, "{err}");
}

#[test]
fn resolution_override_reaches_the_solver() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke("simulate", &scenario("transport"), dir.path(), &["--resolution", "11x21"]), EXIT_PASS);
    let u = load_field_csv(&dir.path().join("field.csv"), false).unwrap();
    assert_eq!((u.nx(), u.nt()), (11, 21));
}

#[test]
fn trace_emits_xi_omega_table() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke("trace", &scenario("transport"), dir.path(), &[]), EXIT_PASS);
    let text = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("seed,component,xi,omega"));
    // unit speed: ω(ξ) = t − (x − ξ)
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let (x, t) = if cells[0] == "0" { (0.25, 1.5) } else { (0.75, 0.5) };
        let xi: f64 = cells[2].parse().unwrap();
        let omega: f64 = cells[3].parse().unwrap();
        assert!((omega - (t - x + xi)).abs() < 1e-9);
    }
}

#[test]
fn steady_population_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke("population", &scenario("population_steady"), dir.path(), &[]), EXIT_PASS);
    let r = &report(dir.path())["result"];
    assert!(r["solution"]["residual"].as_f64().unwrap() <= 1e-10);
    assert!(r["boundary_mismatch"].as_f64().unwrap() <= 1e-10);
    let values = r["renewal"]["values"].as_array().unwrap();
    assert!(values.iter().all(|v| (v.as_f64().unwrap() - 1.0).abs() <= 1e-10));
}

#[test]
fn singular_fredholm_fixture_has_index_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke("fredholm", &scenario("fredholm_singular"), dir.path(), &["--smax", "4"]), EXIT_PASS);
    let a = &report(dir.path())["result"]["analysis"];
    assert_eq!(a["index"], 0);
    assert_eq!((a["dim_ker"].as_u64(), a["dim_coker"].as_u64()), (Some(1), Some(1)));
    assert_eq!(a["s_max"], 4);
    let table = std::fs::read_to_string(dir.path().join("singular_values.csv")).unwrap();
    assert!(table.starts_with("s,matrix,k,sigma\n"));
}

#[test]
fn forced_fredholm_run_is_solvable() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke("fredholm", &scenario("sys_c"), dir.path(), &["--smax", "6"]), EXIT_PASS);
    let sol = &report(dir.path())["result"]["solution"];
    assert_eq!(sol["solvable"], true);
    assert!(sol["residual"].as_f64().unwrap() <= 1e-8);
    assert!(dir.path().join("field.csv").exists());
}

#[test]
fn growth_beyond_contraction_reports_nonconvergence() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke("check", &scenario("dissipative_growth"), dir.path(), &[]), EXIT_CONDITION);
    assert_eq!(invoke("solve-periodic", &scenario("dissipative_growth"), dir.path(), &[]), EXIT_NONCONVERGENCE);
    let r = report(dir.path());
    assert_eq!(r["status"], "non_convergence");
    assert!(r["error"].as_str().unwrap().contains("did not converge"));
    assert_eq!(invoke("solve-periodic", &scenario("dissipative"), dir.path(), &[]), EXIT_PASS);
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(invoke("solve-periodic", &scenario("sys_c"), a.path(), &["--threads", "1"]), EXIT_PASS);
    assert_eq!(invoke("solve-periodic", &scenario("sys_c"), b.path(), &["--threads", "3"]), EXIT_PASS);
    for f in ["report.json", "field.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let text = std::fs::read_to_string(a.path().join("report.json")).unwrap();
    assert!(!text.contains("wall"));
}

#[test]
fn field_dump_warm_starts_a_second_solve() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    assert_eq!(invoke("solve-periodic", &scenario("sys_c"), &first, &[]), EXIT_PASS);
    let base: Value = std::fs::read_to_string(scenario("sys_c")).unwrap().parse().unwrap();
    let mut warm = base.clone();
    warm["simulate"] = serde_json::json!({ "warm_start": "first/field.csv" });
    let path = dir.path().join("warm.json");
    std::fs::write(&path, warm.to_string()).unwrap();
    let second = dir.path().join("second");
    assert_eq!(invoke("solve-periodic", &path, &second, &[]), EXIT_PASS);
    let r1 = report(&first)["result"].clone();
    let r2 = report(&second)["result"].clone();
    let res = |r: &Value| r["residual"].as_f64().unwrap();
    assert!(res(&r2) <= res(&r1).max(f64::EPSILON), "{} > {}", res(&r2), res(&r1));
    assert!(r2["iterations"].as_u64() <= r1["iterations"].as_u64());
}

#[test]
fn smoothing_probe_writes_jump_series() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(invoke("probe-smoothing", &scenario("classical_kink"), dir.path(), &[]), EXIT_PASS);
    let r = &report(dir.path())["result"];
    assert_eq!(r["orders"][0], 0);
    assert!(r["orders"][2].as_u64().unwrap() >= 2);
    let jumps = std::fs::read_to_string(dir.path().join("jumps.csv")).unwrap();
    assert!(jumps.starts_with("component,segment,t,x,jump_u,jump_du,noise\n"));
}

#[test]
fn binary_propagates_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_hyperbolic1d");
    let dir = tempfile::tempdir().unwrap();
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap().status.code();
    let out = dir.path().display().to_string();
    let bad = scenario("bad_speed").display().to_string();
    assert_eq!(status(&["check", "--scenario", &bad, "--out", &out]), Some(EXIT_CONDITION));
    assert_eq!(status(&["check", "--scenario", "/nonexistent.json"]), Some(EXIT_USAGE));
    assert_eq!(status(&["--help"]), Some(EXIT_PASS));
}

#[test]
fn shipped_schema_is_current() {
    let shipped: Value = serde_json::from_str(&std::fs::read_to_string(root().join("docs/scenario.schema.json")).unwrap()).unwrap();
    let fresh = serde_json::to_value(hyperbolic1d::scenario::scenario_schema()).unwrap();
    assert_eq!(shipped, fresh, "regenerate with `cargo run --example write_schema > docs/scenario.schema.json`");
}

#[test]
fn shipped_scenarios_parse() {
    for entry in std::fs::read_dir(root().join("scenarios")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        hyperbolic1d::scenario::Scenario::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}
