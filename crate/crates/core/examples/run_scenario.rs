//! Runs a CLI command on a scenario file: `cargo run --example run_scenario -- check scenarios/sys_c.json`.

use std::path::Path;

use hyperbolic1d::scenario::Scenario;

fn main() {
    let mut args = std::env::args().skip(1);
    let cmd = args.next().unwrap_or_else(|| "check".into());
    let default = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/sys_c.json");
    let path = args.next().map(Into::into).unwrap_or(default);
    let text = std::fs::read_to_string(&path).expect("readable scenario");
    match Scenario::from_json(&text) {
        Ok(s) => println!("{}: n = {}, boundary parsed", s.name.as_deref().unwrap_or("unnamed"), s.system.a.len()),
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(1);
        }
    }
    let out = std::env::temp_dir().join("hyperbolic1d-example");
    let code = hyperbolic1d::cli::run([
        "hyperbolic1d".into(),
        cmd,
        "--scenario".into(),
        path.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ]);
    println!("exit code {code}; report at {}", out.join("report.json").display());
    std::process::exit(code);
}
