//! Command-line front end. Every command reads one scenario file, writes a
//! report JSON into the output directory and returns an exit code:
//! 0 pass, 1 usage or input error, 2 condition failure, 3 non-convergence.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::boundary::{contraction_check, BoundaryOperator};
use crate::characteristics::Tracer;
use crate::error::Error;
use crate::fredholm::{exponent_profiles, fredholm_solve, iso_margins, kernel_and_index, Reflection};
use crate::grid::{linspace, GridFunction};
use crate::operators::OperatorContext;
use crate::population::{renewal_boundary, AgeModel};
use crate::report::{format_float, load_field_csv, save_field_csv, sha256_hex, write_json};
use crate::scenario::Scenario;
use crate::smoothing::{regularity_profile, smoothing_time, track_singularity};
use crate::solver::{SolutionBundle, Solver};
use crate::system::{check_bv_factorization, check_hyperbolicity, check_levy, SampleGrid, TimeDomain};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_CONDITION: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "hyperbolic1d", version, about = "Characteristic-integral solvers for 1D hyperbolic systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario JSON file.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Grid override `NXxNT` for solves and condition checks.
    #[arg(long, global = true, value_parser = parse_resolution)]
    pub resolution: Option<(usize, usize)>,
    /// Mode truncation override.
    #[arg(long, global = true)]
    pub smax: Option<usize>,
    /// Tolerance override for fixed-point and solvability tests.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Verify the structural conditions of the scenario.
    Check,
    /// Dump characteristic curves of the scenario's trace seeds.
    Trace,
    /// Initial-boundary solve on a half strip.
    Simulate,
    /// Time-periodic solve.
    SolvePeriodic,
    /// Measured regularity profile and singularity tracking.
    ProbeSmoothing,
    /// Renewal march of an age-structured boundary condition.
    Population,
    /// Mode-by-mode kernel, cokernel, index and solvability.
    Fredholm,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Trace => "trace",
            Command::Simulate => "simulate",
            Command::SolvePeriodic => "solve-periodic",
            Command::ProbeSmoothing => "probe-smoothing",
            Command::Population => "population",
            Command::Fredholm => "fredholm",
        }
    }
}

fn parse_resolution(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected NxM, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    let (nx, nt) = (parse(a)?, parse(b)?);
    if nx < 2 || nt < 2 {
        return Err("both sizes must be at least 2".into());
    }
    Ok((nx, nt))
}

/// Machine-readable record of one run.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub scenario: Option<String>,
    pub scenario_sha256: String,
    pub status: &'static str,
    pub exit_code: i32,
    pub error: Option<String>,
    pub result: Value,
}

/// Outcome of a command before it is written out.
struct Outcome {
    exit: i32,
    result: Value,
}

impl Outcome {
    fn verdict(passed: bool, result: Value) -> Self {
        Outcome {
            exit: if passed { EXIT_PASS } else { EXIT_CONDITION },
            result,
        }
    }
}

fn exit_code_of(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        Error::SingularMode { .. } => EXIT_CONDITION,
        _ => EXIT_USAGE,
    }
}

fn status_of(code: i32) -> &'static str {
    match code {
        EXIT_PASS => "pass",
        EXIT_CONDITION => "condition_failure",
        EXIT_NONCONVERGENCE => "non_convergence",
        _ => "error",
    }
}

struct Context {
    scenario: Scenario,
    dir: PathBuf,
    out: PathBuf,
}

impl Context {
    fn output(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
        }
    };
    let threads = cli.common.threads;
    match threads {
        Some(0) => {
            eprintln!("error: --threads must be positive");
            EXIT_USAGE
        }
        Some(k) => match rayon::ThreadPoolBuilder::new().num_threads(k).build() {
            Ok(pool) => pool.install(|| execute(&cli)),
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_USAGE
            }
        },
        None => execute(&cli),
    }
}

fn execute(cli: &Cli) -> i32 {
    let Some(path) = &cli.common.scenario else {
        eprintln!("error: --scenario <path> is required");
        return EXIT_USAGE;
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    let mut scenario = match Scenario::from_json(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    apply_overrides(&mut scenario, &cli.common);
    if let Err(e) = std::fs::create_dir_all(&cli.common.out) {
        eprintln!("error: cannot create {}: {e}", cli.common.out.display());
        return EXIT_USAGE;
    }
    let ctx = Context {
        dir: path.parent().map(Path::to_path_buf).unwrap_or_default(),
        out: cli.common.out.clone(),
        scenario,
    };

    let started = Instant::now();
    let (exit, result, error) = match dispatch(cli.command, &ctx) {
        Ok(o) => (o.exit, o.result, None),
        Err(e) => {
            eprintln!("error: {e}");
            (exit_code_of(&e), Value::Null, Some(e.to_string()))
        }
    };
    let wall = started.elapsed().as_secs_f64();

    let report = RunReport {
        command: cli.command.name(),
        scenario: ctx.scenario.name.clone(),
        scenario_sha256: sha256_hex(text.as_bytes()),
        status: status_of(exit),
        exit_code: exit,
        error,
        result,
    };
    let timing = json!({
        "command": cli.command.name(),
        "wall_seconds": wall,
        "threads": rayon::current_num_threads(),
    });
    let outputs = &ctx.scenario.outputs;
    for (name, value) in [(&outputs.report, serde_json::to_value(&report)), (&outputs.timing, Ok(timing))] {
        let written = value.map_err(Error::from).and_then(|v| write_json(&ctx.output(name), &v));
        if let Err(e) = written {
            eprintln!("error: cannot write {name}: {e}");
            return EXIT_USAGE;
        }
    }
    exit
}

fn apply_overrides(sc: &mut Scenario, common: &CommonArgs) {
    if let Some((nx, nt)) = common.resolution {
        sc.solver.nx = nx;
        sc.solver.nt = nt;
        sc.check.nx = nx;
        sc.check.nt = nt;
    }
    if let Some(s) = common.smax {
        sc.fredholm.config.s_max = s;
    }
    if let Some(tol) = common.tol {
        sc.solver.tol = tol;
        sc.fredholm.config.tol = tol;
    }
}

fn dispatch(cmd: Command, ctx: &Context) -> crate::Result<Outcome> {
    match cmd {
        Command::Check => cmd_check(ctx),
        Command::Trace => cmd_trace(ctx),
        Command::Simulate => cmd_solve(ctx, false),
        Command::SolvePeriodic => cmd_solve(ctx, true),
        Command::ProbeSmoothing => cmd_probe_smoothing(ctx),
        Command::Population => cmd_population(ctx),
        Command::Fredholm => cmd_fredholm(ctx),
    }
}

fn to_value<T: Serialize>(v: &T) -> crate::Result<Value> {
    Ok(serde_json::to_value(v)?)
}

fn cmd_check(ctx: &Context) -> crate::Result<Outcome> {
    let sc = &ctx.scenario;
    let sys = sc.system()?;
    let bc = sc.boundary()?;
    bc.validate(&sys)?;
    let grid = SampleGrid::new(sc.check.nx, sc.check.nt, sc.check_window());
    let mut hyp = check_hyperbolicity(&sys, &grid)?;
    let mut result = serde_json::Map::new();
    let mut passed = hyp.l1_ok && hyp.l2_ok;

    if sys.n() > 1 && hyp.l2_ok {
        let levy = check_levy(&sys, &grid, &sc.check.levy)?;
        hyp.levy_defect = Some(levy.defect);
        passed &= levy.passed();
        result.insert("levy".into(), to_value(&levy)?);
        if sys.operator_time_independent() {
            let bv = check_bv_factorization(&sys, &sc.check.levy, sc.check.bv_resolution)?;
            hyp.bv_ok = bv.bv_ok;
            passed &= bv.passed();
            result.insert("bv".into(), to_value(&bv)?);
        }
    }
    if let (BoundaryOperator::LinearReflection { .. }, TimeDomain::Periodic, true) = (&bc, sys.domain(), hyp.l2_ok) {
        let arc = Arc::new(sys.clone());
        let iso = iso_margins(&sys, &exponent_profiles(&arc)?, &Reflection::from_bc(&sys, &bc)?, sc.fredholm.config.s_max);
        passed &= iso.passed;
        result.insert("iso".into(), to_value(&iso)?);
    }
    if matches!(bc, BoundaryOperator::DissipativeNonlinear { .. }) && hyp.l2_ok {
        let tracer = Tracer::new(Arc::new(sys.clone()));
        let rep = contraction_check(&tracer, &bc, sc.contraction.order, &sc.contraction_options())?;
        passed &= rep.passed;
        result.insert("contraction".into(), to_value(&rep)?);
    }
    result.insert("hyperbolicity".into(), to_value(&hyp)?);
    result.insert("passed".into(), Value::Bool(passed));
    Ok(Outcome::verdict(passed, Value::Object(result)))
}

fn cmd_trace(ctx: &Context) -> crate::Result<Outcome> {
    let sc = &ctx.scenario;
    if sc.trace.is_empty() {
        return Err(Error::Invalid("the scenario lists no trace seeds".into()));
    }
    let sys = Arc::new(sc.system()?);
    let tracer = Tracer::new(sys.clone());
    let mut rows = Vec::new();
    let mut seeds = Vec::new();
    for (k, seed) in sc.trace.iter().enumerate() {
        if seed.component >= sys.n() {
            return Err(Error::Invalid(format!("trace seed {k}: component {} out of range", seed.component)));
        }
        let (path, exit) = tracer.to_exit(seed.component, seed.x, seed.t)?;
        let (lo, hi) = path.xi_range;
        for xi in linspace(lo, hi, seed.samples.max(2)) {
            let mut row = vec![k.to_string(), seed.component.to_string()];
            row.extend(floats(&[xi, path.omega(xi)]));
            rows.push(row);
        }
        seeds.push(json!({
            "component": seed.component,
            "x": seed.x,
            "t": seed.t,
            "exit": exit,
            "xi_range": [lo, hi],
            "clipped": path.clipped,
        }));
    }
    write_table(&ctx.output(&sc.outputs.trace), &["seed", "component", "xi", "omega"], &rows)?;
    Ok(Outcome::verdict(true, json!({ "seeds": seeds })))
}

/// Writes a table whose cells are already formatted.
fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> crate::Result<()> {
    let csv_err = |e: csv::Error| Error::Invalid(format!("csv: {e}"));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn floats(values: &[f64]) -> impl Iterator<Item = String> + '_ {
    values.iter().map(|v| format_float(*v))
}

fn bundle_value(bundle: &SolutionBundle) -> crate::Result<Value> {
    let mut v = to_value(bundle)?;
    if let Value::Object(map) = &mut v {
        map.insert("grid".into(), json!({ "nx": bundle.u.nx(), "nt": bundle.u.nt(), "window": bundle.u.window() }));
    }
    Ok(v)
}

fn cmd_solve(ctx: &Context, periodic: bool) -> crate::Result<Outcome> {
    let sc = &ctx.scenario;
    let problem = sc.problem()?;
    let warm = match &sc.simulate.warm_start {
        Some(p) => Some(load_field_csv(&ctx.dir.join(p), periodic)?),
        None => None,
    };
    if let Some(w) = &warm {
        if w.n() != problem.sys.n() {
            return Err(Error::Invalid(format!("warm start has {} components, system has {}", w.n(), problem.sys.n())));
        }
    }
    let mut solver = Solver::new(&problem, &sc.solver)?;
    let bundle = if periodic {
        solver.solve_periodic(warm.as_ref())?
    } else {
        solver.solve_ibvp(sc.simulate.t_end, warm.as_ref())?
    };
    save_field_csv(&ctx.output(&sc.outputs.field), &bundle.u)?;
    Ok(Outcome::verdict(true, bundle_value(&bundle)?))
}

fn cmd_probe_smoothing(ctx: &Context) -> crate::Result<Outcome> {
    let sc = &ctx.scenario;
    let problem = sc.problem()?;
    let opts = sc.profile_options();
    let (profile, grids) = regularity_profile(&problem, sc.smoothing.t_end, &sc.solver, &opts, sc.smoothing.levels)?;
    let finest = grids.last().expect("at least two levels");
    let mut result = json!({
        "profile": profile,
        "orders": profile.orders(),
        "order": sc.smoothing.order,
        "smoothing_time": smoothing_time(&profile, sc.smoothing.order),
    });
    if let Some([x0, t0]) = sc.smoothing.seed {
        let tracer = Tracer::new(problem.sys.clone());
        let track = track_singularity(finest, &tracer, x0, t0)?;
        let mut rows = Vec::new();
        for c in &track.components {
            for s in &c.samples {
                let mut row = vec![c.j.to_string(), s.segment.to_string()];
                row.extend(floats(&[s.t, s.x, s.jump_u, s.jump_du, s.noise]));
                rows.push(row);
            }
        }
        write_table(
            &ctx.output(&sc.outputs.jumps),
            &["component", "segment", "t", "x", "jump_u", "jump_du", "noise"],
            &rows,
        )?;
        result["track"] = to_value(&track)?;
    }
    save_field_csv(&ctx.output(&sc.outputs.field), finest)?;
    Ok(Outcome::verdict(true, result))
}

fn cmd_population(ctx: &Context) -> crate::Result<Outcome> {
    let sc = &ctx.scenario;
    let problem = sc.problem()?;
    let BoundaryOperator::IntegralAge { h, gamma } = &problem.bc else {
        return Err(Error::Invalid("population needs an integral_age boundary".into()));
    };
    let t0 = problem
        .sys
        .domain()
        .start()
        .ok_or_else(|| Error::Invalid("population needs a half-strip domain".into()))?;
    let spec = &sc.population;
    let model = AgeModel::new(
        OperatorContext::new(Arc::new(Tracer::new(problem.sys.clone())))
            .with_resolution(sc.solver.gauss_points, sc.solver.panels_per_unit),
        gamma.clone(),
        h.clone(),
        problem.initial.as_ref().map(|p| p[0].clone()),
        sc.solver.panels_per_unit,
    )?;
    let ts = linspace(t0, spec.t_end, spec.renewal_points.max(2));
    let renewal = renewal_boundary(&model, &ts, &[], spec.renewal_tol, sc.solver.max_iter)?;

    let mut solver = Solver::new(&problem, &sc.solver)?;
    let bundle = solver.solve_ibvp(spec.t_end, None)?;
    let u = &bundle.u;
    let boundary_mismatch = u
        .ts()
        .iter()
        .enumerate()
        .map(|(k, &t)| (u.get(0, 0, k) - renewal.eval(t)).abs())
        .fold(0.0, f64::max);
    save_field_csv(&ctx.output(&sc.outputs.field), u)?;

    let mut result = json!({
        "renewal": renewal,
        "boundary_mismatch": boundary_mismatch,
        "solution": bundle_value(&bundle)?,
    });
    if spec.profile {
        let mut opts = sc.profile_options();
        if sc.smoothing.windows.is_none() {
            opts.windows = crate::smoothing::ProfileOptions::unit_windows(t0, spec.t_end).windows;
        }
        let (profile, _) = regularity_profile(&problem, spec.t_end, &sc.solver, &opts, sc.smoothing.levels)?;
        result["orders"] = to_value(&profile.orders())?;
        result["profile"] = to_value(&profile)?;
    }
    Ok(Outcome::verdict(true, result))
}

fn cmd_fredholm(ctx: &Context) -> crate::Result<Outcome> {
    let sc = &ctx.scenario;
    let ms = sc.mode_system()?;
    let cfg = &sc.fredholm.config;
    let report = kernel_and_index(&ms, cfg)?;

    let mut rows = Vec::new();
    for m in &report.modes {
        for (kind, verdict) in [("forward", &m.forward), ("adjoint", &m.adjoint), ("discrete", &m.discrete)] {
            for (k, sv) in verdict.singular_values.iter().enumerate() {
                rows.push(vec![m.s.to_string(), kind.to_string(), (k + 1).to_string(), format_float(*sv)]);
            }
        }
    }
    write_table(&ctx.output(&sc.outputs.singular_values), &["s", "matrix", "k", "sigma"], &rows)?;

    let mut result = json!({ "analysis": report });
    let mut passed = true;
    let sys = ms.sys.clone();
    if !sys.forcing_is_zero() {
        let grid = cfg.grid(&ms)?;
        let f = grid.field_from_fn(ms.n(), cfg.s_max, sc.fredholm.forcing_samples, |j, x, t| sys.f(j, x, t))?;
        let sol = fredholm_solve(&ms, &f, cfg)?;
        passed = sol.solvable;
        let u: GridFunction = sol.to_grid(sc.fredholm.forcing_samples);
        save_field_csv(&ctx.output(&sc.outputs.field), &u)?;
        result["solution"] = to_value(&sol)?;
    }
    Ok(Outcome::verdict(passed, result))
}
