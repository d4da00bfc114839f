//! Scenario files: one JSON document describing a system, its boundary
//! operator and the settings of every command.

use std::sync::Arc;

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::boundary::{BoundaryOperator, ContractionOptions, ContractionReading, ZMap};
use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};
use crate::fredholm::{FredholmConfig, ModeSystem};
use crate::smoothing::ProfileOptions;
use crate::solver::{Problem, SolveConfig};
use crate::system::{HyperbolicSystem, LevyOptions, SampleGrid, TimeDomain};

/// A schema violation located by a JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for SchemaError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let at = if self.pointer.is_empty() { "/" } else { &self.pointer };
        write!(f, "{at}: {}", self.message)
    }
}

impl std::error::Error for SchemaError {}

fn violation(pointer: &str, message: impl Into<String>) -> SchemaError {
    SchemaError {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    /// Number of rightward components; they come first.
    pub m: usize,
    /// Diagonal speeds `a_j(x, t)`.
    pub a: Vec<String>,
    /// Coupling matrix `b_jk(x, t)`; zero when omitted.
    #[serde(default)]
    pub b: Option<Vec<Vec<String>>>,
    /// Forcing `f_j(x, t)`; zero when omitted.
    #[serde(default)]
    pub f: Option<Vec<String>>,
    pub domain: TimeDomain,
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundarySpec {
    /// `u_j(0,t) = h_j(t)` for rightward and `u_j(1,t) = h_j(t)` for leftward components.
    Classical { h: Vec<String> },
    /// Linear reflection with `r0` of size `m × (n−m)` and `r1` of size `(n−m) × m`.
    Reflection { r0: Vec<Vec<f64>>, r1: Vec<Vec<f64>> },
    /// `u(0,t) = h(t, z)` with `z = ∫ γ(x,t) u(x,t) dx`.
    IntegralAge { h: String, gamma: String },
    /// `u_j = h_j(t, z)` with outgoing traces `z1, z2, …`.
    Dissipative { h: Vec<String> },
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSpec {
    pub nx: usize,
    pub nt: usize,
    /// Time window of the sample grid; defaults to one period from the initial time.
    pub window: Option<[f64; 2]>,
    pub levy: LevyOptions,
    /// Abscissae of the bounded-variation estimate.
    pub bv_resolution: usize,
}

impl Default for CheckSpec {
    fn default() -> Self {
        CheckSpec {
            nx: 64,
            nt: 64,
            window: None,
            levy: LevyOptions::default(),
            bv_resolution: 256,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct TraceSeed {
    /// Zero-based component index.
    pub component: usize,
    pub x: f64,
    pub t: f64,
    /// Points of the dumped curve.
    #[serde(default = "default_trace_samples")]
    pub samples: usize,
}

fn default_trace_samples() -> usize {
    33
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSpec {
    /// Ignored by `solve-periodic`.
    pub t_end: f64,
    /// Field CSV used as the starting iterate, relative to the scenario file.
    pub warm_start: Option<String>,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        SimulateSpec { t_end: 1.0, warm_start: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SmoothingSpec {
    pub t_end: f64,
    /// Time windows; unit windows from the initial time when omitted.
    pub windows: Option<Vec<[f64; 2]>>,
    pub k_max: usize,
    pub growth: f64,
    pub floor: f64,
    /// Number of resolutions, each halving the steps of the previous one.
    pub levels: usize,
    /// `[x0, t0]` of a singularity to follow.
    pub seed: Option<[f64; 2]>,
    /// Order whose smoothing time is reported.
    pub order: usize,
}

impl Default for SmoothingSpec {
    fn default() -> Self {
        SmoothingSpec {
            t_end: 3.0,
            windows: None,
            k_max: 3,
            growth: 1.6,
            floor: 1e-9,
            levels: 3,
            seed: None,
            order: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct PopulationSpec {
    pub t_end: f64,
    /// Time nodes of the renewal march.
    pub renewal_points: usize,
    pub renewal_tol: f64,
    /// Also compute a regularity profile with the smoothing settings.
    pub profile: bool,
}

impl Default for PopulationSpec {
    fn default() -> Self {
        PopulationSpec {
            t_end: 3.0,
            renewal_points: 301,
            renewal_tol: 1e-13,
            profile: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct ContractionSpec {
    /// Largest derivative order `r`.
    pub order: u32,
    /// Sampling box of the outgoing traces, one interval per component.
    pub z_box: Option<Vec<[f64; 2]>>,
    pub z_samples: usize,
    pub nx: usize,
    pub nt: usize,
    pub fd_step: f64,
    pub reading: ContractionReading,
}

impl Default for ContractionSpec {
    fn default() -> Self {
        ContractionSpec {
            order: 0,
            z_box: None,
            z_samples: 5,
            nx: 21,
            nt: 21,
            fd_step: 1e-5,
            reading: ContractionReading::JacobianRowSum,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct FredholmSpec {
    pub config: FredholmConfig,
    /// Time samples per period used to take modes of the forcing.
    pub forcing_samples: usize,
}

impl Default for FredholmSpec {
    fn default() -> Self {
        FredholmSpec {
            config: FredholmConfig::default(),
            forcing_samples: 256,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub report: String,
    pub field: String,
    pub timing: String,
    /// `(ξ, ω)` samples of the `trace` command.
    pub trace: String,
    /// Jump series of the `probe-smoothing` command.
    pub jumps: String,
    /// Singular values of the `fredholm` command.
    pub singular_values: String,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            report: "report.json".into(),
            field: "field.csv".into(),
            timing: "timing.json".into(),
            trace: "trace.csv".into(),
            jumps: "jumps.csv".into(),
            singular_values: "singular_values.csv".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub system: SystemSpec,
    pub boundary: BoundarySpec,
    /// Initial data `φ_j(x)` on a half strip.
    #[serde(default)]
    pub initial: Option<Vec<String>>,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default)]
    pub check: CheckSpec,
    #[serde(default)]
    pub trace: Vec<TraceSeed>,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default)]
    pub smoothing: SmoothingSpec,
    #[serde(default)]
    pub population: PopulationSpec,
    #[serde(default)]
    pub contraction: ContractionSpec,
    #[serde(default)]
    pub fredholm: FredholmSpec,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Externally tagged twin of [`BoundarySpec`]; serde buffers internally tagged
/// content, which loses the location of errors inside it.
#[derive(Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
#[allow(dead_code)]
enum LocatedBoundary {
    Classical { h: Vec<String> },
    Reflection { r0: Vec<Vec<f64>>, r1: Vec<Vec<f64>> },
    IntegralAge { h: String, gamma: String },
    Dissipative { h: Vec<String> },
}

fn locate_boundary_error(text: &str) -> Option<SchemaError> {
    let root: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut body = root.get("boundary")?.as_object()?.clone();
    let kind = body.remove("kind")?.as_str()?.to_string();
    let tagged = serde_json::json!({ kind: body });
    let err = serde_path_to_error::deserialize::<_, LocatedBoundary>(tagged).err()?;
    // drop the variant segment
    let inner = pointer_of(err.path());
    let rest = inner.splitn(3, '/').nth(2).map(|r| format!("/{r}")).unwrap_or_default();
    Some(violation(&format!("/boundary{rest}"), err.into_inner().to_string()))
}

fn parse_field(src: &str, pointer: &str) -> std::result::Result<CoefficientField, SchemaError> {
    CoefficientField::parse(src).map_err(|e| violation(pointer, e.to_string()))
}

fn parse_fields(srcs: &[String], pointer: &str) -> std::result::Result<Vec<CoefficientField>, SchemaError> {
    srcs.iter()
        .enumerate()
        .map(|(i, s)| parse_field(s, &format!("{pointer}/{i}")))
        .collect()
}

fn parse_map(src: &str, pointer: &str) -> std::result::Result<ZMap, SchemaError> {
    ZMap::parse(src).map_err(|e| violation(pointer, e.to_string()))
}

impl Scenario {
    /// Parses and validates a scenario; every failure names the offending location.
    pub fn from_json(text: &str) -> std::result::Result<Self, SchemaError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let sc: Scenario = serde_path_to_error::deserialize(de).map_err(|e| {
            let pointer = pointer_of(e.path());
            let err = violation(&pointer, e.into_inner().to_string());
            if pointer == "/boundary" {
                locate_boundary_error(text).unwrap_or(err)
            } else {
                err
            }
        })?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn n(&self) -> usize {
        self.system.a.len()
    }

    fn validate(&self) -> std::result::Result<(), SchemaError> {
        let n = self.n();
        let m = self.system.m;
        if n == 0 {
            return Err(violation("/system/a", "at least one component is required"));
        }
        if m > n {
            return Err(violation("/system/m", format!("m = {m} exceeds n = {n}")));
        }
        if let Some(b) = &self.system.b {
            if b.len() != n {
                return Err(violation("/system/b", format!("expected {n} rows")));
            }
            for (j, row) in b.iter().enumerate() {
                if row.len() != n {
                    return Err(violation(&format!("/system/b/{j}"), format!("expected {n} entries")));
                }
            }
        }
        if let Some(f) = &self.system.f {
            if f.len() != n {
                return Err(violation("/system/f", format!("expected {n} entries")));
            }
        }
        if let Some(phi) = &self.initial {
            if phi.len() != n {
                return Err(violation("/initial", format!("expected {n} entries")));
            }
        }
        match &self.boundary {
            BoundarySpec::Classical { h } | BoundarySpec::Dissipative { h } if h.len() != n => {
                return Err(violation("/boundary/h", format!("expected {n} entries")));
            }
            BoundarySpec::Reflection { r0, r1 } => {
                if r0.len() != m || r0.iter().any(|r| r.len() != n - m) {
                    return Err(violation("/boundary/r0", format!("expected a {m}x{} matrix", n - m)));
                }
                if r1.len() != n - m || r1.iter().any(|r| r.len() != m) {
                    return Err(violation("/boundary/r1", format!("expected a {}x{m} matrix", n - m)));
                }
            }
            BoundarySpec::IntegralAge { .. } if n != 1 || m != 1 => {
                return Err(violation("/boundary", "integral_age requires a single rightward component"));
            }
            _ => {}
        }
        if let Some((k, [lo, hi])) = self
            .smoothing
            .windows
            .iter()
            .flatten()
            .enumerate()
            .find(|(_, w)| !(w[0] < w[1]))
            .map(|(k, w)| (k, *w))
        {
            return Err(violation(
                &format!("/smoothing/windows/{k}"),
                format!("empty window [{lo}, {hi}]"),
            ));
        }
        // expressions are parsed here so that errors carry their location
        self.build_system().map(|_| ())?;
        self.build_boundary().map(|_| ())?;
        if let Some(phi) = &self.initial {
            parse_fields(phi, "/initial")?;
        }
        Ok(())
    }

    fn build_system(&self) -> std::result::Result<HyperbolicSystem, SchemaError> {
        let n = self.n();
        let a = parse_fields(&self.system.a, "/system/a")?;
        let b = match &self.system.b {
            Some(rows) => rows
                .iter()
                .enumerate()
                .map(|(j, row)| parse_fields(row, &format!("/system/b/{j}")))
                .collect::<std::result::Result<Vec<_>, _>>()?,
            None => vec![vec![CoefficientField::zero(); n]; n],
        };
        let f = match &self.system.f {
            Some(f) => parse_fields(f, "/system/f")?,
            None => vec![CoefficientField::zero(); n],
        };
        HyperbolicSystem::new(self.system.m, a, b, f, self.system.domain).map_err(|e| violation("/system", e.to_string()))
    }

    fn build_boundary(&self) -> std::result::Result<BoundaryOperator, SchemaError> {
        Ok(match &self.boundary {
            BoundarySpec::Classical { h } => BoundaryOperator::ClassicalTrace {
                h: parse_fields(h, "/boundary/h")?,
            },
            BoundarySpec::Reflection { r0, r1 } => BoundaryOperator::LinearReflection {
                r0: r0.clone(),
                r1: r1.clone(),
            },
            BoundarySpec::IntegralAge { h, gamma } => BoundaryOperator::IntegralAge {
                h: parse_map(h, "/boundary/h")?,
                gamma: parse_field(gamma, "/boundary/gamma")?,
            },
            BoundarySpec::Dissipative { h } => BoundaryOperator::DissipativeNonlinear {
                h: h.iter()
                    .enumerate()
                    .map(|(i, s)| parse_map(s, &format!("/boundary/h/{i}")))
                    .collect::<std::result::Result<Vec<_>, _>>()?,
            },
        })
    }

    pub fn system(&self) -> Result<HyperbolicSystem> {
        self.build_system().map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn boundary(&self) -> Result<BoundaryOperator> {
        self.build_boundary().map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn initial(&self) -> Result<Option<Vec<CoefficientField>>> {
        self.initial
            .as_ref()
            .map(|phi| parse_fields(phi, "/initial").map_err(|e| Error::Invalid(e.to_string())))
            .transpose()
    }

    pub fn problem(&self) -> Result<Problem> {
        Problem::new(self.system()?, self.boundary()?, self.initial()?)
    }

    pub fn mode_system(&self) -> Result<ModeSystem> {
        ModeSystem::new(Arc::new(self.system()?), &self.boundary()?)
    }

    /// Sample-grid window of the condition checks.
    pub fn check_window(&self) -> (f64, f64) {
        if let Some([a, b]) = self.check.window {
            return (a, b);
        }
        SampleGrid::for_domain(self.system.domain, 2, 2).window
    }

    pub fn profile_options(&self) -> ProfileOptions {
        let start = self.system.domain.start().unwrap_or(0.0);
        let mut opts = ProfileOptions::unit_windows(start, self.smoothing.t_end);
        if let Some(w) = &self.smoothing.windows {
            opts.windows = w.iter().map(|w| (w[0], w[1])).collect();
        }
        opts.k_max = self.smoothing.k_max;
        opts.growth = self.smoothing.growth;
        opts.floor = self.smoothing.floor;
        opts
    }

    pub fn contraction_options(&self) -> ContractionOptions {
        let mut opts = ContractionOptions::new(self.n(), self.check_window());
        if let Some(z) = &self.contraction.z_box {
            opts.z_box = z.iter().map(|w| (w[0], w[1])).collect();
        }
        opts.z_samples = self.contraction.z_samples;
        opts.nx = self.contraction.nx;
        opts.nt = self.contraction.nt;
        opts.fd_step = self.contraction.fd_step;
        opts.reading = self.contraction.reading;
        opts
    }
}

/// JSON Schema of the scenario format.
pub fn scenario_schema() -> schemars::schema::RootSchema {
    schemars::schema_for!(Scenario)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "system": {"m": 1, "a": ["1", "-1"], "domain": {"kind": "periodic"}},
        "boundary": {"kind": "reflection", "r0": [[0.5]], "r1": [[0.5]]}
    }"#;

    #[test]
    fn minimal_scenario_parses() {
        let sc = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(sc.n(), 2);
        assert_eq!(sc.solver.nx, 101);
        assert!(sc.mode_system().is_ok());
    }

    #[test]
    fn unknown_key_is_located() {
        let text = MINIMAL.replace("\"m\": 1", "\"m\": 1, \"speed\": 2");
        let err = Scenario::from_json(&text).unwrap_err();
        assert_eq!(err.pointer, "/system/speed");
        assert!(err.message.contains("speed"));
        let text = MINIMAL.replace("\"boundary\"", "\"solver\": {\"nx\": 5, \"bogus\": 1}, \"boundary\"");
        assert_eq!(Scenario::from_json(&text).unwrap_err().pointer, "/solver/bogus");
        let text = MINIMAL.replace("\"r1\": [[0.5]]", "\"r1\": [[0.5]], \"r2\": 0");
        assert_eq!(Scenario::from_json(&text).unwrap_err().pointer, "/boundary/r2");
    }

    #[test]
    fn bad_expression_is_located() {
        let text = MINIMAL.replace("\"-1\"", "\"-1 +\"");
        let err = Scenario::from_json(&text).unwrap_err();
        assert_eq!(err.pointer, "/system/a/1");
    }

    #[test]
    fn dimension_mismatch_is_located() {
        let text = MINIMAL.replace("\"r1\": [[0.5]]", "\"r1\": [[0.5, 1]]");
        assert_eq!(Scenario::from_json(&text).unwrap_err().pointer, "/boundary/r1");
        let text = MINIMAL.replace("\"m\": 1", "\"m\": 3");
        assert_eq!(Scenario::from_json(&text).unwrap_err().pointer, "/system/m");
    }

    #[test]
    fn wrong_type_is_located() {
        let text = MINIMAL.replace("\"r0\": [[0.5]]", "\"r0\": [[\"half\"]]");
        let err = Scenario::from_json(&text).unwrap_err();
        assert_eq!(err.pointer, "/boundary/r0/0/0");
    }
}
