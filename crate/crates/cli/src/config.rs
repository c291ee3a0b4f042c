//! JSON experiment configuration and its validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use gpwave::analysis::{BilinearTerm, RegionId};
use gpwave::operators::phase::PhaseKind;
use gpwave::scattering::ScatteringConfig;

/// One schema violation, located by its field path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn violation(path: impl Into<String>, message: impl Into<String>) -> Violation {
    Violation {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Simulate,
    Scatter,
    Decay,
    PhaseScan,
    VerifySymbols,
    NormalForm,
    Oracle,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Scatter => "scatter",
            Task::Decay => "decay",
            Task::PhaseScan => "phase-scan",
            Task::VerifySymbols => "verify-symbols",
            Task::NormalForm => "normal-form",
            Task::Oracle => "oracle",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub box_length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumKind {
    Gaussian,
    FromFile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSpec {
    pub kind: DatumKind,
    #[serde(default)]
    pub amplitude: Option<f64>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    /// Modulation `e^{ik·(x-c)}`, for data with nonzero imaginary part.
    #[serde(default)]
    pub wavevector: Option<Vec<f64>>,
    #[serde(default)]
    pub path: Option<PathBuf>,
}

/// The raw file layout; `task_params` is parsed once `task` is known.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    dim: usize,
    grid: GridSpec,
    datum: DatumSpec,
    task: Task,
    #[serde(default)]
    task_params: serde_json::Value,
    seed: u64,
    out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub dim: usize,
    pub grid: GridSpec,
    pub datum: DatumSpec,
    pub task: Task,
    pub task_params: TaskParams,
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum TaskParams {
    Simulate(SimulateParams),
    Scatter(ScatterParams),
    Decay(DecayParams),
    PhaseScan(PhaseScanParams),
    VerifySymbols(VerifySymbolsParams),
    NormalForm(NormalFormParams),
    Oracle(OracleParams),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    StrangRk4,
    EtdRk2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateParams {
    pub t_end: f64,
    pub dt: f64,
    /// Spacing of the rows in the norm table; defaults to `t_end / 10`.
    #[serde(default)]
    pub sample_every: Option<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    #[serde(default = "yes")]
    pub dealias: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterParams {
    pub t_start: f64,
    pub t_max: f64,
    pub nodes: usize,
    /// Defaults to the dimension's value.
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub max_sweeps: Option<usize>,
    /// When set, the constructed `u(T)` is evolved forward with this step
    /// and compared with `u(T_max)`.
    #[serde(default)]
    pub forward_backward_dt: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayParams {
    pub t_min: f64,
    pub t_max: f64,
    #[serde(default = "default_decay_samples")]
    pub samples: usize,
    /// Lebesgue exponents; `null` stands for infinity.
    #[serde(default = "default_exponents")]
    pub exponents: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseScanParams {
    /// `phi0`, `phi_plus` or `phi_minus`; with `region`, selects one pair.
    /// Without both, every pair with a stated lower bound is scanned.
    #[serde(default)]
    pub kind: Option<String>,
    #[serde(default)]
    pub region: Option<String>,
    #[serde(default = "default_scan_samples")]
    pub samples: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Also scan the time bound with this small-`λ` factor.
    #[serde(default)]
    pub time_bound_kappa: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySymbolsParams {
    #[serde(default = "one")]
    pub h_scale: f64,
    #[serde(default = "default_identity_samples")]
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalFormParams {
    #[serde(default = "one")]
    pub t_end: f64,
    #[serde(default = "default_nf_steps")]
    pub dts: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermName {
    U1sq,
    Cross,
}

impl From<TermName> for BilinearTerm {
    fn from(t: TermName) -> Self {
        match t {
            TermName::U1sq => BilinearTerm::U1Sq,
            TermName::Cross => BilinearTerm::Cross,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleParams {
    /// Lattice indices of the frequencies.
    pub xi: Vec<Vec<i64>>,
    #[serde(default = "default_kinds")]
    pub kinds: Vec<String>,
    #[serde(default = "default_term")]
    pub term: TermName,
    pub t_lo: f64,
    pub t_hi: f64,
    #[serde(default = "default_oracle_nodes")]
    pub nodes: usize,
}

fn default_scheme() -> SchemeName {
    SchemeName::StrangRk4
}
fn yes() -> bool {
    true
}
fn one() -> f64 {
    1.0
}
fn default_decay_samples() -> usize {
    24
}
fn default_exponents() -> Vec<Option<f64>> {
    vec![Some(2.0), Some(4.0), None]
}
fn default_scan_samples() -> usize {
    100_000
}
fn default_delta() -> f64 {
    0.05
}
fn default_identity_samples() -> usize {
    200
}
fn default_nf_steps() -> Vec<f64> {
    vec![0.1, 0.05, 0.025]
}
fn default_kinds() -> Vec<String> {
    vec!["phi0".into(), "phi_plus".into(), "phi_minus".into()]
}
fn default_term() -> TermName {
    TermName::U1sq
}
fn default_oracle_nodes() -> usize {
    401
}

fn typed<D: DeserializeOwned>(value: serde_json::Value, prefix: &str) -> Result<D, Vec<Violation>> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = match (prefix, inner.as_str()) {
            (p, ".") => p.to_string(),
            ("", i) => i.to_string(),
            (p, i) => format!("{p}.{i}"),
        };
        vec![violation(path, e.into_inner().to_string())]
    })
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(ConfigError::Invalid)
    }

    pub fn from_json(text: &str) -> Result<Self, Vec<Violation>> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| vec![violation("<root>", e.to_string())])?;
        let raw: RawConfig = typed(value, "")?;
        let params = if raw.task_params.is_null() {
            serde_json::Value::Object(Default::default())
        } else {
            raw.task_params
        };
        let task_params = match raw.task {
            Task::Simulate => TaskParams::Simulate(typed(params, "task_params")?),
            Task::Scatter => TaskParams::Scatter(typed(params, "task_params")?),
            Task::Decay => TaskParams::Decay(typed(params, "task_params")?),
            Task::PhaseScan => TaskParams::PhaseScan(typed(params, "task_params")?),
            Task::VerifySymbols => TaskParams::VerifySymbols(typed(params, "task_params")?),
            Task::NormalForm => TaskParams::NormalForm(typed(params, "task_params")?),
            Task::Oracle => TaskParams::Oracle(typed(params, "task_params")?),
        };
        let cfg = Self {
            name: raw.name,
            dim: raw.dim,
            grid: raw.grid,
            datum: raw.datum,
            task: raw.task,
            task_params,
            seed: raw.seed,
            out_dir: raw.out_dir,
        };
        let v = cfg.violations();
        if v.is_empty() {
            Ok(cfg.resolved())
        } else {
            Err(v)
        }
    }

    /// Fills optional fields with the values the run will use, so the
    /// manifest records them.
    fn resolved(mut self) -> Self {
        if self.datum.kind == DatumKind::Gaussian {
            let zeros = Some(vec![0.0; self.dim]);
            self.datum.center = self.datum.center.take().or(zeros.clone());
            self.datum.wavevector = self.datum.wavevector.take().or(zeros);
        }
        match &mut self.task_params {
            TaskParams::Simulate(p) => {
                p.sample_every.get_or_insert(p.t_end / 10.0);
            }
            TaskParams::Scatter(p) => {
                if let Ok(d) = ScatteringConfig::new(self.dim, p.t_start, p.t_max, p.nodes) {
                    p.eps.get_or_insert(d.eps);
                    p.tol.get_or_insert(d.tol);
                    p.max_sweeps.get_or_insert(d.sweeps);
                }
            }
            _ => {}
        }
        self
    }

    /// Semantic checks beyond the schema.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        let mut need = |ok: bool, path: &str, msg: String| {
            if !ok {
                v.push(violation(path, msg));
            }
        };
        need(self.dim == 2 || self.dim == 3, "dim", format!("must be 2 or 3, got {}", self.dim));
        need(!self.name.trim().is_empty(), "name", "must not be empty".into());
        need(self.grid.n >= 8 && self.grid.n % 2 == 0, "grid.n", format!("must be even and at least 8, got {}", self.grid.n));
        need(self.grid.box_length > 0.0 && self.grid.box_length.is_finite(), "grid.L", format!("must be positive, got {}", self.grid.box_length));

        let d = &self.datum;
        let half = self.grid.box_length / 2.0;
        match d.kind {
            DatumKind::Gaussian => {
                need(d.amplitude.is_some_and(f64::is_finite), "datum.amplitude", "required finite number for a gaussian datum".into());
                need(d.width.is_some_and(|w| w > 0.0 && w.is_finite()), "datum.width", "required positive number for a gaussian datum".into());
                need(d.path.is_none(), "datum.path", "only used with kind from_file".into());
                for (key, vals) in [("center", &d.center), ("wavevector", &d.wavevector)] {
                    if let Some(c) = vals {
                        need(c.len() == self.dim, &format!("datum.{key}"), format!("must have {} components, got {}", self.dim, c.len()));
                    }
                }
                if let Some(c) = &d.center {
                    need(c.iter().all(|x| x.abs() < half), "datum.center", format!("must lie inside the box (-{half}, {half})"));
                }
            }
            DatumKind::FromFile => {
                need(d.path.is_some(), "datum.path", "required for kind from_file".into());
                for (key, set) in [
                    ("amplitude", d.amplitude.is_some()),
                    ("width", d.width.is_some()),
                    ("center", d.center.is_some()),
                    ("wavevector", d.wavevector.is_some()),
                ] {
                    need(!set, &format!("datum.{key}"), "only used with kind gaussian".into());
                }
            }
        }

        let pos = |x: f64| x > 0.0 && x.is_finite();
        match &self.task_params {
            TaskParams::Simulate(p) => {
                need(pos(p.t_end), "task_params.t_end", "must be positive".into());
                need(pos(p.dt), "task_params.dt", "must be positive".into());
                need(p.dt <= p.t_end, "task_params.dt", "must not exceed t_end".into());
                if let Some(s) = p.sample_every {
                    need(pos(s), "task_params.sample_every", "must be positive".into());
                }
            }
            TaskParams::Scatter(p) => {
                need(pos(p.t_start), "task_params.t_start", "must be positive".into());
                need(p.t_max > p.t_start, "task_params.t_max", "must exceed t_start".into());
                need(p.nodes >= 3, "task_params.nodes", "must be at least 3".into());
                if let Some(e) = p.eps {
                    need((0.0..1.0).contains(&e), "task_params.eps", "must lie in [0, 1)".into());
                }
                if let Some(t) = p.tol {
                    need(pos(t), "task_params.tol", "must be positive".into());
                }
                if let Some(dt) = p.forward_backward_dt {
                    need(pos(dt), "task_params.forward_backward_dt", "must be positive".into());
                }
            }
            TaskParams::Decay(p) => {
                need(pos(p.t_min), "task_params.t_min", "must be positive".into());
                need(p.t_max > p.t_min, "task_params.t_max", "must exceed t_min".into());
                need(p.samples >= gpwave::analysis::MIN_FIT_SAMPLES, "task_params.samples", format!("must be at least {}", gpwave::analysis::MIN_FIT_SAMPLES));
                need(!p.exponents.is_empty(), "task_params.exponents", "must not be empty".into());
                need(p.exponents.iter().flatten().all(|&q| q >= 1.0), "task_params.exponents", "must be at least 1".into());
            }
            TaskParams::PhaseScan(p) => {
                need(p.kind.is_some() == p.region.is_some(), "task_params.region", "kind and region are given together".into());
                if let Some(k) = &p.kind {
                    need(k.parse::<PhaseKind>().is_ok(), "task_params.kind", format!("unknown phase {k:?}"));
                }
                if let Some(r) = &p.region {
                    need(r.parse::<RegionId>().is_ok(), "task_params.region", format!("unknown region {r:?}"));
                }
                need(p.samples > 0, "task_params.samples", "must be positive".into());
                need(p.delta > 0.0 && p.delta <= 0.1, "task_params.delta", "must lie in (0, 0.1]".into());
                if let Some(k) = p.time_bound_kappa {
                    need(pos(k), "task_params.time_bound_kappa", "must be positive".into());
                }
            }
            TaskParams::VerifySymbols(p) => {
                need(pos(p.h_scale), "task_params.h_scale", "must be positive".into());
                need(p.samples > 0, "task_params.samples", "must be positive".into());
            }
            TaskParams::NormalForm(p) => {
                need(pos(p.t_end), "task_params.t_end", "must be positive".into());
                need(p.dts.len() >= 2, "task_params.dts", "needs at least two steps".into());
                need(p.dts.iter().all(|&dt| pos(dt) && dt < p.t_end), "task_params.dts", "steps must be positive and below t_end".into());
            }
            TaskParams::Oracle(p) => {
                need(self.datum.kind == DatumKind::Gaussian, "datum.kind", "the oracle needs the closed-form transform of a gaussian".into());
                need(self.dim == 2, "dim", "the oracle runs on 2D grids".into());
                need(!p.xi.is_empty(), "task_params.xi", "must not be empty".into());
                need(p.xi.iter().all(|x| x.len() == self.dim), "task_params.xi", format!("each index needs {} components", self.dim));
                need(p.t_hi > p.t_lo && p.t_lo > 0.0, "task_params.t_hi", "need 0 < t_lo < t_hi".into());
                need(p.nodes >= 3 && p.nodes % 2 == 1, "task_params.nodes", "must be odd and at least 3".into());
                for k in &p.kinds {
                    need(k.parse::<PhaseKind>().is_ok(), "task_params.kinds", format!("unknown phase {k:?}"));
                }
            }
        }
        v
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Invalid(Vec<Violation>),
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "t", "dim": 2, "grid": {"n": 16, "L": 10.0},
        "datum": {"kind": "gaussian", "amplitude": 0.1, "width": 1.0},
        "task": "simulate", "task_params": {"t_end": 1.0, "dt": 0.1},
        "seed": 1, "out_dir": "out"
    }"#;

    fn paths(text: &str) -> Vec<String> {
        ExperimentConfig::from_json(text).unwrap_err().into_iter().map(|v| v.path).collect()
    }

    #[test]
    fn defaults_are_resolved() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let TaskParams::Simulate(p) = &cfg.task_params else { panic!() };
        assert_eq!((p.scheme, p.dealias, p.sample_every), (SchemeName::StrangRk4, true, Some(0.1)));
        assert_eq!(cfg.datum.center, Some(vec![0.0, 0.0]));
    }

    #[test]
    fn violations_name_their_fields() {
        assert_eq!(paths(&MINIMAL.replace("\"dim\": 2", "\"dim\": 4")), ["dim"]);
        assert_eq!(paths(&MINIMAL.replace("\"width\": 1.0", "\"width\": 1.0, \"colour\": 1")), ["datum.colour"]);
        assert_eq!(paths(&MINIMAL.replace("\"dt\": 0.1", "\"dt\": 0.1, \"speed\": 2")), ["task_params.speed"]);
        assert_eq!(paths(&MINIMAL.replace("\"dt\": 0.1", "\"dt\": \"fast\"")), ["task_params.dt"]);
        assert_eq!(paths(&MINIMAL.replace("\"task\": \"simulate\"", "\"task\": \"fly\"")), ["task"]);
        assert_eq!(paths(&MINIMAL.replace("\"n\": 16", "\"n\": 15")), ["grid.n"]);
    }
}
