//! JSON experiment configuration and its fully-resolved form.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use vglass::functional::{QuadMode, QuadratureSpec};
use vglass::model::{Atom, MixtureModel, MixtureTerm, SpinMeasure, XiStarSpec};
use vglass::rng::derive_seed;
use vglass::varforms::{Domain, GridMode, OptimizerSpec};
use vglass::{MixtureModel64, SpinMeasure64, StepPath64, SymMatrix64};

use crate::CliError;

pub type Matrix = Vec<Vec<f64>>;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    #[serde(rename = "D")]
    pub dim: usize,
    pub terms: Vec<TermFile>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermFile {
    pub p: u32,
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinFile {
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<Vec<AtomFile>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomFile {
    pub tau: Vec<f64>,
    pub w: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathFile {
    pub grid: Vec<f64>,
    pub values: Vec<Matrix>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadBlock {
    #[serde(default = "default_quad_mode")]
    pub mode: String,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "yes")]
    pub antithetic: bool,
}

fn default_quad_mode() -> String {
    "gauss-hermite".into()
}
fn default_nodes() -> usize {
    20
}
fn default_samples() -> usize {
    100_000
}
fn yes() -> bool {
    true
}

impl Default for QuadBlock {
    fn default() -> Self {
        Self { mode: default_quad_mode(), nodes: default_nodes(), samples: default_samples(), seed: None, antithetic: true }
    }
}

impl QuadBlock {
    fn with_nodes(nodes: usize) -> Self {
        Self { nodes, ..Self::default() }
    }

    pub fn spec(&self) -> Result<QuadratureSpec, CliError> {
        let mode = match self.mode.as_str() {
            "gauss-hermite" => QuadMode::GaussHermite,
            "monte-carlo" => QuadMode::MonteCarlo,
            other => return Err(CliError::config(format!("quadrature.mode: unknown mode `{other}`"))),
        };
        Ok(QuadratureSpec {
            mode,
            gh_nodes: self.nodes,
            mc_samples: self.samples,
            seed: self.seed.unwrap_or(0),
            antithetic: self.antithetic,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerBlock {
    #[serde(default = "default_levels")]
    pub levels: usize,
    #[serde(default = "default_grid")]
    pub grid: String,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_outer_restarts")]
    pub outer_restarts: usize,
    #[serde(default = "default_max_evals")]
    pub max_evals: usize,
    #[serde(default = "default_outer_evals")]
    pub outer_evals: usize,
    #[serde(default = "default_tol")]
    pub tol_value: f64,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "default_cap")]
    pub y_cap: f64,
    #[serde(default = "default_cap")]
    pub z_cap: f64,
    #[serde(default = "default_eps")]
    pub epsilons: Vec<f64>,
    #[serde(default = "default_opt_quad")]
    pub quadrature: QuadBlock,
}

fn default_levels() -> usize {
    3
}
fn default_grid() -> String {
    "free".into()
}
fn default_restarts() -> usize {
    8
}
fn default_outer_restarts() -> usize {
    2
}
fn default_max_evals() -> usize {
    4000
}
fn default_outer_evals() -> usize {
    200
}
fn default_tol() -> f64 {
    1e-3
}
fn default_cap() -> f64 {
    10.0
}
fn default_eps() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3]
}
fn default_opt_quad() -> QuadBlock {
    QuadBlock::with_nodes(12)
}

impl Default for OptimizerBlock {
    fn default() -> Self {
        serde_json::from_value(Value::Object(Default::default())).expect("defaults")
    }
}

impl OptimizerBlock {
    pub fn spec(&self) -> Result<OptimizerSpec, CliError> {
        let grid_mode = match self.grid.as_str() {
            "free" => GridMode::Free,
            "uniform" => GridMode::FixedUniform,
            other => return Err(CliError::config(format!("optimizer.grid: unknown grid mode `{other}`"))),
        };
        let seed = self.seed.unwrap_or(0);
        let spec = OptimizerSpec {
            levels: self.levels,
            grid_mode,
            restarts: self.restarts,
            outer_restarts: self.outer_restarts,
            max_evals: self.max_evals,
            outer_evals: self.outer_evals,
            tol_value: self.tol_value,
            seed,
            quadrature: self.quadrature.spec()?,
            y_cap: self.y_cap,
            z_cap: self.z_cap,
            epsilons: self.epsilons.clone(),
            xi_star: XiStarSpec { seed, ..XiStarSpec::default() },
        };
        spec.validate().map_err(|e| CliError::config(format!("optimizer: {e}")))?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBlock {
    #[serde(default = "default_atoms")]
    pub atoms: usize,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_atoms() -> usize {
    2000
}
fn default_replicas() -> usize {
    10_000
}

impl Default for OracleBlock {
    fn default() -> Self {
        Self { atoms: default_atoms(), replicas: default_replicas(), seed: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateBlock {
    #[serde(default = "default_checks")]
    pub samples: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_checks() -> usize {
    2000
}

impl Default for ValidateBlock {
    fn default() -> Self {
        Self { samples: default_checks(), seed: None }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalBlock {
    /// Path file name or inline `{grid, values}`.
    pub path: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Matrix>,
    #[serde(default)]
    pub quadrature: QuadBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleBlock>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveBlock {
    pub objective: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Matrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z: Option<Matrix>,
    #[serde(default = "default_t")]
    pub t: f64,
    #[serde(default = "default_domain")]
    pub domain: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(default)]
    pub extra_points: usize,
    #[serde(default)]
    pub optimizer: OptimizerBlock,
}

fn default_t() -> f64 {
    0.5
}
fn default_domain() -> String {
    "full".into()
}

impl SolveBlock {
    pub fn domain(&self) -> Result<Domain, CliError> {
        match self.domain.as_str() {
            "full" => Ok(Domain::Full),
            "cone" => Ok(Domain::Cone),
            other => Err(CliError::config(format!("solve.domain: unknown domain `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateBlock {
    pub n: Vec<usize>,
    #[serde(default = "default_disorder")]
    pub disorder: usize,
    #[serde(default = "default_sim_mode")]
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Matrix>,
    #[serde(default = "yes")]
    pub correction: bool,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    #[serde(default = "default_observables")]
    pub observables: Vec<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_disorder() -> usize {
    100
}
fn default_sim_mode() -> String {
    "enumerate".into()
}
fn default_sweeps() -> usize {
    5000
}
fn default_burn_in() -> usize {
    1000
}
fn default_observables() -> Vec<String> {
    vec!["free-energy".into(), "self-overlap".into(), "concentration".into()]
}

pub const OBSERVABLES: [&str; 3] = ["free-energy", "self-overlap", "concentration"];

/// Configuration as read from disk; `model`, `spins` and `eval.path` may be file names
/// relative to the configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: Value,
    pub spins: Value,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trace: bool,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validate: Option<ValidateBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateBlock>,
    /// Written into manifests; ignored on input.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_seeds: Option<BTreeMap<String, u64>>,
}

fn parse_value<D: DeserializeOwned>(v: Value, field: &str) -> Result<D, CliError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        let at = if path == "." { field.to_string() } else { format!("{field}.{path}") };
        CliError::config(format!("{at}: {}", e.inner()))
    })
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

fn inline_or_file<D: DeserializeOwned>(v: &Value, base: &Path, field: &str) -> Result<D, CliError> {
    match v {
        Value::String(name) => {
            let p = base.join(name);
            parse_value(read_json(&p)?, &format!("{field} ({})", p.display()))
        }
        other => parse_value(other.clone(), field),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let field = e.path().to_string();
            CliError::config(format!("{}: field `{field}`: {}", path.display(), e.inner()))
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.inline(base)
    }

    /// Replaces file references by their contents and checks every block.
    fn inline(mut self, base: &Path) -> Result<Self, CliError> {
        let model: ModelFile = inline_or_file(&self.model, base, "model")?;
        let spins: SpinFile = inline_or_file(&self.spins, base, "spins")?;
        self.model = serde_json::to_value(&model).expect("serializable");
        self.spins = serde_json::to_value(&spins).expect("serializable");
        if let Some(ev) = self.eval.as_mut() {
            let p: PathFile = inline_or_file(&ev.path, base, "eval.path")?;
            ev.path = serde_json::to_value(&p).expect("serializable");
        }
        Ok(self)
    }

    pub fn model(&self) -> Result<MixtureModel64, CliError> {
        let m: ModelFile = parse_value(self.model.clone(), "model")?;
        let terms = m.terms.into_iter().map(|t| MixtureTerm { p: t.p, beta: t.beta }).collect();
        MixtureModel::new(m.dim, terms).map_err(|e| CliError::config(format!("model: {e}")))
    }

    pub fn spins(&self, dim: usize) -> Result<SpinMeasure64, CliError> {
        let s: SpinFile = parse_value(self.spins.clone(), "spins")?;
        let measure = match (s.kind.as_deref(), s.atoms) {
            (Some("ising"), None) => SpinMeasure::ising(),
            (Some("potts"), None) => SpinMeasure::potts(s.dim.unwrap_or(dim)),
            (None, Some(atoms)) => {
                let atoms = atoms.into_iter().map(|a| Atom { tau: a.tau, weight: a.w }).collect();
                SpinMeasure::new(dim, atoms).map_err(|e| CliError::config(format!("spins: {e}")))?
            }
            (Some(other), None) => return Err(CliError::config(format!("spins.type: unknown spin type `{other}`"))),
            _ => return Err(CliError::config("spins: give either `type` or `atoms`")),
        };
        if measure.dim() != dim {
            return Err(CliError::config(format!("spins: dimension {} does not match model D = {dim}", measure.dim())));
        }
        Ok(measure)
    }

    /// Fills every unset seed from the global seed, recording what was derived.
    pub fn resolve_seeds(&mut self) {
        let mut derived = BTreeMap::new();
        let g = self.seed;
        let mut fill = |slot: &mut Option<u64>, name: &str, tag: u64| {
            let s = *slot.get_or_insert_with(|| derive_seed(g, tag, 0));
            derived.insert(name.to_string(), s);
        };
        if let Some(v) = self.validate.as_mut() {
            fill(&mut v.seed, "validate", 1);
        }
        if let Some(e) = self.eval.as_mut() {
            fill(&mut e.quadrature.seed, "eval.quadrature", 2);
            if let Some(o) = e.oracle.as_mut() {
                fill(&mut o.seed, "eval.oracle", 3);
            }
        }
        if let Some(s) = self.solve.as_mut() {
            fill(&mut s.optimizer.seed, "solve.optimizer", 4);
            fill(&mut s.optimizer.quadrature.seed, "solve.optimizer.quadrature", 5);
        }
        if let Some(s) = self.simulate.as_mut() {
            fill(&mut s.seed, "simulate", 6);
        }
        self.derived_seeds = Some(derived);
    }
}

pub fn matrix(rows: &Option<Matrix>, dim: usize, field: &str) -> Result<SymMatrix64, CliError> {
    match rows {
        None => Ok(SymMatrix64::zeros(dim)),
        Some(r) => {
            let m = SymMatrix64::from_rows(r).map_err(|e| CliError::config(format!("{field}: {e}")))?;
            if m.dim() != dim {
                return Err(CliError::config(format!("{field}: expected a {dim}x{dim} matrix")));
            }
            Ok(m)
        }
    }
}

pub fn path(v: &Value, dim: usize) -> Result<StepPath64, CliError> {
    let p: PathFile = parse_value(v.clone(), "eval.path")?;
    let values = p
        .values
        .iter()
        .map(|r| SymMatrix64::from_rows(r))
        .collect::<vglass::Result<Vec<_>>>()
        .map_err(CliError::Domain)?;
    if values.iter().any(|v| v.dim() != dim) {
        return Err(CliError::config(format!("eval.path: values must be {dim}x{dim}")));
    }
    StepPath64::new(p.grid, values).map_err(CliError::Domain)
}
