//! Model and run configuration: a sectioned key-value file (TOML) or the
//! same structure as JSON, chosen by file extension.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use longvol::{
    Atom, DensityFamily, DiscreteModel, ModelConfig, NoiseKind, SeqFamily, SignedMeasure,
    SimConfig, Support,
};

use crate::error::{CliError, ErrorKind};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub model: ModelSpec,
    #[serde(default)]
    pub sim: SimSpec,
    #[serde(default)]
    pub solve: SolveSpec,
    #[serde(default)]
    pub gamma: GammaSpec,
    #[serde(default)]
    pub discrete: Option<DiscreteSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub sigma: f64,
    pub beta: f64,
    #[serde(default)]
    pub mu: f64,
    pub lambda: LambdaSpec,
    pub kappa: MeasureSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSpec {
    /// Delay span: the measure lives on the last tau units of the past.
    #[serde(default)]
    pub tau: f64,
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default = "zero_density")]
    pub density: DensityFamily,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<Atom>,
    #[serde(default = "zero_density")]
    pub density: DensityFamily,
}

fn zero_density() -> DensityFamily {
    DensityFamily::Zero
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSpec {
    pub t_end: f64,
    pub step: f64,
    pub paths: usize,
    pub seed: u64,
    pub s0: f64,
    /// Number of leading paths echoed to the per-path CSV; 0 disables it.
    pub emit_paths: usize,
    /// Lags for the autocovariance estimators, anchored at t_end - max(lag).
    pub autocov_lags: Vec<f64>,
    pub efficiency_delta: f64,
    pub efficiency_big_delta: f64,
    pub efficiency_t: f64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            t_end: 50.0,
            step: 0.01,
            paths: 1000,
            seed: 42,
            s0: 1.0,
            emit_paths: 0,
            autocov_lags: vec![1.0, 5.0],
            efficiency_delta: 1.0,
            efficiency_big_delta: 5.0,
            efficiency_t: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSpec {
    pub horizon: f64,
    pub step: f64,
    /// Include the resolvent column in the moment CSV.
    pub resolvent: bool,
}

impl Default for SolveSpec {
    fn default() -> Self {
        SolveSpec { horizon: 200.0, step: 0.05, resolvent: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GammaSpec {
    pub deltas: Vec<f64>,
}

impl Default for GammaSpec {
    fn default() -> Self {
        GammaSpec { deltas: vec![1.0, 10.0, 100.0, 1000.0, 10000.0] }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSpec {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_discrete_paths")]
    pub paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseSpec,
    pub seq: SeqSpec,
    #[serde(default)]
    pub emit_paths: usize,
    /// Defaults to the model sigma.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Defaults to the model beta; for a from_kernel sequence it defaults
    /// to beta * sqrt(step), the scaling under which the recursion matches
    /// the continuous scheme exactly.
    #[serde(default)]
    pub beta: Option<f64>,
}

fn default_steps() -> usize {
    64
}

fn default_discrete_paths() -> usize {
    1000
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    StandardNormal,
    Rademacher,
}

impl From<NoiseSpec> for NoiseKind {
    fn from(spec: NoiseSpec) -> NoiseKind {
        match spec {
            NoiseSpec::StandardNormal => NoiseKind::StandardNormal,
            NoiseSpec::Rademacher => NoiseKind::Rademacher,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqSpec {
    PowerLawSeq { c: f64, alpha: f64 },
    FiniteSeq(Vec<f64>),
    /// Kernel increments of the [model] section's kernel at the given step.
    FromKernel { step: f64 },
}

pub fn load(path: &Path) -> Result<FileConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::new(ErrorKind::Config, "cli", "load_config", format!("{}: {e}", path.display()))
    })?;
    let parsed = if path.extension().is_some_and(|x| x == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        toml::from_str(&text).map_err(|e| e.to_string())
    };
    parsed.map_err(|e| {
        CliError::new(ErrorKind::Config, "cli", "load_config", format!("{}: {e}", path.display()))
    })
}

impl FileConfig {
    pub fn build_measures(&self) -> Result<(SignedMeasure, SignedMeasure), CliError> {
        let m = &self.model;
        let lambda = SignedMeasure::new(
            Support::DelayInterval(m.lambda.tau),
            m.lambda.atoms.clone(),
            m.lambda.density.clone(),
        )
        .map_err(|e| CliError::from_lib(e, "measures", "lambda"))?;
        let kappa = SignedMeasure::new(
            Support::NonnegativeHalfLine,
            m.kappa.atoms.clone(),
            m.kappa.density.clone(),
        )
        .map_err(|e| CliError::from_lib(e, "measures", "kappa"))?;
        Ok((lambda, kappa))
    }

    pub fn build_model(&self) -> Result<ModelConfig, CliError> {
        let (lambda, kappa) = self.build_measures()?;
        let m = &self.model;
        ModelConfig::new(m.sigma, m.beta, m.mu, lambda, kappa)
            .map_err(|e| CliError::from_lib(e, "moments", "model_config"))
    }

    pub fn build_sim(&self, model: ModelConfig) -> Result<SimConfig, CliError> {
        let s = &self.sim;
        SimConfig::new(model, s.t_end, s.step, s.paths, s.seed, s.s0)
            .map_err(|e| CliError::from_lib(e, "simulate", "sim_config"))
    }

    pub fn build_discrete(&self, model: &ModelConfig) -> Result<(DiscreteModel, DiscreteSpec), CliError> {
        let spec = self.discrete.clone().ok_or_else(|| {
            CliError::new(
                ErrorKind::Config,
                "cli",
                "build_discrete",
                "config has no [discrete] section".to_string(),
            )
        })?;
        let mut beta = spec.beta.unwrap_or(self.model.beta);
        let seq = match &spec.seq {
            SeqSpec::PowerLawSeq { c, alpha } => SeqFamily::PowerLawSeq { c: *c, alpha: *alpha },
            SeqSpec::FiniteSeq(a) => SeqFamily::FiniteSeq(a.clone()),
            SeqSpec::FromKernel { step } => {
                if spec.beta.is_none() {
                    beta = self.model.beta * step.sqrt();
                }
                SeqFamily::FromKernel { model: model.clone(), h: *step }
            }
        };
        let sigma = spec.sigma.unwrap_or(self.model.sigma);
        let m = DiscreteModel::new(sigma, beta, seq, spec.noise.into())
            .map_err(|e| CliError::from_lib(e, "discrete", "discrete_model"))?;
        Ok((m, spec))
    }
}
