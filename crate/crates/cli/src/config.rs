//! Experiment configuration: one flat JSON document fully describes a run,
//! and every output file embeds the resolved copy, so results are
//! reproducible from their own sidecars.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use vrft_core::{Dictionary, InputKind, ObjectiveScaling, TransferFunction};

use crate::CliError;

pub const DEFAULT_ALPHA: f64 = 0.001;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in plant id (1 or 2).
    pub plant: u8,
    /// Number of samples to record.
    #[serde(default = "default_n")]
    pub n: usize,
    /// Standard deviation of the measurement noise on the recorded output.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub reference_model: ReferenceModelConfig,
    /// Dictionary for single-design commands; experiment cells may override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<Dictionary>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Experiment design matrix; when absent, `experiment` falls back to the
    /// single dictionary/solver pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub designs: Option<Vec<DesignCell>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    #[serde(default = "default_input_kind")]
    pub kind: String,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    /// Dwell of the raw step levels; ignored for the random kind.
    #[serde(default = "default_input_dwell")]
    pub dwell: usize,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            kind: default_input_kind(),
            amplitude: default_amplitude(),
            seed: 0,
            dwell: default_input_dwell(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceModelConfig {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl Default for ReferenceModelConfig {
    fn default() -> Self {
        // 0.01 / (z - 0.9)^2: unit dc gain, relative degree two.
        Self {
            num: vec![0.01],
            den: vec![1.0, -1.8, 0.81],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// "ols" or "lasso".
    #[serde(default = "default_solver_kind")]
    pub kind: String,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_scaling")]
    pub scaling: ObjectiveScaling,
    #[serde(default)]
    pub standardize: bool,
    /// Optional alpha sweep for `experiment`; solved in descending order
    /// with warm starts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kind: default_solver_kind(),
            alpha: default_alpha(),
            tol: default_tol(),
            max_iter: default_max_iter(),
            scaling: default_scaling(),
            standardize: false,
            alphas: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvaluationConfig {
    #[serde(default = "default_eval_amplitudes")]
    pub amplitudes: Vec<f64>,
    #[serde(default = "default_eval_dwell")]
    pub dwell: usize,
    /// Measurement noise during closed-loop evaluation; defaults to zero so
    /// the reported cost measures tracking alone.
    #[serde(default)]
    pub sigma: f64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            amplitudes: default_eval_amplitudes(),
            dwell: default_eval_dwell(),
            sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignCell {
    pub dictionary: Dictionary,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_n() -> usize {
    1000
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_sigma() -> f64 {
    0.05
}
fn default_input_kind() -> String {
    "random".into()
}
fn default_amplitude() -> f64 {
    vrft_core::plant::DEFAULT_INPUT_AMPLITUDE
}
fn default_input_dwell() -> usize {
    vrft_core::plant::DEFAULT_STEP_DWELL
}
fn default_solver_kind() -> String {
    "lasso".into()
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_tol() -> f64 {
    vrft_core::solvers::DEFAULT_LASSO_TOL
}
fn default_max_iter() -> usize {
    vrft_core::solvers::DEFAULT_MAX_ITER
}
fn default_scaling() -> ObjectiveScaling {
    ObjectiveScaling::PerSample
}
fn default_eval_amplitudes() -> Vec<f64> {
    vrft_core::closed_loop::DEFAULT_EVAL_AMPLITUDES.to_vec()
}
fn default_eval_dwell() -> usize {
    vrft_core::closed_loop::DEFAULT_EVAL_DWELL
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Validation(msg));
        if !matches!(self.plant, 1 | 2) {
            return fail(format!("plant must be 1 or 2, got {}", self.plant));
        }
        if self.n < 10 {
            return fail(format!("n must be at least 10, got {}", self.n));
        }
        if !(self.sigma >= 0.0) {
            return fail(format!("sigma must be nonnegative, got {}", self.sigma));
        }
        if !(self.input.amplitude >= 0.0) {
            return fail(format!(
                "input.amplitude must be nonnegative, got {}",
                self.input.amplitude
            ));
        }
        if self.input.kind != "random" && self.input.kind != "steps" {
            return fail(format!(
                "input.kind must be `random` or `steps`, got `{}`",
                self.input.kind
            ));
        }
        if self.input.kind == "steps" && self.input.dwell == 0 {
            return fail("input.dwell must be at least 1".into());
        }
        self.reference_model()?;
        self.solver.validate()?;
        if let Some(cells) = &self.designs {
            if cells.is_empty() {
                return fail("designs must be nonempty when present".into());
            }
            for cell in cells {
                cell.solver.validate()?;
            }
        }
        if !(self.evaluation.sigma >= 0.0) {
            return fail(format!(
                "evaluation.sigma must be nonnegative, got {}",
                self.evaluation.sigma
            ));
        }
        if self.evaluation.dwell == 0 {
            return fail("evaluation.dwell must be at least 1".into());
        }
        if self.evaluation.amplitudes.is_empty() {
            return fail("evaluation.amplitudes must be nonempty".into());
        }
        Ok(())
    }

    pub fn reference_model(&self) -> Result<TransferFunction, CliError> {
        TransferFunction::new(self.reference_model.num.clone(), self.reference_model.den.clone())
            .map_err(|e| CliError::Validation(format!("reference_model: {e}")))
    }

    pub fn input_kind(&self) -> InputKind {
        match self.input.kind.as_str() {
            "steps" => InputKind::Steps {
                dwell: self.input.dwell,
            },
            _ => InputKind::Random,
        }
    }

    /// The design matrix: explicit cells, or the single configured
    /// dictionary/solver pair.
    pub fn cells(&self) -> Result<Vec<DesignCell>, CliError> {
        match (&self.designs, &self.dictionary) {
            (Some(cells), _) => Ok(cells.clone()),
            (None, Some(dict)) => Ok(vec![DesignCell {
                dictionary: dict.clone(),
                solver: self.solver.clone(),
            }]),
            (None, None) => Err(CliError::Validation(
                "experiment needs `designs` or a top-level `dictionary`".into(),
            )),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |msg: String| Err(CliError::Validation(msg));
        if self.kind != "ols" && self.kind != "lasso" {
            return fail(format!(
                "solver.kind must be `ols` or `lasso`, got `{}`",
                self.kind
            ));
        }
        if !(self.alpha >= 0.0) {
            return fail(format!("solver.alpha must be nonnegative, got {}", self.alpha));
        }
        if !(self.tol > 0.0) {
            return fail(format!("solver.tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return fail("solver.max_iter must be at least 1".into());
        }
        if let Some(alphas) = &self.alphas {
            if alphas.is_empty() {
                return fail("solver.alphas must be nonempty when present".into());
            }
            if alphas.iter().any(|a| !(*a >= 0.0)) {
                return fail("solver.alphas entries must be nonnegative".into());
            }
        }
        Ok(())
    }
}
