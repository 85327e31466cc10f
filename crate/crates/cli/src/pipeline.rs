//! The experiment pipeline behind the CLI verbs: generate a dataset from the
//! configured plant, design controllers over the configured design matrix,
//! and evaluate each design in closed loop. Pure stages are separated from
//! their file-writing wrappers so the same code drives tests and the binary.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vrft_core::{
    build_regression, derive_seed, excitation_filter, gen_input, lasso_cd_with, ols_solve,
    simulate_closed_loop, simulate_plant, ClosedLoopResult, Controller, ControllerParams, Dataset,
    HammersteinPlant, LassoOptions, NoiseSpec,
};

use crate::config::{DesignCell, ExperimentConfig, SolverConfig};
use crate::io::{self, DatasetMeta, FilterCoefficients};
use crate::CliError;

/// Seed streams derived from the configured input seed.
const STREAM_MEASUREMENT_NOISE: u64 = 1;
const STREAM_EVALUATION_NOISE: u64 = 2;

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

pub fn plant(config: &ExperimentConfig) -> Result<HammersteinPlant, CliError> {
    HammersteinPlant::builtin(config.plant).map_err(|e| CliError::Validation(e.to_string()))
}

/// Measurement-noise spec for the recorded dataset.
pub fn dataset_noise(config: &ExperimentConfig) -> Result<NoiseSpec, CliError> {
    NoiseSpec::new(config.sigma, derive_seed(config.input.seed, STREAM_MEASUREMENT_NOISE))
        .map_err(|e| CliError::Validation(e.to_string()))
}

/// Excites the configured plant and records the input-output dataset.
pub fn generate_dataset(config: &ExperimentConfig) -> Result<Dataset, CliError> {
    let td = config.reference_model()?;
    let plant = plant(config)?;
    let u = gen_input(
        config.input_kind(),
        config.n,
        config.input.amplitude,
        config.input.seed,
        &td,
    )
    .map_err(runtime)?;
    let y = simulate_plant(&plant, &u, &dataset_noise(config)?).map_err(runtime)?;
    Dataset::new(u, y).map_err(runtime)
}

/// Fits one design cell on a dataset. `warm_start` carries coefficients
/// between alpha-sweep steps.
pub fn design_on(
    config: &ExperimentConfig,
    data: &Dataset,
    cell: &DesignCell,
    alpha: f64,
    warm_start: Option<Vec<f64>>,
) -> Result<ControllerParams, CliError> {
    let td = config.reference_model()?;
    let problem = build_regression(data, &td, &cell.dictionary).map_err(runtime)?;
    match cell.solver.kind.as_str() {
        "ols" => ols_solve(&problem).map_err(runtime),
        _ => {
            let mut opts = LassoOptions::new(alpha);
            opts.tol = cell.solver.tol;
            opts.max_iter = cell.solver.max_iter;
            opts.scaling = cell.solver.scaling;
            opts.standardize = cell.solver.standardize;
            opts.warm_start = warm_start;
            lasso_cd_with(&problem, &opts).map_err(runtime)
        }
    }
}

/// Evaluates a controller in closed loop against the configured reference.
/// `cell_index` decorrelates evaluation noise across concurrent cells.
pub fn evaluate_controller(
    config: &ExperimentConfig,
    controller: &mut Controller,
    cell_index: u64,
) -> Result<ClosedLoopResult, CliError> {
    let td = config.reference_model()?;
    let plant = plant(config)?;
    let r = vrft_core::eval_reference(&config.evaluation.amplitudes, config.evaluation.dwell)
        .map_err(runtime)?;
    let noise = NoiseSpec::new(
        config.evaluation.sigma,
        derive_seed(config.input.seed, STREAM_EVALUATION_NOISE + cell_index),
    )
    .map_err(runtime)?;
    simulate_closed_loop(&plant, controller, &r, &noise, &td).map_err(runtime)
}

/// `generate` verb: dataset CSV plus its JSON sidecar.
pub fn run_generate(config: &ExperimentConfig) -> Result<(PathBuf, PathBuf), CliError> {
    let data = generate_dataset(config)?;
    let td = config.reference_model()?;
    let (shaping, gain_a) = excitation_filter(&td).map_err(runtime)?;
    io::ensure_dir(&config.output_dir)?;
    let csv_path = config.output_dir.join("dataset.csv");
    io::write_dataset_csv(&csv_path, &data)?;
    let meta_path = config.output_dir.join("dataset.meta.json");
    io::write_json(
        &meta_path,
        &DatasetMeta {
            plant: format!("plant-{}", config.plant),
            input_seed: config.input.seed,
            noise_seed: derive_seed(config.input.seed, STREAM_MEASUREMENT_NOISE),
            sigma: config.sigma,
            excitation_filter: FilterCoefficients::new(&shaping, gain_a),
            config: config.clone(),
        },
    )?;
    Ok((csv_path, meta_path))
}

/// `design` verb: fit the configured dictionary/solver on a dataset file and
/// write the controller JSON. Returns the params, the output path, and the
/// one-line summary.
pub fn run_design(
    config: &ExperimentConfig,
    dataset_path: &Path,
    output: Option<&Path>,
) -> Result<(ControllerParams, PathBuf, String), CliError> {
    let dict = config.dictionary.clone().ok_or_else(|| {
        CliError::Validation("design needs a top-level `dictionary` in the config".into())
    })?;
    let data = io::read_dataset_csv(dataset_path)?;
    let cell = DesignCell {
        dictionary: dict,
        solver: config.solver.clone(),
    };
    let params = design_on(config, &data, &cell, config.solver.alpha, None)?;
    let path = output
        .map(Path::to_path_buf)
        .unwrap_or_else(|| config.output_dir.join("controller.json"));
    io::write_controller(&path, &params, config)?;
    let d = params.diagnostics();
    let summary = format!(
        "m={} nonzero={} objective={:.6e} converged={}",
        params.dictionary().m(),
        params.nonzero_count(),
        d.objective,
        d.converged
    );
    Ok((params, path, summary))
}

/// Controller source for the `evaluate` verb.
pub enum ControllerSource {
    File(PathBuf),
    Ideal,
}

/// `evaluate` verb: run the closed loop and write result CSV + JSON summary.
pub fn run_evaluate(
    config: &ExperimentConfig,
    source: &ControllerSource,
) -> Result<(ClosedLoopResult, PathBuf, PathBuf), CliError> {
    let (mut controller, nonzero) = match source {
        ControllerSource::Ideal => (
            Controller::ideal(config.plant).map_err(|e| CliError::Validation(e.to_string()))?,
            None,
        ),
        ControllerSource::File(path) => {
            let file = io::read_controller(path)?;
            let dict = file.params.dictionary();
            if let Some(expected) = &config.dictionary {
                if expected.m() != dict.m() || expected.scale() != dict.scale() {
                    return Err(CliError::Validation(format!(
                        "controller dictionary (m={}, scale={}) does not match config (m={}, scale={})",
                        dict.m(),
                        dict.scale(),
                        expected.m(),
                        expected.scale()
                    )));
                }
            }
            let nonzero = file.params.nonzero_count();
            (Controller::from_params(file.params), Some(nonzero))
        }
    };
    let run = evaluate_controller(config, &mut controller, 0)?;
    let (csv_path, json_path) =
        io::write_result(&config.output_dir, "result", &run, nonzero, config)?;
    Ok((run, csv_path, json_path))
}

/// One row of the experiment report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellReport {
    pub label: String,
    pub dictionary_kind: String,
    pub m: usize,
    pub solver: String,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonzero: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub converged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result_path: Option<PathBuf>,
    /// Set when this cell failed; the run continues with the other cells.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub dataset_csv: PathBuf,
    pub cells: Vec<CellReport>,
}

fn dictionary_kind_name(dict: &vrft_core::Dictionary) -> &'static str {
    match dict.kind() {
        vrft_core::DictionaryKind::PolynomialOdd => "polynomial-odd",
        vrft_core::DictionaryKind::Deadzone { .. } => "deadzone",
        vrft_core::DictionaryKind::Custom { .. } => "custom",
    }
}

fn cell_label(cell: &DesignCell, alpha: f64) -> String {
    let kind = dictionary_kind_name(&cell.dictionary);
    let m = cell.dictionary.m();
    match cell.solver.kind.as_str() {
        "ols" => format!("{kind}-m{m}-ols"),
        _ => format!("{kind}-m{m}-lasso-a{alpha}"),
    }
}

/// `experiment` verb: generate once, then design and evaluate every cell of
/// the matrix (expanding alpha sweeps in descending order with warm starts).
/// Cell failures are recorded in the report; remaining cells still run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport, CliError> {
    let cells = config.cells()?;
    let (dataset_csv, _) = run_generate(config)?;
    let data = generate_dataset(config)?;

    let mut reports = Vec::new();
    let mut cell_index: u64 = 0;
    for cell in &cells {
        // Descending alpha order so each solution warm-starts the next.
        let alphas: Vec<f64> = match (&cell.solver.alphas, cell.solver.kind.as_str()) {
            (Some(list), "lasso") => {
                let mut sorted = list.clone();
                sorted.sort_by(|a, b| b.partial_cmp(a).expect("validated finite"));
                sorted
            }
            _ => vec![cell.solver.alpha],
        };
        let mut warm: Option<Vec<f64>> = None;
        for &alpha in &alphas {
            let label = cell_label(cell, alpha);
            let report = run_cell(config, &data, cell, alpha, &mut warm, cell_index, &label);
            reports.push(report);
            cell_index += 1;
        }
    }

    let report = ExperimentReport {
        config: config.clone(),
        dataset_csv,
        cells: reports,
    };
    io::write_json(&config.output_dir.join("report.json"), &report)?;
    io::write_file(
        &config.output_dir.join("report.txt"),
        render_table(&report).as_bytes(),
    )?;
    Ok(report)
}

fn run_cell(
    config: &ExperimentConfig,
    data: &Dataset,
    cell: &DesignCell,
    alpha: f64,
    warm: &mut Option<Vec<f64>>,
    cell_index: u64,
    label: &str,
) -> CellReport {
    let mut report = CellReport {
        label: label.to_string(),
        dictionary_kind: dictionary_kind_name(&cell.dictionary).to_string(),
        m: cell.dictionary.m(),
        solver: cell.solver.kind.clone(),
        alpha,
        nonzero: None,
        objective: None,
        converged: None,
        iterations: None,
        j: None,
        stable: None,
        divergence_index: None,
        controller_path: None,
        result_path: None,
        error: None,
    };

    let params = match design_on(config, data, cell, alpha, warm.clone()) {
        Ok(p) => p,
        Err(e) => {
            report.error = Some(e.to_string());
            return report;
        }
    };
    *warm = Some(params.rho().to_vec());
    report.nonzero = Some(params.nonzero_count());
    report.objective = Some(params.diagnostics().objective);
    report.converged = Some(params.diagnostics().converged);
    report.iterations = Some(params.diagnostics().iterations);

    let cell_dir = config.output_dir.join("cells").join(label);
    let controller_path = cell_dir.join("controller.json");
    if let Err(e) = io::write_controller(&controller_path, &params, config) {
        report.error = Some(e.to_string());
        return report;
    }
    report.controller_path = Some(controller_path);

    let nonzero = params.nonzero_count();
    let mut controller = Controller::from_params(params);
    match evaluate_controller(config, &mut controller, cell_index) {
        Ok(run) => {
            report.j = Some(run.cost());
            report.stable = Some(run.stable());
            report.divergence_index = run.divergence_index();
            match io::write_result(&cell_dir, "result", &run, Some(nonzero), config) {
                Ok((csv, _)) => report.result_path = Some(csv),
                Err(e) => report.error = Some(e.to_string()),
            }
        }
        Err(e) => report.error = Some(e.to_string()),
    }
    report
}

/// Human-readable experiment table.
pub fn render_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<34} {:>4} {:>6} {:>9} {:>8} {:>12} {:>8}\n",
        "cell", "m", "solver", "alpha", "nonzero", "J", "stable"
    ));
    for c in &report.cells {
        let j = c
            .j
            .map(|v| format!("{v:.4e}"))
            .unwrap_or_else(|| "-".into());
        let stable = match c.stable {
            Some(true) => "yes",
            Some(false) => "no",
            None => "-",
        };
        let nonzero = c
            .nonzero
            .map(|v| v.to_string())
            .unwrap_or_else(|| "-".into());
        out.push_str(&format!(
            "{:<34} {:>4} {:>6} {:>9} {:>8} {:>12} {:>8}\n",
            c.label, c.m, c.solver, c.alpha, nonzero, j, stable
        ));
        if let Some(err) = &c.error {
            out.push_str(&format!("    error: {err}\n"));
        }
    }
    out
}

/// Convenience for tests and the acceptance suite: design a cell on a fresh
/// dataset for the given seed, without touching the filesystem.
pub fn design_for_seed(
    base: &ExperimentConfig,
    seed: u64,
    dictionary: vrft_core::Dictionary,
    solver: SolverConfig,
) -> Result<ControllerParams, CliError> {
    let mut config = base.clone();
    config.input.seed = seed;
    let data = generate_dataset(&config)?;
    let cell = DesignCell {
        dictionary,
        solver: solver.clone(),
    };
    design_on(&config, &data, &cell, solver.alpha, None)
}
