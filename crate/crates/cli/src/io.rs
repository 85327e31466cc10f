//! On-disk formats: dataset CSV with a JSON sidecar, controller JSON, and
//! closed-loop result files. Every file embeds the resolved experiment
//! config for provenance.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vrft_core::{ClosedLoopResult, ControllerParams, Dataset, Signal, TransferFunction};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Sidecar written next to every dataset CSV.
#[derive(Debug, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub plant: String,
    pub input_seed: u64,
    pub noise_seed: u64,
    pub sigma: f64,
    pub excitation_filter: FilterCoefficients,
    pub config: ExperimentConfig,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub num: Vec<f64>,
    pub den: Vec<f64>,
    pub gain_a: f64,
}

impl FilterCoefficients {
    pub fn new(tf: &TransferFunction, gain_a: f64) -> Self {
        Self {
            num: tf.num().to_vec(),
            den: tf.den().to_vec(),
            gain_a,
        }
    }
}

/// The controller file: the fitted parameters plus the config that produced
/// them.
#[derive(Debug, Serialize, Deserialize)]
pub struct ControllerFile {
    #[serde(flatten)]
    pub params: ControllerParams,
    pub config: ExperimentConfig,
}

/// JSON summary written next to every result CSV.
#[derive(Debug, Serialize, Deserialize)]
pub struct ResultSummary {
    pub j: f64,
    pub stable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divergence_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nonzero_count: Option<usize>,
    pub config: ExperimentConfig,
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, contents)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Runtime(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

/// Writes a dataset as CSV with columns t, u, y (t is 1-based).
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<(), CliError> {
    let mut buf = Vec::with_capacity(data.len() * 32);
    writeln!(buf, "t,u,y").expect("writing to memory");
    for (t, (u, y)) in data.u().iter().zip(data.y().iter()).enumerate() {
        writeln!(buf, "{},{},{}", t + 1, u, y).expect("writing to memory");
    }
    write_file(path, &buf)
}

/// Parses a dataset CSV (header t,u,y). Errors carry the 1-based line number.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset, CliError> {
    let text = read_to_string(path)?;
    parse_dataset_csv(&text).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

pub fn parse_dataset_csv(text: &str) -> Result<Dataset, String> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or("line 1: empty file")?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["t", "u", "y"] {
        return Err(format!("line 1: expected header `t,u,y`, got `{header}`"));
    }
    let mut u = Vec::new();
    let mut y = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(format!(
                "line {lineno}: expected 3 comma-separated fields, got {}",
                fields.len()
            ));
        }
        let parse = |s: &str, name: &str| -> Result<f64, String> {
            s.parse::<f64>()
                .map_err(|_| format!("line {lineno}: cannot parse {name} value `{s}`"))
        };
        u.push(parse(fields[1], "u")?);
        y.push(parse(fields[2], "y")?);
    }
    let u = Signal::new(u).map_err(|e| format!("u column: {e}"))?;
    let y = Signal::new(y).map_err(|e| format!("y column: {e}"))?;
    Dataset::new(u, y).map_err(|e| e.to_string())
}

pub fn write_controller(path: &Path, params: &ControllerParams, config: &ExperimentConfig) -> Result<(), CliError> {
    let file = ControllerFile {
        params: params.clone(),
        config: config.clone(),
    };
    write_json(path, &file)
}

pub fn read_controller(path: &Path) -> Result<ControllerFile, CliError> {
    let text = read_to_string(path)?;
    let file: ControllerFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    vrft_core::solvers::validate_params(&file.params)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    Ok(file)
}

pub fn write_result(
    dir: &Path,
    stem: &str,
    run: &ClosedLoopResult,
    nonzero_count: Option<usize>,
    config: &ExperimentConfig,
) -> Result<(PathBuf, PathBuf), CliError> {
    ensure_dir(dir)?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut buf = Vec::new();
    run.write_csv(&mut buf)
        .map_err(|e| CliError::Runtime(format!("cannot render {}: {e}", csv_path.display())))?;
    write_file(&csv_path, &buf)?;

    let json_path = dir.join(format!("{stem}.json"));
    write_json(
        &json_path,
        &ResultSummary {
            j: run.cost(),
            stable: run.stable(),
            divergence_index: run.divergence_index(),
            nonzero_count,
            config: config.clone(),
        },
    )?;
    Ok((csv_path, json_path))
}
