use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vrft_cli::config::ExperimentConfig;
use vrft_cli::pipeline::{self, ControllerSource};
use vrft_cli::{io, CliError};

/// Data-driven controller synthesis: generate benchmark data, design
/// dictionary controllers by least squares or lasso, and evaluate them in
/// closed loop.
#[derive(Parser)]
#[command(name = "vrft", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Excite the configured plant and write dataset.csv + sidecar.
    Generate {
        #[command(flatten)]
        common: Common,
    },
    /// Fit a controller on a dataset file and write controller.json.
    Design {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV with columns t,u,y.
        #[arg(long)]
        data: PathBuf,
        /// Controller output path (default: <output_dir>/controller.json).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulate a controller in closed loop and write result.csv + summary.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Controller JSON produced by `design`.
        #[arg(long, conflicts_with = "ideal")]
        controller: Option<PathBuf>,
        /// Use the built-in ideal controller for the configured plant.
        #[arg(long)]
        ideal: bool,
    },
    /// Run the full matrix: generate, then design + evaluate every cell.
    Experiment {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig, CliError> {
    let text = io::read_to_string(&common.config)?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(dir) = &common.output_dir {
        config.output_dir = dir.clone();
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { common } => {
            let config = load_config(&common)?;
            let (csv, meta) = pipeline::run_generate(&config)?;
            println!("wrote {} and {}", csv.display(), meta.display());
        }
        Command::Design {
            common,
            data,
            output,
        } => {
            let config = load_config(&common)?;
            let (_, path, summary) = pipeline::run_design(&config, &data, output.as_deref())?;
            println!("{summary}");
            println!("wrote {}", path.display());
        }
        Command::Evaluate {
            common,
            controller,
            ideal,
        } => {
            let config = load_config(&common)?;
            let source = match (controller, ideal) {
                (Some(path), false) => ControllerSource::File(path),
                (None, true) => ControllerSource::Ideal,
                (None, false) => {
                    return Err(CliError::Validation(
                        "evaluate needs --controller <file> or --ideal".into(),
                    ))
                }
                (Some(_), true) => unreachable!("clap conflicts_with"),
            };
            let (result, csv, json) = pipeline::run_evaluate(&config, &source)?;
            println!(
                "J={:.6e} stable={} wrote {} and {}",
                result.cost(),
                result.stable(),
                csv.display(),
                json.display()
            );
        }
        Command::Experiment { common } => {
            let config = load_config(&common)?;
            let report = pipeline::run_experiment(&config)?;
            print!("{}", pipeline::render_table(&report));
            println!(
                "wrote {}",
                config.output_dir.join("report.json").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
