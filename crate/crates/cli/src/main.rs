use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, bail};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize as _;
use wgain_core::dataio::{
    LabelColumn, Scaler, gen_ringnorm, gen_twonorm, load_csv, read_incomplete_csv, write_csv, write_matrix_csv,
};
use wgain_core::experiment::{ExperimentConfig, run, stats_from_tables, write_report};
use wgain_core::imputer::{ImputerSpec, SavedModel};
use wgain_core::stats::Direction;

/// Missing-data imputation and rank-based benchmarking.
#[derive(Parser)]
#[command(name = "wgain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Higher,
    Lower,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Wgain,
    Gain,
    Dae,
    Knn,
    Mice,
    Mean,
}

#[derive(Clone, Copy, ValueEnum)]
enum Synthetic {
    Twonorm,
    Ringnorm,
}

#[derive(Subcommand)]
enum Command {
    /// Run a benchmark described by a TOML config and write the report.
    Run {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Rank a datasets x methods score table and run the rank tests.
    Stats {
        table: PathBuf,
        #[arg(long, value_enum, default_value = "higher")]
        direction: DirectionArg,
        /// Method to compare every other method against.
        #[arg(long)]
        control: Option<String>,
        #[arg(long, default_value_t = 0.10)]
        alpha: f64,
    },
    /// Train an imputer on a complete CSV and save it as JSON.
    Train {
        data: PathBuf,
        #[arg(long, value_enum)]
        imputer: Kind,
        /// TOML file with imputer settings; defaults are used without it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Column to drop before training, usually the class label.
        #[arg(long)]
        label: Option<String>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Fill the empty cells of a CSV with a saved model.
    Impute {
        model: PathBuf,
        input: PathBuf,
        /// Defaults to standard output.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic benchmark dataset as CSV.
    Gen {
        #[arg(value_enum)]
        kind: Synthetic,
        #[arg(long, default_value_t = 7400)]
        n: usize,
        #[arg(long, default_value_t = 20)]
        d: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: PathBuf,
    },
}

fn spec_for(kind: Kind, config: Option<&PathBuf>) -> anyhow::Result<ImputerSpec> {
    let tag = match kind {
        Kind::Wgain => "wgain",
        Kind::Gain => "gain",
        Kind::Dae => "dae",
        Kind::Knn => "knn",
        Kind::Mice => "mice",
        Kind::Mean => "mean",
    };
    let body = match config {
        Some(p) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        None => String::new(),
    };
    let mut table: toml::Table = toml::from_str(&body).context("parsing imputer settings")?;
    table.insert("kind".into(), toml::Value::String(tag.into()));
    ImputerSpec::deserialize(table).context("invalid imputer settings")
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config, output } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            let report = run(&cfg)?;
            let files = write_report(&report, &cfg.output_dir)?;
            let failed = report.cells.iter().filter(|c| c.error.is_some()).count();
            eprintln!(
                "wrote {} files to {} ({} cells, {failed} failed)",
                files.len(),
                cfg.output_dir.display(),
                report.cells.len()
            );
        }
        Command::Stats {
            table,
            direction,
            control,
            alpha,
        } => {
            let direction = match direction {
                DirectionArg::Higher => Direction::HigherBetter,
                DirectionArg::Lower => Direction::LowerBetter,
            };
            let report = stats_from_tables(&table, direction, control.as_deref(), alpha)?;
            print!("{}", report.render());
        }
        Command::Train {
            data,
            imputer,
            config,
            label,
            seed,
            output,
        } => {
            let spec = spec_for(imputer, config.as_ref())?;
            let features = match label {
                Some(l) => load_csv(&data, &LabelColumn::Name(l))?.features,
                None => {
                    let t = read_incomplete_csv(&data)?;
                    if t.mask.missing_count() > 0 {
                        bail!("{} has empty cells; training needs complete rows", data.display());
                    }
                    t.values
                }
            };
            let scaler = Scaler::fit(&features)?;
            for w in &scaler.warnings {
                eprintln!("warning: {w}");
            }
            let model = spec.train(&scaler.transform(&features)?, seed)?;
            SavedModel { scaler, imputer: model }.save(&output)?;
            eprintln!("saved {} model to {}", spec.name(), output.display());
        }
        Command::Impute {
            model,
            input,
            output,
            seed,
        } => {
            let model = SavedModel::load(&model)?;
            let table = read_incomplete_csv(&input)?;
            if table.values.cols() != model.imputer.dim() {
                bail!(
                    "{} has {} columns but the model expects {}",
                    input.display(),
                    table.values.cols(),
                    model.imputer.dim()
                );
            }
            let filled = model.impute_raw(&table.values, &table.mask, seed)?;
            match output {
                Some(path) => write_matrix_csv(&path, &table.column_names, &filled)?,
                None => {
                    println!("{}", table.column_names.join(","));
                    for r in 0..filled.rows() {
                        let row: Vec<String> = filled.row(r).iter().map(|v| format!("{v:?}")).collect();
                        println!("{}", row.join(","));
                    }
                }
            }
        }
        Command::Gen { kind, n, d, seed, output } => {
            let ds = match kind {
                Synthetic::Twonorm => gen_twonorm(n, d, seed)?,
                Synthetic::Ringnorm => gen_ringnorm(n, d, seed)?,
            };
            write_csv(&ds, &output)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
