//! Command line front end for the sleep staging pipeline.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or parse error, 3 training
//! failure. Every failure prints one `error[category]: message` line to
//! stderr.

mod commands;
mod config;
mod error;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "somnoscore", version, about = "Two-channel EEG sleep stage scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print an EDF file's header, signal table, and annotation summary.
    Inspect {
        /// EDF/EDF+ file to inspect.
        file: PathBuf,
    },
    /// Build a labeled 30 s segment cache from a corpus directory.
    Prepare {
        /// Directory of `SC4ssN*-PSG.edf` recordings with
        /// `*-Hypnogram.edf` companions.
        #[arg(long)]
        data_dir: PathBuf,
        /// Cache file to write.
        #[arg(long)]
        out: PathBuf,
        /// Per-recording scaling: "zscore" or "none".
        #[arg(long, default_value = "zscore")]
        standardize: String,
    },
    /// Train one fold or the whole leave-one-patient-out campaign.
    Train {
        /// Flat key=value configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Train only this fold (1-based patient position).
        #[arg(long)]
        fold: Option<u32>,
        /// Retrain folds whose model files already exist.
        #[arg(long)]
        force: bool,
    },
    /// Score every per-fold model on its held-out patient.
    Evaluate {
        /// Directory holding `<approach>_foldNN.model` files.
        #[arg(long)]
        models: PathBuf,
        /// Segment cache produced by `prepare`.
        #[arg(long)]
        cache: PathBuf,
        /// Output directory (defaults to the models directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score the majority vote of the three approaches' per-fold models.
    Ensemble {
        /// Directory holding all three approaches' `_foldNN.model` files.
        #[arg(long)]
        models: PathBuf,
        /// Segment cache produced by `prepare`.
        #[arg(long)]
        cache: PathBuf,
        /// Output directory (defaults to the models directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise approach comparisons: normality screen plus signed-rank test.
    Stats {
        /// Results CSV file, or a directory of them.
        #[arg(long)]
        results: PathBuf,
        /// Significance level.
        #[arg(long, default_value_t = somnoscore::stats::DEFAULT_ALPHA)]
        alpha: f64,
        /// Comma-separated metrics to compare.
        #[arg(long, default_value = "accuracy,kappa,f1_macro")]
        metrics: String,
        /// Also write the comparison table as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score an arbitrary EDF recording with a trained model.
    Score {
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Recording to score.
        file: PathBuf,
        /// Hypnogram CSV to write: `onset_s,label,confidence` per 30 s.
        #[arg(long)]
        out: PathBuf,
        /// Input scaling, matching how the model was trained: "zscore" or
        /// "none".
        #[arg(long, default_value = "zscore")]
        standardize: String,
    },
    /// Aggregate per-fold results into a per-approach summary table.
    Report {
        /// Results CSV file, or a directory of them.
        #[arg(long)]
        results: PathBuf,
        /// Also write the summary as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help and --version arrive here too; only real mistakes are
            // usage errors.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> error::Result<()> {
    match cli.command {
        Command::Inspect { file } => commands::inspect::run(&file),
        Command::Prepare { data_dir, out, standardize } => {
            commands::prepare::run(&data_dir, &out, &standardize)
        }
        Command::Train { config, fold, force } => commands::train::run(&config, fold, force),
        Command::Evaluate { models, cache, out } => {
            commands::evaluate::run_single(&models, &cache, out.as_deref())
        }
        Command::Ensemble { models, cache, out } => {
            commands::evaluate::run_ensemble(&models, &cache, out.as_deref())
        }
        Command::Stats { results, alpha, metrics, out } => {
            commands::report::run_stats(&results, alpha, &metrics, out.as_deref())
        }
        Command::Score { model, file, out, standardize } => {
            commands::score::run(&model, &file, &out, &standardize)
        }
        Command::Report { results, out } => commands::report::run_report(&results, out.as_deref()),
    }
}
