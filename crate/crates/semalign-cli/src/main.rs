//! `semalign`: reproducible commands over the alignment toolkit. Every run
//! resolves its settings from flags, then an optional key=value config file,
//! then built-in defaults, and emits exactly one manifest with input/output
//! hashes. Failures print a machine-readable JSON object to stderr.

mod commands;
mod config;
mod error;
mod io;
mod manifest;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use commands::analyze::{GradCheckArgs, LossEvalArgs, SimMatrixArgs};
use commands::compare_cmd::CompareArgs;
use commands::data::GenDataArgs;
use commands::reports::{EvalExtractionArgs, GenReportsArgs, ParseReportsArgs};
use commands::train_cmd::{EvalRetrievalArgs, TrainArgs};
use config::FileConfig;
use error::CliError;
use manifest::ManifestBuilder;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "semalign", version, about = "contrastive image-text alignment toolkit")]
struct Cli {
    /// Flat `key = value` config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Manifest path (defaults next to the command's primary output).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic paired corpus.
    GenData(GenDataArgs),
    /// Generate styled pseudo reports with gold finding items.
    GenReports(GenReportsArgs),
    /// Parse pseudo reports back into finding items.
    ParseReports(ParseReportsArgs),
    /// Score predictions against gold items.
    EvalExtraction(EvalExtractionArgs),
    /// Compute the soft-target similarity matrix of a description batch.
    SimMatrix(SimMatrixArgs),
    /// Evaluate the loss stack on an embeddings file.
    LossEval(LossEvalArgs),
    /// Check analytic gradients against finite differences.
    GradCheck(GradCheckArgs),
    /// Run contrastive training.
    Train(TrainArgs),
    /// Evaluate image-to-text retrieval from a checkpoint.
    EvalRetrieval(EvalRetrievalArgs),
    /// Run matched-seed clip vs selip comparisons.
    Compare(CompareArgs),
}

fn emit_error(kind: &str, message: &str) {
    eprintln!(
        "{}",
        serde_json::json!({ "error": kind, "message": message })
    );
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    let name = match &cli.command {
        Command::GenData(_) => "gen-data",
        Command::GenReports(_) => "gen-reports",
        Command::ParseReports(_) => "parse-reports",
        Command::EvalExtraction(_) => "eval-extraction",
        Command::SimMatrix(_) => "sim-matrix",
        Command::LossEval(_) => "loss-eval",
        Command::GradCheck(_) => "grad-check",
        Command::Train(_) => "train",
        Command::EvalRetrieval(_) => "eval-retrieval",
        Command::Compare(_) => "compare",
    };
    let mut manifest = ManifestBuilder::new(name);
    let result = match cli.command {
        Command::GenData(args) => commands::data::run(args, &file, &mut manifest),
        Command::GenReports(args) => commands::reports::gen_reports(args, &file, &mut manifest),
        Command::ParseReports(args) => commands::reports::parse_reports(args, &file, &mut manifest),
        Command::EvalExtraction(args) => {
            commands::reports::eval_extraction_cmd(args, &file, &mut manifest)
        }
        Command::SimMatrix(args) => commands::analyze::sim_matrix(args, &file, &mut manifest),
        Command::LossEval(args) => commands::analyze::loss_eval(args, &file, &mut manifest),
        Command::GradCheck(args) => commands::analyze::grad_check(args, &file, &mut manifest),
        Command::Train(args) => commands::train_cmd::train(args, &file, &mut manifest),
        Command::EvalRetrieval(args) => {
            commands::train_cmd::eval_retrieval(args, &file, &mut manifest)
        }
        Command::Compare(args) => commands::compare_cmd::compare(args, &file, &mut manifest),
    };
    // The manifest is written on success and on command failure alike, so
    // every execution leaves a record.
    let manifest_written = manifest.write(cli.manifest.as_deref());
    result?;
    manifest_written?;
    Ok(())
}

fn main() {
    let code = match Cli::try_parse() {
        Ok(cli) => match dispatch(cli) {
            Ok(()) => 0,
            Err(e) => {
                emit_error(e.kind(), &e.to_string());
                1
            }
        },
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp
            | ErrorKind::DisplayVersion
            | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                print!("{e}");
                0
            }
            ErrorKind::InvalidSubcommand => {
                emit_error("UnknownCommand", &e.to_string());
                2
            }
            _ => {
                emit_error("ConfigError", &e.to_string());
                2
            }
        },
    };
    std::process::exit(code);
}
