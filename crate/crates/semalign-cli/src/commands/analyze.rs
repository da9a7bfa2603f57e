//! `sim-matrix`, `loss-eval`, and `grad-check`: standalone evaluation of the
//! similarity and loss mathematics.

use crate::config::{resolve, resolve_opt, FileConfig};
use crate::error::CliError;
use crate::io::{read_embeddings, read_jsonl, write_json, write_text};
use crate::manifest::ManifestBuilder;
use clap::Args;
use semalign::grad_check::grad_check_battery;
use semalign::loss::{total_loss, EmbeddingBatch, LossConfig};
use semalign::report::Description;
use semalign::similarity::{
    batch_similarity_matrix, SoftTargetMatrix, TokenizerConfig, TokenizerMode,
};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy)]
pub struct ModeArg(pub TokenizerMode);

impl FromStr for ModeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<ModeArg, String> {
        match s {
            "word" => Ok(ModeArg(TokenizerMode::Word)),
            "character" | "char" => Ok(ModeArg(TokenizerMode::Character)),
            other => Err(format!("expected `word` or `character`, got {other:?}")),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimMatrixArgs {
    /// Descriptions JSONL: one description object per line.
    #[arg(long, value_name = "DESCRIPTIONS_JSONL")]
    pub r#in: Option<PathBuf>,
    /// Tokenizer mode: `word` or `character`.
    #[arg(long)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn sim_matrix(
    args: SimMatrixArgs,
    file: &FileConfig,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let input = resolve(args.r#in, file, "in", PathBuf::from("descriptions.jsonl"))?;
    let mode = resolve(args.mode, file, "mode", ModeArg(TokenizerMode::Word))?;
    let out_json = resolve(args.out_json, file, "out-json", PathBuf::from("s_matrix.json"))?;
    let out_csv = resolve(args.out_csv, file, "out-csv", PathBuf::from("s_matrix.csv"))?;
    let seed = resolve(args.seed, file, "seed", 0)?;

    manifest.set_seed(seed);
    manifest.set_config(serde_json::json!({
        "in": input,
        "mode": match mode.0 { TokenizerMode::Word => "word", TokenizerMode::Character => "character" },
        "out-json": out_json, "out-csv": out_csv,
    }));
    manifest.record_input(&input)?;

    let batch: Vec<Description> = read_jsonl(&input)?;
    let cfg = TokenizerConfig {
        mode: mode.0,
        ..TokenizerConfig::default()
    };
    let matrix = batch_similarity_matrix(&batch, &cfg)?;
    write_json(&out_json, &matrix)?;
    let mut csv = String::new();
    for row in matrix.values().rows() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    write_text(&out_csv, &csv)?;
    manifest.record_output(&out_json)?;
    manifest.record_output(&out_csv)?;
    println!(
        "wrote {0}x{0} soft target matrix to {1} and {2}",
        matrix.n(),
        out_json.display(),
        out_csv.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct LossEvalArgs {
    /// Binary embeddings file: u64 N, u64 d, then N*d f64 images and texts.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Soft target matrix JSON (from `sim-matrix`); optional when beta = 0.
    #[arg(long)]
    pub s_matrix: Option<PathBuf>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn loss_eval(
    args: LossEvalArgs,
    file: &FileConfig,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let embeddings = resolve(args.embeddings, file, "embeddings", PathBuf::from("embeddings.bin"))?;
    let s_matrix = resolve_opt(args.s_matrix, file, "s-matrix")?;
    let defaults = LossConfig::default();
    let cfg = LossConfig {
        tau: resolve(args.tau, file, "tau", defaults.tau)?,
        alpha: resolve(args.alpha, file, "alpha", defaults.alpha)?,
        beta: resolve(args.beta, file, "beta", defaults.beta)?,
        epsilon_smooth: resolve(args.epsilon, file, "epsilon", defaults.epsilon_smooth)?,
    };
    let out = resolve(args.out, file, "out", PathBuf::from("loss_breakdown.json"))?;
    let seed = resolve(args.seed, file, "seed", 0)?;

    manifest.set_seed(seed);
    manifest.set_config(serde_json::json!({
        "embeddings": embeddings, "s-matrix": s_matrix, "loss": cfg, "out": out,
    }));
    manifest.record_input(&embeddings)?;
    let (images, texts) = read_embeddings(&embeddings)?;
    let soft: Option<SoftTargetMatrix> = match &s_matrix {
        Some(path) => {
            manifest.record_input(path)?;
            Some(crate::io::read_json(path)?)
        }
        None => None,
    };
    let batch = EmbeddingBatch::new(images, texts)?;
    let breakdown = total_loss(&batch, soft.as_ref(), &cfg)?;
    write_json(&out, &breakdown)?;
    manifest.record_output(&out)?;
    println!(
        "l_clip {:.6}, l_se {:.6}, l_total {:.6} -> {}",
        breakdown.l_clip,
        breakdown.l_se,
        breakdown.l_total,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of random configurations to test.
    #[arg(long)]
    pub cases: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn grad_check(
    args: GradCheckArgs,
    file: &FileConfig,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let seed = resolve(args.seed, file, "seed", 0)?;
    let cases = resolve(args.cases, file, "cases", 20)?;
    let out = resolve(args.out, file, "out", PathBuf::from("grad_check.json"))?;

    manifest.set_seed(seed);
    manifest.set_config(serde_json::json!({ "seed": seed, "cases": cases, "out": out }));

    let report = grad_check_battery(seed, cases)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serialization cannot fail")
    );
    write_json(&out, &report)?;
    manifest.record_output(&out)?;
    if !report.passed {
        return Err(CliError::CheckFailed(format!(
            "gradient check failed: max relative error {} >= {}",
            report.max_rel_err, report.threshold
        )));
    }
    Ok(())
}
