//! `gen-reports`, `parse-reports`, and `eval-extraction`: the pseudo-report
//! pipeline and its metrics.

use crate::config::{resolve, resolve_opt, FileConfig};
use crate::error::CliError;
use crate::io::{read_jsonl, write_json, write_jsonl, PredictionRecord, ReportRecord};
use crate::manifest::ManifestBuilder;
use clap::Args;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use semalign::codec::{
    eval_extraction, generate_pseudo_report, parse_report, ClauseOrder, StyleConfig,
    CONNECTIVE_INVENTORY,
};
use semalign::report::{Finding, Modality, Orientation, Vocabulary};
use semalign::synth::synthetic_vocabulary;
use std::path::{Path, PathBuf};

fn load_vocabulary(
    vocab_path: Option<&Path>,
    sites: usize,
    appearances: usize,
) -> Result<Vocabulary, CliError> {
    match vocab_path {
        Some(path) => crate::io::read_json(path),
        None => Ok(synthetic_vocabulary(sites, appearances)?),
    }
}

fn sample_finding(vocab: &Vocabulary, rng: &mut ChaCha8Rng) -> Finding {
    let sites: Vec<&String> = vocab.finding_sites().collect();
    let appearances: Vec<&String> = vocab.finding_appearances().collect();
    Finding {
        modality: Modality::ALL[rng.gen_range(0..Modality::ALL.len())],
        orientation: Orientation::ALL[rng.gen_range(0..Orientation::ALL.len())],
        anatomic_site: sites[rng.gen_range(0..sites.len())].clone(),
        appearance: appearances[rng.gen_range(0..appearances.len())].clone(),
    }
}

/// Deterministic style for report `index`: cycles through clause order and
/// merging so a generated set spans every style setting.
pub fn style_for_report(index: u64, seed: u64) -> StyleConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let n_connectives = rng.gen_range(1..=CONNECTIVE_INVENTORY.len());
    StyleConfig {
        clause_order: if index % 2 == 0 {
            ClauseOrder::AsGiven
        } else {
            ClauseOrder::Shuffled
        },
        merge_same_site: (index / 2) % 2 == 0,
        connective_set: CONNECTIVE_INVENTORY[..n_connectives]
            .iter()
            .map(|c| c.to_string())
            .collect(),
        seed: rng.gen(),
    }
}

#[derive(Debug, Args)]
pub struct GenReportsArgs {
    #[arg(long)]
    pub count: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub appearances: Option<usize>,
    /// Maximum findings per report (each report draws 0..=max).
    #[arg(long)]
    pub max_findings: Option<usize>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn gen_reports(
    args: GenReportsArgs,
    file: &FileConfig,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let count = resolve(args.count, file, "count", 1000)?;
    let seed = resolve(args.seed, file, "seed", 0)?;
    let sites = resolve(args.sites, file, "sites", 12)?;
    let appearances = resolve(args.appearances, file, "appearances", 8)?;
    let max_findings = resolve(args.max_findings, file, "max-findings", 4)?;
    let vocab_path = resolve_opt(args.vocab, file, "vocab")?;
    let out = resolve(args.out, file, "out", PathBuf::from("reports.jsonl"))?;

    manifest.set_seed(seed);
    manifest.set_config(serde_json::json!({
        "count": count, "seed": seed, "sites": sites, "appearances": appearances,
        "max-findings": max_findings, "vocab": vocab_path, "out": out,
    }));
    if let Some(v) = &vocab_path {
        manifest.record_input(v)?;
    }
    let vocab = load_vocabulary(vocab_path.as_deref(), sites, appearances)?;

    let mut records = Vec::with_capacity(count as usize);
    for index in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index.wrapping_mul(0x517c_c1b7_2722_0a95));
        let n = rng.gen_range(0..=max_findings);
        let gold: Vec<Finding> = (0..n).map(|_| sample_finding(&vocab, &mut rng)).collect();
        let text = generate_pseudo_report(&gold, &style_for_report(index, seed));
        records.push(ReportRecord { text, gold });
    }
    write_jsonl(&out, &records)?;
    manifest.record_output(&out)?;
    println!("wrote {count} pseudo reports to {}", out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct ParseReportsArgs {
    #[arg(long, value_name = "REPORTS_JSONL")]
    pub r#in: Option<PathBuf>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub appearances: Option<usize>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn parse_reports(
    args: ParseReportsArgs,
    file: &FileConfig,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let input = resolve(args.r#in, file, "in", PathBuf::from("reports.jsonl"))?;
    let sites = resolve(args.sites, file, "sites", 12)?;
    let appearances = resolve(args.appearances, file, "appearances", 8)?;
    let vocab_path = resolve_opt(args.vocab, file, "vocab")?;
    let out = resolve(args.out, file, "out", PathBuf::from("predictions.jsonl"))?;
    let seed = resolve(args.seed, file, "seed", 0)?;

    manifest.set_seed(seed);
    manifest.set_config(serde_json::json!({
        "in": input, "sites": sites, "appearances": appearances,
        "vocab": vocab_path, "out": out,
    }));
    manifest.record_input(&input)?;
    if let Some(v) = &vocab_path {
        manifest.record_input(v)?;
    }
    let vocab = load_vocabulary(vocab_path.as_deref(), sites, appearances)?;

    let reports: Vec<ReportRecord> = read_jsonl(&input)?;
    let predictions: Vec<PredictionRecord> = reports
        .iter()
        .map(|r| match parse_report(&r.text, &vocab) {
            Ok(findings) => PredictionRecord::Ok { findings },
            Err(_) => PredictionRecord::ParseFailure,
        })
        .collect();
    write_jsonl(&out, &predictions)?;
    manifest.record_output(&out)?;
    let failures = predictions
        .iter()
        .filter(|p| matches!(p, PredictionRecord::ParseFailure))
        .count();
    println!(
        "parsed {} reports ({} failures) into {}",
        reports.len(),
        failures,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalExtractionArgs {
    /// Predictions JSONL (from `parse-reports`).
    #[arg(long)]
    pub pred: Option<PathBuf>,
    /// Gold JSONL (from `gen-reports`).
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn eval_extraction_cmd(
    args: EvalExtractionArgs,
    file: &FileConfig,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let pred_path = resolve(args.pred, file, "pred", PathBuf::from("predictions.jsonl"))?;
    let gold_path = resolve(args.gold, file, "gold", PathBuf::from("reports.jsonl"))?;
    let out = resolve(args.out, file, "out", PathBuf::from("extraction_report.json"))?;
    let seed = resolve(args.seed, file, "seed", 0)?;

    manifest.set_seed(seed);
    manifest.set_config(serde_json::json!({
        "pred": pred_path, "gold": gold_path, "out": out,
    }));
    manifest.record_input(&pred_path)?;
    manifest.record_input(&gold_path)?;

    let predictions: Vec<PredictionRecord> = read_jsonl(&pred_path)?;
    let gold_records: Vec<ReportRecord> = read_jsonl(&gold_path)?;
    let predictions: Vec<Option<Vec<Finding>>> = predictions
        .into_iter()
        .map(|p| match p {
            PredictionRecord::Ok { findings } => Some(findings),
            PredictionRecord::ParseFailure => None,
        })
        .collect();
    let gold: Vec<Vec<Finding>> = gold_records.into_iter().map(|r| r.gold).collect();
    let report = eval_extraction(&predictions, &gold)?;
    write_json(&out, &report)?;
    manifest.record_output(&out)?;
    println!(
        "parse success rate {:.4}, item accuracy {:.4} ({} reports) -> {}",
        report.parse_success_rate,
        report.accuracy,
        predictions.len(),
        out.display()
    );
    Ok(())
}
