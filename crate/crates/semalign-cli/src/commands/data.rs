//! `gen-data`: synthesize a paired corpus and write it as JSONL.

use crate::config::{resolve, FileConfig};
use crate::error::CliError;
use crate::io::write_jsonl;
use crate::manifest::ManifestBuilder;
use clap::Args;
use semalign::synth::{generate_corpus, SynthConfig};
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub near_dup_rate: Option<f64>,
    #[arg(long)]
    pub normal_rate: Option<f64>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub appearances: Option<usize>,
    #[arg(long)]
    pub max_findings: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    /// Tie appearance tokens to modalities (`true`) or sample them freely.
    #[arg(long)]
    pub linked_appearances: Option<bool>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(
    args: GenDataArgs,
    file: &FileConfig,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let defaults = SynthConfig::default();
    let cfg = SynthConfig {
        n_subjects: resolve(args.subjects, file, "subjects", defaults.n_subjects)?,
        n_sites: resolve(args.sites, file, "sites", defaults.n_sites)?,
        n_appearances: resolve(args.appearances, file, "appearances", defaults.n_appearances)?,
        max_findings: resolve(args.max_findings, file, "max-findings", defaults.max_findings)?,
        feature_dim: resolve(args.feature_dim, file, "feature-dim", defaults.feature_dim)?,
        noise_sigma: resolve(args.noise_sigma, file, "noise-sigma", defaults.noise_sigma)?,
        near_duplicate_rate: resolve(
            args.near_dup_rate,
            file,
            "near-dup-rate",
            defaults.near_duplicate_rate,
        )?,
        normal_rate: resolve(args.normal_rate, file, "normal-rate", defaults.normal_rate)?,
        modality_linked_appearances: resolve(
            args.linked_appearances,
            file,
            "linked-appearances",
            defaults.modality_linked_appearances,
        )?,
        seed: resolve(args.seed, file, "seed", 0)?,
    };
    let out = resolve(args.out, file, "out", PathBuf::from("corpus.jsonl"))?;

    manifest.set_seed(cfg.seed);
    manifest.set_config(serde_json::json!({ "synth": cfg, "out": out }));

    let corpus = generate_corpus(&cfg)?;
    write_jsonl(&out, &corpus.subjects)?;
    manifest.record_output(&out)?;
    let pairs: usize = corpus.subjects.iter().map(|s| s.pairs.len()).sum();
    println!(
        "wrote {} subjects ({} image-text pairs) to {}",
        corpus.subjects.len(),
        pairs,
        out.display()
    );
    Ok(())
}
