//! `compare`: matched-seed clip vs selip runs with a comparison table.

use crate::config::{parse_list, resolve, FileConfig};
use crate::error::CliError;
use crate::io::write_text;
use crate::manifest::ManifestBuilder;
use clap::Args;
use semalign::compare::{mean_top_k, rows_to_csv, run_compare, CompareConfig};
use std::path::PathBuf;

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Comma-separated seeds for the matched runs.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub subjects: Option<usize>,
    #[arg(long)]
    pub sites: Option<usize>,
    #[arg(long)]
    pub appearances: Option<usize>,
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub near_dup_rate: Option<f64>,
    #[arg(long)]
    pub normal_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub iterations_per_epoch: Option<u64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub lr_image: Option<f64>,
    #[arg(long)]
    pub lr_text: Option<f64>,
    #[arg(long)]
    pub warmup_iters: Option<u64>,
    #[arg(long)]
    pub decay_epochs: Option<u64>,
    #[arg(long)]
    pub ks: Option<String>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn compare(
    args: CompareArgs,
    file: &FileConfig,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let mut cfg = CompareConfig::desk_default();
    let seeds_raw = resolve(
        args.seeds,
        file,
        "seeds",
        cfg.seeds
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(","),
    )?;
    cfg.seeds = parse_list(&seeds_raw, "seeds")?;
    cfg.synth.n_subjects = resolve(args.subjects, file, "subjects", cfg.synth.n_subjects)?;
    cfg.synth.n_sites = resolve(args.sites, file, "sites", cfg.synth.n_sites)?;
    cfg.synth.n_appearances = resolve(args.appearances, file, "appearances", cfg.synth.n_appearances)?;
    cfg.synth.noise_sigma = resolve(args.noise_sigma, file, "noise-sigma", cfg.synth.noise_sigma)?;
    cfg.synth.near_duplicate_rate = resolve(
        args.near_dup_rate,
        file,
        "near-dup-rate",
        cfg.synth.near_duplicate_rate,
    )?;
    cfg.synth.normal_rate = resolve(args.normal_rate, file, "normal-rate", cfg.synth.normal_rate)?;
    cfg.train.batch_size = resolve(args.batch_size, file, "batch-size", cfg.train.batch_size)?;
    cfg.train.epochs = resolve(args.epochs, file, "epochs", cfg.train.epochs)?;
    cfg.train.iterations_per_epoch = resolve(
        args.iterations_per_epoch,
        file,
        "iterations-per-epoch",
        cfg.train.iterations_per_epoch,
    )?;
    cfg.train.loss.alpha = resolve(args.alpha, file, "alpha", cfg.train.loss.alpha)?;
    cfg.train.loss.beta = resolve(args.beta, file, "beta", cfg.train.loss.beta)?;
    cfg.train.loss.tau = resolve(args.tau, file, "tau", cfg.train.loss.tau)?;
    cfg.train.schedule.lr_init_image = resolve(
        args.lr_image,
        file,
        "lr-image",
        cfg.train.schedule.lr_init_image,
    )?;
    cfg.train.schedule.lr_init_text = resolve(
        args.lr_text,
        file,
        "lr-text",
        cfg.train.schedule.lr_init_text,
    )?;
    cfg.train.schedule.t_max_warmup = resolve(
        args.warmup_iters,
        file,
        "warmup-iters",
        cfg.train.schedule.t_max_warmup,
    )?;
    cfg.train.schedule.e_max =
        resolve(args.decay_epochs, file, "decay-epochs", cfg.train.schedule.e_max)?;
    let ks_raw = resolve(
        args.ks,
        file,
        "ks",
        cfg.ks.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    )?;
    cfg.ks = parse_list(&ks_raw, "ks")?;
    let out_csv = resolve(args.out_csv, file, "out-csv", PathBuf::from("compare.csv"))?;
    let seed = resolve(args.seed, file, "seed", 0)?;

    manifest.set_seed(seed);
    manifest.set_config(serde_json::json!({
        "seeds": cfg.seeds, "synth": cfg.synth, "train": cfg.train, "ks": cfg.ks,
        "out-csv": out_csv,
    }));

    let rows = run_compare(&cfg)?;
    let csv = rows_to_csv(&rows, &cfg.ks);
    write_text(&out_csv, &csv)?;
    manifest.record_output(&out_csv)?;

    print!("{csv}");
    let clip_mean = mean_top_k(&rows, "clip", 1);
    let selip_mean = mean_top_k(&rows, "selip", 1);
    println!("mean top-1: clip {clip_mean:.4}, selip {selip_mean:.4}");
    Ok(())
}
