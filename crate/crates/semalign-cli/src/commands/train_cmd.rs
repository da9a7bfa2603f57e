//! `train` and `eval-retrieval`: the training loop and checkpoint-based
//! retrieval evaluation.

use crate::config::{parse_list, resolve, resolve_opt, FileConfig};
use crate::error::CliError;
use crate::io::{load_corpus, write_json, write_text};
use crate::manifest::ManifestBuilder;
use clap::Args;
use semalign::encoder::ModelDims;
use semalign::loss::LossConfig;
use semalign::schedule::ScheduleConfig;
use semalign::synth::{split_dataset, ModalityPair, SubjectRecord};
use semalign::trainer::{
    resume_train_run, retrieval_over_pairs, train_run, TrainConfig, TrainMode, TrainerCheckpoint,
};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, Copy)]
pub struct TrainModeArg(pub TrainMode);

impl FromStr for TrainModeArg {
    type Err = String;

    fn from_str(s: &str) -> Result<TrainModeArg, String> {
        match s {
            "clip" | "clip_only" => Ok(TrainModeArg(TrainMode::ClipOnly)),
            "selip" => Ok(TrainModeArg(TrainMode::Selip)),
            other => Err(format!("expected `clip` or `selip`, got {other:?}")),
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// `clip` (hard target only) or `selip` (adds the soft-target KL term).
    #[arg(long)]
    pub mode: Option<TrainModeArg>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub iterations_per_epoch: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr_image: Option<f64>,
    #[arg(long)]
    pub lr_text: Option<f64>,
    #[arg(long)]
    pub warmup_iters: Option<u64>,
    #[arg(long)]
    pub decay_epochs: Option<u64>,
    #[arg(long)]
    pub poly_power: Option<f64>,
    #[arg(long)]
    pub d_emb: Option<usize>,
    #[arg(long)]
    pub d_hidden: Option<usize>,
    #[arg(long)]
    pub d_proj: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub val_every: Option<u64>,
    #[arg(long)]
    pub val_pairs: Option<usize>,
    #[arg(long)]
    pub ckpt_every: Option<u64>,
    #[arg(long)]
    pub ckpt_dir: Option<PathBuf>,
    #[arg(long)]
    pub s_check_every: Option<u64>,
    #[arg(long)]
    pub log_csv: Option<PathBuf>,
    /// Resume from a checkpoint; the checkpoint's stored config governs the
    /// run and the other training flags are ignored.
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

pub fn train(
    args: TrainArgs,
    file: &FileConfig,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let corpus_path = resolve(args.corpus, file, "corpus", PathBuf::from("corpus.jsonl"))?;
    let log_csv = resolve(args.log_csv, file, "log-csv", PathBuf::from("train_log.csv"))?;
    let resume = resolve_opt(args.resume, file, "resume")?;

    let mode = resolve(args.mode, file, "mode", TrainModeArg(TrainMode::Selip))?.0;
    if mode == TrainMode::ClipOnly && args.beta.is_some() {
        return Err(CliError::Usage(
            "config key \"beta\": beta is forbidden in clip mode (it is fixed to zero)".into(),
        ));
    }

    let loss_defaults = LossConfig::default();
    let schedule_defaults = ScheduleConfig::default();
    let dims_defaults = ModelDims::default();
    let train_defaults = TrainConfig::default();
    let cfg = TrainConfig {
        mode,
        batch_size: resolve(args.batch_size, file, "batch-size", train_defaults.batch_size)?,
        iterations_per_epoch: resolve(
            args.iterations_per_epoch,
            file,
            "iterations-per-epoch",
            train_defaults.iterations_per_epoch,
        )?,
        epochs: resolve(args.epochs, file, "epochs", train_defaults.epochs)?,
        schedule: ScheduleConfig {
            lr_init_image: resolve(args.lr_image, file, "lr-image", schedule_defaults.lr_init_image)?,
            lr_init_text: resolve(args.lr_text, file, "lr-text", schedule_defaults.lr_init_text)?,
            t_max_warmup: resolve(args.warmup_iters, file, "warmup-iters", schedule_defaults.t_max_warmup)?,
            e_max: resolve(args.decay_epochs, file, "decay-epochs", schedule_defaults.e_max)?,
            poly_power: resolve(args.poly_power, file, "poly-power", schedule_defaults.poly_power)?,
        },
        loss: LossConfig {
            tau: resolve(args.tau, file, "tau", loss_defaults.tau)?,
            alpha: resolve(args.alpha, file, "alpha", loss_defaults.alpha)?,
            beta: if mode == TrainMode::ClipOnly {
                0.0
            } else {
                resolve(args.beta, file, "beta", loss_defaults.beta)?
            },
            epsilon_smooth: resolve(args.epsilon, file, "epsilon", loss_defaults.epsilon_smooth)?,
        },
        dims: ModelDims {
            d_emb: resolve(args.d_emb, file, "d-emb", dims_defaults.d_emb)?,
            d_hidden: resolve(args.d_hidden, file, "d-hidden", dims_defaults.d_hidden)?,
            d_proj: resolve(args.d_proj, file, "d-proj", dims_defaults.d_proj)?,
        },
        seed: resolve(args.seed, file, "seed", 0)?,
        train_fraction: resolve(args.train_fraction, file, "train-fraction", train_defaults.train_fraction)?,
        val_every: resolve(args.val_every, file, "val-every", train_defaults.val_every)?,
        val_pairs: resolve(args.val_pairs, file, "val-pairs", train_defaults.val_pairs)?,
        ckpt_every: resolve(args.ckpt_every, file, "ckpt-every", train_defaults.ckpt_every)?,
        ckpt_dir: resolve_opt(args.ckpt_dir, file, "ckpt-dir")?,
        s_check_every: resolve(args.s_check_every, file, "s-check-every", train_defaults.s_check_every)?,
    };

    manifest.set_seed(cfg.seed);
    manifest.set_config(serde_json::json!({
        "corpus": corpus_path, "train": cfg, "log-csv": log_csv, "resume": resume,
    }));
    manifest.record_input(&corpus_path)?;

    let subjects = load_corpus(&corpus_path)?;
    let outcome = match &resume {
        Some(ckpt_path) => {
            manifest.record_input(ckpt_path)?;
            let ckpt = TrainerCheckpoint::load(ckpt_path)?;
            resume_train_run(&subjects, ckpt)?
        }
        None => train_run(&subjects, &cfg)?,
    };

    write_text(&log_csv, &outcome.log.to_csv())?;
    manifest.record_output(&log_csv)?;
    let effective_cfg = match &resume {
        Some(_) => None,
        None => Some(&cfg),
    };
    if let Some(dir) = effective_cfg.map(|c| c.ckpt_dir.clone()).unwrap_or(None) {
        let final_path = dir.join("ckpt_final.bin");
        if final_path.exists() {
            manifest.record_output(&final_path)?;
        }
    }
    let last = outcome.log.iterations.last();
    match last {
        Some(r) => println!(
            "trained {} iterations (mode {}); final l_clip {:.4}, l_se {:.4}, l_total {:.4}",
            outcome.last_iteration,
            cfg.mode.as_str(),
            r.l_clip,
            r.l_se,
            r.l_total
        ),
        None => println!("no iterations were run"),
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalRetrievalArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub ckpt: Option<PathBuf>,
    /// Comma-separated K values, e.g. `1,2,5,10`.
    #[arg(long)]
    pub ks: Option<String>,
    /// Which side of the subject split to evaluate: `test`, `train`, `all`.
    #[arg(long)]
    pub split: Option<String>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn eval_retrieval(
    args: EvalRetrievalArgs,
    file: &FileConfig,
    manifest: &mut ManifestBuilder,
) -> Result<(), CliError> {
    let corpus_path = resolve(args.corpus, file, "corpus", PathBuf::from("corpus.jsonl"))?;
    let ckpt_path = resolve(args.ckpt, file, "ckpt", PathBuf::from("ckpts/ckpt_final.bin"))?;
    let ks_raw = resolve(args.ks, file, "ks", "1,2,5,10".to_string())?;
    let ks: Vec<usize> = parse_list(&ks_raw, "ks")?;
    let split = resolve(args.split, file, "split", "test".to_string())?;
    let out_json = resolve(args.out_json, file, "out-json", PathBuf::from("retrieval.json"))?;
    let out_csv = resolve(args.out_csv, file, "out-csv", PathBuf::from("retrieval.csv"))?;

    manifest.record_input(&corpus_path)?;
    manifest.record_input(&ckpt_path)?;

    let subjects = load_corpus(&corpus_path)?;
    let ckpt = TrainerCheckpoint::load(&ckpt_path)?;
    let train_cfg = ckpt.config.clone();
    let seed = resolve(args.seed, file, "seed", train_cfg.seed)?;
    manifest.set_seed(seed);
    manifest.set_config(serde_json::json!({
        "corpus": corpus_path, "ckpt": ckpt_path, "ks": ks, "split": split,
        "train-fraction": train_cfg.train_fraction, "seed": seed,
        "out-json": out_json, "out-csv": out_csv,
    }));

    let (train_side, test_side) = split_dataset(&subjects, train_cfg.train_fraction, seed);
    let chosen: Vec<SubjectRecord> = match split.as_str() {
        "test" => test_side,
        "train" => train_side,
        "all" => subjects.clone(),
        other => {
            return Err(CliError::Config {
                key: "split".into(),
                message: format!("expected `test`, `train`, or `all`, got {other:?}"),
            })
        }
    };
    let pairs: Vec<&ModalityPair> = chosen.iter().flat_map(|s| s.pairs.iter()).collect();
    if pairs.is_empty() {
        return Err(CliError::Usage("selected split contains no pairs".into()));
    }

    let (params, _, _) = ckpt.into_state();
    let result = retrieval_over_pairs(&params, &pairs, &ks)?;
    write_json(&out_json, &result)?;

    let mut csv = String::from("method");
    for k in &ks {
        csv.push_str(&format!(",top_{k}"));
    }
    csv.push('\n');
    csv.push_str(train_cfg.mode.as_str());
    for k in &ks {
        csv.push_str(&format!(",{}", result.top_k_accuracy[k]));
    }
    csv.push('\n');
    write_text(&out_csv, &csv)?;

    manifest.record_output(&out_json)?;
    manifest.record_output(&out_csv)?;
    let shown: Vec<String> = ks
        .iter()
        .map(|k| format!("top-{k} {:.4}", result.top_k_accuracy[k]))
        .collect();
    println!(
        "{} images vs {} candidates: {}",
        result.n_images,
        result.n_candidates,
        shown.join(", ")
    );
    Ok(())
}
