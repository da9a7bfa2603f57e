//! The contrastive training loop: unique-text batch sampling, loss graph
//! evaluation, per-encoder Adam updates with scheduled learning rates,
//! logging, validation retrieval, and versioned checkpointing.

use crate::autodiff::Graph;
use crate::encoder::{
    add_param_leaves, build_token_vocabulary, encode_image_batch, encode_text_batch,
    image_batch_forward, text_batch_forward, EncoderError, EncoderParams, ModelDims,
    TEXT_GROUP_START,
};
use crate::loss::{LossConfig, LossError};
use crate::loss_graph::build_total_loss;
use crate::optim::{accumulate_gradients, adam_step, AdamState, Parameter};
use crate::report::Description;
use crate::retrieval::{dedupe_candidates, topk_accuracy, RetrievalError, RetrievalResult};
use crate::schedule::{scheduled_lr, ScheduleConfig, ScheduleError};
use crate::similarity::{
    batch_similarity_matrix, description_similarity, SimilarityError, SoftTargetMatrix,
    TokenizerConfig,
};
use crate::synth::{split_dataset, ModalityPair, SubjectRecord};
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("only {have} distinct description texts for batch size {need}")]
    InsufficientDistinctTexts { have: usize, need: usize },
    #[error("non-finite loss at iteration {iteration}")]
    NonFiniteLoss { iteration: u64 },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
}

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io failure: {0}")]
    IoFailure(#[from] std::io::Error),
    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint checksum mismatch (file corrupt or truncated)")]
    ChecksumMismatch,
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    ClipOnly,
    Selip,
}

impl TrainMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrainMode::ClipOnly => "clip",
            TrainMode::Selip => "selip",
        }
    }
}

/// Full training configuration. The split of the corpus into train and
/// held-out sides is derived from `seed` and `train_fraction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: TrainMode,
    pub batch_size: usize,
    pub iterations_per_epoch: u64,
    pub epochs: u64,
    pub schedule: ScheduleConfig,
    pub loss: LossConfig,
    pub dims: ModelDims,
    pub seed: u64,
    pub train_fraction: f64,
    /// Validation retrieval cadence in iterations; 0 disables it.
    pub val_every: u64,
    /// Size of the fixed held-out validation slice.
    pub val_pairs: usize,
    /// Checkpoint cadence in iterations; 0 writes only the final checkpoint.
    pub ckpt_every: u64,
    pub ckpt_dir: Option<PathBuf>,
    /// Cadence of the in-loop soft-target oracle check; 0 disables it.
    pub s_check_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: TrainMode::Selip,
            batch_size: 64,
            iterations_per_epoch: 250,
            epochs: 120,
            schedule: ScheduleConfig::default(),
            loss: LossConfig::default(),
            dims: ModelDims::default(),
            seed: 0,
            train_fraction: 0.8,
            val_every: 100,
            val_pairs: 256,
            ckpt_every: 0,
            ckpt_dir: None,
            s_check_every: 500,
        }
    }
}

impl TrainConfig {
    pub fn total_iterations(&self) -> u64 {
        self.epochs * self.iterations_per_epoch
    }

    /// The loss weights actually used: clip-only mode forces beta to zero.
    pub fn effective_loss(&self) -> LossConfig {
        match self.mode {
            TrainMode::ClipOnly => LossConfig {
                beta: 0.0,
                ..self.loss
            },
            TrainMode::Selip => self.loss,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size < 2 {
            return Err(TrainError::InvalidConfig(
                "batch_size must be at least 2".into(),
            ));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(TrainError::InvalidConfig(
                "train_fraction must lie strictly between 0 and 1".into(),
            ));
        }
        self.effective_loss().validate()?;
        self.schedule
            .validate()
            .map_err(|e| TrainError::InvalidConfig(e.to_string()))?;
        Ok(())
    }
}

/// One logged training iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub lr_image: f64,
    pub lr_text: f64,
    pub l_clip: f64,
    pub l_se: f64,
    pub l_total: f64,
}

/// Periodic validation retrieval snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub iteration: u64,
    pub top1: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub iterations: Vec<IterationRecord>,
    pub validations: Vec<ValidationRecord>,
}

impl TrainLog {
    /// CSV rendering, one row per iteration; the `val_top1` column is filled
    /// only at validation iterations.
    pub fn to_csv(&self) -> String {
        let val_at: HashMap<u64, f64> = self
            .validations
            .iter()
            .map(|v| (v.iteration, v.top1))
            .collect();
        let mut out = String::from("iteration,lr_image,lr_text,l_clip,l_se,l_total,val_top1\n");
        for r in &self.iterations {
            let val = val_at
                .get(&r.iteration)
                .map(|v| v.to_string())
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.iteration, r.lr_image, r.lr_text, r.l_clip, r.l_se, r.l_total, val
            );
        }
        out
    }
}

/// Result of a training run.
pub struct TrainOutcome {
    pub params: EncoderParams,
    pub log: TrainLog,
    pub adam_image: AdamState,
    pub adam_text: AdamState,
    pub last_iteration: u64,
}

/// Groups pair indices by exact description text, in first-appearance order.
pub fn build_text_classes(texts: &[&str]) -> Vec<Vec<usize>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, t) in texts.iter().enumerate() {
        match index.get(t) {
            Some(&c) => classes[c].push(i),
            None => {
                index.insert(t, classes.len());
                classes.push(vec![i]);
            }
        }
    }
    classes
}

/// Samples `batch_size` pair indices with pairwise-distinct texts: classes
/// are drawn uniformly without replacement, then one member uniformly within
/// each class.
pub fn unique_text_sampler(
    classes: &[Vec<usize>],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, TrainError> {
    if classes.len() < batch_size {
        return Err(TrainError::InsufficientDistinctTexts {
            have: classes.len(),
            need: batch_size,
        });
    }
    // Partial Fisher-Yates over class indices.
    let mut order: Vec<usize> = (0..classes.len()).collect();
    for k in 0..batch_size {
        let j = rng.gen_range(k..order.len());
        order.swap(k, j);
    }
    let mut batch = Vec::with_capacity(batch_size);
    for &class in order.iter().take(batch_size) {
        let members = &classes[class];
        batch.push(members[rng.gen_range(0..members.len())]);
    }
    Ok(batch)
}

const ITER_SALT: u64 = 0x6261_7463_6872_6e67;

fn iteration_rng(seed: u64, t: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ ITER_SALT ^ t.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

struct PreparedPair {
    image: Vec<f64>,
    description: Description,
    tokens: Vec<usize>,
    class: usize,
}

struct PreparedDataset {
    pairs: Vec<PreparedPair>,
    classes: Vec<Vec<usize>>,
}

fn prepare_pairs(
    params: &EncoderParams,
    pairs: &[&ModalityPair],
) -> Result<PreparedDataset, TrainError> {
    let texts: Vec<&str> = pairs.iter().map(|p| p.description.text.as_str()).collect();
    let classes = build_text_classes(&texts);
    let mut class_of = vec![0usize; pairs.len()];
    for (c, members) in classes.iter().enumerate() {
        for &i in members {
            class_of[i] = c;
        }
    }
    let mut prepared = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        prepared.push(PreparedPair {
            image: p.image.clone(),
            description: p.description.clone(),
            tokens: params.token_ids(&p.description.text)?,
            class: class_of[i],
        });
    }
    Ok(PreparedDataset {
        pairs: prepared,
        classes,
    })
}

/// Encodes pairs and evaluates image-to-text retrieval over their
/// deduplicated texts.
pub fn retrieval_over_pairs(
    params: &EncoderParams,
    pairs: &[&ModalityPair],
    ks: &[usize],
) -> Result<RetrievalResult, TrainError> {
    let texts: Vec<String> = pairs.iter().map(|p| p.description.text.clone()).collect();
    let (candidates, gold) = dedupe_candidates(&texts);
    let images = crate::synth::image_matrix(pairs);
    let image_embeddings = encode_image_batch(params, &images);
    let candidate_refs: Vec<&str> = candidates.iter().map(String::as_str).collect();
    let candidate_embeddings = encode_text_batch(params, &candidate_refs)?;
    Ok(topk_accuracy(
        &image_embeddings,
        &candidate_embeddings,
        &gold,
        ks,
    )?)
}

fn soft_target_for_batch(
    dataset: &PreparedDataset,
    batch: &[usize],
    cache: &mut HashMap<(usize, usize), f64>,
    tok_cfg: &TokenizerConfig,
) -> Result<SoftTargetMatrix, TrainError> {
    let n = batch.len();
    let mut values = Array2::zeros((n, n));
    for i in 0..n {
        for j in i..n {
            let (ci, cj) = (dataset.pairs[batch[i]].class, dataset.pairs[batch[j]].class);
            let key = (ci.min(cj), ci.max(cj));
            let s = match cache.get(&key) {
                Some(&s) => s,
                None => {
                    let s = description_similarity(
                        &dataset.pairs[batch[i]].description,
                        &dataset.pairs[batch[j]].description,
                        tok_cfg,
                    )?;
                    cache.insert(key, s);
                    s
                }
            };
            values[[i, j]] = s;
            values[[j, i]] = s;
        }
    }
    Ok(SoftTargetMatrix::from_values(values)?)
}

fn checkpoint_path(dir: &Path, label: &str) -> PathBuf {
    dir.join(format!("ckpt_{label}.bin"))
}

fn run(
    subjects: &[SubjectRecord],
    cfg: &TrainConfig,
    resume: Option<(EncoderParams, AdamState, AdamState, u64)>,
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    let loss_cfg = cfg.effective_loss();
    let (train_subjects, test_subjects) =
        split_dataset(subjects, cfg.train_fraction, cfg.seed);
    let train_pairs: Vec<&ModalityPair> =
        train_subjects.iter().flat_map(|s| s.pairs.iter()).collect();
    let first = train_pairs
        .first()
        .ok_or_else(|| TrainError::InvalidConfig("train split has no pairs".into()))?;
    let feature_dim = first.image.len();

    let (mut params, mut adam_image, mut adam_text, done) = match resume {
        Some((p, ai, at, done)) => (p, ai, at, done),
        None => {
            let tokens = build_token_vocabulary(
                subjects
                    .iter()
                    .flat_map(|s| s.pairs.iter())
                    .map(|p| p.description.text.as_str()),
            );
            let params = EncoderParams::init(feature_dim, cfg.dims, tokens, cfg.seed);
            let adam_image = AdamState::new(&params.params[..TEXT_GROUP_START]);
            let adam_text = AdamState::new(&params.params[TEXT_GROUP_START..]);
            (params, adam_image, adam_text, 0)
        }
    };

    let dataset = prepare_pairs(&params, &train_pairs)?;
    if dataset.classes.len() < cfg.batch_size {
        return Err(TrainError::InsufficientDistinctTexts {
            have: dataset.classes.len(),
            need: cfg.batch_size,
        });
    }
    let val_pairs: Vec<&ModalityPair> = test_subjects
        .iter()
        .flat_map(|s| s.pairs.iter())
        .take(cfg.val_pairs)
        .collect();

    let tok_cfg = TokenizerConfig::default();
    let mut sim_cache: HashMap<(usize, usize), f64> = HashMap::new();
    let mut log = TrainLog::default();
    let total = cfg.total_iterations();

    for t in (done + 1)..=total {
        let mut rng = iteration_rng(cfg.seed, t);
        let batch = unique_text_sampler(&dataset.classes, cfg.batch_size, &mut rng)?;
        {
            // In-loop contract: batch texts are pairwise distinct.
            let mut seen = std::collections::HashSet::new();
            for &i in &batch {
                assert!(
                    seen.insert(dataset.pairs[i].description.text.as_str()),
                    "duplicate text in batch at iteration {t}"
                );
            }
        }
        let lr_image = scheduled_lr(
            t,
            cfg.schedule.lr_init_image,
            &cfg.schedule,
            cfg.iterations_per_epoch,
        )?;
        let lr_text = scheduled_lr(
            t,
            cfg.schedule.lr_init_text,
            &cfg.schedule,
            cfg.iterations_per_epoch,
        )?;

        let soft = match cfg.mode {
            TrainMode::Selip => Some(soft_target_for_batch(
                &dataset, &batch, &mut sim_cache, &tok_cfg,
            )?),
            TrainMode::ClipOnly => None,
        };
        if let Some(s) = &soft {
            if cfg.s_check_every > 0 && t % cfg.s_check_every == 0 {
                let descriptions: Vec<Description> = batch
                    .iter()
                    .map(|&i| dataset.pairs[i].description.clone())
                    .collect();
                let direct = batch_similarity_matrix(&descriptions, &tok_cfg)?;
                assert_eq!(
                    s.values(),
                    direct.values(),
                    "cached soft target diverged from the direct computation at iteration {t}"
                );
            }
        }

        let mut g = Graph::new();
        let leaves = add_param_leaves(&mut g, &params);
        let mut images = Array2::zeros((batch.len(), feature_dim));
        for (row, &i) in batch.iter().enumerate() {
            for (col, &x) in dataset.pairs[i].image.iter().enumerate() {
                images[[row, col]] = x;
            }
        }
        let image_node = g.constant(images);
        let v = image_batch_forward(&mut g, &leaves, image_node);
        let token_lists: Vec<Vec<usize>> = batch
            .iter()
            .map(|&i| dataset.pairs[i].tokens.clone())
            .collect();
        let tm = text_batch_forward(&mut g, &leaves, &token_lists);
        let nodes = build_total_loss(&mut g, v, tm, soft.as_ref(), &loss_cfg);

        let l_clip = g.scalar(nodes.l_clip);
        let l_se = g.scalar(nodes.l_se);
        let l_total = g.scalar(nodes.l_total);
        if !(l_clip.is_finite() && l_se.is_finite() && l_total.is_finite()) {
            return Err(TrainError::NonFiniteLoss { iteration: t });
        }

        g.backward(nodes.l_total);
        for p in params.params.iter_mut() {
            p.zero_grad();
        }
        accumulate_gradients(&g, &leaves, &mut params.params);
        let (image_group, text_group) = params.groups_mut();
        adam_step(&mut adam_image, image_group, lr_image);
        adam_step(&mut adam_text, text_group, lr_text);

        log.iterations.push(IterationRecord {
            iteration: t,
            lr_image,
            lr_text,
            l_clip,
            l_se,
            l_total,
        });

        if cfg.val_every > 0 && t % cfg.val_every == 0 && !val_pairs.is_empty() {
            let result = retrieval_over_pairs(&params, &val_pairs, &[1])?;
            log.validations.push(ValidationRecord {
                iteration: t,
                top1: result.top_k_accuracy[&1],
            });
        }

        if cfg.ckpt_every > 0 && t % cfg.ckpt_every == 0 {
            if let Some(dir) = &cfg.ckpt_dir {
                let ckpt =
                    TrainerCheckpoint::from_state(cfg, t, &params, &adam_image, &adam_text);
                ckpt.save(&checkpoint_path(dir, &format!("{t:06}")))?;
            }
        }
    }

    if let Some(dir) = &cfg.ckpt_dir {
        let ckpt = TrainerCheckpoint::from_state(cfg, total, &params, &adam_image, &adam_text);
        ckpt.save(&checkpoint_path(dir, "final"))?;
    }

    Ok(TrainOutcome {
        params,
        log,
        adam_image,
        adam_text,
        last_iteration: total,
    })
}

/// Trains from fresh parameters.
pub fn train_run(subjects: &[SubjectRecord], cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    run(subjects, cfg, None)
}

/// Continues a run from a checkpoint. The checkpoint's stored config governs
/// the run, so the result is bit-identical to the uninterrupted run.
pub fn resume_train_run(
    subjects: &[SubjectRecord],
    ckpt: TrainerCheckpoint,
) -> Result<TrainOutcome, TrainError> {
    let cfg = ckpt.config.clone();
    let iteration = ckpt.iteration;
    let (params, adam_image, adam_text) = ckpt.into_state();
    run(subjects, &cfg, Some((params, adam_image, adam_text, iteration)))
}

// --- checkpoint serialization ---

const CKPT_MAGIC: &[u8; 8] = b"SMALNCK1";
const CKPT_VERSION: u32 = 1;

/// Serializable snapshot of one Adam group.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamSnapshot {
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
}

impl AdamSnapshot {
    fn of(state: &AdamState) -> AdamSnapshot {
        let (m, v) = state.moments();
        AdamSnapshot {
            step_count: state.step_count,
            beta1: state.beta1,
            beta2: state.beta2,
            eps: state.eps,
            m: m.to_vec(),
            v: v.to_vec(),
        }
    }

    fn into_state(self) -> AdamState {
        AdamState::restore(self.m, self.v, self.step_count, self.beta1, self.beta2, self.eps)
    }
}

/// Everything needed to continue or evaluate a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerCheckpoint {
    pub config: TrainConfig,
    pub iteration: u64,
    pub feature_dim: usize,
    pub dims: ModelDims,
    pub tokens: Vec<String>,
    pub params: Vec<(String, Array2<f64>)>,
    pub adam_image: AdamSnapshot,
    pub adam_text: AdamSnapshot,
}

fn put_u32(buf: &mut Vec<u8>, x: u32) {
    buf.extend_from_slice(&x.to_le_bytes());
}

fn put_u64(buf: &mut Vec<u8>, x: u64) {
    buf.extend_from_slice(&x.to_le_bytes());
}

fn put_bytes(buf: &mut Vec<u8>, b: &[u8]) {
    put_u64(buf, b.len() as u64);
    buf.extend_from_slice(b);
}

fn put_matrix(buf: &mut Vec<u8>, m: &Array2<f64>) {
    put_u64(buf, m.nrows() as u64);
    put_u64(buf, m.ncols() as u64);
    for v in m.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.at + n > self.data.len() {
            return Err(CheckpointError::Malformed("unexpected end of data".into()));
        }
        let s = &self.data[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn bytes(&mut self) -> Result<&'a [u8], CheckpointError> {
        let n = self.u64()? as usize;
        self.take(n)
    }

    fn matrix(&mut self) -> Result<Array2<f64>, CheckpointError> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            data.push(self.f64()?);
        }
        Array2::from_shape_vec((rows, cols), data)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))
    }
}

fn put_adam(buf: &mut Vec<u8>, snap: &AdamSnapshot) {
    put_u64(buf, snap.step_count);
    buf.extend_from_slice(&snap.beta1.to_le_bytes());
    buf.extend_from_slice(&snap.beta2.to_le_bytes());
    buf.extend_from_slice(&snap.eps.to_le_bytes());
    put_u64(buf, snap.m.len() as u64);
    for m in &snap.m {
        put_matrix(buf, m);
    }
    for v in &snap.v {
        put_matrix(buf, v);
    }
}

fn read_adam(c: &mut Cursor) -> Result<AdamSnapshot, CheckpointError> {
    let step_count = c.u64()?;
    let beta1 = c.f64()?;
    let beta2 = c.f64()?;
    let eps = c.f64()?;
    let n = c.u64()? as usize;
    let mut m = Vec::with_capacity(n);
    for _ in 0..n {
        m.push(c.matrix()?);
    }
    let mut v = Vec::with_capacity(n);
    for _ in 0..n {
        v.push(c.matrix()?);
    }
    Ok(AdamSnapshot {
        step_count,
        beta1,
        beta2,
        eps,
        m,
        v,
    })
}

impl TrainerCheckpoint {
    pub fn from_state(
        cfg: &TrainConfig,
        iteration: u64,
        params: &EncoderParams,
        adam_image: &AdamState,
        adam_text: &AdamState,
    ) -> TrainerCheckpoint {
        TrainerCheckpoint {
            config: cfg.clone(),
            iteration,
            feature_dim: params.feature_dim,
            dims: params.dims,
            tokens: params.tokens().to_vec(),
            params: params
                .params
                .iter()
                .map(|p| (p.name.clone(), p.values.clone()))
                .collect(),
            adam_image: AdamSnapshot::of(adam_image),
            adam_text: AdamSnapshot::of(adam_text),
        }
    }

    /// Rebuilds encoder parameters and optimizer states.
    pub fn into_state(self) -> (EncoderParams, AdamState, AdamState) {
        let params: Vec<Parameter> = self
            .params
            .into_iter()
            .map(|(name, values)| Parameter::new(name, values))
            .collect();
        let encoder = EncoderParams::restore(self.feature_dim, self.dims, self.tokens, params);
        (
            encoder,
            self.adam_image.into_state(),
            self.adam_text.into_state(),
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(CKPT_MAGIC);
        put_u32(&mut buf, CKPT_VERSION);
        let meta = serde_json::json!({
            "config": self.config,
            "iteration": self.iteration,
            "feature_dim": self.feature_dim,
            "dims": self.dims,
        });
        put_bytes(&mut buf, meta.to_string().as_bytes());
        put_u64(&mut buf, self.tokens.len() as u64);
        for t in &self.tokens {
            put_bytes(&mut buf, t.as_bytes());
        }
        put_u64(&mut buf, self.params.len() as u64);
        for (name, values) in &self.params {
            put_bytes(&mut buf, name.as_bytes());
            put_matrix(&mut buf, values);
        }
        put_adam(&mut buf, &self.adam_image);
        put_adam(&mut buf, &self.adam_text);
        let digest = Sha256::digest(&buf);
        buf.extend_from_slice(&digest);
        buf
    }

    pub fn from_bytes(data: &[u8]) -> Result<TrainerCheckpoint, CheckpointError> {
        if data.len() < CKPT_MAGIC.len() + 4 + 32 {
            return Err(CheckpointError::ChecksumMismatch);
        }
        let (payload, checksum) = data.split_at(data.len() - 32);
        if payload.len() < CKPT_MAGIC.len() || &payload[..CKPT_MAGIC.len()] != CKPT_MAGIC {
            return Err(CheckpointError::Malformed("bad magic".into()));
        }
        let digest = Sha256::digest(payload);
        if digest.as_slice() != checksum {
            return Err(CheckpointError::ChecksumMismatch);
        }
        let mut c = Cursor {
            data: payload,
            at: CKPT_MAGIC.len(),
        };
        let version = c.u32()?;
        if version != CKPT_VERSION {
            return Err(CheckpointError::VersionMismatch {
                found: version,
                expected: CKPT_VERSION,
            });
        }
        let meta_bytes = c.bytes()?;
        let meta: serde_json::Value = serde_json::from_slice(meta_bytes)
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let config: TrainConfig = serde_json::from_value(meta["config"].clone())
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        let iteration = meta["iteration"]
            .as_u64()
            .ok_or_else(|| CheckpointError::Malformed("missing iteration".into()))?;
        let feature_dim = meta["feature_dim"]
            .as_u64()
            .ok_or_else(|| CheckpointError::Malformed("missing feature_dim".into()))?
            as usize;
        let dims: ModelDims = serde_json::from_value(meta["dims"].clone())
            .map_err(|e| CheckpointError::Malformed(e.to_string()))?;

        let n_tokens = c.u64()? as usize;
        let mut tokens = Vec::with_capacity(n_tokens);
        for _ in 0..n_tokens {
            let b = c.bytes()?;
            tokens.push(
                String::from_utf8(b.to_vec())
                    .map_err(|e| CheckpointError::Malformed(e.to_string()))?,
            );
        }
        let n_params = c.u64()? as usize;
        let mut params = Vec::with_capacity(n_params);
        for _ in 0..n_params {
            let name = String::from_utf8(c.bytes()?.to_vec())
                .map_err(|e| CheckpointError::Malformed(e.to_string()))?;
            let values = c.matrix()?;
            params.push((name, values));
        }
        let adam_image = read_adam(&mut c)?;
        let adam_text = read_adam(&mut c)?;
        Ok(TrainerCheckpoint {
            config,
            iteration,
            feature_dim,
            dims,
            tokens,
            params,
            adam_image,
            adam_text,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainerCheckpoint, CheckpointError> {
        let data = std::fs::read(path)?;
        TrainerCheckpoint::from_bytes(&data)
    }
}
