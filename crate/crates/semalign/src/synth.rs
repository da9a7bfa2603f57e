//! Synthetic paired corpus: latent findings per subject, per-modality image
//! feature vectors from a frozen random code, rendered descriptions, and the
//! intensity preprocessing.
//!
//! The pairing rule: an abnormal subject yields one image-text pair per
//! distinct modality among its findings; a subject without findings yields
//! all five modalities, each paired with the normal description.

use crate::report::{
    render_description, Description, Finding, Modality, Orientation, Vocabulary,
};
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("input array is empty")]
    EmptyInput,
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(&'static str),
}

/// Site tokens available to the synthetic vocabulary (sentinel excluded).
pub const SITE_POOL: [&str; 24] = [
    "basal ganglia",
    "frontal lobe",
    "parietal lobe",
    "temporal lobe",
    "occipital lobe",
    "cerebellum",
    "pons",
    "thalamus",
    "corona radiata",
    "centrum semiovale",
    "lateral ventricle",
    "hippocampus",
    "midbrain",
    "medulla",
    "insula",
    "corpus callosum",
    "caudate nucleus",
    "putamen",
    "internal capsule",
    "periventricular white matter",
    "ethmoid sinus",
    "mastoid region",
    "semioval center",
    "globus pallidus",
];

/// Appearance tokens available to the synthetic vocabulary (sentinel excluded).
pub const APPEARANCE_POOL: [&str; 16] = [
    "long t1 signal",
    "long t2 signal",
    "short t1 signal",
    "short t2 signal",
    "patchy high signal",
    "point-like high signal",
    "restricted diffusion",
    "mixed signal intensity",
    "diffuse low signal",
    "nodular high signal",
    "cystic signal change",
    "mild local swelling",
    "lacunar softening focus",
    "hazy low signal",
    "streaky high signal",
    "slight signal elevation",
];

/// Builds the deterministic synthetic vocabulary. `n_sites` and
/// `n_appearances` count the sentinel tokens, so the usable finding tokens
/// number one fewer on each side.
pub fn synthetic_vocabulary(
    n_sites: usize,
    n_appearances: usize,
) -> Result<Vocabulary, SynthError> {
    if n_sites < 2 || n_appearances < 2 {
        return Err(SynthError::InvalidConfig(
            "vocabulary sizes must be at least 2 (sentinel plus one token)",
        ));
    }
    if n_sites > SITE_POOL.len() + 1 || n_appearances > APPEARANCE_POOL.len() + 1 {
        return Err(SynthError::InvalidConfig("vocabulary size exceeds token pool"));
    }
    let sites = SITE_POOL[..n_sites - 1]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let appearances = APPEARANCE_POOL[..n_appearances - 1]
        .iter()
        .map(|s| s.to_string())
        .collect();
    Vocabulary::new(sites, appearances)
        .map_err(|_| SynthError::InvalidConfig("token pool failed vocabulary validation"))
}

/// Corpus generation parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub n_sites: usize,
    pub n_appearances: usize,
    pub max_findings: usize,
    pub feature_dim: usize,
    pub noise_sigma: f64,
    pub near_duplicate_rate: f64,
    pub normal_rate: f64,
    /// When set, each modality draws appearances from its own slice of the
    /// vocabulary, the way signal descriptions are tied to a sequence in
    /// real reports. Disable for fully independent field sampling.
    pub modality_linked_appearances: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_subjects: 2000,
            n_sites: 12,
            n_appearances: 8,
            max_findings: 3,
            feature_dim: 64,
            noise_sigma: 0.1,
            near_duplicate_rate: 0.3,
            normal_rate: 0.1,
            modality_linked_appearances: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.n_subjects < 2 {
            return Err(SynthError::InvalidConfig("need at least 2 subjects"));
        }
        if self.feature_dim < 4 {
            return Err(SynthError::InvalidConfig("feature_dim must be at least 4"));
        }
        if self.max_findings < 1 {
            return Err(SynthError::InvalidConfig("max_findings must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.near_duplicate_rate)
            || !(0.0..=1.0).contains(&self.normal_rate)
        {
            return Err(SynthError::InvalidConfig("rates must lie in [0,1]"));
        }
        if self.noise_sigma < 0.0 {
            return Err(SynthError::InvalidConfig("noise_sigma must be nonnegative"));
        }
        Ok(())
    }
}

/// One image-text pair of a subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityPair {
    pub modality: Modality,
    pub image: Vec<f64>,
    pub description: Description,
}

/// One synthetic subject: latent findings plus its image-text pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub subject_id: u64,
    pub findings: Vec<Finding>,
    pub pairs: Vec<ModalityPair>,
}

/// A generated corpus with the vocabulary it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub subjects: Vec<SubjectRecord>,
}

impl Corpus {
    /// All image-text pairs in subject order.
    pub fn pairs(&self) -> Vec<&ModalityPair> {
        self.subjects.iter().flat_map(|s| s.pairs.iter()).collect()
    }
}

const CODE_SALT: u64 = 0x6772_6f75_6e64_7472; // frozen salt for the code rng

/// Weight of the joint interaction direction inside a finding's code; the
/// remainder is carried by the per-field block directions. The block share
/// makes images of findings that differ in one field measurably closer than
/// unrelated ones, while the joint share keeps the code injective over
/// finding multisets.
const CODE_JOINT_WEIGHT: f64 = 0.35;

/// Injective random linear code mapping findings to feature space. Each
/// finding contributes its (orientation, site, appearance) one-hot block
/// directions plus a joint direction unique to the combination; an image is
/// the modality base plus the sum over its findings.
pub struct FeatureCode {
    feature_dim: usize,
    n_sites: usize,
    n_appearances: usize,
    modality_base: Vec<Vec<f64>>,
    orientation_block: Vec<Vec<f64>>,
    site_block: Vec<Vec<f64>>,
    appearance_block: Vec<Vec<f64>>,
    combos: Vec<Vec<f64>>,
}

impl FeatureCode {
    pub fn new(seed: u64, vocab: &Vocabulary, feature_dim: usize) -> FeatureCode {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ CODE_SALT);
        let normal = Normal::new(0.0, 1.0).expect("unit normal");
        let n_sites = vocab.sites().len();
        let n_appearances = vocab.appearances().len();
        let mut draw = |n: usize| -> Vec<Vec<f64>> {
            (0..n)
                .map(|_| (0..feature_dim).map(|_| normal.sample(&mut rng)).collect())
                .collect()
        };
        let modality_base = draw(Modality::ALL.len());
        let orientation_block = draw(Orientation::ALL.len());
        let site_block = draw(n_sites);
        let appearance_block = draw(n_appearances);
        let combos = draw(Orientation::ALL.len() * n_sites * n_appearances);
        FeatureCode {
            feature_dim,
            n_sites,
            n_appearances,
            modality_base,
            orientation_block,
            site_block,
            appearance_block,
            combos,
        }
    }

    fn field_indices(&self, f: &Finding, vocab: &Vocabulary) -> (usize, usize, usize) {
        let o = Orientation::ALL
            .iter()
            .position(|x| *x == f.orientation)
            .expect("orientation");
        let s = vocab
            .sites()
            .iter()
            .position(|x| x == &f.anatomic_site)
            .expect("site in vocabulary");
        let a = vocab
            .appearances()
            .iter()
            .position(|x| x == &f.appearance)
            .expect("appearance in vocabulary");
        (o, s, a)
    }

    /// Noise-free embedding of the findings restricted to one modality.
    /// Findings are summed in sorted combination order so the result depends
    /// only on the finding multiset.
    pub fn encode(&self, findings: &[Finding], modality: Modality, vocab: &Vocabulary) -> Vec<f64> {
        let m = Modality::ALL.iter().position(|x| *x == modality).unwrap();
        let mut out = self.modality_base[m].clone();
        let mut indices: Vec<(usize, usize, usize)> = findings
            .iter()
            .filter(|f| f.modality == modality)
            .map(|f| self.field_indices(f, vocab))
            .collect();
        indices.sort_unstable();
        let block_weight = (1.0 - CODE_JOINT_WEIGHT) / 3.0f64.sqrt();
        for (o, s, a) in indices {
            let joint = (o * self.n_sites + s) * self.n_appearances + a;
            for k in 0..self.feature_dim {
                out[k] += CODE_JOINT_WEIGHT * self.combos[joint][k]
                    + block_weight
                        * (self.orientation_block[o][k]
                            + self.site_block[s][k]
                            + self.appearance_block[a][k]);
            }
        }
        out
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }
}

/// Noise-free code embedding plus Gaussian perturbation of scale
/// `noise_sigma`.
pub fn ground_truth_image(
    code: &FeatureCode,
    findings: &[Finding],
    modality: Modality,
    vocab: &Vocabulary,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let mut v = code.encode(findings, modality, vocab);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    for x in v.iter_mut() {
        *x += noise_sigma * normal.sample(rng);
    }
    v
}

/// Appearance tokens a modality may use. With linking on, usable tokens are
/// dealt round-robin across the five modalities; otherwise all are shared.
fn appearance_options<'v>(
    vocab: &'v Vocabulary,
    modality: Modality,
    linked: bool,
) -> Vec<&'v String> {
    let all: Vec<&String> = vocab.finding_appearances().collect();
    if !linked {
        return all;
    }
    let m = Modality::ALL.iter().position(|x| *x == modality).unwrap();
    let bucket: Vec<&String> = all
        .iter()
        .enumerate()
        .filter(|(i, _)| i % Modality::ALL.len() == m)
        .map(|(_, a)| *a)
        .collect();
    if bucket.is_empty() {
        all
    } else {
        bucket
    }
}

fn sample_finding(cfg: &SynthConfig, vocab: &Vocabulary, rng: &mut ChaCha8Rng) -> Finding {
    let sites: Vec<&String> = vocab.finding_sites().collect();
    let modality = Modality::ALL[rng.gen_range(0..Modality::ALL.len())];
    let appearances = appearance_options(vocab, modality, cfg.modality_linked_appearances);
    Finding {
        modality,
        orientation: Orientation::ALL[rng.gen_range(0..Orientation::ALL.len())],
        anatomic_site: sites[rng.gen_range(0..sites.len())].clone(),
        appearance: appearances[rng.gen_range(0..appearances.len())].clone(),
    }
}

/// Perturbs orientation, site, or appearance (never the modality, so the
/// near-duplicate stays a same-sequence rewording). Appearance replacements
/// respect the modality linking.
fn perturb_one_field(
    f: &Finding,
    cfg: &SynthConfig,
    vocab: &Vocabulary,
    rng: &mut ChaCha8Rng,
) -> Finding {
    let mut out = f.clone();
    match rng.gen_range(0..3) {
        0 => {
            let options: Vec<Orientation> = Orientation::ALL
                .iter()
                .copied()
                .filter(|o| *o != f.orientation)
                .collect();
            out.orientation = options[rng.gen_range(0..options.len())];
        }
        1 => {
            let options: Vec<&String> = vocab
                .finding_sites()
                .filter(|s| **s != f.anatomic_site)
                .collect();
            if !options.is_empty() {
                out.anatomic_site = options[rng.gen_range(0..options.len())].clone();
            }
        }
        _ => {
            let options: Vec<&String> =
                appearance_options(vocab, f.modality, cfg.modality_linked_appearances)
                    .into_iter()
                    .filter(|a| **a != f.appearance)
                    .collect();
            if !options.is_empty() {
                out.appearance = options[rng.gen_range(0..options.len())].clone();
            }
        }
    }
    out
}

/// Builds the pairs of a subject from its findings: one pair per distinct
/// modality (in the fixed modality order), or all five normal pairs when
/// `findings` is empty.
fn subject_from_findings(
    subject_id: u64,
    findings: Vec<Finding>,
    vocab: &Vocabulary,
    code: &FeatureCode,
    noise_sigma: f64,
    rng: &mut ChaCha8Rng,
) -> SubjectRecord {
    let mut pairs = Vec::new();
    if findings.is_empty() {
        let description = render_description(&[]);
        for m in Modality::ALL {
            pairs.push(ModalityPair {
                modality: m,
                image: ground_truth_image(code, &[], m, vocab, noise_sigma, rng),
                description: description.clone(),
            });
        }
    } else {
        for m in Modality::ALL {
            let restricted: Vec<Finding> = findings
                .iter()
                .filter(|f| f.modality == m)
                .cloned()
                .collect();
            if restricted.is_empty() {
                continue;
            }
            pairs.push(ModalityPair {
                modality: m,
                image: ground_truth_image(code, &findings, m, vocab, noise_sigma, rng),
                description: render_description(&restricted),
            });
        }
    }
    SubjectRecord {
        subject_id,
        findings,
        pairs,
    }
}

/// Samples one subject. `dup_pool` holds findings of previously generated
/// subjects; with probability `near_duplicate_rate` the first finding is a
/// pooled finding with one field perturbed.
pub fn sample_subject(
    cfg: &SynthConfig,
    vocab: &Vocabulary,
    code: &FeatureCode,
    subject_id: u64,
    dup_pool: &[Finding],
    rng: &mut ChaCha8Rng,
) -> SubjectRecord {
    if rng.gen::<f64>() < cfg.normal_rate {
        return subject_from_findings(subject_id, Vec::new(), vocab, code, cfg.noise_sigma, rng);
    }
    let count = rng.gen_range(1..=cfg.max_findings);
    let mut findings = Vec::with_capacity(count);
    if !dup_pool.is_empty() && rng.gen::<f64>() < cfg.near_duplicate_rate {
        let src = &dup_pool[rng.gen_range(0..dup_pool.len())];
        findings.push(perturb_one_field(src, cfg, vocab, rng));
    }
    while findings.len() < count {
        findings.push(sample_finding(cfg, vocab, rng));
    }
    subject_from_findings(subject_id, findings, vocab, code, cfg.noise_sigma, rng)
}

/// Generates the full corpus. Each subject draws from an rng derived as
/// `seed ^ subject_id`, so generation is reproducible bit for bit.
pub fn generate_corpus(cfg: &SynthConfig) -> Result<Corpus, SynthError> {
    cfg.validate()?;
    let vocab = synthetic_vocabulary(cfg.n_sites, cfg.n_appearances)?;
    let code = FeatureCode::new(cfg.seed, &vocab, cfg.feature_dim);
    let mut subjects = Vec::with_capacity(cfg.n_subjects);
    let mut pool: Vec<Finding> = Vec::new();
    for id in 0..cfg.n_subjects as u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ id);
        let subject = sample_subject(cfg, &vocab, &code, id, &pool, &mut rng);
        pool.extend(subject.findings.iter().cloned());
        subjects.push(subject);
    }
    Ok(Corpus { vocab, subjects })
}

/// 99.9th-percentile intensity truncation followed by min-max scaling into
/// [0,1]. The percentile interpolates linearly at sorted position
/// `0.999 * n`; constant arrays map to all zeros.
pub fn preprocess_intensities(raw: &[f64]) -> Result<Vec<f64>, SynthError> {
    if raw.is_empty() {
        return Err(SynthError::EmptyInput);
    }
    let p = percentile(raw, 99.9);
    let clipped: Vec<f64> = raw.iter().map(|&x| x.min(p)).collect();
    let min = clipped.iter().copied().fold(f64::INFINITY, f64::min);
    let max = clipped.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == min {
        return Ok(vec![0.0; raw.len()]);
    }
    Ok(clipped.iter().map(|&x| (x - min) / (max - min)).collect())
}

/// Linear-interpolation percentile at sorted position `q/100 * n`, clamped to
/// the sample range.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let h = q / 100.0 * n as f64;
    let i = (h.floor() as usize).min(n - 1);
    if i + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - i as f64;
    sorted[i] + frac * (sorted[i + 1] - sorted[i])
}

/// Subject-level train/test partition, deterministic given the seed.
pub fn split_dataset(
    subjects: &[SubjectRecord],
    train_fraction: f64,
    seed: u64,
) -> (Vec<SubjectRecord>, Vec<SubjectRecord>) {
    assert!(
        train_fraction > 0.0 && train_fraction < 1.0,
        "train_fraction must lie strictly between 0 and 1"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..subjects.len()).collect();
    order.shuffle(&mut rng);
    let train_count = (subjects.len() as f64 * train_fraction).floor() as usize;
    let mut in_train = vec![false; subjects.len()];
    for &i in order.iter().take(train_count) {
        in_train[i] = true;
    }
    let mut train = Vec::with_capacity(train_count);
    let mut test = Vec::with_capacity(subjects.len() - train_count);
    for (i, s) in subjects.iter().enumerate() {
        if in_train[i] {
            train.push(s.clone());
        } else {
            test.push(s.clone());
        }
    }
    (train, test)
}

/// Converts pair images to an `ndarray` matrix (one pair per row).
pub fn image_matrix(pairs: &[&ModalityPair]) -> Array2<f64> {
    let dim = pairs.first().map_or(0, |p| p.image.len());
    let mut m = Array2::zeros((pairs.len(), dim));
    for (i, p) in pairs.iter().enumerate() {
        for (j, &x) in p.image.iter().enumerate() {
            m[[i, j]] = x;
        }
    }
    m
}
