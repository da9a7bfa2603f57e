//! Toy image and text encoders: two tanh affine layers plus a linear
//! projection into a shared space. The text side mean-pools a token embedding
//! table before the affine stack.

use crate::autodiff::{Graph, NodeId};
use crate::optim::Parameter;
use crate::similarity::{tokenize, TokenizerConfig};
use ndarray::Array2;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EncoderError {
    #[error("input has {got} features, encoder expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("text tokenizes to zero tokens: {0:?}")]
    EmptyTokenization(String),
}

/// Widths of the encoder stack. Both encoders project to the same `d_proj`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelDims {
    pub d_emb: usize,
    pub d_hidden: usize,
    pub d_proj: usize,
}

impl Default for ModelDims {
    fn default() -> Self {
        ModelDims {
            d_emb: 32,
            d_hidden: 64,
            d_proj: 32,
        }
    }
}

// Parameter layout inside `EncoderParams::params`.
const IMG_W1: usize = 0;
const IMG_B1: usize = 1;
const IMG_W2: usize = 2;
const IMG_B2: usize = 3;
const IMG_WP: usize = 4;
const IMG_BP: usize = 5;
/// First text parameter; everything before belongs to the image encoder.
pub const TEXT_GROUP_START: usize = 6;
const TXT_EMBED: usize = 6;
const TXT_W1: usize = 7;
const TXT_B1: usize = 8;
const TXT_W2: usize = 9;
const TXT_B2: usize = 10;
const TXT_WP: usize = 11;
const TXT_BP: usize = 12;
const PARAM_COUNT: usize = 13;

const INIT_SALT: u64 = 0x696e_6974_7061_7261;

/// All trainable state of both encoders plus the text token inventory.
/// Unknown words map to the reserved trailing embedding row.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub feature_dim: usize,
    pub dims: ModelDims,
    tokens: Vec<String>,
    pub params: Vec<Parameter>,
}

fn affine_init(rng: &mut ChaCha8Rng, rows: usize, cols: usize, fan_in: usize) -> Array2<f64> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-bound..bound))
}

impl EncoderParams {
    /// Fresh parameters: affine layers uniform in (-1/sqrt(fan_in),
    /// 1/sqrt(fan_in)), embedding table normal with sd 0.02.
    pub fn init(feature_dim: usize, dims: ModelDims, tokens: Vec<String>, seed: u64) -> Self {
        assert!(
            tokens.windows(2).all(|w| w[0] < w[1]),
            "token inventory must be sorted and deduplicated"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ INIT_SALT);
        let embed_rows = tokens.len() + 1; // trailing UNK row
        let normal = Normal::new(0.0, 0.02).expect("embedding init");
        let mut params = Vec::with_capacity(PARAM_COUNT);
        params.push(Parameter::new(
            "img_w1",
            affine_init(&mut rng, feature_dim, dims.d_hidden, feature_dim),
        ));
        params.push(Parameter::new(
            "img_b1",
            affine_init(&mut rng, 1, dims.d_hidden, feature_dim),
        ));
        params.push(Parameter::new(
            "img_w2",
            affine_init(&mut rng, dims.d_hidden, dims.d_hidden, dims.d_hidden),
        ));
        params.push(Parameter::new(
            "img_b2",
            affine_init(&mut rng, 1, dims.d_hidden, dims.d_hidden),
        ));
        params.push(Parameter::new(
            "img_wp",
            affine_init(&mut rng, dims.d_hidden, dims.d_proj, dims.d_hidden),
        ));
        params.push(Parameter::new(
            "img_bp",
            affine_init(&mut rng, 1, dims.d_proj, dims.d_hidden),
        ));
        params.push(Parameter::new(
            "txt_embed",
            Array2::from_shape_fn((embed_rows, dims.d_emb), |_| normal.sample(&mut rng)),
        ));
        params.push(Parameter::new(
            "txt_w1",
            affine_init(&mut rng, dims.d_emb, dims.d_hidden, dims.d_emb),
        ));
        params.push(Parameter::new(
            "txt_b1",
            affine_init(&mut rng, 1, dims.d_hidden, dims.d_emb),
        ));
        params.push(Parameter::new(
            "txt_w2",
            affine_init(&mut rng, dims.d_hidden, dims.d_hidden, dims.d_hidden),
        ));
        params.push(Parameter::new(
            "txt_b2",
            affine_init(&mut rng, 1, dims.d_hidden, dims.d_hidden),
        ));
        params.push(Parameter::new(
            "txt_wp",
            affine_init(&mut rng, dims.d_hidden, dims.d_proj, dims.d_hidden),
        ));
        params.push(Parameter::new(
            "txt_bp",
            affine_init(&mut rng, 1, dims.d_proj, dims.d_hidden),
        ));
        EncoderParams {
            feature_dim,
            dims,
            tokens,
            params,
        }
    }

    pub fn restore(
        feature_dim: usize,
        dims: ModelDims,
        tokens: Vec<String>,
        params: Vec<Parameter>,
    ) -> Self {
        assert_eq!(params.len(), PARAM_COUNT, "unexpected parameter count");
        assert!(
            tokens.windows(2).all(|w| w[0] < w[1]),
            "token inventory must be sorted and deduplicated"
        );
        EncoderParams {
            feature_dim,
            dims,
            tokens,
            params,
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    fn unk_index(&self) -> usize {
        self.tokens.len()
    }

    /// Token ids of a text, sorted so pooling is exactly order-invariant.
    pub fn token_ids(&self, text: &str) -> Result<Vec<usize>, EncoderError> {
        let words = tokenize(text, &TokenizerConfig::default());
        if words.is_empty() {
            return Err(EncoderError::EmptyTokenization(text.to_string()));
        }
        let mut ids: Vec<usize> = words
            .iter()
            .map(|w| {
                self.tokens
                    .binary_search(w)
                    .unwrap_or_else(|_| self.unk_index())
            })
            .collect();
        ids.sort_unstable();
        Ok(ids)
    }

    /// Splits the parameters into the image group and the text group.
    pub fn groups_mut(&mut self) -> (&mut [Parameter], &mut [Parameter]) {
        self.params.split_at_mut(TEXT_GROUP_START)
    }
}

/// Adds every parameter as a differentiable leaf; index-aligned with
/// `EncoderParams::params`.
pub fn add_param_leaves(g: &mut Graph, params: &EncoderParams) -> Vec<NodeId> {
    params
        .params
        .iter()
        .map(|p| g.var(p.values.clone()))
        .collect()
}

fn mlp(
    g: &mut Graph,
    x: NodeId,
    leaves: &[NodeId],
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wp: usize,
    bp: usize,
) -> NodeId {
    let h1 = g.matmul(x, leaves[w1]);
    let h1 = g.add_row_vec(h1, leaves[b1]);
    let h1 = g.tanh(h1);
    let h2 = g.matmul(h1, leaves[w2]);
    let h2 = g.add_row_vec(h2, leaves[b2]);
    let h2 = g.tanh(h2);
    let out = g.matmul(h2, leaves[wp]);
    g.add_row_vec(out, leaves[bp])
}

/// Image branch over a batch: `images` is an N x feature_dim node.
pub fn image_batch_forward(g: &mut Graph, leaves: &[NodeId], images: NodeId) -> NodeId {
    mlp(g, images, leaves, IMG_W1, IMG_B1, IMG_W2, IMG_B2, IMG_WP, IMG_BP)
}

/// Text branch over a batch of token id lists: embedding lookup, mean pool,
/// then the affine stack. Returns an N x d_proj node.
pub fn text_batch_forward(g: &mut Graph, leaves: &[NodeId], token_lists: &[Vec<usize>]) -> NodeId {
    let pooled: Vec<NodeId> = token_lists
        .iter()
        .map(|ids| {
            let rows = g.gather_rows(leaves[TXT_EMBED], ids);
            g.mean_rows(rows)
        })
        .collect();
    let x = g.concat_rows(&pooled);
    mlp(g, x, leaves, TXT_W1, TXT_B1, TXT_W2, TXT_B2, TXT_WP, TXT_BP)
}

/// Encodes one image feature vector.
pub fn encode_image(params: &EncoderParams, feature: &[f64]) -> Result<Vec<f64>, EncoderError> {
    if feature.len() != params.feature_dim {
        return Err(EncoderError::ShapeMismatch {
            expected: params.feature_dim,
            got: feature.len(),
        });
    }
    let mut g = Graph::new();
    let leaves = add_param_leaves(&mut g, params);
    let x = g.constant(Array2::from_shape_vec((1, feature.len()), feature.to_vec()).unwrap());
    let out = image_batch_forward(&mut g, &leaves, x);
    Ok(g.value(out).row(0).to_vec())
}

/// Encodes one description text.
pub fn encode_text(params: &EncoderParams, text: &str) -> Result<Vec<f64>, EncoderError> {
    let ids = params.token_ids(text)?;
    let mut g = Graph::new();
    let leaves = add_param_leaves(&mut g, params);
    let out = text_batch_forward(&mut g, &leaves, &[ids]);
    Ok(g.value(out).row(0).to_vec())
}

/// Batch forward pass without gradients; rows follow the input order.
pub fn encode_image_batch(params: &EncoderParams, images: &Array2<f64>) -> Array2<f64> {
    let mut g = Graph::new();
    let leaves = add_param_leaves(&mut g, params);
    let x = g.constant(images.clone());
    let out = image_batch_forward(&mut g, &leaves, x);
    g.value(out).clone()
}

/// Batch text forward pass without gradients.
pub fn encode_text_batch(
    params: &EncoderParams,
    texts: &[&str],
) -> Result<Array2<f64>, EncoderError> {
    let token_lists: Vec<Vec<usize>> = texts
        .iter()
        .map(|t| params.token_ids(t))
        .collect::<Result<_, _>>()?;
    let mut g = Graph::new();
    let leaves = add_param_leaves(&mut g, params);
    let out = text_batch_forward(&mut g, &leaves, &token_lists);
    Ok(g.value(out).clone())
}

/// Sorted word inventory over a corpus of texts, for the embedding table.
pub fn build_token_vocabulary<'a>(texts: impl Iterator<Item = &'a str>) -> Vec<String> {
    let cfg = TokenizerConfig::default();
    let mut set = BTreeSet::new();
    for t in texts {
        for w in tokenize(t, &cfg) {
            set.insert(w);
        }
    }
    set.into_iter().collect()
}
