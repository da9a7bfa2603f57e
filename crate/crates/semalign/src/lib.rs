//! Contrastive image-text alignment with soft similarity targets, end to end
//! at desk scale: structured radiology-style findings with a deterministic
//! report grammar, the mixed syntax/semantic similarity target, the combined
//! InfoNCE + KL loss with reverse-mode gradients, a toy contrastive trainer
//! over synthetic paired data, and an image-to-text retrieval evaluator.

pub mod autodiff;
pub mod codec;
pub mod compare;
pub mod encoder;
pub mod grad_check;
pub mod loss;
pub mod loss_graph;
pub mod optim;
pub mod report;
pub mod retrieval;
pub mod schedule;
pub mod similarity;
pub mod synth;
pub mod trainer;
pub(crate) mod util;
