//! A small post-norm transformer encoder with manual backpropagation.

mod adam;
mod backward;
mod checkpoint;
mod config;
mod forward;
mod loss;
mod params;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use backward::{backward, classify_loss_grad, encoder_backward, loss_only, LossHead, IGNORE_TARGET};
pub use checkpoint::{Checkpoint, MAGIC};
pub use config::{ModelConfig, MAX_SEQ_LEN};
pub use forward::{classifier_logits, classify, encode_pooled, forward, forward_one, mlm_logits, softmax, ForwardTrace};
pub use loss::{cross_entropy, mean_cross_entropy, PROB_FLOOR};
pub use params::{LayerParams, ModelParams, TensorRef};
