//! Masked-language-model pre-training.

mod masking;
mod train;

pub use masking::{apply_masking, is_maskable, MaskStats, MaskedBatch, DEFAULT_MASK_RATE, MAX_MASK_RATE};
pub use train::{encode_corpus, masked_accuracy, pretrain_loop, trajectory_tsv, PretrainHyper, PretrainOutcome};
