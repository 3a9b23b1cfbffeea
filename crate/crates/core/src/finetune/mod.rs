//! Per-item scoring fine-tuning with prompt templates and cross-validation.

mod folds;
mod io;
mod long;
mod prompt;
mod train;

pub use folds::{make_folds, FoldPlan, Rotation};
pub use io::{PredictionFile, PREDICTIONS_HEADER};
pub use long::{chunk_capacity, chunk_count, encode_long, long_chunks};
pub use prompt::{
    assemble_input, spaced_label_names, PromptSpec, DEFAULT_CONTEXT, DEFAULT_DIRECTIVE,
    DEFAULT_IN_CONTEXT_EXAMPLES, LABEL_NAMES,
};
pub use train::{
    finetune_item, predictions_qwk, record_id, Encoders, FinetuneHyper, ItemRecords, ItemRun,
    Prediction, QwkPooling, RotationReport,
};
