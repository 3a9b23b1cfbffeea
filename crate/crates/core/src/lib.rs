pub mod cli;
pub mod config;
pub mod corpus;
pub mod error;
pub mod evalstats;
pub mod finetune;
pub mod nn;
pub mod pretrain;
pub mod seed;
pub mod tokenizer;

pub use error::{Error, Result};
