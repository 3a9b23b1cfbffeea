//! Run configuration: defaults, file values and command-line overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::finetune::{
    spaced_label_names, FinetuneHyper, PromptSpec, QwkPooling, DEFAULT_CONTEXT, DEFAULT_DIRECTIVE,
    DEFAULT_IN_CONTEXT_EXAMPLES, LABEL_NAMES,
};
use crate::nn::{ModelConfig, MAX_SEQ_LEN};
use crate::pretrain::PretrainHyper;

/// Keys with built-in values. Anything else read by a stage falls back to the
/// defaults of the corresponding library type.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("seed", "0"),
    ("lr", "3e-5"),
    ("batch_size", "32"),
    ("epochs", "4"),
    ("folds", "5"),
    ("mask_rate", "0.15"),
    ("max_len", "128"),
    ("qwk_pooling", "pooled"),
    ("frozen_encoder", "adapted"),
    ("pretrain.lr", "1e-3"),
    ("pretrain.batch_size", "32"),
    ("pretrain.epochs", "4"),
    ("pretrain.variant", "adapted"),
    ("vocab.size", "2000"),
    ("prompt.directive", DEFAULT_DIRECTIVE),
    ("prompt.context", DEFAULT_CONTEXT),
    ("work_dir", "work"),
];

/// Which encoder handles inputs longer than `max_len`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrozenEncoder {
    Adapted,
    Base,
}

impl FromStr for FrozenEncoder {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adapted" => Ok(Self::Adapted),
            "base" => Ok(Self::Base),
            other => Err(Error::config(format!("frozen_encoder must be adapted or base, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    effective: KvConfig,
    explicit: KvConfig,
}

impl RunConfig {
    /// Defaults, then `file` (if any), then `overrides` in order.
    pub fn build(file: Option<&Path>, seed: Option<u64>, overrides: &[String]) -> Result<Self> {
        let mut explicit = match file {
            Some(p) => KvConfig::load(p)?,
            None => KvConfig::new(),
        };
        for o in overrides {
            explicit.apply_override(o)?;
        }
        if let Some(s) = seed {
            explicit.set("seed", s);
        }
        Self::from_kv(explicit)
    }

    pub fn from_kv(explicit: KvConfig) -> Result<Self> {
        let mut effective = KvConfig::new();
        for (k, v) in DEFAULTS {
            effective.set(*k, *v);
        }
        effective.merge(&explicit);
        let cfg = Self { effective, explicit };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let max_len = self.max_len()?;
        if max_len > MAX_SEQ_LEN {
            return Err(Error::config(format!("max_len {max_len} exceeds the cap of {MAX_SEQ_LEN}")));
        }
        if self.folds()? < 2 {
            return Err(Error::config("folds must be at least 2"));
        }
        let rate = self.mask_rate()?;
        if !(0.0..=crate::pretrain::MAX_MASK_RATE).contains(&rate) {
            return Err(Error::config(format!("mask_rate {rate} outside [0, {}]", crate::pretrain::MAX_MASK_RATE)));
        }
        self.qwk_pooling()?;
        self.frozen_encoder()?;
        Ok(())
    }

    pub fn effective(&self) -> &KvConfig {
        &self.effective
    }

    pub fn explicit(&self) -> &KvConfig {
        &self.explicit
    }

    pub fn hash(&self) -> String {
        self.effective.hash()
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.str(key)?;
        v.parse().map_err(|_| Error::config(format!("cannot parse {key}={v:?}")))
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        self.effective.get_or(key, default)
    }

    pub fn str(&self, key: &str) -> Result<&str> {
        self.effective
            .get_str(key)
            .ok_or_else(|| Error::config(format!("missing configuration key {key}")))
    }

    pub fn opt_str(&self, key: &str) -> Option<&str> {
        self.effective.get_str(key).filter(|v| !v.is_empty())
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed")
    }

    pub fn max_len(&self) -> Result<usize> {
        self.get("max_len")
    }

    pub fn folds(&self) -> Result<usize> {
        self.get("folds")
    }

    pub fn mask_rate(&self) -> Result<f64> {
        self.get("mask_rate")
    }

    pub fn qwk_pooling(&self) -> Result<QwkPooling> {
        self.get("qwk_pooling")
    }

    pub fn frozen_encoder(&self) -> Result<FrozenEncoder> {
        self.get("frozen_encoder")
    }

    pub fn opt_path(&self, key: &str) -> Option<PathBuf> {
        self.opt_str(key).map(PathBuf::from)
    }

    pub fn work_dir(&self) -> Result<PathBuf> {
        Ok(PathBuf::from(self.str("work_dir")?))
    }

    /// `key` if set, otherwise `rel` under the work directory.
    pub fn path_or_work(&self, key: &str, rel: &str) -> Result<PathBuf> {
        match self.opt_path(key) {
            Some(p) => Ok(p),
            None => Ok(self.work_dir()?.join(rel)),
        }
    }

    /// Output directory of a stage: `out_dir` or `<work_dir>/<stage_dir>`.
    pub fn out_dir(&self, stage_dir: &str) -> Result<PathBuf> {
        self.path_or_work("out_dir", stage_dir)
    }

    pub fn corpus_dir(&self) -> Result<PathBuf> {
        self.path_or_work("corpus_dir", "corpus")
    }

    pub fn vocab_path(&self) -> Result<PathBuf> {
        self.path_or_work("vocab", "vocab/vocab.txt")
    }

    pub fn baseline_checkpoint(&self) -> Result<PathBuf> {
        self.path_or_work("baseline_checkpoint", "pretrain-baseline/model.ckpt")
    }

    pub fn adapted_checkpoint(&self) -> Result<PathBuf> {
        self.path_or_work("adapted_checkpoint", "pretrain-adapted/model.ckpt")
    }

    /// `lexicon`, or `lexicon.txt` inside the corpus directory.
    pub fn lexicon_path(&self) -> Result<PathBuf> {
        Ok(self.opt_path("lexicon").unwrap_or(self.corpus_dir()?.join("lexicon.txt")))
    }

    pub fn science_lexicon_path(&self) -> Result<PathBuf> {
        Ok(self
            .opt_path("science_lexicon")
            .unwrap_or(self.corpus_dir()?.join("science_lexicon.txt")))
    }

    /// Copy with `key` fixed in the effective configuration only.
    pub fn resolved(&self, key: &str, value: impl ToString) -> Self {
        let mut out = self.clone();
        out.effective.set(key, value);
        out
    }

    /// Encoder shape from `model.*`; the vocabulary size comes from the vocabulary.
    pub fn model_config(&self, vocab_size: usize) -> Result<ModelConfig> {
        let base = ModelConfig {
            max_len: self.max_len()?,
            vocab_size,
            ..ModelConfig::default()
        };
        let cfg = ModelConfig::from_kv(&self.effective, "model.", &base)?;
        if cfg.vocab_size != vocab_size || cfg.max_len != base.max_len {
            return Err(Error::config("set max_len and the vocabulary instead of model.max_len / model.vocab_size"));
        }
        Ok(cfg)
    }

    pub fn pretrain_hyper(&self) -> Result<PretrainHyper> {
        let d = PretrainHyper::default();
        Ok(PretrainHyper {
            lr: self.get_or("pretrain.lr", d.lr)?,
            batch_size: self.get_or("pretrain.batch_size", d.batch_size)?,
            epochs: self.get_or("pretrain.epochs", d.epochs)?,
            mask_rate: self.mask_rate()?,
            seed: self.get_or("pretrain.seed", self.seed()?)?,
            max_steps: match self.opt_str("pretrain.max_steps") {
                Some(_) => Some(self.get("pretrain.max_steps")?),
                None => None,
            },
        })
    }

    pub fn finetune_hyper(&self) -> Result<FinetuneHyper> {
        Ok(FinetuneHyper {
            lr: self.get("lr")?,
            batch_size: self.get("batch_size")?,
            epochs: self.get("epochs")?,
            folds: self.folds()?,
            seed: self.seed()?,
        })
    }

    /// Ordered label names: `prompt.label_names` (comma separated) or the built-in list.
    pub fn label_names(&self) -> Vec<String> {
        match self.opt_str("prompt.label_names") {
            Some(v) => v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            None => LABEL_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn prompt_spec(&self, num_labels: usize) -> Result<PromptSpec> {
        PromptSpec::new(
            self.str("prompt.directive")?,
            self.str("prompt.context")?,
            self.get_or("prompt.examples", DEFAULT_IN_CONTEXT_EXAMPLES)?,
            spaced_label_names(&self.label_names(), num_labels)?,
        )
    }

    /// Fixed prompt text that the vocabulary must cover.
    pub fn prompt_text(&self) -> Result<String> {
        let strip = |s: &str| s.replace("{response}", " ").replace("{task}", " ");
        Ok(format!(
            "{} {} example: score: {}",
            strip(self.str("prompt.directive")?),
            strip(self.str("prompt.context")?),
            self.label_names().join(" ")
        ))
    }

    /// Item ids listed in `key`, empty when unset.
    pub fn id_list(&self, key: &str) -> Vec<String> {
        self.opt_str(key)
            .map(|v| v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect())
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(pairs: &[&str]) -> Result<RunConfig> {
        let o: Vec<String> = pairs.iter().map(|s| s.to_string()).collect();
        RunConfig::build(None, None, &o)
    }

    #[test]
    fn defaults() {
        let c = cfg(&[]).unwrap();
        let h = c.finetune_hyper().unwrap();
        assert_eq!((h.lr, h.batch_size, h.epochs, h.folds), (3e-5, 32, 4, 5));
        assert_eq!(c.mask_rate().unwrap(), 0.15);
        assert_eq!(c.max_len().unwrap(), 128);
        assert!(c.explicit().iter().next().is_none());
    }

    #[test]
    fn overrides_and_seed() {
        let o = vec!["lr=1e-3".to_string(), "seed=4".to_string()];
        let c = RunConfig::build(None, Some(9), &o).unwrap();
        assert_eq!(c.get::<f64>("lr").unwrap(), 1e-3);
        assert_eq!(c.seed().unwrap(), 9);
        assert_ne!(c.hash(), cfg(&[]).unwrap().hash());
    }

    #[test]
    fn invariants() {
        assert!(cfg(&["max_len=513"]).is_err());
        assert!(cfg(&["max_len=512"]).is_ok());
        assert!(cfg(&["folds=1"]).is_err());
        assert!(cfg(&["mask_rate=0.9"]).is_err());
        assert!(cfg(&["qwk_pooling=median"]).is_err());
        assert!(cfg(&["frozen_encoder=other"]).is_err());
        assert!(cfg(&["nokey"]).is_err());
    }

    #[test]
    fn model_shape_from_keys() {
        let c = cfg(&["model.hidden_dim=32", "model.num_heads=4", "max_len=64"]).unwrap();
        let m = c.model_config(300).unwrap();
        assert_eq!((m.hidden_dim, m.num_heads, m.max_len, m.vocab_size), (32, 4, 64, 300));
        assert!(cfg(&["model.vocab_size=10"]).unwrap().model_config(300).is_err());
    }

    #[test]
    fn prompt_from_keys() {
        let c = cfg(&["prompt.label_names=low, mid, high", "prompt.examples=0"]).unwrap();
        let p = c.prompt_spec(3).unwrap();
        assert_eq!(p.label_names, vec!["low", "mid", "high"]);
        assert_eq!(p.num_in_context_examples, 0);
        assert!(c.prompt_spec(4).is_err());
        assert!(c.prompt_text().unwrap().contains("low mid high"));
    }
}
