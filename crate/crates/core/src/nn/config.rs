use crate::config::KvConfig;
use crate::error::{Error, Result};

/// Hard ceiling on sequence length.
pub const MAX_SEQ_LEN: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub hidden_dim: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    pub num_labels: usize,
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    /// Desk-scale encoder: 2 layers, 2 heads, H = 64, FF = 256, 128 positions.
    fn default() -> Self {
        Self {
            num_layers: 2,
            num_heads: 2,
            hidden_dim: 64,
            ff_dim: 256,
            max_len: 128,
            vocab_size: 2000,
            num_labels: 2,
            dropout_rate: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("num_layers", self.num_layers),
            ("num_heads", self.num_heads),
            ("hidden_dim", self.hidden_dim),
            ("ff_dim", self.ff_dim),
            ("max_len", self.max_len),
            ("vocab_size", self.vocab_size),
            ("num_labels", self.num_labels),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::config(format!("model {name} must be at least 1")));
        }
        if !self.hidden_dim.is_multiple_of(self.num_heads) {
            return Err(Error::config(format!(
                "hidden_dim {} is not divisible by num_heads {}",
                self.hidden_dim, self.num_heads
            )));
        }
        if self.max_len > MAX_SEQ_LEN {
            return Err(Error::config(format!(
                "max_len {} exceeds the {MAX_SEQ_LEN}-token ceiling",
                self.max_len
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn to_kv(&self) -> KvConfig {
        let mut kv = KvConfig::new();
        kv.set("num_layers", self.num_layers);
        kv.set("num_heads", self.num_heads);
        kv.set("hidden_dim", self.hidden_dim);
        kv.set("ff_dim", self.ff_dim);
        kv.set("max_len", self.max_len);
        kv.set("vocab_size", self.vocab_size);
        kv.set("num_labels", self.num_labels);
        kv.set("dropout_rate", self.dropout_rate);
        kv
    }

    /// Reads `<prefix>num_layers` etc., falling back to `base` for missing keys.
    pub fn from_kv(kv: &KvConfig, prefix: &str, base: &ModelConfig) -> Result<Self> {
        let key = |k: &str| format!("{prefix}{k}");
        let cfg = Self {
            num_layers: kv.get_or(&key("num_layers"), base.num_layers)?,
            num_heads: kv.get_or(&key("num_heads"), base.num_heads)?,
            hidden_dim: kv.get_or(&key("hidden_dim"), base.hidden_dim)?,
            ff_dim: kv.get_or(&key("ff_dim"), base.ff_dim)?,
            max_len: kv.get_or(&key("max_len"), base.max_len)?,
            vocab_size: kv.get_or(&key("vocab_size"), base.vocab_size)?,
            num_labels: kv.get_or(&key("num_labels"), base.num_labels)?,
            dropout_rate: kv.get_or(&key("dropout_rate"), base.dropout_rate)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same encoder architecture (everything except the label count and dropout).
    pub fn same_encoder(&self, other: &ModelConfig) -> bool {
        self.num_layers == other.num_layers
            && self.num_heads == other.num_heads
            && self.hidden_dim == other.hidden_dim
            && self.ff_dim == other.ff_dim
            && self.max_len == other.max_len
            && self.vocab_size == other.vocab_size
    }
}
