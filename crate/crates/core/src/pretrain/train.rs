use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::masking::{apply_masking, MaskedBatch, DEFAULT_MASK_RATE};
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::nn::{adam_step, backward, forward, mlm_logits, AdamConfig, AdamState, Checkpoint, LossHead};
use crate::seed::derive_seed;
use crate::tokenizer::{encode_pair, TokenizedPair, Vocab};

const STREAM_SHUFFLE: u64 = 1;
const STREAM_MASK: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PretrainHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub mask_rate: f64,
    pub seed: u64,
    /// Stops after this many optimizer steps when set.
    pub max_steps: Option<usize>,
}

impl Default for PretrainHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 32,
            epochs: 4,
            mask_rate: DEFAULT_MASK_RATE,
            seed: 0,
            max_steps: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub checkpoint: Checkpoint,
    /// `(step, mean masked-token loss of that step's batch)`.
    pub trajectory: Vec<(usize, f64)>,
}

/// Encodes every record as `[CLS] task [SEP] response [SEP]`, trimmed of padding.
pub fn encode_corpus(data: &Dataset, vocab: &Vocab, max_len: usize) -> Vec<TokenizedPair> {
    data.records
        .iter()
        .map(|r| encode_pair(&r.task_text, &r.response_text, vocab, max_len).trimmed())
        .collect()
}

/// Masked-language-model training. `on_epoch` receives every end-of-epoch
/// checkpoint (numbered from 1).
pub fn pretrain_loop(
    corpus: &[TokenizedPair],
    init: Checkpoint,
    hyper: &PretrainHyper,
    mut on_epoch: impl FnMut(usize, &Checkpoint) -> Result<()>,
) -> Result<PretrainOutcome> {
    if corpus.is_empty() {
        return Err(Error::data("pre-training corpus is empty"));
    }
    if hyper.batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    let cfg = init.config;
    cfg.validate()?;
    let mut ck = init;
    let adam = AdamConfig::with_lr(hyper.lr);
    let mut state = AdamState::new(&ck.params);
    let mut dropout = ChaCha8Rng::seed_from_u64(derive_seed(hyper.seed, STREAM_DROPOUT));
    let mut trajectory = Vec::new();
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    'epochs: for epoch in 1..=hyper.epochs {
        let mut shuffle = ChaCha8Rng::seed_from_u64(derive_seed(hyper.seed, STREAM_SHUFFLE ^ ((epoch as u64) << 8)));
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(hyper.batch_size) {
            if hyper.max_steps.is_some_and(|m| step >= m) {
                break 'epochs;
            }
            let pairs: Vec<TokenizedPair> = chunk.iter().map(|&i| corpus[i].clone()).collect();
            let mask_seed = derive_seed(hyper.seed, STREAM_MASK ^ ((step as u64) << 8));
            let batch = apply_masking(&pairs, hyper.mask_rate, cfg.vocab_size, mask_seed)?;
            if batch.num_targets() == 0 {
                return Err(Error::data(format!(
                    "step {step}: no masked positions to train on (mask_rate {})",
                    hyper.mask_rate
                )));
            }
            let traces = forward(&ck.params, &cfg, &batch.inputs, Some(&mut dropout))?;
            let (loss, grads) = backward(&ck.params, &cfg, &traces, LossHead::Mlm { targets: &batch.targets })?;
            if !loss.is_finite() {
                return Err(Error::numeric(format!("non-finite loss at step {step}")));
            }
            adam_step(&mut ck.params, &grads, &mut state, &adam)?;
            trajectory.push((step, loss));
            step += 1;
        }
        let mut snapshot = ck.clone();
        snapshot.params.quantize_f32();
        on_epoch(epoch, &snapshot)?;
    }
    ck.params.quantize_f32();
    Ok(PretrainOutcome { checkpoint: ck, trajectory })
}

/// Fraction of masked positions whose arg-max prediction equals the target.
pub fn masked_accuracy(ck: &Checkpoint, batch: &MaskedBatch) -> Result<f64> {
    let traces = forward(&ck.params, &ck.config, &batch.inputs, None)?;
    let mut hit = 0usize;
    let mut total = 0usize;
    for (t, tg) in traces.iter().zip(&batch.targets) {
        let logits = mlm_logits(&ck.params, t.hidden.view());
        for (pos, &y) in tg.iter().enumerate().take(t.seq_len()) {
            if y < 0 {
                continue;
            }
            let row = logits.row(pos);
            let best = row
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0;
            hit += (best as i64 == y) as usize;
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::data("no masked positions"));
    }
    Ok(hit as f64 / total as f64)
}

/// Tab-separated `step\tloss` lines.
pub fn trajectory_tsv(trajectory: &[(usize, f64)]) -> String {
    let mut out = String::from("step\tloss\n");
    for (s, l) in trajectory {
        out.push_str(&format!("{s}\t{l}\n"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ModelConfig, ModelParams};
    use crate::tokenizer::encode_ids_pair;

    fn cfg() -> ModelConfig {
        ModelConfig {
            num_layers: 1,
            num_heads: 2,
            hidden_dim: 16,
            ff_dim: 32,
            max_len: 16,
            vocab_size: 30,
            num_labels: 2,
            dropout_rate: 0.0,
        }
    }

    fn corpus() -> Vec<TokenizedPair> {
        (0..40u32)
            .map(|i| encode_ids_pair(&[5, 6], &[7 + i % 5, 12 + i % 5, 17 + i % 5], 16).trimmed())
            .collect()
    }

    fn init() -> Checkpoint {
        let mut p = ModelParams::init(&cfg(), 1);
        p.quantize_f32();
        Checkpoint::new(cfg(), p)
    }

    #[test]
    fn zero_epochs_returns_init() {
        let hyper = PretrainHyper { epochs: 0, ..Default::default() };
        let out = pretrain_loop(&corpus(), init(), &hyper, |_, _| Ok(())).unwrap();
        assert_eq!(out.checkpoint, init());
        assert!(out.trajectory.is_empty());
    }

    #[test]
    fn rate_zero_is_rejected() {
        let hyper = PretrainHyper { mask_rate: 0.0, ..Default::default() };
        assert!(pretrain_loop(&corpus(), init(), &hyper, |_, _| Ok(())).is_err());
        assert!(pretrain_loop(&[], init(), &PretrainHyper::default(), |_, _| Ok(())).is_err());
    }

    #[test]
    fn checkpoint_each_epoch_and_reproducible() {
        let hyper = PretrainHyper { epochs: 3, batch_size: 8, mask_rate: 0.3, seed: 7, ..Default::default() };
        let mut seen = Vec::new();
        let a = pretrain_loop(&corpus(), init(), &hyper, |e, _| {
            seen.push(e);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![1, 2, 3]);
        assert_eq!(a.trajectory.len(), 15);
        assert_eq!(a.trajectory[0].0, 0);
        let b = pretrain_loop(&corpus(), init(), &hyper, |_, _| Ok(())).unwrap();
        assert_eq!(a.checkpoint, b.checkpoint);
        assert_eq!(a.trajectory, b.trajectory);
        let first = a.trajectory[0].1;
        assert!((first - 30f64.ln()).abs() < 0.1 * 30f64.ln());
    }

    #[test]
    fn max_steps_bounds_training() {
        let hyper = PretrainHyper { epochs: 10, batch_size: 8, mask_rate: 0.3, max_steps: Some(7), ..Default::default() };
        let out = pretrain_loop(&corpus(), init(), &hyper, |_, _| Ok(())).unwrap();
        assert_eq!(out.trajectory.len(), 7);
    }
}
