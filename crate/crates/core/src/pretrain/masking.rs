use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::IGNORE_TARGET;
use crate::tokenizer::{TokenizedPair, CLS_ID, MASK_ID, NUM_RESERVED, PAD_ID, SEP_ID};

pub const DEFAULT_MASK_RATE: f64 = 0.15;
pub const MAX_MASK_RATE: f64 = 0.5;

/// Counts of masking decisions, accumulated over a batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MaskStats {
    pub maskable: usize,
    pub selected: usize,
    pub to_mask_token: usize,
    pub to_random: usize,
    pub kept: usize,
    /// Selected positions holding `[CLS]`, `[SEP]` or `[PAD]` (always 0).
    pub special_selected: usize,
}

impl MaskStats {
    pub fn selected_fraction(&self) -> f64 {
        if self.maskable == 0 {
            0.0
        } else {
            self.selected as f64 / self.maskable as f64
        }
    }

    pub fn merge(&mut self, o: &MaskStats) {
        self.maskable += o.maskable;
        self.selected += o.selected;
        self.to_mask_token += o.to_mask_token;
        self.to_random += o.to_random;
        self.kept += o.kept;
        self.special_selected += o.special_selected;
    }
}

/// Inputs with masked tokens and per-position targets (`-1` where unmasked).
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedBatch {
    pub inputs: Vec<TokenizedPair>,
    pub targets: Vec<Vec<i64>>,
    pub stats: MaskStats,
}

impl MaskedBatch {
    pub fn num_targets(&self) -> usize {
        self.targets.iter().flatten().filter(|&&t| t >= 0).count()
    }
}

pub fn is_maskable(pair: &TokenizedPair, pos: usize) -> bool {
    let t = pair.token_ids[pos];
    pair.attention_mask[pos] == 1 && t != CLS_ID && t != SEP_ID && t != PAD_ID
}

/// Selects `round(rate · maskable)` positions per sequence. Each selected
/// position becomes `[MASK]` with probability 0.8, a random non-special token
/// with 0.1, and stays unchanged with 0.1.
pub fn apply_masking(
    pairs: &[TokenizedPair],
    mask_rate: f64,
    vocab_size: usize,
    seed: u64,
) -> Result<MaskedBatch> {
    if !(0.0..=MAX_MASK_RATE).contains(&mask_rate) {
        return Err(Error::config(format!("mask_rate {mask_rate} outside [0, {MAX_MASK_RATE}]")));
    }
    if vocab_size <= NUM_RESERVED {
        return Err(Error::config("vocabulary has no ordinary tokens"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = MaskStats::default();
    let mut inputs = Vec::with_capacity(pairs.len());
    let mut targets = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let candidates: Vec<usize> = (0..pair.len()).filter(|&i| is_maskable(pair, i)).collect();
        let n_mask = (mask_rate * candidates.len() as f64).round() as usize;
        let mut input = pair.clone();
        let mut target = vec![IGNORE_TARGET; pair.len()];
        stats.maskable += candidates.len();
        let mut chosen: Vec<usize> = sample(&mut rng, candidates.len(), n_mask)
            .into_iter()
            .map(|i| candidates[i])
            .collect();
        chosen.sort_unstable();
        for pos in chosen {
            let original = pair.token_ids[pos];
            target[pos] = original as i64;
            stats.selected += 1;
            let u: f64 = rng.random();
            if u < 0.8 {
                input.token_ids[pos] = MASK_ID;
                stats.to_mask_token += 1;
            } else if u < 0.9 {
                input.token_ids[pos] = rng.random_range(NUM_RESERVED as u32..vocab_size as u32);
                stats.to_random += 1;
            } else {
                stats.kept += 1;
            }
            if matches!(original, CLS_ID | SEP_ID | PAD_ID) {
                stats.special_selected += 1;
            }
        }
        inputs.push(input);
        targets.push(target);
    }
    Ok(MaskedBatch { inputs, targets, stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenizer::encode_ids_pair;

    fn pairs(n: usize) -> Vec<TokenizedPair> {
        (0..n)
            .map(|i| {
                let task: Vec<u32> = (0..(3 + i % 4) as u32).map(|j| 5 + j).collect();
                let resp: Vec<u32> = (0..(10 + i % 13) as u32).map(|j| 9 + (j * 3) % 40).collect();
                encode_ids_pair(&task, &resp, 32)
            })
            .collect()
    }

    #[test]
    fn zero_rate_is_identity() {
        let p = pairs(20);
        let b = apply_masking(&p, 0.0, 50, 1).unwrap();
        assert_eq!(b.inputs, p);
        assert!(b.targets.iter().flatten().all(|&t| t == -1));
        assert_eq!(b.num_targets(), 0);
    }

    #[test]
    fn deterministic_per_seed() {
        let p = pairs(30);
        assert_eq!(apply_masking(&p, 0.15, 50, 4).unwrap(), apply_masking(&p, 0.15, 50, 4).unwrap());
        assert_ne!(apply_masking(&p, 0.15, 50, 4).unwrap(), apply_masking(&p, 0.15, 50, 5).unwrap());
    }

    #[test]
    fn per_sequence_count_within_one() {
        let p = pairs(50);
        let b = apply_masking(&p, 0.15, 50, 2).unwrap();
        for (pair, t) in p.iter().zip(&b.targets) {
            let maskable = (0..pair.len()).filter(|&i| is_maskable(pair, i)).count() as f64;
            let masked = t.iter().filter(|&&x| x >= 0).count() as f64;
            assert!((masked - 0.15 * maskable).abs() <= 1.0);
        }
    }

    #[test]
    fn targets_hold_originals_and_specials_untouched() {
        let p = pairs(40);
        let b = apply_masking(&p, 0.3, 50, 3).unwrap();
        for ((orig, inp), t) in p.iter().zip(&b.inputs).zip(&b.targets) {
            for i in 0..orig.len() {
                if t[i] >= 0 {
                    assert_eq!(t[i], orig.token_ids[i] as i64);
                    assert!(is_maskable(orig, i));
                } else {
                    assert_eq!(inp.token_ids[i], orig.token_ids[i]);
                }
            }
            assert_eq!(inp.attention_mask, orig.attention_mask);
        }
        assert_eq!(b.stats.special_selected, 0);
    }

    #[test]
    fn rejects_rate_out_of_range() {
        assert!(apply_masking(&pairs(2), 0.6, 50, 0).is_err());
        assert!(apply_masking(&pairs(2), -0.1, 50, 0).is_err());
    }
}
