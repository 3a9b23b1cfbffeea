use ndarray::Array1;

use crate::error::{Error, Result};
use crate::nn::{encode_pooled, Checkpoint};
use crate::tokenizer::{encode_ids_pair, TokenizedPair};

/// Response tokens that fit next to a `task_len`-token task in one sequence.
pub fn chunk_capacity(task_len: usize, max_len: usize) -> Result<usize> {
    let room = max_len.saturating_sub(3);
    if task_len >= room {
        return Err(Error::data(format!(
            "task side has {task_len} tokens; at most {} fit with a response at max_len {max_len}",
            room.saturating_sub(1)
        )));
    }
    Ok(room - task_len)
}

/// Number of chunks needed for the response side.
pub fn chunk_count(task_len: usize, response_len: usize, max_len: usize) -> Result<usize> {
    let cap = chunk_capacity(task_len, max_len)?;
    Ok(response_len.div_ceil(cap).max(1))
}

/// `[CLS] task [SEP] chunk [SEP]` sequences covering the whole response.
pub fn long_chunks(task: &[u32], response: &[u32], max_len: usize) -> Result<Vec<TokenizedPair>> {
    let cap = chunk_capacity(task.len(), max_len)?;
    if response.is_empty() {
        return Ok(vec![encode_ids_pair(task, &[], max_len).trimmed()]);
    }
    Ok(response
        .chunks(cap)
        .map(|c| encode_ids_pair(task, c, max_len).trimmed())
        .collect())
}

/// Mean of the frozen encoder's `[CLS]` vectors over all chunks.
pub fn encode_long(
    task: &[u32],
    response: &[u32],
    frozen: &Checkpoint,
    max_len: usize,
) -> Result<Array1<f64>> {
    let max_len = max_len.min(frozen.config.max_len);
    let chunks = long_chunks(task, response, max_len)?;
    let pooled = encode_pooled(&frozen.params, &frozen.config, &chunks)?;
    let mut mean = Array1::zeros(frozen.config.hidden_dim);
    for p in &pooled {
        mean += p;
    }
    mean /= pooled.len() as f64;
    Ok(mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{ModelConfig, ModelParams};

    fn frozen() -> Checkpoint {
        let cfg = ModelConfig {
            num_layers: 1,
            num_heads: 2,
            hidden_dim: 8,
            ff_dim: 16,
            max_len: 12,
            vocab_size: 30,
            num_labels: 2,
            dropout_rate: 0.1,
        };
        Checkpoint::new(cfg, ModelParams::init(&cfg, 4))
    }

    #[test]
    fn chunk_arithmetic() {
        assert_eq!(chunk_count(100, 600, 512).unwrap(), 2);
        assert_eq!(chunk_count(100, 409, 512).unwrap(), 1);
        assert_eq!(chunk_count(100, 410, 512).unwrap(), 2);
        assert!(chunk_capacity(509, 512).is_err());
        assert_eq!(chunk_capacity(508, 512).unwrap(), 1);
    }

    #[test]
    fn single_chunk_equals_plain_cls() {
        let f = frozen();
        let v = encode_long(&[5, 6], &[7, 8, 9], &f, 12).unwrap();
        let plain = encode_pooled(&f.params, &f.config, &[encode_ids_pair(&[5, 6], &[7, 8, 9], 12)]).unwrap();
        for (a, b) in v.iter().zip(plain[0].iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_chunks_pool_to_either() {
        let f = frozen();
        // capacity = 12 - 3 - 2 = 7
        let chunk = [7u32, 8, 9, 10, 11, 12, 13];
        let resp: Vec<u32> = chunk.iter().chain(chunk.iter()).copied().collect();
        let v = encode_long(&[5, 6], &resp, &f, 12).unwrap();
        let one = encode_long(&[5, 6], &chunk, &f, 12).unwrap();
        for (a, b) in v.iter().zip(one.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(long_chunks(&[5, 6], &resp, 12).unwrap().len(), 2);
    }

    #[test]
    fn oversized_task_rejected() {
        let f = frozen();
        assert!(encode_long(&[5; 9], &[7], &f, 12).is_err());
    }
}
