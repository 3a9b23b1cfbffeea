use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::params::{LayerParams, ModelParams};
use crate::error::{Error, Result};
use crate::tokenizer::TokenizedPair;

pub(crate) const LN_EPS: f64 = 1e-12;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044_715;

fn fast_tanh(u: f64) -> f64 {
    let e = (-2.0 * u.abs()).exp();
    ((1.0 - e) / (1.0 + e)).copysign(u)
}

/// The tanh term of the GELU approximation at `x`.
pub(crate) fn gelu_tanh(x: f64) -> f64 {
    fast_tanh(GELU_C * (x + GELU_K * x * x * x))
}

#[cfg(test)]
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + gelu_tanh(x))
}

/// GELU derivative given `t = gelu_tanh(x)`.
pub(crate) fn gelu_grad_with(x: f64, t: f64) -> f64 {
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}

#[cfg(test)]
pub(crate) fn gelu_grad(x: f64) -> f64 {
    gelu_grad_with(x, gelu_tanh(x))
}

/// Numerically stable softmax.
pub fn softmax(logits: ArrayView1<f64>) -> Array1<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut out = logits.mapv(|v| (v - max).exp());
    let sum = out.sum();
    out /= sum;
    out
}

pub(crate) fn softmax_rows_inplace(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LnCache {
    pub xhat: Array2<f64>,
    pub rstd: Array1<f64>,
}

pub(crate) fn layer_norm(
    x: &Array2<f64>,
    gamma: &Array1<f64>,
    beta: &Array1<f64>,
) -> (Array2<f64>, LnCache) {
    let h = x.ncols() as f64;
    let mean = x.sum_axis(Axis(1)) / h;
    let mut xhat = x - &mean.view().insert_axis(Axis(1));
    let var = xhat.mapv(|v| v * v).sum_axis(Axis(1)) / h;
    let rstd = var.mapv(|v| 1.0 / (v + LN_EPS).sqrt());
    xhat *= &rstd.view().insert_axis(Axis(1));
    let y = &xhat * gamma + beta;
    (y, LnCache { xhat, rstd })
}

#[derive(Debug, Clone)]
pub(crate) struct LayerCache {
    pub input: Array2<f64>,
    pub q: Array2<f64>,
    pub k: Array2<f64>,
    pub v: Array2<f64>,
    /// Attention probabilities per head (`L × L`).
    pub probs: Vec<Array2<f64>>,
    pub ctx: Array2<f64>,
    pub attn_drop: Option<Array2<f64>>,
    pub ln1: LnCache,
    pub y1: Array2<f64>,
    pub ff_pre: Array2<f64>,
    pub ff_tanh: Array2<f64>,
    pub ff_act: Array2<f64>,
    pub ff_drop: Option<Array2<f64>>,
    pub ln2: LnCache,
}

/// Per-sequence forward results and the activations needed for gradients.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Final hidden states, `L × H`.
    pub hidden: Array2<f64>,
    pub(crate) token_ids: Vec<u32>,
    pub(crate) segment_ids: Vec<u8>,
    pub(crate) emb_drop: Option<Array2<f64>>,
    pub(crate) layers: Vec<LayerCache>,
}

impl ForwardTrace {
    /// The `[CLS]` representation (position 0).
    pub fn pooled(&self) -> ArrayView1<'_, f64> {
        self.hidden.row(0)
    }

    pub fn seq_len(&self) -> usize {
        self.hidden.nrows()
    }

    /// Attention probabilities of `layer`/`head` (`L × L`, rows are queries).
    pub fn attention(&self, layer: usize, head: usize) -> ArrayView2<'_, f64> {
        self.layers[layer].probs[head].view()
    }
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let keep = 1.0 / (1.0 - rate);
    Array2::from_shape_simple_fn((rows, cols), || if rng.random::<f64>() < rate { 0.0 } else { keep })
}

fn layer_forward(
    lp: &LayerParams,
    cfg: &ModelConfig,
    x: Array2<f64>,
    key_mask: &[u8],
    mut dropout: Option<&mut ChaCha8Rng>,
) -> (Array2<f64>, LayerCache) {
    let l = x.nrows();
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let q = x.dot(&lp.wq) + &lp.bq;
    let k = x.dot(&lp.wk) + &lp.bk;
    let v = x.dot(&lp.wv) + &lp.bv;

    let mut ctx = Array2::zeros((l, cfg.hidden_dim));
    let mut probs = Vec::with_capacity(cfg.num_heads);
    for head in 0..cfg.num_heads {
        let cols = s![.., head * dh..(head + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        for (j, &m) in key_mask.iter().enumerate() {
            if m == 0 {
                scores.column_mut(j).fill(f64::NEG_INFINITY);
            }
        }
        softmax_rows_inplace(&mut scores);
        ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        probs.push(scores);
    }

    let mut attn_out = ctx.dot(&lp.wo) + &lp.bo;
    let attn_drop = dropout
        .as_deref_mut()
        .map(|rng| dropout_mask(l, cfg.hidden_dim, cfg.dropout_rate, rng));
    if let Some(m) = &attn_drop {
        attn_out *= m;
    }
    let h1 = &x + &attn_out;
    let (y1, ln1) = layer_norm(&h1, &lp.ln1_gamma, &lp.ln1_beta);

    let ff_pre = y1.dot(&lp.w1) + &lp.b1;
    let ff_tanh = ff_pre.mapv(gelu_tanh);
    let mut ff_act = ff_pre.clone();
    ff_act.zip_mut_with(&ff_tanh, |x, &t| *x *= 0.5 * (1.0 + t));
    let mut ff_out = ff_act.dot(&lp.w2) + &lp.b2;
    let ff_drop = dropout
        .as_deref_mut()
        .map(|rng| dropout_mask(l, cfg.hidden_dim, cfg.dropout_rate, rng));
    if let Some(m) = &ff_drop {
        ff_out *= m;
    }
    let h2 = &y1 + &ff_out;
    let (out, ln2) = layer_norm(&h2, &lp.ln2_gamma, &lp.ln2_beta);

    let cache = LayerCache {
        input: x,
        q,
        k,
        v,
        probs,
        ctx,
        attn_drop,
        ln1,
        y1,
        ff_pre,
        ff_tanh,
        ff_act,
        ff_drop,
        ln2,
    };
    (out, cache)
}

/// Encodes one sequence. Dropout is applied when `dropout` carries an RNG and
/// the configured rate is positive.
pub fn forward_one(
    params: &ModelParams,
    cfg: &ModelConfig,
    pair: &TokenizedPair,
    mut dropout: Option<&mut ChaCha8Rng>,
) -> Result<ForwardTrace> {
    let l = pair.token_ids.len();
    if l == 0 || l > cfg.max_len {
        return Err(Error::data(format!(
            "sequence length {l} outside 1..={}",
            cfg.max_len
        )));
    }
    if pair.segment_ids.len() != l || pair.attention_mask.len() != l {
        return Err(Error::data("token, segment and mask lengths differ"));
    }
    if let Some(&bad) = pair.token_ids.iter().find(|&&t| t as usize >= cfg.vocab_size) {
        return Err(Error::data(format!(
            "token id {bad} outside vocabulary of size {}",
            cfg.vocab_size
        )));
    }
    if pair.attention_mask[0] == 0 {
        return Err(Error::data("position 0 must be attended"));
    }
    if dropout.is_some() && cfg.dropout_rate == 0.0 {
        dropout = None;
    }

    let h = cfg.hidden_dim;
    let mut x = Array2::zeros((l, h));
    for (pos, mut row) in x.rows_mut().into_iter().enumerate() {
        row.assign(&params.token_emb.row(pair.token_ids[pos] as usize));
        row += &params.position_emb.row(pos);
        row += &params.segment_emb.row(pair.segment_ids[pos].min(1) as usize);
    }
    let emb_drop = dropout
        .as_deref_mut()
        .map(|rng| dropout_mask(l, h, cfg.dropout_rate, rng));
    if let Some(m) = &emb_drop {
        x *= m;
    }

    let mut layers = Vec::with_capacity(cfg.num_layers);
    for lp in &params.layers {
        let (out, cache) = layer_forward(lp, cfg, x, &pair.attention_mask, dropout.as_deref_mut());
        layers.push(cache);
        x = out;
    }
    Ok(ForwardTrace {
        hidden: x,
        token_ids: pair.token_ids.clone(),
        segment_ids: pair.segment_ids.clone(),
        emb_drop,
        layers,
    })
}

/// Encodes a batch; sequences are processed independently in order.
pub fn forward(
    params: &ModelParams,
    cfg: &ModelConfig,
    batch: &[TokenizedPair],
    mut dropout: Option<&mut ChaCha8Rng>,
) -> Result<Vec<ForwardTrace>> {
    batch
        .iter()
        .map(|pair| forward_one(params, cfg, pair, dropout.as_deref_mut()))
        .collect()
}

/// `softmax(W · pooled + b)`.
pub fn classify(params: &ModelParams, pooled: ArrayView1<f64>) -> Array1<f64> {
    softmax(classifier_logits(params, pooled).view())
}

pub fn classifier_logits(params: &ModelParams, pooled: ArrayView1<f64>) -> Array1<f64> {
    params.cls_w.dot(&pooled) + &params.cls_b
}

/// Vocabulary logits at every position (`L × V`).
pub fn mlm_logits(params: &ModelParams, hidden: ArrayView2<f64>) -> Array2<f64> {
    hidden.dot(&params.mlm_w) + &params.mlm_b
}

/// Pooled `[CLS]` vectors in evaluation mode.
pub fn encode_pooled(
    params: &ModelParams,
    cfg: &ModelConfig,
    batch: &[TokenizedPair],
) -> Result<Vec<Array1<f64>>> {
    batch
        .iter()
        .map(|p| forward_one(params, cfg, p, None).map(|t| t.pooled().to_owned()))
        .collect()
}
