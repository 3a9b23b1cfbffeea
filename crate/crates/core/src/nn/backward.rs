use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView1, Axis};

use super::config::ModelConfig;
use super::forward::{gelu_grad_with, softmax, softmax_rows_inplace, ForwardTrace, LayerCache, LnCache};
use super::loss::cross_entropy;
use super::params::{LayerParams, ModelParams};
use crate::error::{Error, Result};

/// Target value marking a position that contributes no masked-token loss.
pub const IGNORE_TARGET: i64 = -1;

/// Loss attached to the encoder output.
#[derive(Debug, Clone, Copy)]
pub enum LossHead<'a> {
    /// Mean cross-entropy of the `[CLS]` classifier against one label per sequence.
    Classification { labels: &'a [usize] },
    /// Mean cross-entropy over every masked position of the batch. Entries
    /// below zero are ignored.
    Mlm { targets: &'a [Vec<i64>] },
}

/// `acc += a^T · b`
fn add_at_b(acc: &mut Array2<f64>, a: &Array2<f64>, b: &Array2<f64>) {
    general_mat_mul(1.0, &a.t(), b, 1.0, acc);
}

fn ln_backward(dy: &Array2<f64>, cache: &LnCache, gamma: &Array1<f64>, dgamma: &mut Array1<f64>, dbeta: &mut Array1<f64>) -> Array2<f64> {
    *dgamma += &(dy * &cache.xhat).sum_axis(Axis(0));
    *dbeta += &dy.sum_axis(Axis(0));
    let dxhat = dy * gamma;
    let h = dy.ncols() as f64;
    let mean_d = dxhat.sum_axis(Axis(1)) / h;
    let mean_dx = (&dxhat * &cache.xhat).sum_axis(Axis(1)) / h;
    let mut dx = dxhat - &mean_d.insert_axis(Axis(1));
    dx -= &(&cache.xhat * &mean_dx.insert_axis(Axis(1)));
    dx *= &cache.rstd.view().insert_axis(Axis(1));
    dx
}

fn layer_backward(
    lp: &LayerParams,
    g: &mut LayerParams,
    cfg: &ModelConfig,
    c: &LayerCache,
    dout: &Array2<f64>,
) -> Array2<f64> {
    let dh2 = ln_backward(dout, &c.ln2, &lp.ln2_gamma, &mut g.ln2_gamma, &mut g.ln2_beta);

    let mut dff_out = dh2.clone();
    if let Some(m) = &c.ff_drop {
        dff_out *= m;
    }
    add_at_b(&mut g.w2, &c.ff_act, &dff_out);
    g.b2 += &dff_out.sum_axis(Axis(0));
    let mut dff_pre = dff_out.dot(&lp.w2.t());
    ndarray::Zip::from(&mut dff_pre)
        .and(&c.ff_pre)
        .and(&c.ff_tanh)
        .for_each(|d, &x, &t| *d *= gelu_grad_with(x, t));
    add_at_b(&mut g.w1, &c.y1, &dff_pre);
    g.b1 += &dff_pre.sum_axis(Axis(0));
    let mut dy1 = dh2;
    general_mat_mul(1.0, &dff_pre, &lp.w1.t(), 1.0, &mut dy1);

    let dh1 = ln_backward(&dy1, &c.ln1, &lp.ln1_gamma, &mut g.ln1_gamma, &mut g.ln1_beta);
    let mut dattn = dh1.clone();
    if let Some(m) = &c.attn_drop {
        dattn *= m;
    }
    add_at_b(&mut g.wo, &c.ctx, &dattn);
    g.bo += &dattn.sum_axis(Axis(0));
    let dctx = dattn.dot(&lp.wo.t());

    let l = dout.nrows();
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = Array2::zeros((l, cfg.hidden_dim));
    let mut dk = Array2::zeros((l, cfg.hidden_dim));
    let mut dv = Array2::zeros((l, cfg.hidden_dim));
    for (head, p) in c.probs.iter().enumerate() {
        let cols = s![.., head * dh..(head + 1) * dh];
        let dctx_h = dctx.slice(cols);
        let mut dp = dctx_h.dot(&c.v.slice(cols).t());
        dv.slice_mut(cols).assign(&p.t().dot(&dctx_h));
        let row_dot = (&dp * p).sum_axis(Axis(1));
        dp -= &row_dot.insert_axis(Axis(1));
        dp *= p;
        dp *= scale;
        dq.slice_mut(cols).assign(&dp.dot(&c.k.slice(cols)));
        dk.slice_mut(cols).assign(&dp.t().dot(&c.q.slice(cols)));
    }

    let mut dx = dh1;
    for (d, w, gw, gb) in [
        (&dq, &lp.wq, &mut g.wq, &mut g.bq),
        (&dk, &lp.wk, &mut g.wk, &mut g.bk),
        (&dv, &lp.wv, &mut g.wv, &mut g.bv),
    ] {
        add_at_b(gw, &c.input, d);
        *gb += &d.sum_axis(Axis(0));
        general_mat_mul(1.0, d, &w.t(), 1.0, &mut dx);
    }
    dx
}

/// Backpropagates `dhidden` (gradient of the loss w.r.t. the final hidden
/// states of `trace`) through the encoder, accumulating into `grads`.
pub fn encoder_backward(
    params: &ModelParams,
    cfg: &ModelConfig,
    trace: &ForwardTrace,
    dhidden: Array2<f64>,
    grads: &mut ModelParams,
) {
    let mut d = dhidden;
    for (i, c) in trace.layers.iter().enumerate().rev() {
        d = layer_backward(&params.layers[i], &mut grads.layers[i], cfg, c, &d);
    }
    if let Some(m) = &trace.emb_drop {
        d *= m;
    }
    for (pos, row) in d.rows().into_iter().enumerate() {
        let tok = trace.token_ids[pos] as usize;
        let seg = trace.segment_ids[pos].min(1) as usize;
        let mut r = grads.token_emb.row_mut(tok);
        r += &row;
        let mut r = grads.position_emb.row_mut(pos);
        r += &row;
        let mut r = grads.segment_emb.row_mut(seg);
        r += &row;
    }
}

/// Mean classification loss over `pooled` vectors. Accumulates classifier
/// gradients into `grads` and returns the gradient w.r.t. each pooled vector.
pub fn classify_loss_grad(
    params: &ModelParams,
    pooled: &[ArrayView1<f64>],
    labels: &[usize],
    grads: &mut ModelParams,
) -> Result<(f64, Vec<Array1<f64>>)> {
    if pooled.len() != labels.len() {
        return Err(Error::data("pooled vectors and labels differ in length"));
    }
    if pooled.is_empty() {
        return Err(Error::data("empty classification batch"));
    }
    let k = params.num_labels();
    if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::data(format!("label {bad} outside 0..{k}")));
    }
    let n = pooled.len() as f64;
    let mut loss = 0.0;
    let mut dpooled = Vec::with_capacity(pooled.len());
    for (h, &y) in pooled.iter().zip(labels) {
        let probs = softmax((params.cls_w.dot(h) + &params.cls_b).view());
        loss += cross_entropy(probs.view(), y);
        let mut dlogits = probs;
        dlogits[y] -= 1.0;
        dlogits /= n;
        general_mat_mul(
            1.0,
            &dlogits.view().insert_axis(Axis(1)),
            &h.insert_axis(Axis(0)),
            1.0,
            &mut grads.cls_w,
        );
        grads.cls_b += &dlogits;
        dpooled.push(params.cls_w.t().dot(&dlogits));
    }
    Ok((loss / n, dpooled))
}

fn mlm_loss_grad(
    params: &ModelParams,
    traces: &[ForwardTrace],
    targets: &[Vec<i64>],
    grads: &mut ModelParams,
) -> Result<(f64, Vec<Array2<f64>>)> {
    if targets.len() != traces.len() {
        return Err(Error::data("targets and batch differ in length"));
    }
    let vocab = params.mlm_b.len() as i64;
    let mut positions = Vec::with_capacity(traces.len());
    let mut total = 0usize;
    for (t, tg) in traces.iter().zip(targets) {
        if tg.len() < t.seq_len() {
            return Err(Error::data("target row shorter than its sequence"));
        }
        let pos: Vec<usize> = (0..t.seq_len()).filter(|&i| tg[i] >= 0).collect();
        if let Some(&i) = pos.iter().find(|&&i| tg[i] >= vocab) {
            return Err(Error::data(format!("target {} outside vocabulary", tg[i])));
        }
        total += pos.len();
        positions.push(pos);
    }
    if total == 0 {
        return Err(Error::data("batch has no masked positions"));
    }
    let n = total as f64;
    let mut loss = 0.0;
    let mut dhidden = Vec::with_capacity(traces.len());
    for ((t, tg), pos) in traces.iter().zip(targets).zip(&positions) {
        let mut dh = Array2::zeros(t.hidden.raw_dim());
        if !pos.is_empty() {
            let hm = t.hidden.select(Axis(0), pos);
            let mut probs = hm.dot(&params.mlm_w) + &params.mlm_b;
            softmax_rows_inplace(&mut probs);
            for (r, &i) in pos.iter().enumerate() {
                let y = tg[i] as usize;
                loss += cross_entropy(probs.row(r), y);
                probs[[r, y]] -= 1.0;
            }
            probs /= n;
            add_at_b(&mut grads.mlm_w, &hm, &probs);
            grads.mlm_b += &probs.sum_axis(Axis(0));
            let dhm = probs.dot(&params.mlm_w.t());
            for (r, &i) in pos.iter().enumerate() {
                dh.row_mut(i).assign(&dhm.row(r));
            }
        }
        dhidden.push(dh);
    }
    Ok((loss / n, dhidden))
}

/// Loss and gradients of `head` for a batch of forward traces.
pub fn backward(
    params: &ModelParams,
    cfg: &ModelConfig,
    traces: &[ForwardTrace],
    head: LossHead<'_>,
) -> Result<(f64, ModelParams)> {
    let mut grads = params.zeros_like();
    let (loss, dhidden) = match head {
        LossHead::Classification { labels } => {
            let pooled: Vec<_> = traces.iter().map(|t| t.pooled()).collect();
            let (loss, dp) = classify_loss_grad(params, &pooled, labels, &mut grads)?;
            let dh = traces
                .iter()
                .zip(dp)
                .map(|(t, d)| {
                    let mut m = Array2::zeros(t.hidden.raw_dim());
                    m.row_mut(0).assign(&d);
                    m
                })
                .collect::<Vec<_>>();
            (loss, dh)
        }
        LossHead::Mlm { targets } => mlm_loss_grad(params, traces, targets, &mut grads)?,
    };
    for (t, d) in traces.iter().zip(dhidden) {
        encoder_backward(params, cfg, t, d, &mut grads);
    }
    Ok((loss, grads))
}

/// Loss of `head` without gradients (evaluation mode).
pub fn loss_only(
    params: &ModelParams,
    traces: &[ForwardTrace],
    head: LossHead<'_>,
) -> Result<f64> {
    let mut scratch = params.zeros_like();
    match head {
        LossHead::Classification { labels } => {
            let pooled: Vec<_> = traces.iter().map(|t| t.pooled()).collect();
            classify_loss_grad(params, &pooled, labels, &mut scratch).map(|r| r.0)
        }
        LossHead::Mlm { targets } => {
            mlm_loss_grad(params, traces, targets, &mut scratch).map(|r| r.0)
        }
    }
}
