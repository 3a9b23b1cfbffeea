use std::collections::{BTreeMap, BTreeSet};

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::folds::{make_folds, Rotation};
use super::long::encode_long;
use super::prompt::{assemble_input, PromptSpec};
use crate::corpus::ScoredResponse;
use crate::error::{Error, Result};
use crate::evalstats::qwk;
use crate::nn::{
    adam_step, classifier_logits, classify_loss_grad, encoder_backward, forward, forward_one,
    AdamConfig, AdamState, Checkpoint, ModelConfig, ModelParams,
};
use crate::seed::{derive_seed, stream_of};
use crate::tokenizer::{encode_ids_pair, encode_text, TokenizedPair, Vocab};

const STREAM_FOLDS: u64 = 0x10;
const STREAM_HEAD: u64 = 0x20;
const STREAM_SHUFFLE: u64 = 0x30;
const STREAM_DROPOUT: u64 = 0x40;

#[derive(Debug, Clone, PartialEq)]
pub struct FinetuneHyper {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for FinetuneHyper {
    fn default() -> Self {
        Self {
            lr: 3e-5,
            batch_size: 32,
            epochs: 4,
            folds: 5,
            seed: 0,
        }
    }
}

/// One item's scored records.
#[derive(Debug, Clone, Copy)]
pub struct ItemRecords<'a> {
    pub item_id: &'a str,
    pub num_labels: usize,
    pub records: &'a [ScoredResponse],
}

/// Starting encoder, the frozen encoder for over-long inputs, and the vocabulary.
#[derive(Debug, Clone, Copy)]
pub struct Encoders<'a> {
    pub base: &'a Checkpoint,
    pub frozen: &'a Checkpoint,
    pub vocab: &'a Vocab,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub record_id: String,
    pub rotation: usize,
    pub true_label: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RotationReport {
    pub rotation: usize,
    /// 0 when no training epoch ran.
    pub best_epoch: usize,
    pub validation_qwk: Vec<f64>,
    pub train_ids: Vec<String>,
    pub validation_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub example_ids: Vec<String>,
    /// Records routed through the frozen encoder.
    pub long_ids: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemRun {
    pub item_id: String,
    pub num_labels: usize,
    pub predictions: Vec<Prediction>,
    pub rotations: Vec<RotationReport>,
}

/// How per-item agreement is formed from the fold predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QwkPooling {
    /// One kappa over all test predictions.
    #[default]
    Pooled,
    /// Mean of the per-rotation kappas.
    Averaged,
}

impl std::str::FromStr for QwkPooling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(Self::Pooled),
            "averaged" => Ok(Self::Averaged),
            other => Err(Error::config(format!("qwk pooling must be pooled or averaged, got {other:?}"))),
        }
    }
}

pub fn record_id(item_id: &str, index: usize) -> String {
    format!("{item_id}-{index:05}")
}

/// Agreement of `predictions` with `num_labels` categories.
pub fn predictions_qwk(predictions: &[Prediction], num_labels: usize, pooling: QwkPooling) -> Result<f64> {
    match pooling {
        QwkPooling::Pooled => {
            let h: Vec<usize> = predictions.iter().map(|p| p.true_label).collect();
            let p: Vec<usize> = predictions.iter().map(|p| p.predicted).collect();
            qwk(&h, &p, num_labels)
        }
        QwkPooling::Averaged => {
            let mut by_rot: BTreeMap<usize, (Vec<usize>, Vec<usize>)> = BTreeMap::new();
            for p in predictions {
                let e = by_rot.entry(p.rotation).or_default();
                e.0.push(p.true_label);
                e.1.push(p.predicted);
            }
            if by_rot.is_empty() {
                return Err(Error::data("no predictions"));
            }
            let mut total = 0.0;
            for (h, p) in by_rot.values() {
                total += qwk(h, p, num_labels)?;
            }
            Ok(total / by_rot.len() as f64)
        }
    }
}

impl ItemRun {
    pub fn qwk(&self, pooling: QwkPooling) -> Result<f64> {
        predictions_qwk(&self.predictions, self.num_labels, pooling)
    }

    /// Record ids of a rotation's test fold that also appear in its training
    /// data or context examples.
    pub fn leakage(&self) -> Vec<String> {
        let mut out = Vec::new();
        for r in &self.rotations {
            let seen: BTreeSet<&String> = r.train_ids.iter().chain(&r.example_ids).collect();
            out.extend(r.test_ids.iter().filter(|id| seen.contains(id)).cloned());
        }
        out
    }

    pub fn warnings(&self) -> Vec<String> {
        self.rotations.iter().flat_map(|r| r.warnings.iter().cloned()).collect()
    }
}

enum Encoded {
    Normal(TokenizedPair),
    Long(Array1<f64>),
}

fn argmax(v: &Array1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Context examples for a rotation: alternately the highest- and lowest-scored
/// training records, shortest response first, restricted to responses whose
/// text is unique within the item.
fn select_examples(records: &[ScoredResponse], train: &[usize], n: usize) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let mut text_count: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        *text_count.entry(r.response_text.as_str()).or_default() += 1;
    }
    let mut pool: Vec<usize> = train
        .iter()
        .copied()
        .filter(|&i| text_count[records[i].response_text.as_str()] == 1)
        .collect();
    let mut chosen = Vec::with_capacity(n);
    let key = |i: usize| (records[i].response_text.chars().count(), i);
    for turn in 0..n {
        if pool.is_empty() {
            break;
        }
        let target = if turn % 2 == 0 {
            pool.iter().map(|&i| records[i].score).max()
        } else {
            pool.iter().map(|&i| records[i].score).min()
        }
        .expect("non-empty pool");
        let pick = pool
            .iter()
            .copied()
            .filter(|&i| records[i].score == target)
            .min_by_key(|&i| key(i))
            .expect("label present");
        pool.retain(|&i| i != pick);
        chosen.push(pick);
    }
    chosen
}

fn encode_record(
    record: &ScoredResponse,
    spec: &PromptSpec,
    examples: &[(String, String)],
    enc: &Encoders<'_>,
    max_len: usize,
) -> Result<Encoded> {
    let (task_side, response_side) = assemble_input(record, spec, examples)?;
    let task = encode_text(&task_side, enc.vocab);
    let response = encode_text(&response_side, enc.vocab);
    if task.len() + response.len() + 3 <= max_len {
        Ok(Encoded::Normal(encode_ids_pair(&task, &response, max_len).trimmed()))
    } else {
        Ok(Encoded::Long(encode_long(&task, &response, enc.frozen, max_len)?))
    }
}

fn predict(params: &ModelParams, cfg: &ModelConfig, e: &Encoded) -> Result<usize> {
    Ok(match e {
        Encoded::Normal(pair) => {
            let t = forward_one(params, cfg, pair, None)?;
            argmax(&classifier_logits(params, t.pooled()))
        }
        Encoded::Long(v) => argmax(&classifier_logits(params, v.view())),
    })
}

fn train_step(
    params: &mut ModelParams,
    cfg: &ModelConfig,
    batch: &[(&Encoded, usize)],
    adam: &AdamConfig,
    state: &mut AdamState,
    dropout: &mut ChaCha8Rng,
) -> Result<f64> {
    let normal: Vec<TokenizedPair> = batch
        .iter()
        .filter_map(|(e, _)| match e {
            Encoded::Normal(p) => Some(p.clone()),
            Encoded::Long(_) => None,
        })
        .collect();
    let traces = forward(params, cfg, &normal, Some(dropout))?;
    let mut next = 0;
    let mut owner = Vec::with_capacity(batch.len());
    let pooled: Vec<ArrayView1<f64>> = batch
        .iter()
        .map(|(e, _)| match e {
            Encoded::Normal(_) => {
                owner.push(Some(next));
                next += 1;
                traces[next - 1].pooled()
            }
            Encoded::Long(v) => {
                owner.push(None);
                v.view()
            }
        })
        .collect();
    let labels: Vec<usize> = batch.iter().map(|(_, y)| *y).collect();
    let mut grads = params.zeros_like();
    let (loss, dpooled) = classify_loss_grad(params, &pooled, &labels, &mut grads)?;
    drop(pooled);
    for (slot, d) in owner.iter().zip(dpooled) {
        if let Some(j) = *slot {
            let t = &traces[j];
            let mut dh = Array2::zeros(t.hidden.raw_dim());
            dh.row_mut(0).assign(&d);
            encoder_backward(params, cfg, t, dh, &mut grads);
        }
    }
    adam_step(params, &grads, state, adam)?;
    Ok(loss)
}

fn run_rotation(
    item: &ItemRecords<'_>,
    ids: &[String],
    rot: &Rotation,
    enc: &Encoders<'_>,
    spec: &PromptSpec,
    hyper: &FinetuneHyper,
) -> Result<(RotationReport, Vec<Prediction>)> {
    let records = item.records;
    let k = item.num_labels;
    let item_stream = stream_of(item.item_id);
    let rot_seed = derive_seed(derive_seed(hyper.seed, item_stream), rot.index as u64);

    let example_idx = select_examples(records, &rot.train, spec.num_in_context_examples);
    let examples: Vec<(String, String)> = example_idx
        .iter()
        .map(|&i| Ok((records[i].response_text.clone(), spec.label_name(records[i].score)?.to_string())))
        .collect::<Result<_>>()?;
    let train: Vec<usize> = rot.train.iter().copied().filter(|i| !example_idx.contains(i)).collect();

    let mut warnings = Vec::new();
    let present: BTreeSet<usize> = train.iter().map(|&i| records[i].score).collect();
    let missing: Vec<String> = (0..k).filter(|y| !present.contains(y)).map(|y| y.to_string()).collect();
    if train.is_empty() {
        warnings.push(format!("{} rotation {}: no training records", item.item_id, rot.index));
    } else if !missing.is_empty() {
        warnings.push(format!(
            "{} rotation {}: training folds lack label(s) {}",
            item.item_id,
            rot.index,
            missing.join(",")
        ));
    }

    let max_len = enc.base.config.max_len;
    let mut encoded: BTreeMap<usize, Encoded> = BTreeMap::new();
    for &i in train.iter().chain(&rot.validation).chain(&rot.test) {
        encoded.insert(i, encode_record(&records[i], spec, &examples, enc, max_len)?);
    }
    let long_ids: Vec<String> = encoded
        .iter()
        .filter(|(_, e)| matches!(e, Encoded::Long(_)))
        .map(|(&i, _)| ids[i].clone())
        .collect();

    let cfg = ModelConfig { num_labels: k, ..enc.base.config };
    let mut params = enc.base.params.clone();
    params.reset_classifier(k, derive_seed(rot_seed, STREAM_HEAD));
    let adam = AdamConfig::with_lr(hyper.lr);
    let mut state = AdamState::new(&params);
    let mut dropout = ChaCha8Rng::seed_from_u64(derive_seed(rot_seed, STREAM_DROPOUT));
    let mut shuffle = ChaCha8Rng::seed_from_u64(derive_seed(rot_seed, STREAM_SHUFFLE));

    let mut best: Option<(f64, usize, ModelParams)> = None;
    let mut validation_qwk = Vec::with_capacity(hyper.epochs);
    let mut order = train.clone();
    for epoch in 1..=hyper.epochs {
        order.shuffle(&mut shuffle);
        for chunk in order.chunks(hyper.batch_size.max(1)) {
            let batch: Vec<(&Encoded, usize)> = chunk.iter().map(|i| (&encoded[i], records[*i].score)).collect();
            train_step(&mut params, &cfg, &batch, &adam, &mut state, &mut dropout)?;
        }
        let mut h = Vec::with_capacity(rot.validation.len());
        let mut p = Vec::with_capacity(rot.validation.len());
        for &i in &rot.validation {
            h.push(records[i].score);
            p.push(predict(&params, &cfg, &encoded[&i])?);
        }
        let score = qwk(&h, &p, k).unwrap_or(f64::NAN);
        validation_qwk.push(score);
        let ranked = if score.is_nan() { f64::NEG_INFINITY } else { score };
        if best.as_ref().is_none_or(|(b, _, _)| ranked > *b) {
            best = Some((ranked, epoch, params.clone()));
        }
    }
    let (best_epoch, chosen) = match best {
        Some((_, e, p)) => (e, p),
        None => (0, params),
    };

    let mut predictions = Vec::with_capacity(rot.test.len());
    for &i in &rot.test {
        predictions.push(Prediction {
            record_id: ids[i].clone(),
            rotation: rot.index,
            true_label: records[i].score,
            predicted: predict(&chosen, &cfg, &encoded[&i])?,
        });
    }
    let names = |v: &[usize]| v.iter().map(|&i| ids[i].clone()).collect::<Vec<_>>();
    Ok((
        RotationReport {
            rotation: rot.index,
            best_epoch,
            validation_qwk,
            train_ids: names(&train),
            validation_ids: names(&rot.validation),
            test_ids: names(&rot.test),
            example_ids: names(&example_idx),
            long_ids,
            warnings,
        },
        predictions,
    ))
}

/// Cross-validated fine-tuning of one item. Rotation `r` tests fold `r`,
/// validates on fold `r + 1` and trains on the rest; the epoch with the best
/// validation agreement (earliest on ties) predicts the test fold.
pub fn finetune_item(
    item: &ItemRecords<'_>,
    enc: &Encoders<'_>,
    spec: &PromptSpec,
    hyper: &FinetuneHyper,
) -> Result<ItemRun> {
    spec.validate()?;
    if spec.num_labels() != item.num_labels {
        return Err(Error::config(format!(
            "item {} has {} labels but the prompt names {}",
            item.item_id,
            item.num_labels,
            spec.num_labels()
        )));
    }
    if let Some(r) = item.records.iter().find(|r| r.score >= item.num_labels) {
        return Err(Error::data(format!("item {}: score {} out of range", item.item_id, r.score)));
    }
    if !enc.frozen.config.same_encoder(&enc.base.config) {
        return Err(Error::config("frozen encoder architecture differs from the base checkpoint"));
    }
    if enc.vocab.len() != enc.base.config.vocab_size {
        return Err(Error::config(format!(
            "vocabulary has {} entries but the checkpoint expects {}",
            enc.vocab.len(),
            enc.base.config.vocab_size
        )));
    }
    let labels: Vec<usize> = item.records.iter().map(|r| r.score).collect();
    let plan = make_folds(&labels, hyper.folds, derive_seed(derive_seed(hyper.seed, stream_of(item.item_id)), STREAM_FOLDS))?;
    let ids: Vec<String> = (0..item.records.len()).map(|i| record_id(item.item_id, i)).collect();

    let mut rotations = Vec::with_capacity(plan.k());
    let mut predictions = Vec::with_capacity(item.records.len());
    for rot in plan.rotations() {
        let (report, preds) = run_rotation(item, &ids, &rot, enc, spec, hyper)?;
        rotations.push(report);
        predictions.extend(preds);
    }
    Ok(ItemRun {
        item_id: item.item_id.to_string(),
        num_labels: item.num_labels,
        predictions,
        rotations,
    })
}
