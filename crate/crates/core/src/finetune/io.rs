use std::path::Path;

use super::train::{ItemRun, Prediction};
use crate::error::{Error, Result};

pub const PREDICTIONS_HEADER: &str = "record_id\trotation\ttrue\tpredicted";

/// Predictions of one item with the label count needed to score them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionFile {
    pub item_id: String,
    pub num_labels: usize,
    pub predictions: Vec<Prediction>,
}

impl From<&ItemRun> for PredictionFile {
    fn from(run: &ItemRun) -> Self {
        Self {
            item_id: run.item_id.clone(),
            num_labels: run.num_labels,
            predictions: run.predictions.clone(),
        }
    }
}

impl PredictionFile {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# item {} labels {}\n{PREDICTIONS_HEADER}\n", self.item_id, self.num_labels);
        for p in &self.predictions {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", p.record_id, p.rotation, p.true_label, p.predicted));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut item_id = None;
        let mut num_labels = None;
        let mut predictions = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            let perr = |msg: String| Error::Parse { line: lineno, msg };
            if let Some(rest) = line.strip_prefix("# item ") {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                match parts.as_slice() {
                    [id, "labels", k] => {
                        item_id = Some(id.to_string());
                        num_labels = Some(k.parse::<usize>().map_err(|_| perr(format!("bad label count {k:?}")))?);
                    }
                    _ => return Err(perr("expected '# item <id> labels <K>'".into())),
                }
                continue;
            }
            if line.is_empty() || line.starts_with('#') || line == PREDICTIONS_HEADER {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(perr(format!("expected 4 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|_| perr(format!("not a non-negative integer: {s:?}")));
            predictions.push(Prediction {
                record_id: f[0].to_string(),
                rotation: num(f[1])?,
                true_label: num(f[2])?,
                predicted: num(f[3])?,
            });
        }
        let item_id = item_id.ok_or_else(|| Error::data("predictions file lacks '# item' header"))?;
        let num_labels = num_labels.expect("set with item id");
        if let Some(p) = predictions.iter().find(|p| p.true_label >= num_labels || p.predicted >= num_labels) {
            return Err(Error::data(format!("{}: label outside 0..{num_labels}", p.record_id)));
        }
        Ok(Self { item_id, num_labels, predictions })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}
