//! Scored-response datasets: file I/O, spelling normalisation, text features
//! and the synthetic corpus generator.

mod features;
mod generator;
mod lexicon;
pub mod plan;
pub mod words;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub use features::{avg_response_length, scientific_word_rate};
pub use generator::{
    derive_score, generate_corpus, generate_corpus_with_clean, GeneratedRecord, GeneratorSpec,
    ItemSpec,
};
pub use lexicon::{correct_spelling, lookup_key, normalize_word, Lexicon};
pub use plan::{CorpusBundle, CorpusPlan, FINETUNE_ITEM_IDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SplitHint {
    Pretrain,
    Finetune,
}

impl fmt::Display for SplitHint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitHint::Pretrain => "pretrain",
            SplitHint::Finetune => "finetune",
        })
    }
}

impl std::str::FromStr for SplitHint {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "pretrain" => Ok(SplitHint::Pretrain),
            "finetune" => Ok(SplitHint::Finetune),
            other => Err(format!("unknown split hint {other:?}")),
        }
    }
}

/// One student answer with its human score.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredResponse {
    pub item_id: String,
    pub task_text: String,
    pub response_text: String,
    pub score: usize,
    pub split_hint: Option<SplitHint>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemMeta {
    pub item_id: String,
    pub num_labels: usize,
    pub n_train: usize,
    pub n_test: usize,
}

impl ItemMeta {
    /// Sample counts as reported for k-fold evaluation: the mean test-fold size
    /// and the remaining training (incl. validation) share.
    pub fn for_folds(item_id: &str, num_labels: usize, n_records: usize, folds: usize) -> Self {
        let n_test = if folds == 0 {
            0
        } else {
            (n_records as f64 / folds as f64).round() as usize
        };
        Self {
            item_id: item_id.to_string(),
            num_labels,
            n_train: n_records - n_test.min(n_records),
            n_test,
        }
    }
}

/// A loaded dataset file: records in file order and the label count per item.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub records: Vec<ScoredResponse>,
    pub num_labels: BTreeMap<String, usize>,
}

impl Dataset {
    pub fn from_records(records: Vec<ScoredResponse>, num_labels: BTreeMap<String, usize>) -> Self {
        Self {
            records,
            num_labels,
        }
    }

    /// Item ids in order of first appearance.
    pub fn item_ids(&self) -> Vec<String> {
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            if seen.insert(r.item_id.as_str()) {
                out.push(r.item_id.clone());
            }
        }
        out
    }

    pub fn records_for(&self, item_id: &str) -> Vec<ScoredResponse> {
        self.records
            .iter()
            .filter(|r| r.item_id == item_id)
            .cloned()
            .collect()
    }

    pub fn labels_for(&self, item_id: &str) -> Option<usize> {
        self.num_labels.get(item_id).copied()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Serialises to the tab-separated dataset format, label declarations first.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (item, k) in &self.num_labels {
            out.push_str(&format!("# labels {item} {k}\n"));
        }
        for r in &self.records {
            out.push_str(&r.item_id);
            out.push('\t');
            out.push_str(&r.task_text);
            out.push('\t');
            out.push_str(&r.response_text);
            out.push('\t');
            out.push_str(&r.score.to_string());
            if let Some(hint) = r.split_hint {
                out.push('\t');
                out.push_str(&hint.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    /// Applies [`correct_spelling`] to every response.
    pub fn spelling_corrected(&self, lexicon: &Lexicon) -> Self {
        let records = self
            .records
            .iter()
            .map(|r| ScoredResponse {
                response_text: correct_spelling(&r.response_text, lexicon),
                ..r.clone()
            })
            .collect();
        Self {
            records,
            num_labels: self.num_labels.clone(),
        }
    }
}

struct LabelDecl {
    num_labels: usize,
    first: usize,
}

fn parse_label_decl(rest: &str, line: usize) -> Result<(String, LabelDecl)> {
    let parts: Vec<&str> = rest.split_whitespace().collect();
    let bad = || Error::Parse {
        line,
        msg: format!("malformed label declaration {rest:?}; expected `# labels <item> <K> [first=<n>]`"),
    };
    if parts.len() < 2 || parts.len() > 3 {
        return Err(bad());
    }
    let num_labels: usize = parts[1].parse().map_err(|_| bad())?;
    if num_labels < 2 {
        return Err(Error::Parse {
            line,
            msg: format!("item {} declares {num_labels} labels; at least 2 required", parts[0]),
        });
    }
    let first = match parts.get(2) {
        Some(p) => p
            .strip_prefix("first=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(bad)?,
        None => 0,
    };
    Ok((parts[0].to_string(), LabelDecl { num_labels, first }))
}

/// Parses dataset text (see [`load_dataset`]).
pub fn parse_dataset(text: &str) -> Result<Dataset> {
    let mut decls: BTreeMap<String, LabelDecl> = BTreeMap::new();
    let mut records = Vec::new();
    let mut lines_of = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.trim().is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(rest) = comment.trim_start().strip_prefix("labels ") {
                let (item, decl) = parse_label_decl(rest, line_no)?;
                decls.insert(item, decl);
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 && fields.len() != 5 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected 4 or 5 tab-separated fields, found {}", fields.len()),
            });
        }
        let item_id = fields[0].trim();
        if item_id.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "empty item id".into(),
            });
        }
        if fields[2].trim().is_empty() {
            return Err(Error::Parse {
                line: line_no,
                msg: "empty response text".into(),
            });
        }
        let score: usize = fields[3].trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("score {:?} is not a non-negative integer", fields[3]),
        })?;
        let split_hint = match fields.get(4) {
            Some(h) => Some(h.trim().parse::<SplitHint>().map_err(|msg| Error::Parse {
                line: line_no,
                msg,
            })?),
            None => None,
        };
        records.push(ScoredResponse {
            item_id: item_id.to_string(),
            task_text: fields[1].to_string(),
            response_text: fields[2].to_string(),
            score,
            split_hint,
        });
        lines_of.push(line_no);
    }

    let mut num_labels = BTreeMap::new();
    for (rec, &line) in records.iter_mut().zip(&lines_of) {
        match decls.get(&rec.item_id) {
            Some(decl) => {
                if rec.score < decl.first || rec.score - decl.first >= decl.num_labels {
                    return Err(Error::Parse {
                        line,
                        msg: format!(
                            "score {} outside declared range {}..={} of item {}",
                            rec.score,
                            decl.first,
                            decl.first + decl.num_labels - 1,
                            rec.item_id
                        ),
                    });
                }
                rec.score -= decl.first;
                num_labels.insert(rec.item_id.clone(), decl.num_labels);
            }
            None => {
                let k = num_labels.entry(rec.item_id.clone()).or_insert(2);
                *k = (*k).max(rec.score + 1);
            }
        }
    }
    Ok(Dataset {
        records,
        num_labels,
    })
}

/// Loads a tab-separated dataset file.
///
/// Each non-blank, non-comment line is `item_id \t task \t response \t score`
/// with an optional fifth `pretrain`/`finetune` field. Comment lines of the
/// form `# labels <item> <K> [first=<n>]` declare an item's label range;
/// scores are shifted so labels start at 0. Items without a declaration get
/// `K = max(2, max score + 1)`.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_dataset(&text)
}
