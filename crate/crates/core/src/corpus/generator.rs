//! Synthetic scored-response generator.
//!
//! An item owns a set of key-concept groups; a response's score is the number of
//! distinct groups it mentions (clamped to `K - 1`). Remaining words are filler
//! or science distractors from groups the item does not score.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::lexicon::lookup_key;
use super::{Dataset, ScoredResponse, SplitHint};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ItemSpec {
    pub item_id: String,
    pub task_text: String,
    pub num_labels: usize,
    /// Groups of interchangeable concept words.
    pub concept_groups: Vec<Vec<String>>,
    pub n_responses: usize,
    pub mean_words: f64,
    /// Standard deviation of response length relative to `mean_words`; 0 = fixed length.
    pub length_spread: f64,
    /// Relative label frequencies (length `num_labels`); empty means uniform.
    pub label_weights: Vec<f64>,
    pub split_hint: Option<SplitHint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub items: Vec<ItemSpec>,
    pub filler_words: Vec<String>,
    /// Distractor pool; words that belong to an item's own groups are skipped for that item.
    pub science_words: Vec<String>,
    /// Per-token probability of one random character edit.
    pub misspelling_rate: f64,
    /// Probability that a non-concept word is drawn from the distractor pool.
    pub science_density: f64,
    /// Synonym `i` of a concept group is drawn with weight `1 / (i + 1)^skew`; 0 is uniform.
    pub synonym_skew: f64,
}

/// A generated record together with its text before misspelling injection.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedRecord {
    pub record: ScoredResponse,
    pub clean_text: String,
}

const EDIT_ALPHABET: &[char] = &[
    'a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'i', 'j', 'k', 'l', 'm', 'n', 'o', 'p', 'q', 'r', 's',
    't', 'u', 'v', 'w', 'x', 'y', 'z', 'ä', 'ö', 'ü', 'ß',
];

impl ItemSpec {
    fn validate(&self) -> Result<()> {
        let id = &self.item_id;
        if self.num_labels < 2 {
            return Err(Error::config(format!("item {id}: K = {} < 2", self.num_labels)));
        }
        if self.concept_groups.is_empty() || self.concept_groups.iter().any(|g| g.is_empty()) {
            return Err(Error::config(format!("item {id}: empty concept set")));
        }
        if self.concept_groups.len() + 1 < self.num_labels {
            return Err(Error::config(format!(
                "item {id}: {} concept groups cannot reach top label {}",
                self.concept_groups.len(),
                self.num_labels - 1
            )));
        }
        if !self.label_weights.is_empty()
            && (self.label_weights.len() != self.num_labels
                || self.label_weights.iter().any(|w| !(*w >= 0.0))
                || self.label_weights.iter().sum::<f64>() <= 0.0)
        {
            return Err(Error::config(format!("item {id}: bad label weights")));
        }
        if !(self.mean_words >= 1.0) || !(self.length_spread >= 0.0) {
            return Err(Error::config(format!("item {id}: bad length distribution")));
        }
        if self.item_id.contains(char::is_whitespace) || self.task_text.contains(['\t', '\n']) {
            return Err(Error::config(format!("item {id}: id or task text not serialisable")));
        }
        Ok(())
    }

    /// Exact label counts for `n_responses` by largest remainder.
    fn label_counts(&self) -> Vec<usize> {
        let k = self.num_labels;
        let weights: Vec<f64> = if self.label_weights.is_empty() {
            vec![1.0; k]
        } else {
            self.label_weights.clone()
        };
        let total: f64 = weights.iter().sum();
        let quotas: Vec<f64> = weights
            .iter()
            .map(|w| w / total * self.n_responses as f64)
            .collect();
        let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
        let mut remaining = self.n_responses - counts.iter().sum::<usize>();
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - quotas[a].floor();
            let rb = quotas[b] - quotas[b].floor();
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle() {
            if remaining == 0 {
                break;
            }
            counts[i] += 1;
            remaining -= 1;
        }
        counts
    }
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<()> {
        if self.items.is_empty() {
            return Err(Error::config("generator spec has no items"));
        }
        if self.filler_words.is_empty() {
            return Err(Error::config("generator spec has no filler words"));
        }
        if !(0.0..=1.0).contains(&self.misspelling_rate) || !(0.0..=1.0).contains(&self.science_density) {
            return Err(Error::config("rates must lie in [0, 1]"));
        }
        if !(self.synonym_skew >= 0.0 && self.synonym_skew.is_finite()) {
            return Err(Error::config("synonym skew must be finite and non-negative"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for item in &self.items {
            item.validate()?;
            if !seen.insert(item.item_id.as_str()) {
                return Err(Error::config(format!("duplicate item id {}", item.item_id)));
            }
        }
        Ok(())
    }

    /// Every word the generator can emit before misspelling (responses and tasks).
    pub fn vocabulary(&self) -> Vec<String> {
        let mut words: Vec<String> = self
            .filler_words
            .iter()
            .chain(&self.science_words)
            .cloned()
            .collect();
        for item in &self.items {
            words.extend(item.concept_groups.iter().flatten().cloned());
            words.extend(item.task_text.split_whitespace().map(lookup_key));
        }
        words.retain(|w| !w.is_empty());
        words.sort();
        words.dedup();
        words
    }
}

/// Number of distinct concept groups named in `text`, clamped to `K - 1`.
pub fn derive_score(item: &ItemSpec, text: &str) -> usize {
    let tokens: std::collections::BTreeSet<String> =
        text.split_whitespace().map(lookup_key).collect();
    let hits = item
        .concept_groups
        .iter()
        .filter(|g| g.iter().any(|w| tokens.contains(w.as_str())))
        .count();
    hits.min(item.num_labels - 1)
}

fn misspell(word: &str, rng: &mut ChaCha8Rng) -> String {
    let chars: Vec<char> = word.chars().collect();
    for _ in 0..8 {
        let mut out = chars.clone();
        match rng.random_range(0..3) {
            0 if out.len() >= 2 => {
                out.remove(rng.random_range(0..out.len()));
            }
            1 => {
                let pos = rng.random_range(0..out.len());
                out[pos] = *EDIT_ALPHABET.choose(rng).expect("alphabet");
            }
            _ => {
                let pos = rng.random_range(0..=out.len());
                out.insert(pos, *EDIT_ALPHABET.choose(rng).expect("alphabet"));
            }
        }
        if out != chars {
            return out.into_iter().collect();
        }
    }
    word.to_string()
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

fn render(words: &[String]) -> String {
    let mut out = String::new();
    for (i, w) in words.iter().enumerate() {
        if i == 0 {
            out.push_str(&capitalize(w));
        } else {
            out.push(' ');
            out.push_str(w);
        }
    }
    out.push('.');
    out
}

fn generate_item(
    spec: &GeneratorSpec,
    item: &ItemSpec,
    rng: &mut ChaCha8Rng,
    out: &mut Vec<GeneratedRecord>,
) {
    let own: std::collections::BTreeSet<&str> = item
        .concept_groups
        .iter()
        .flatten()
        .map(String::as_str)
        .collect();
    let distractors: Vec<&String> = spec
        .science_words
        .iter()
        .filter(|w| !own.contains(w.as_str()))
        .collect();
    let top = item.num_labels - 1;
    let groups = item.concept_groups.len();

    let mut labels: Vec<usize> = item
        .label_counts()
        .iter()
        .enumerate()
        .flat_map(|(label, &c)| std::iter::repeat_n(label, c))
        .collect();
    labels.shuffle(rng);

    let length = (item.length_spread > 0.0)
        .then(|| Normal::new(item.mean_words, item.length_spread * item.mean_words).expect("finite"));

    for score in labels {
        let concepts = if score < top { score } else { rng.random_range(top..=groups) };
        let n_words = match &length {
            Some(dist) => dist.sample(rng).round().max(1.0) as usize,
            None => item.mean_words.round() as usize,
        }
        .max(concepts)
        .max(1);

        let mut chosen: Vec<usize> = (0..groups).collect();
        chosen.shuffle(rng);
        let mut words: Vec<String> = chosen[..concepts]
            .iter()
            .map(|&g| {
                let group = &item.concept_groups[g];
                let pick = if spec.synonym_skew == 0.0 {
                    rng.random_range(0..group.len())
                } else {
                    let w: Vec<f64> = (0..group.len()).map(|i| ((i + 1) as f64).powf(-spec.synonym_skew)).collect();
                    let mut u = rng.random::<f64>() * w.iter().sum::<f64>();
                    w.iter().position(|&x| { u -= x; u < 0.0 }).unwrap_or(group.len() - 1)
                };
                group[pick].clone()
            })
            .collect();
        for _ in concepts..n_words {
            let w = if !distractors.is_empty() && rng.random::<f64>() < spec.science_density {
                (*distractors.choose(rng).expect("non-empty")).clone()
            } else {
                spec.filler_words.choose(rng).expect("non-empty").clone()
            };
            words.push(w);
        }
        words.shuffle(rng);

        let clean_text = render(&words);
        let noisy: Vec<String> = words
            .iter()
            .map(|w| {
                if spec.misspelling_rate > 0.0 && rng.random::<f64>() < spec.misspelling_rate {
                    misspell(w, rng)
                } else {
                    w.clone()
                }
            })
            .collect();
        out.push(GeneratedRecord {
            record: ScoredResponse {
                item_id: item.item_id.clone(),
                task_text: item.task_text.clone(),
                response_text: render(&noisy),
                score,
                split_hint: item.split_hint,
            },
            clean_text,
        });
    }
}

/// Generates records together with their pre-misspelling text.
pub fn generate_corpus_with_clean(spec: &GeneratorSpec, seed: u64) -> Result<Vec<GeneratedRecord>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(spec.items.iter().map(|i| i.n_responses).sum());
    for item in &spec.items {
        generate_item(spec, item, &mut rng, &mut out);
    }
    Ok(out)
}

/// Generates a dataset; deterministic in `seed`.
pub fn generate_corpus(spec: &GeneratorSpec, seed: u64) -> Result<Dataset> {
    let records = generate_corpus_with_clean(spec, seed)?
        .into_iter()
        .map(|g| g.record)
        .collect();
    let num_labels: BTreeMap<String, usize> = spec
        .items
        .iter()
        .map(|i| (i.item_id.clone(), i.num_labels))
        .collect();
    Ok(Dataset::from_records(records, num_labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(ws: &[&str]) -> Vec<String> {
        ws.iter().map(|s| s.to_string()).collect()
    }

    pub(crate) fn small_spec(misspelling_rate: f64) -> GeneratorSpec {
        GeneratorSpec {
            items: vec![ItemSpec {
                item_id: "T1".into(),
                task_text: "Erkläre die wärme.".into(),
                num_labels: 3,
                concept_groups: vec![words(&["wärme", "hitze"]), words(&["licht"])],
                n_responses: 60,
                mean_words: 10.0,
                length_spread: 0.3,
                label_weights: vec![],
                split_hint: None,
            }],
            filler_words: words(&["die", "und", "ist", "weil"]),
            science_words: words(&["atom", "wärme", "druck"]),
            misspelling_rate,
            science_density: 0.2,
            synonym_skew: 0.0,
        }
    }

    #[test]
    fn deterministic() {
        let spec = small_spec(0.1);
        let a = generate_corpus(&spec, 7).unwrap();
        let b = generate_corpus(&spec, 7).unwrap();
        assert_eq!(a.to_tsv(), b.to_tsv());
        let c = generate_corpus(&spec, 8).unwrap();
        assert_ne!(a.to_tsv(), c.to_tsv());
    }

    #[test]
    fn no_misspelling_uses_vocabulary_verbatim() {
        let spec = small_spec(0.0);
        let vocab = spec.vocabulary();
        for g in generate_corpus_with_clean(&spec, 3).unwrap() {
            assert_eq!(g.record.response_text, g.clean_text);
            for tok in g.record.response_text.split_whitespace() {
                assert!(vocab.contains(&lookup_key(tok)), "{tok}");
            }
        }
    }

    #[test]
    fn score_rederived_from_clean_text() {
        let spec = small_spec(0.2);
        for g in generate_corpus_with_clean(&spec, 11).unwrap() {
            assert_eq!(derive_score(&spec.items[0], &g.clean_text), g.record.score);
        }
    }

    #[test]
    fn distractors_exclude_own_concepts() {
        // "wärme" is both an own concept and in the distractor pool
        let spec = small_spec(0.0);
        for g in generate_corpus_with_clean(&spec, 5).unwrap() {
            let n = g
                .clean_text
                .split_whitespace()
                .filter(|t| ["wärme", "hitze", "licht"].contains(&lookup_key(t).as_str()))
                .count();
            assert_eq!(n, g.record.score);
        }
    }

    #[test]
    fn fixed_length() {
        let mut spec = small_spec(0.0);
        spec.items[0].length_spread = 0.0;
        spec.items[0].mean_words = 20.0;
        spec.items[0].n_responses = 100;
        let ds = generate_corpus(&spec, 1).unwrap();
        let texts: Vec<&str> = ds.records.iter().map(|r| r.response_text.as_str()).collect();
        assert_eq!(super::super::avg_response_length(&texts).unwrap(), 20.0);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = small_spec(0.0);
        spec.items[0].num_labels = 1;
        assert!(generate_corpus(&spec, 0).is_err());
        let mut spec = small_spec(0.0);
        spec.items[0].concept_groups = vec![];
        assert!(generate_corpus(&spec, 0).is_err());
        let mut spec = small_spec(0.0);
        spec.items[0].concept_groups[1].clear();
        assert!(generate_corpus(&spec, 0).is_err());
    }

    #[test]
    fn label_counts_exact() {
        let mut spec = small_spec(0.0);
        spec.items[0].label_weights = vec![0.5, 0.3, 0.2];
        spec.items[0].n_responses = 101;
        assert_eq!(spec.items[0].label_counts(), vec![51, 30, 20]);
    }
}
