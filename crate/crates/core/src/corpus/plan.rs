//! Default synthetic study layout: a domain pre-training corpus, an equally
//! sized concept-free generic corpus and a disjoint set of fine-tuning items.
//! Every domain item scores the concept groups of one topic.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::words::*;
use super::{generate_corpus, Dataset, GeneratorSpec, ItemSpec, Lexicon, SplitHint};
use crate::config::KvConfig;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Item ids used for the fine-tuning set, in order.
pub const FINETUNE_ITEM_IDS: [&str; 27] = [
    "S131Q02", "S131Q04", "S268Q02", "S269Q01", "S269Q03", "S304Q01", "S438Q03", "S458Q01",
    "S465Q01", "S495Q03", "S498Q04", "S510Q04", "S514Q02", "S514Q03", "S514Q04", "S519Q01",
    "S519Q03", "S524Q07", "S602Q03", "S603Q02", "S604Q04", "S605Q04", "S607Q03", "S648Q05",
    "S649Q02", "S656Q02", "S657Q04",
];

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusPlan {
    pub finetune_items: usize,
    pub pretrain_items: usize,
    pub responses_per_item: usize,
    pub pretrain_responses_per_item: usize,
    pub min_labels: usize,
    pub max_labels: usize,
    pub mean_words_min: f64,
    pub mean_words_max: f64,
    pub length_spread: f64,
    pub misspelling_rate: f64,
    pub science_density: f64,
    /// Synonym skew of the fine-tuning items; pre-training corpora draw synonyms uniformly.
    pub synonym_skew: f64,
    /// Explicit ids override the generated ones.
    pub finetune_ids: Vec<String>,
    pub pretrain_ids: Vec<String>,
}

impl Default for CorpusPlan {
    fn default() -> Self {
        Self {
            finetune_items: 27,
            pretrain_items: 32,
            responses_per_item: 600,
            pretrain_responses_per_item: 300,
            min_labels: 2,
            max_labels: 5,
            mean_words_min: 12.0,
            mean_words_max: 28.0,
            length_spread: 0.25,
            misspelling_rate: 0.02,
            science_density: 0.15,
            synonym_skew: 0.0,
            finetune_ids: Vec::new(),
            pretrain_ids: Vec::new(),
        }
    }
}

fn id_list(cfg: &KvConfig, key: &str) -> Vec<String> {
    cfg.get_str(key)
        .map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect()
        })
        .unwrap_or_default()
}

/// Generated corpora plus their lexicons.
#[derive(Debug, Clone)]
pub struct CorpusBundle {
    pub domain: Dataset,
    pub generic: Dataset,
    pub finetune: Dataset,
    pub domain_spec: GeneratorSpec,
    pub generic_spec: GeneratorSpec,
    pub finetune_spec: GeneratorSpec,
    /// Every word any generator can emit.
    pub lexicon: Lexicon,
    /// All concept words.
    pub science_lexicon: Lexicon,
}

fn strings(ws: &[&str]) -> Vec<String> {
    ws.iter().map(|s| s.to_string()).collect()
}

fn capitalize(word: &str) -> String {
    let mut c = word.chars();
    c.next()
        .map(|f| f.to_uppercase().chain(c).collect())
        .unwrap_or_default()
}

impl CorpusPlan {
    pub fn from_config(cfg: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let plan = Self {
            finetune_items: cfg.get_or("gen.finetune_items", d.finetune_items)?,
            pretrain_items: cfg.get_or("gen.pretrain_items", d.pretrain_items)?,
            responses_per_item: cfg.get_or("gen.responses_per_item", d.responses_per_item)?,
            pretrain_responses_per_item: cfg
                .get_or("gen.pretrain_responses_per_item", d.pretrain_responses_per_item)?,
            min_labels: cfg.get_or("gen.min_labels", d.min_labels)?,
            max_labels: cfg.get_or("gen.max_labels", d.max_labels)?,
            mean_words_min: cfg.get_or("gen.mean_words_min", d.mean_words_min)?,
            mean_words_max: cfg.get_or("gen.mean_words_max", d.mean_words_max)?,
            length_spread: cfg.get_or("gen.length_spread", d.length_spread)?,
            misspelling_rate: cfg.get_or("gen.misspelling_rate", d.misspelling_rate)?,
            science_density: cfg.get_or("gen.science_density", d.science_density)?,
            synonym_skew: cfg.get_or("gen.synonym_skew", d.synonym_skew)?,
            finetune_ids: id_list(cfg, "gen.finetune_ids"),
            pretrain_ids: id_list(cfg, "gen.pretrain_ids"),
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_labels < 2 || self.max_labels < self.min_labels {
            return Err(Error::config("need 2 <= gen.min_labels <= gen.max_labels"));
        }
        if self.max_labels > TOPIC_SIZE + 1 {
            return Err(Error::config(format!(
                "gen.max_labels exceeds {} (one more than the groups per topic)",
                TOPIC_SIZE + 1
            )));
        }
        if self.mean_words_min < 1.0 || self.mean_words_max < self.mean_words_min {
            return Err(Error::config("need 1 <= gen.mean_words_min <= gen.mean_words_max"));
        }
        let ft = self.resolved_finetune_ids();
        let pt = self.resolved_pretrain_ids();
        let ft_set: BTreeSet<&String> = ft.iter().collect();
        if ft_set.len() != ft.len() {
            return Err(Error::config("duplicate fine-tuning item ids"));
        }
        if let Some(clash) = pt.iter().find(|id| ft_set.contains(id)) {
            return Err(Error::config(format!(
                "item id {clash} appears in both the pre-training and fine-tuning sets"
            )));
        }
        Ok(())
    }

    fn resolved_finetune_ids(&self) -> Vec<String> {
        if !self.finetune_ids.is_empty() {
            return self.finetune_ids.clone();
        }
        (0..self.finetune_items)
            .map(|i| match FINETUNE_ITEM_IDS.get(i) {
                Some(id) => id.to_string(),
                None => format!("S9{:02}Q{:02}", i / 10, i % 10 + 1),
            })
            .collect()
    }

    fn resolved_pretrain_ids(&self) -> Vec<String> {
        if !self.pretrain_ids.is_empty() {
            return self.pretrain_ids.clone();
        }
        (0..self.pretrain_items)
            .map(|i| format!("S7{:02}Q{:02}", i / 4, i % 4 + 1))
            .collect()
    }

    fn mean_words(&self, index: usize, count: usize) -> f64 {
        if count <= 1 {
            return 0.5 * (self.mean_words_min + self.mean_words_max);
        }
        let t = index as f64 / (count - 1) as f64;
        self.mean_words_min + t * (self.mean_words_max - self.mean_words_min)
    }

    fn domain_items(
        &self,
        ids: &[String],
        n_responses: usize,
        hint: SplitHint,
        rng: &mut ChaCha8Rng,
    ) -> Vec<ItemSpec> {
        let mut lengths: Vec<f64> = (0..ids.len()).map(|i| self.mean_words(i, ids.len())).collect();
        lengths.shuffle(rng);
        let n_topics = CONCEPT_GROUPS.len() / TOPIC_SIZE;
        let mut topics: Vec<usize> = (0..ids.len()).map(|i| i % n_topics).collect();
        topics.shuffle(rng);
        ids.iter()
            .zip(lengths)
            .zip(topics)
            .map(|((id, mean_words), topic)| {
                let k = rng.random_range(self.min_labels..=self.max_labels);
                let mut groups: Vec<usize> = (topic * TOPIC_SIZE..(topic + 1) * TOPIC_SIZE).collect();
                groups.shuffle(rng);
                let concept_groups: Vec<Vec<String>> =
                    groups.iter().map(|&g| strings(CONCEPT_GROUPS[g])).collect();
                let task_text = format!(
                    "{} {} sich die {} bei dem {} verändert und begründe deine antwort.",
                    capitalize(TASK_VERBS.choose(rng).expect("verbs")),
                    TASK_LINKS.choose(rng).expect("links"),
                    concept_groups[0][0],
                    TASK_NOUNS.choose(rng).expect("nouns"),
                );
                ItemSpec {
                    item_id: id.clone(),
                    task_text,
                    num_labels: k,
                    concept_groups,
                    n_responses,
                    mean_words,
                    length_spread: self.length_spread,
                    label_weights: Vec::new(),
                    split_hint: Some(hint),
                }
            })
            .collect()
    }

    fn generic_items(&self, ids: &[String], n_responses: usize, rng: &mut ChaCha8Rng) -> Vec<ItemSpec> {
        let mut lengths: Vec<f64> = (0..ids.len()).map(|i| self.mean_words(i, ids.len())).collect();
        lengths.shuffle(rng);
        ids.iter()
            .zip(lengths)
            .map(|(id, mean_words)| {
                let picks: Vec<&str> = GENERIC.choose_multiple(rng, 2).copied().collect();
                ItemSpec {
                    item_id: format!("G{}", &id[1..]),
                    task_text: format!(
                        "{} {} {} und {} in deiner woche.",
                        capitalize(GENERIC_TASK_VERBS.choose(rng).expect("verbs")),
                        GENERIC_TASK_LINKS.choose(rng).expect("links"),
                        picks[0],
                        picks[1]
                    ),
                    num_labels: 2,
                    concept_groups: vec![vec![picks[0].to_string()]],
                    n_responses,
                    mean_words,
                    length_spread: self.length_spread,
                    label_weights: Vec::new(),
                    split_hint: Some(SplitHint::Pretrain),
                }
            })
            .collect()
    }

    fn science_pool() -> Vec<String> {
        CONCEPT_GROUPS.iter().flat_map(|g| strings(g)).collect()
    }

    pub fn domain_spec(&self, seed: u64) -> GeneratorSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1));
        GeneratorSpec {
            items: self.domain_items(
                &self.resolved_pretrain_ids(),
                self.pretrain_responses_per_item,
                SplitHint::Pretrain,
                &mut rng,
            ),
            filler_words: strings(FILLER),
            science_words: Self::science_pool(),
            misspelling_rate: self.misspelling_rate,
            science_density: self.science_density,
            synonym_skew: 0.0,
        }
    }

    /// Same item count, responses and length profile as the domain corpus, with
    /// everyday nouns in place of all science vocabulary.
    pub fn generic_spec(&self, seed: u64) -> GeneratorSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 2));
        GeneratorSpec {
            items: self.generic_items(
                &self.resolved_pretrain_ids(),
                self.pretrain_responses_per_item,
                &mut rng,
            ),
            filler_words: strings(FILLER),
            science_words: strings(GENERIC),
            misspelling_rate: self.misspelling_rate,
            science_density: self.science_density,
            synonym_skew: 0.0,
        }
    }

    pub fn finetune_spec(&self, seed: u64) -> GeneratorSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 3));
        GeneratorSpec {
            items: self.domain_items(
                &self.resolved_finetune_ids(),
                self.responses_per_item,
                SplitHint::Finetune,
                &mut rng,
            ),
            filler_words: strings(FILLER),
            science_words: Self::science_pool(),
            misspelling_rate: self.misspelling_rate,
            science_density: self.science_density,
            synonym_skew: self.synonym_skew,
        }
    }

    pub fn build(&self, seed: u64) -> Result<CorpusBundle> {
        self.validate()?;
        let domain_spec = self.domain_spec(seed);
        let generic_spec = self.generic_spec(seed);
        let finetune_spec = self.finetune_spec(seed);
        let domain = generate_corpus(&domain_spec, derive_seed(seed, 11))?;
        let generic = generate_corpus(&generic_spec, derive_seed(seed, 12))?;
        let finetune = generate_corpus(&finetune_spec, derive_seed(seed, 13))?;

        let mut all: Vec<String> = domain_spec.vocabulary();
        all.extend(generic_spec.vocabulary());
        all.extend(finetune_spec.vocabulary());
        all.extend(strings(TASK_VERBS));
        all.extend(strings(TASK_NOUNS));
        all.extend(strings(TASK_LINKS));
        all.extend(strings(TASK_EXTRA));
        all.extend(strings(GENERIC_TASK_VERBS));
        all.extend(strings(GENERIC_TASK_LINKS));
        Ok(CorpusBundle {
            domain,
            generic,
            finetune,
            domain_spec,
            generic_spec,
            finetune_spec,
            lexicon: Lexicon::new(all),
            science_lexicon: Lexicon::new(Self::science_pool()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_layout() {
        let plan = CorpusPlan {
            responses_per_item: 20,
            pretrain_responses_per_item: 10,
            ..CorpusPlan::default()
        };
        let b = plan.build(1).unwrap();
        assert_eq!(b.finetune.item_ids().len(), 27);
        assert_eq!(b.finetune.item_ids()[0], "S131Q02");
        assert_eq!(b.domain.item_ids().len(), 32);
        let ft: BTreeSet<String> = b.finetune.item_ids().into_iter().collect();
        assert!(b.domain.item_ids().iter().all(|id| !ft.contains(id)));
        assert!(b.generic.item_ids().iter().all(|id| !ft.contains(id)));
        assert_eq!(b.generic.len(), b.domain.len());
        for r in &b.generic.records {
            for tok in r.response_text.split_whitespace() {
                let key = super::super::lookup_key(tok);
                assert!(!b.science_lexicon.contains(&key) || plan.misspelling_rate > 0.0, "{key}");
            }
        }
        let mean: f64 = (0..27).map(|i| plan.mean_words(i, 27)).sum::<f64>() / 27.0;
        assert!((mean - 20.0).abs() < 1e-9);
    }

    #[test]
    fn colliding_ids_rejected() {
        let mut cfg = KvConfig::new();
        cfg.set("gen.finetune_ids", "A1,B2");
        cfg.set("gen.pretrain_ids", "C3,A1");
        assert!(CorpusPlan::from_config(&cfg).is_err());
        cfg.set("gen.finetune_ids", "A1,A1");
        cfg.set("gen.pretrain_ids", "C3");
        assert!(CorpusPlan::from_config(&cfg).is_err());
    }

    #[test]
    fn lexicon_covers_generator_output() {
        let plan = CorpusPlan {
            responses_per_item: 20,
            pretrain_responses_per_item: 10,
            misspelling_rate: 0.0,
            ..CorpusPlan::default()
        };
        let b = plan.build(4).unwrap();
        for ds in [&b.domain, &b.generic, &b.finetune] {
            for r in &ds.records {
                for tok in r.task_text.split_whitespace().chain(r.response_text.split_whitespace()) {
                    assert!(b.lexicon.contains(&super::super::lookup_key(tok)), "{tok}");
                }
            }
        }
    }
}
