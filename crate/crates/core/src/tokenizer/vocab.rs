use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const CLS_ID: u32 = 2;
pub const SEP_ID: u32 = 3;
pub const MASK_ID: u32 = 4;

pub const NUM_RESERVED: usize = 5;
const RESERVED: [&str; NUM_RESERVED] = [PAD, UNK, CLS, SEP, MASK];

pub const CONTINUATION: &str = "##";

/// Splits text into lowercase NFC words; every punctuation character is its own word.
pub fn basic_tokenize(text: &str) -> Vec<String> {
    let normalized: String = text.nfc().flat_map(char::to_lowercase).collect();
    let mut words = Vec::new();
    for chunk in normalized.split_whitespace() {
        let mut current = String::new();
        for c in chunk.chars() {
            if c.is_alphanumeric() {
                current.push(c);
            } else {
                if !current.is_empty() {
                    words.push(std::mem::take(&mut current));
                }
                words.push(c.to_string());
            }
        }
        if !current.is_empty() {
            words.push(current);
        }
    }
    words
}

/// Subword vocabulary with reserved special tokens at ids 0..5.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocab {
    /// Builds a vocabulary from a token list whose first five entries are the reserved tokens.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        for (i, r) in RESERVED.iter().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(*r) {
                return Err(Error::data(format!("vocab id {i} must be {r}")));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::data(format!("empty vocab token at id {i}")));
            }
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::data(format!("duplicate vocab token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn is_special(id: u32) -> bool {
        (id as usize) < NUM_RESERVED
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            out.push_str(t);
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    /// Reads a vocab file: one token per line, the first line is id 0.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tokens(text.lines().map(String::from).collect())
    }
}

/// Learns a subword vocabulary by repeatedly merging the most frequent
/// adjacent symbol pair (ties go to the lexicographically smallest pair).
///
/// The base alphabet holds every word-initial character and every `##`
/// continuation character seen, so the minimum size is `5 + |alphabet|`.
/// Building stops at `target_size` or when no pair is left to merge.
pub fn build_vocab<S: AsRef<str>>(corpus: &[S], target_size: usize) -> Result<Vocab> {
    let mut word_counts: BTreeMap<String, u64> = BTreeMap::new();
    for text in corpus {
        for w in basic_tokenize(text.as_ref()) {
            *word_counts.entry(w).or_default() += 1;
        }
    }
    if word_counts.is_empty() {
        return Err(Error::data("cannot build a vocabulary from an empty corpus"));
    }

    // symbol interning
    let mut symbols: Vec<String> = Vec::new();
    let mut symbol_ids: HashMap<String, u32> = HashMap::new();
    let mut intern = |s: String, symbols: &mut Vec<String>| -> u32 {
        *symbol_ids.entry(s.clone()).or_insert_with(|| {
            symbols.push(s);
            (symbols.len() - 1) as u32
        })
    };

    let mut words: Vec<(Vec<u32>, u64)> = Vec::with_capacity(word_counts.len());
    let mut alphabet: BTreeSet<String> = BTreeSet::new();
    for (w, &count) in &word_counts {
        let pieces: Vec<u32> = w
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let s = if i == 0 {
                    c.to_string()
                } else {
                    format!("{CONTINUATION}{c}")
                };
                alphabet.insert(s.clone());
                intern(s, &mut symbols)
            })
            .collect();
        words.push((pieces, count));
    }

    let required = NUM_RESERVED + alphabet.len();
    if target_size < required {
        return Err(Error::config(format!(
            "vocab target size {target_size} is below the {required} tokens needed for the character alphabet"
        )));
    }

    let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
    tokens.extend(alphabet.iter().cloned());
    let mut in_vocab: BTreeSet<String> = tokens.iter().cloned().collect();

    while tokens.len() < target_size {
        let mut pairs: HashMap<(u32, u32), u64> = HashMap::new();
        for (pieces, count) in &words {
            for win in pieces.windows(2) {
                *pairs.entry((win[0], win[1])).or_default() += count;
            }
        }
        let Some(best_count) = pairs.values().copied().max() else {
            break;
        };
        let best = pairs
            .iter()
            .filter(|(_, &c)| c == best_count)
            .map(|(&p, _)| p)
            .min_by(|a, b| {
                (symbols[a.0 as usize].as_str(), symbols[a.1 as usize].as_str())
                    .cmp(&(symbols[b.0 as usize].as_str(), symbols[b.1 as usize].as_str()))
            })
            .expect("non-empty pair set");

        let left = &symbols[best.0 as usize];
        let right = &symbols[best.1 as usize];
        let merged = format!("{left}{}", right.strip_prefix(CONTINUATION).unwrap_or(right));
        let merged_id = intern(merged.clone(), &mut symbols);
        for (pieces, _) in words.iter_mut() {
            if pieces.len() < 2 {
                continue;
            }
            let mut out = Vec::with_capacity(pieces.len());
            let mut i = 0;
            while i < pieces.len() {
                if i + 1 < pieces.len() && pieces[i] == best.0 && pieces[i + 1] == best.1 {
                    out.push(merged_id);
                    i += 2;
                } else {
                    out.push(pieces[i]);
                    i += 1;
                }
            }
            *pieces = out;
        }
        if in_vocab.insert(merged.clone()) {
            tokens.push(merged);
        }
    }
    Vocab::from_tokens(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_tokenize_splits_punctuation() {
        assert_eq!(
            basic_tokenize("Die Wärme, steigt!"),
            vec!["die", "wärme", ",", "steigt", "!"]
        );
        assert_eq!(basic_tokenize("wa\u{308}rme"), vec!["wärme"]);
    }

    #[test]
    fn merges_most_frequent_pair() {
        let v = build_vocab(&["ab ab ab"], 50).unwrap();
        assert!(v.contains("ab"));
        assert_eq!(v.id(PAD), Some(PAD_ID));
        assert_eq!(v.id(MASK), Some(MASK_ID));
        // alphabet a, ##b then the merge
        assert_eq!(&v.tokens()[NUM_RESERVED..], &["##b", "a", "ab"]);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        // (a,##b) and (c,##d) both occur twice; (a,##b) sorts first
        let v = build_vocab(&["ab cd ab cd"], NUM_RESERVED + 5).unwrap();
        assert_eq!(v.tokens().last().unwrap(), "ab");
    }

    #[test]
    fn target_below_alphabet() {
        assert!(build_vocab(&["abc"], NUM_RESERVED + 2).is_err());
        assert!(build_vocab(&["abc"], NUM_RESERVED + 3).is_ok());
        assert!(build_vocab::<&str>(&[], 100).is_err());
        assert!(build_vocab(&["  "], 100).is_err());
    }

    #[test]
    fn deterministic() {
        let corpus = ["die wärme steigt", "der druck sinkt weil die wärme fehlt"];
        assert_eq!(build_vocab(&corpus, 60).unwrap(), build_vocab(&corpus, 60).unwrap());
    }

    #[test]
    fn stops_when_fully_merged() {
        let v = build_vocab(&["ab"], 1000).unwrap();
        assert_eq!(v.len(), NUM_RESERVED + 3);
    }

    #[test]
    fn file_round_trip_and_validation() {
        let v = build_vocab(&["wasser stoff wasserstoff"], 40).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        v.save(&p).unwrap();
        assert_eq!(Vocab::load(&p).unwrap(), v);
        assert!(Vocab::from_tokens(vec!["[UNK]".into()]).is_err());
        let mut dup: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        dup.push("a".into());
        dup.push("a".into());
        assert!(Vocab::from_tokens(dup).is_err());
    }
}
