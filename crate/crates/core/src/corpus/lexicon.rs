use std::collections::BTreeSet;
use std::path::Path;

use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// NFC-normalised, lowercased form used for every lexicon lookup.
pub fn normalize_word(word: &str) -> String {
    word.nfc().flat_map(char::to_lowercase).collect()
}

/// Splits a whitespace token into leading punctuation, core, trailing punctuation.
pub(crate) fn split_punctuation(token: &str) -> (&str, &str, &str) {
    let start = token
        .char_indices()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, _)| i)
        .unwrap_or(token.len());
    let end = token
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_alphanumeric())
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(start);
    (&token[..start], &token[start..end], &token[end..])
}

/// Lookup key of a raw text token: punctuation stripped, NFC, lowercase.
pub fn lookup_key(token: &str) -> String {
    normalize_word(split_punctuation(token).1)
}

/// A set of normalised words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    words: BTreeSet<String>,
}

impl Lexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let words = words
            .into_iter()
            .map(|w| normalize_word(w.as_ref().trim()))
            .filter(|w| !w.is_empty())
            .collect();
        Self { words }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(text.lines()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::new();
        for w in &self.words {
            out.push_str(w);
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn contains(&self, normalized: &str) -> bool {
        self.words.contains(normalized)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.words.iter().map(String::as_str)
    }
}

/// True when `a` and `b` are exactly one insertion, deletion or substitution apart.
pub(crate) fn one_edit_apart(a: &[char], b: &[char]) -> bool {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    match long.len() - short.len() {
        0 => short.iter().zip(long).filter(|(x, y)| x != y).count() == 1,
        1 => {
            let prefix = short.iter().zip(long).take_while(|(x, y)| x == y).count();
            short[prefix..] == long[prefix + 1..]
        }
        _ => false,
    }
}

fn correct_token(token: &str, lexicon: &Lexicon) -> Option<String> {
    let (lead, core, trail) = split_punctuation(token);
    if core.is_empty() {
        return None;
    }
    let key = normalize_word(core);
    if lexicon.contains(&key) {
        return None;
    }
    let key_chars: Vec<char> = key.chars().collect();
    let mut candidates = lexicon
        .iter()
        .filter(|w| one_edit_apart(&key_chars, &w.chars().collect::<Vec<_>>()));
    let unique = candidates.next()?;
    if candidates.next().is_some() {
        return None;
    }
    let mut replacement = String::with_capacity(token.len() + 2);
    replacement.push_str(lead);
    if core.chars().next().is_some_and(char::is_uppercase) {
        let mut chars = unique.chars();
        if let Some(first) = chars.next() {
            replacement.extend(first.to_uppercase());
            replacement.push_str(chars.as_str());
        }
    } else {
        replacement.push_str(unique);
    }
    replacement.push_str(trail);
    Some(replacement)
}

/// Replaces each out-of-lexicon token by its unique distance-1 lexicon neighbour.
///
/// Tokens with zero or several candidates are kept. Tokens are rejoined with
/// single spaces.
pub fn correct_spelling(text: &str, lexicon: &Lexicon) -> String {
    text.split_whitespace()
        .map(|tok| correct_token(tok, lexicon).unwrap_or_else(|| tok.to_string()))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Every string one Levenshtein edit away from `word` over `alphabet`.
    fn all_edits(word: &str, alphabet: &[char]) -> BTreeSet<String> {
        let chars: Vec<char> = word.chars().collect();
        let mut out = BTreeSet::new();
        for i in 0..chars.len() {
            let mut del = chars.clone();
            del.remove(i);
            out.insert(del.iter().collect());
            for &c in alphabet {
                if c != chars[i] {
                    let mut sub = chars.clone();
                    sub[i] = c;
                    out.insert(sub.iter().collect());
                }
            }
        }
        for i in 0..=chars.len() {
            for &c in alphabet {
                let mut ins = chars.clone();
                ins.insert(i, c);
                out.insert(ins.iter().collect());
            }
        }
        out.remove(word);
        out
    }

    fn demo() -> Lexicon {
        Lexicon::new(["wasser", "licht"])
    }

    #[test]
    fn in_lexicon_identity() {
        assert_eq!(correct_spelling("wasser", &demo()), "wasser");
    }

    #[test]
    fn unique_neighbour_replaced() {
        let lex = demo();
        let alphabet: Vec<char> = "abcdefghijklmnopqrstuvwxyzäöüß".chars().collect();
        let hits: Vec<_> = all_edits("waser", &alphabet)
            .into_iter()
            .filter(|e| lex.contains(e))
            .collect();
        assert_eq!(hits, vec!["wasser".to_string()]);
        assert_eq!(correct_spelling("waser", &lex), "wasser");
    }

    #[test]
    fn tie_left_alone() {
        let lex = Lexicon::new(["masse", "gasse"]);
        assert_eq!(correct_spelling("fasse", &lex), "fasse");
    }

    #[test]
    fn casing_and_punctuation_kept() {
        assert_eq!(correct_spelling("Waser, licht.", &demo()), "Wasser, licht.");
        assert_eq!(correct_spelling("(lihct)", &demo()), "(lihct)");
        assert_eq!(correct_spelling("(lich)", &demo()), "(licht)");
    }

    #[test]
    fn lexicon_normalises() {
        let lex = Lexicon::new(["Wärme", "wa\u{308}rme", "", "  "]);
        assert_eq!(lex.len(), 1);
        assert!(lex.contains("wärme"));
    }

    #[test]
    fn one_edit_matches_enumeration() {
        let alphabet: Vec<char> = "abc".chars().collect();
        let words = ["", "a", "ab", "abc", "cab", "bca", "aa"];
        for w in words {
            let edits = all_edits(w, &alphabet);
            for v in ["", "a", "b", "ab", "ba", "abc", "acb", "abcc", "aab", "cc", "bca"] {
                let wc: Vec<char> = w.chars().collect();
                let vc: Vec<char> = v.chars().collect();
                assert_eq!(one_edit_apart(&wc, &vc), edits.contains(v), "{w:?} vs {v:?}");
            }
        }
    }
}
