use super::lexicon::{lookup_key, Lexicon};
use crate::error::{Error, Result};

/// Mean number of whitespace-separated words per response.
pub fn avg_response_length<S: AsRef<str>>(responses: &[S]) -> Result<f64> {
    if responses.is_empty() {
        return Err(Error::data("average response length of an empty list"));
    }
    let total: usize = responses
        .iter()
        .map(|r| r.as_ref().split_whitespace().count())
        .sum();
    Ok(total as f64 / responses.len() as f64)
}

/// Mean number of science-lexicon tokens per response.
pub fn scientific_word_rate<S: AsRef<str>>(responses: &[S], science: &Lexicon) -> Result<f64> {
    if responses.is_empty() {
        return Err(Error::data("scientific word rate of an empty list"));
    }
    let total: usize = responses
        .iter()
        .map(|r| {
            r.as_ref()
                .split_whitespace()
                .filter(|tok| science.contains(&lookup_key(tok)))
                .count()
        })
        .sum();
    Ok(total as f64 / responses.len() as f64)
}
