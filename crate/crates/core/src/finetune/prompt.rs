use crate::corpus::ScoredResponse;
use crate::error::{Error, Result};

/// Ordered quality names; `K` labels take evenly spaced entries.
pub const LABEL_NAMES: [&str; 5] = ["poor", "fair", "good", "excellent", "extraordinary"];

pub const DEFAULT_DIRECTIVE: &str = "Score this answer: {response}";
pub const DEFAULT_CONTEXT: &str = "Task: {task}";
pub const DEFAULT_IN_CONTEXT_EXAMPLES: usize = 2;

/// `k` evenly spaced names from `names` (first and last always included).
pub fn spaced_label_names(names: &[String], k: usize) -> Result<Vec<String>> {
    if k < 2 {
        return Err(Error::config(format!("need at least 2 labels, got {k}")));
    }
    if names.len() < k {
        return Err(Error::config(format!(
            "{k} labels but only {} label names available",
            names.len()
        )));
    }
    let last = (names.len() - 1) as f64;
    Ok((0..k)
        .map(|i| {
            let idx = (i as f64 * last / (k - 1) as f64).round() as usize;
            names[idx].clone()
        })
        .collect())
}

/// Prompt templates and the label vocabulary for one item.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptSpec {
    pub directive_template: String,
    pub context_template: String,
    pub num_in_context_examples: usize,
    pub label_names: Vec<String>,
}

impl PromptSpec {
    /// Default templates with names spaced over [`LABEL_NAMES`].
    pub fn for_labels(k: usize) -> Result<Self> {
        let names: Vec<String> = LABEL_NAMES.iter().map(|s| s.to_string()).collect();
        Self::new(DEFAULT_DIRECTIVE, DEFAULT_CONTEXT, DEFAULT_IN_CONTEXT_EXAMPLES, spaced_label_names(&names, k)?)
    }

    pub fn new(
        directive_template: &str,
        context_template: &str,
        num_in_context_examples: usize,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let spec = Self {
            directive_template: directive_template.to_string(),
            context_template: context_template.to_string(),
            num_in_context_examples,
            label_names,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.directive_template.matches("{response}").count() != 1 {
            return Err(Error::config("directive template must contain {response} exactly once"));
        }
        if self.context_template.matches("{task}").count() != 1 {
            return Err(Error::config("context template must contain {task} exactly once"));
        }
        if self.label_names.len() < 2 {
            return Err(Error::config("need at least 2 label names"));
        }
        let mut sorted = self.label_names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != self.label_names.len() {
            return Err(Error::config("label names must be distinct"));
        }
        Ok(())
    }

    pub fn num_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn label_name(&self, score: usize) -> Result<&str> {
        self.label_names
            .get(score)
            .map(String::as_str)
            .ok_or_else(|| Error::data(format!("score {score} has no label name")))
    }
}

/// Builds the (task side, response side) text pair for `record`.
///
/// The task side is the filled context template followed by one
/// `example: <response>, score: <label>` clause per context example.
pub fn assemble_input(
    record: &ScoredResponse,
    spec: &PromptSpec,
    context_examples: &[(String, String)],
) -> Result<(String, String)> {
    let mut task_side = spec.context_template.replace("{task}", &record.task_text);
    for (response, label) in context_examples {
        if !spec.label_names.iter().any(|n| n == label) {
            return Err(Error::data(format!("context example label {label:?} is not a label name")));
        }
        if response == &record.response_text {
            return Err(Error::data(format!(
                "record of item {} appears among its own context examples",
                record.item_id
            )));
        }
        task_side.push_str(&format!(" example: {response}, score: {label}"));
    }
    let response_side = spec.directive_template.replace("{response}", &record.response_text);
    Ok((task_side, response_side))
}
