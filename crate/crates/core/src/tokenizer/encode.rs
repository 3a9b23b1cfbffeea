use super::vocab::{basic_tokenize, Vocab, CLS_ID, CONTINUATION, PAD_ID, SEP_ID, UNK, UNK_ID};

/// Greedy longest-match-first segmentation of one word.
///
/// Returns `["[UNK]"]` when some suffix of the word cannot be matched.
pub fn tokenize_word(word: &str, vocab: &Vocab) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut candidate = String::new();
    while start < chars.len() {
        let mut found = None;
        for end in (start + 1..=chars.len()).rev() {
            candidate.clear();
            if start > 0 {
                candidate.push_str(CONTINUATION);
            }
            candidate.extend(&chars[start..end]);
            if vocab.contains(&candidate) {
                found = Some((end, candidate.clone()));
                break;
            }
        }
        match found {
            Some((end, piece)) => {
                pieces.push(piece);
                start = end;
            }
            None => return vec![UNK.to_string()],
        }
    }
    pieces
}

/// Token ids of arbitrary text (basic tokenisation then subword segmentation).
pub fn encode_text(text: &str, vocab: &Vocab) -> Vec<u32> {
    let mut ids = Vec::new();
    for word in basic_tokenize(text) {
        for piece in tokenize_word(&word, vocab) {
            ids.push(vocab.id(&piece).unwrap_or(UNK_ID));
        }
    }
    ids
}

/// `[CLS] task [SEP] response [SEP]` padded to a fixed length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedPair {
    pub token_ids: Vec<u32>,
    /// 0 for `[CLS]`, task and first `[SEP]`; 1 for response and final `[SEP]`; 0 on padding.
    pub segment_ids: Vec<u8>,
    pub attention_mask: Vec<u8>,
    pub truncated: bool,
}

impl TokenizedPair {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    /// Number of non-padding positions.
    pub fn real_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }

    /// Copy without trailing padding.
    pub fn trimmed(&self) -> TokenizedPair {
        let n = self.real_len();
        TokenizedPair {
            token_ids: self.token_ids[..n].to_vec(),
            segment_ids: self.segment_ids[..n].to_vec(),
            attention_mask: self.attention_mask[..n].to_vec(),
            truncated: self.truncated,
        }
    }
}

/// Layout from pre-tokenised spans; truncates the response first, then the task.
///
/// `max_len` must be at least 3 (room for the special tokens).
pub fn encode_ids_pair(task: &[u32], response: &[u32], max_len: usize) -> TokenizedPair {
    assert!(max_len >= 3, "max_len must leave room for [CLS] and two [SEP]");
    let budget = max_len - 3;
    let truncated = task.len() + response.len() > budget;
    let resp_len = response.len().min(budget.saturating_sub(task.len()));
    let task_len = task.len().min(budget - resp_len);

    let mut token_ids = Vec::with_capacity(max_len);
    let mut segment_ids = Vec::with_capacity(max_len);
    token_ids.push(CLS_ID);
    token_ids.extend_from_slice(&task[..task_len]);
    token_ids.push(SEP_ID);
    segment_ids.resize(token_ids.len(), 0);
    token_ids.extend_from_slice(&response[..resp_len]);
    token_ids.push(SEP_ID);
    segment_ids.resize(token_ids.len(), 1);
    let mut attention_mask = vec![1u8; token_ids.len()];

    token_ids.resize(max_len, PAD_ID);
    segment_ids.resize(max_len, 0);
    attention_mask.resize(max_len, 0);
    TokenizedPair {
        token_ids,
        segment_ids,
        attention_mask,
        truncated,
    }
}

/// Encodes a task/response pair into exactly `max_len` positions.
pub fn encode_pair(task: &str, response: &str, vocab: &Vocab, max_len: usize) -> TokenizedPair {
    assert!(max_len >= 8, "max_len must be at least 8");
    encode_ids_pair(&encode_text(task, vocab), &encode_text(response, vocab), max_len)
}
