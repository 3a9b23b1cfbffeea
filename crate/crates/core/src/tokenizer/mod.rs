//! Subword vocabulary and paired-segment encoding.

mod encode;
mod vocab;

pub use encode::{encode_ids_pair, encode_pair, encode_text, tokenize_word, TokenizedPair};
pub use vocab::{
    basic_tokenize, build_vocab, Vocab, CLS, CLS_ID, CONTINUATION, MASK, MASK_ID, NUM_RESERVED,
    PAD, PAD_ID, SEP, SEP_ID, UNK, UNK_ID,
};
