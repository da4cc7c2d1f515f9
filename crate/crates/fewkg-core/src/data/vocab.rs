//! Word vocabulary and description tokenization.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

pub const PAD_ID: u32 = 0;
pub const OOV_ID: u32 = 1;

/// Dense word-to-id mapping. Ids 0 and 1 are reserved for padding and
/// out-of-vocabulary words; real words start at 2, assigned in sorted order
/// so construction is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    token_to_id: BTreeMap<String, u32>,
}

impl Vocabulary {
    /// Builds from every word occurring in `texts`, normalized the same way
    /// tokenization normalizes.
    pub fn from_texts<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut words = BTreeSet::new();
        for text in texts {
            for w in normalized_words(text) {
                words.insert(w);
            }
        }
        let token_to_id = words
            .into_iter()
            .enumerate()
            .map(|(i, w)| (w, i as u32 + 2))
            .collect();
        Self { token_to_id }
    }

    /// Total id count including PAD and OOV.
    pub fn size(&self) -> usize {
        self.token_to_id.len() + 2
    }

    /// Id for a normalized word, or OOV.
    pub fn lookup(&self, word: &str) -> u32 {
        self.token_to_id.get(word).copied().unwrap_or(OOV_ID)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.token_to_id.contains_key(word)
    }
}

/// A tokenized description. Stored at its natural length (at least
/// `min_len` from tokenization); encoders pad further as their pooling
/// depth requires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Description {
    token_ids: Vec<u32>,
}

impl Description {
    pub fn new(token_ids: Vec<u32>) -> Self {
        assert!(!token_ids.is_empty(), "descriptions are never empty");
        Self { token_ids }
    }

    pub fn token_ids(&self) -> &[u32] {
        &self.token_ids
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Lowercases, splits on whitespace, and strips leading/trailing
/// non-alphanumeric characters from each word. Words that become empty are
/// dropped.
fn normalized_words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace().filter_map(|raw| {
        let w: String = raw
            .trim_matches(|c: char| !c.is_alphanumeric())
            .chars()
            .flat_map(char::to_lowercase)
            .collect();
        (!w.is_empty()).then_some(w)
    })
}

/// Maps text to ids, truncates to `max_len`, and pads with PAD up to
/// `min_len`. Unknown words map to OOV; empty text yields all-PAD output of
/// length `min_len`.
pub fn tokenize(text: &str, vocab: &Vocabulary, max_len: usize, min_len: usize) -> Description {
    assert!(max_len >= 1 && min_len >= 1, "tokenize lengths must be positive");
    let mut ids: Vec<u32> = normalized_words(text)
        .take(max_len)
        .map(|w| vocab.lookup(&w))
        .collect();
    while ids.len() < min_len {
        ids.push(PAD_ID);
    }
    Description::new(ids)
}
