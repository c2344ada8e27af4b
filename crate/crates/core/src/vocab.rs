use std::collections::HashMap;

use thiserror::Error;

use crate::dataset::PreprocessedRecord;
use crate::diff::{is_diff_tag, DIFF_TAGS};
use crate::lexer::lex_comment;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const SEP: &str = "<sep>";

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const SEP_ID: u32 = 2;

/// Number of reserved ids: padding, unknown, separator and the nine diff tags.
pub const RESERVED_LEN: usize = 3 + DIFF_TAGS.len();

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("min_count must be at least 1")]
    ZeroMinCount,
    #[error("reserved token block is missing or out of order at id {0}")]
    BadReservedBlock(usize),
    #[error("duplicate vocabulary entry '{0}'")]
    Duplicate(String),
    #[error("vocabulary entry {0:?} is empty or contains whitespace")]
    BadEntry(String),
}

fn reserved() -> impl Iterator<Item = &'static str> {
    [PAD, UNK, SEP].into_iter().chain(DIFF_TAGS)
}

/// Token to id map. Ids `0..RESERVED_LEN` are the reserved block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn reserved_only() -> Self {
        Self::from_tokens(reserved().map(str::to_string).collect()).expect("reserved block is valid")
    }

    /// Rebuilds a vocabulary from its id-ordered token list.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, VocabError> {
        for (i, want) in reserved().enumerate() {
            if tokens.get(i).map(String::as_str) != Some(want) {
                return Err(VocabError::BadReservedBlock(i));
            }
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if tok.is_empty() || tok.chars().any(char::is_whitespace) {
                return Err(VocabError::BadEntry(tok.clone()));
            }
            if index.insert(tok.clone(), i as u32).is_some() {
                return Err(VocabError::Duplicate(tok.clone()));
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

    /// Id of `token`, or [`UNK_ID`] when it is not in the vocabulary.
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Builds a vocabulary over comment and diff tokens that occur at least
/// `min_count` times. Ordering: reserved block, then descending count, ties
/// broken lexicographically.
pub fn build_vocab(corpus: &[PreprocessedRecord], min_count: usize) -> Result<Vocabulary, VocabError> {
    if min_count == 0 {
        return Err(VocabError::ZeroMinCount);
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for rec in corpus {
        for tok in lex_comment(&rec.record.comment).iter() {
            *counts.entry(tok.text().to_string()).or_default() += 1;
        }
        for word in rec.tagged_diff.split_whitespace().filter(|w| !is_diff_tag(w)) {
            *counts.entry(word.to_string()).or_default() += 1;
        }
    }
    let reserved: Vec<&str> = reserved().collect();
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(tok, n)| *n >= min_count && !reserved.contains(&tok.as_str()))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let tokens = reserved
        .iter()
        .map(|s| s.to_string())
        .chain(kept.into_iter().map(|(t, _)| t))
        .collect();
    Vocabulary::from_tokens(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{CciRecord, CommentType, PreprocessedRecord};

    fn rec(comment: &str, old: &str, new: &str) -> PreprocessedRecord {
        PreprocessedRecord::from_record(CciRecord {
            id: "x".into(),
            comment_type: CommentType::Summary,
            comment: comment.into(),
            old_code: old.into(),
            new_code: new.into(),
            label: 0,
        })
    }

    #[test]
    fn reserved_block_is_fixed() {
        let v = Vocabulary::reserved_only();
        assert_eq!(v.len(), RESERVED_LEN);
        assert_eq!(v.id(PAD), PAD_ID);
        assert_eq!(v.id(UNK), UNK_ID);
        assert_eq!(v.id(SEP), SEP_ID);
        assert_eq!(v.id("<Keep>"), 3);
        assert_eq!(v.id("<EndReplace>"), 11);
        assert_eq!(v.id("never-seen"), UNK_ID);
    }

    #[test]
    fn min_count_filters() {
        // "foo" appears once in the comment and twice in the Keep span.
        let corpus = [rec("foo", "foo ;", "foo ;")];
        let v = build_vocab(&corpus, 2).unwrap();
        assert!(v.contains("foo"));
        let corpus = [rec("bar bar", "bar bar", "bar bar")];
        let v = build_vocab(&corpus, 5).unwrap();
        assert_eq!(v.id("bar"), UNK_ID);
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = build_vocab(&[rec("zeta alpha", "q", "q")], 1).unwrap();
        // counts: zeta 1, alpha 1, q 1 -> alphabetical after the reserved block
        assert_eq!(&v.tokens()[RESERVED_LEN..], ["alpha", "q", "zeta"]);
        let v = build_vocab(&[rec("zeta zeta alpha", "q", "q")], 1).unwrap();
        assert_eq!(&v.tokens()[RESERVED_LEN..], ["zeta", "alpha", "q"]);
    }

    #[test]
    fn empty_corpus_and_zero_min_count() {
        assert_eq!(build_vocab(&[], 1).unwrap(), Vocabulary::reserved_only());
        assert_eq!(build_vocab(&[], 0).unwrap_err(), VocabError::ZeroMinCount);
    }

    #[test]
    fn from_tokens_validates() {
        let mut toks: Vec<String> = Vocabulary::reserved_only().tokens().to_vec();
        toks.push("a".into());
        assert!(Vocabulary::from_tokens(toks.clone()).is_ok());
        toks.push("a".into());
        assert!(matches!(Vocabulary::from_tokens(toks), Err(VocabError::Duplicate(_))));
        assert!(matches!(Vocabulary::from_tokens(vec!["x".into()]), Err(VocabError::BadReservedBlock(0))));
    }
}
