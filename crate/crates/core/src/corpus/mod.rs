//! Lexical translation counting: parallel corpus in, translation count tables out.
//!
//! A sentence pair is tokenized, each token is mapped to its representative
//! word, token links come either from a stored alignment or from the Dice
//! co-occurrence heuristic, and every link bumps `c(u, v)`.

mod align;
mod count;
mod lemma;
mod reader;
mod table;
mod tokenize;

pub use align::{align, AlignMethod, DiceStats, Link};
#[doc(hidden)]
pub use count::count_with;
pub use count::{count_translations, CountOptions, CountOutput, ProvenanceIndex};
pub use lemma::{LemmaMap, WordList};
pub use reader::{parse_pharaoh, read_corpus, write_pharaoh};
pub use table::TranslationCountTable;
pub use tokenize::{tokenize, TokenizerConfig, TokenizerMode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{Lang, LangError};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("sentence pair {id:?} has no stored alignment")]
    MissingAlignment { id: String },
    #[error("sentence pair {id:?}: link {source_index}-{target_index} outside {source_len}x{target_len} tokens")]
    AlignmentOutOfRange {
        id: String,
        source_index: usize,
        target_index: usize,
        source_len: usize,
        target_len: usize,
    },
    #[error("dice alignment needs corpus co-occurrence statistics")]
    MissingCooccurrenceStats,
    #[error("sentence pair {id:?} is {found_source}-{found_target}, table is {expected_source}-{expected_target}")]
    MixedLanguagePair {
        id: String,
        expected_source: Lang,
        expected_target: Lang,
        found_source: Lang,
        found_target: Lang,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("lemma entry {lang}:{surface} -> {representative} is not idempotent")]
    NonIdempotentLemma {
        lang: Lang,
        surface: String,
        representative: String,
    },
    #[error("invalid alignment method {0:?}")]
    InvalidMethod(String),
    #[error("table invariant violated: {0}")]
    InvalidTable(String),
    #[error(transparent)]
    Lang(#[from] LangError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One translated sentence pair from a bilingual corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: String,
    pub source_lang: Lang,
    pub target_lang: Lang,
    pub source_text: String,
    pub target_text: String,
    /// Pharaoh-style `(source index, target index)` links over the tokenized sentences.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<Vec<Link>>,
    /// Optional pass-through tag column (e.g. a part-of-speech layer). Not interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl SentencePair {
    pub fn new(
        id: impl Into<String>,
        source_lang: Lang,
        target_lang: Lang,
        source_text: impl Into<String>,
        target_text: impl Into<String>,
    ) -> Result<Self, CorpusError> {
        if source_lang == target_lang {
            return Err(LangError::SameLanguage(source_lang).into());
        }
        Ok(SentencePair {
            id: id.into(),
            source_lang,
            target_lang,
            source_text: source_text.into(),
            target_text: target_text.into(),
            alignment: None,
            tag: None,
        })
    }

    pub fn with_alignment(mut self, links: Vec<Link>) -> Self {
        self.alignment = Some(links);
        self
    }
}
