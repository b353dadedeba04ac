use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TokenizerMode {
    /// Split on Unicode whitespace. Suits pre-segmented corpora.
    #[default]
    Whitespace,
    /// UAX #29 word boundaries.
    UnicodeWordBoundary,
}

impl std::str::FromStr for TokenizerMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "whitespace" => Ok(TokenizerMode::Whitespace),
            "unicode" | "unicode-word-boundary" => Ok(TokenizerMode::UnicodeWordBoundary),
            other => Err(format!("unknown tokenizer mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    pub mode: TokenizerMode,
    pub lowercase: bool,
    pub strip_punctuation: bool,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        TokenizerConfig {
            mode: TokenizerMode::Whitespace,
            lowercase: true,
            strip_punctuation: false,
        }
    }
}

/// Splits `text` into tokens.
///
/// Boundary rules:
/// - whitespace mode splits on whitespace; with `strip_punctuation` every
///   token loses leading and trailing non-alphanumeric characters and tokens
///   left empty are dropped.
/// - unicode mode follows UAX #29. With `strip_punctuation` only segments
///   containing an alphanumeric character are kept (so `it's` survives as one
///   token); without it every non-whitespace segment is a token.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Vec<String> {
    let raw: Vec<&str> = match (config.mode, config.strip_punctuation) {
        (TokenizerMode::Whitespace, false) => text.split_whitespace().collect(),
        (TokenizerMode::Whitespace, true) => text
            .split_whitespace()
            .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
            .filter(|t| !t.is_empty())
            .collect(),
        (TokenizerMode::UnicodeWordBoundary, true) => text
            .unicode_words()
            .flat_map(str::split_whitespace)
            .collect(),
        (TokenizerMode::UnicodeWordBoundary, false) => text
            .split_word_bounds()
            .flat_map(str::split_whitespace)
            .collect(),
    };
    raw.into_iter()
        .map(|t| {
            if config.lowercase {
                t.to_lowercase()
            } else {
                t.to_string()
            }
        })
        .collect()
}
