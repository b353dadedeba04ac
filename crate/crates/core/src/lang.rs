//! Language codes, word identities and language-pair sets.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LangError {
    #[error("invalid language code {0:?}")]
    InvalidCode(String),
    #[error("language pair ({0}, {0}) pairs a language with itself")]
    SameLanguage(Lang),
    #[error("malformed language pair {0:?}, expected e.g. \"en-ja\"")]
    MalformedPair(String),
}

/// A language code such as `en` or `ja`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Lang(String);

impl Lang {
    pub fn new(code: impl Into<String>) -> Result<Self, LangError> {
        let code = code.into();
        let valid = !code.is_empty() && code.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        if valid {
            Ok(Lang(code))
        } else {
            Err(LangError::InvalidCode(code))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for Lang {
    type Error = LangError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Lang::new(value)
    }
}

impl From<Lang> for String {
    fn from(value: Lang) -> Self {
        value.0
    }
}

impl FromStr for Lang {
    type Err = LangError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Lang::new(s)
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A node of the word network: a representative word within one language.
///
/// Ordering is `(lang, word)`, which is also the tie-break order used
/// wherever the explorer has to choose between equally good words.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WordId {
    pub lang: Lang,
    pub word: String,
}

impl WordId {
    pub fn new(lang: Lang, word: impl Into<String>) -> Self {
        WordId {
            lang,
            word: word.into(),
        }
    }

    /// Parses `lang:word`.
    pub fn parse(s: &str) -> Result<Self, LangError> {
        let (lang, word) = s
            .split_once(':')
            .ok_or_else(|| LangError::MalformedPair(s.to_string()))?;
        Ok(WordId::new(Lang::new(lang)?, word))
    }
}

impl fmt::Display for WordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lang, self.word)
    }
}

/// An unordered pair of distinct languages, stored with `first < second`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "(Lang, Lang)", into = "(Lang, Lang)")]
pub struct LangPair {
    first: Lang,
    second: Lang,
}

impl LangPair {
    pub fn new(a: Lang, b: Lang) -> Result<Self, LangError> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Ok(LangPair {
                first: a,
                second: b,
            }),
            std::cmp::Ordering::Greater => Ok(LangPair {
                first: b,
                second: a,
            }),
            std::cmp::Ordering::Equal => Err(LangError::SameLanguage(a)),
        }
    }

    pub fn first(&self) -> &Lang {
        &self.first
    }

    pub fn second(&self) -> &Lang {
        &self.second
    }

    pub fn contains(&self, lang: &Lang) -> bool {
        &self.first == lang || &self.second == lang
    }

    /// The other language of the pair, if `lang` belongs to it.
    pub fn other(&self, lang: &Lang) -> Option<&Lang> {
        if &self.first == lang {
            Some(&self.second)
        } else if &self.second == lang {
            Some(&self.first)
        } else {
            None
        }
    }
}

impl TryFrom<(Lang, Lang)> for LangPair {
    type Error = LangError;
    fn try_from((a, b): (Lang, Lang)) -> Result<Self, Self::Error> {
        LangPair::new(a, b)
    }
}

impl From<LangPair> for (Lang, Lang) {
    fn from(p: LangPair) -> Self {
        (p.first, p.second)
    }
}

impl fmt::Display for LangPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.first, self.second)
    }
}

/// Parses an ordered `l1-l2` pair, e.g. `en-ja`.
pub fn parse_ordered_pair(s: &str) -> Result<(Lang, Lang), LangError> {
    let (a, b) = s
        .split_once('-')
        .ok_or_else(|| LangError::MalformedPair(s.to_string()))?;
    let (a, b) = (Lang::new(a)?, Lang::new(b)?);
    if a == b {
        return Err(LangError::SameLanguage(a));
    }
    Ok((a, b))
}

impl FromStr for LangPair {
    type Err = LangError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (a, b) = parse_ordered_pair(s)?;
        LangPair::new(a, b)
    }
}

/// The set of language pairs a session draws translation edges from.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PairSpec {
    pairs: BTreeSet<LangPair>,
}

impl PairSpec {
    pub fn new(pairs: impl IntoIterator<Item = LangPair>) -> Self {
        PairSpec {
            pairs: pairs.into_iter().collect(),
        }
    }

    /// Parses a comma-separated list such as `en-ja,en-fr`.
    pub fn parse(s: &str) -> Result<Self, LangError> {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| p.trim().parse())
            .collect::<Result<BTreeSet<_>, _>>()
            .map(|pairs| PairSpec { pairs })
    }

    pub fn contains(&self, a: &Lang, b: &Lang) -> bool {
        match LangPair::new(a.clone(), b.clone()) {
            Ok(p) => self.pairs.contains(&p),
            Err(_) => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &LangPair> {
        self.pairs.iter()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Languages paired with `lang` in this set.
    pub fn partners<'a>(&'a self, lang: &'a Lang) -> impl Iterator<Item = &'a Lang> + 'a {
        self.pairs.iter().filter_map(move |p| p.other(lang))
    }
}

impl fmt::Display for PairSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.pairs.iter().map(|p| p.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> Lang {
        Lang::new(s).unwrap()
    }

    #[test]
    fn pair_is_unordered() {
        assert_eq!(
            LangPair::new(l("ja"), l("en")).unwrap(),
            LangPair::new(l("en"), l("ja")).unwrap()
        );
        assert!(LangPair::new(l("en"), l("en")).is_err());
    }

    #[test]
    fn pair_spec_dedupes_reversed_pairs() {
        let spec = PairSpec::parse("en-ja,ja-en,en-fr").unwrap();
        assert_eq!(spec.len(), 2);
        assert!(spec.contains(&l("ja"), &l("en")));
        assert!(!spec.contains(&l("ja"), &l("fr")));
        let mut partners: Vec<_> = spec.partners(&l("en")).cloned().collect();
        partners.sort();
        assert_eq!(partners, vec![l("fr"), l("ja")]);
    }

    #[test]
    fn rejects_bad_codes() {
        assert!(Lang::new("").is_err());
        assert!(Lang::new("e n").is_err());
        assert!("en".parse::<LangPair>().is_err());
        assert!("en-en".parse::<LangPair>().is_err());
    }

    #[test]
    fn word_id_parse() {
        let w = WordId::parse("en:it's").unwrap();
        assert_eq!(w.lang, l("en"));
        assert_eq!(w.word, "it's");
        assert_eq!(w.to_string(), "en:it's");
    }
}
