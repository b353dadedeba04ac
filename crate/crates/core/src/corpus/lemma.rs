use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use super::CorpusError;
use crate::lang::Lang;

/// Surface form -> representative word, per language.
///
/// Keys and values are stored lowercased. Every representative maps to
/// itself (or is absent as a key), so `normalize` is idempotent.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LemmaMap {
    entries: BTreeMap<Lang, BTreeMap<String, String>>,
}

impl LemmaMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I, S1, S2>(entries: I) -> Result<Self, CorpusError>
    where
        I: IntoIterator<Item = (Lang, S1, S2)>,
        S1: Into<String>,
        S2: Into<String>,
    {
        let mut map = LemmaMap::new();
        for (lang, surface, rep) in entries {
            map.entries
                .entry(lang)
                .or_default()
                .insert(surface.into().to_lowercase(), rep.into().to_lowercase());
        }
        map.check_idempotent()?;
        Ok(map)
    }

    /// Reads `lang \t surface \t representative` lines. Blank lines and `#` comments are skipped.
    pub fn read(reader: impl BufRead) -> Result<Self, CorpusError> {
        let mut rows = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(CorpusError::Malformed {
                    line: i + 1,
                    message: format!("expected 3 tab-separated columns, got {}", cols.len()),
                });
            }
            let lang = Lang::new(cols[0]).map_err(|e| CorpusError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            rows.push((lang, cols[1].to_string(), cols[2].to_string()));
        }
        Self::from_entries(rows)
    }

    fn check_idempotent(&self) -> Result<(), CorpusError> {
        for (lang, table) in &self.entries {
            for (surface, rep) in table {
                if let Some(next) = table.get(rep) {
                    if next != rep {
                        return Err(CorpusError::NonIdempotentLemma {
                            lang: lang.clone(),
                            surface: surface.clone(),
                            representative: rep.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// The representative word for `token`, or the lowercased token when unmapped.
    pub fn normalize(&self, lang: &Lang, token: &str) -> String {
        let key = token.to_lowercase();
        match self.entries.get(lang).and_then(|t| t.get(&key)) {
            Some(rep) => rep.clone(),
            None => key,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(BTreeMap::is_empty)
    }
}

/// Per-language vocabulary filter. Languages without an entry are unfiltered.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordList {
    words: BTreeMap<Lang, BTreeSet<String>>,
}

impl WordList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, lang: Lang, word: &str) {
        self.words
            .entry(lang)
            .or_default()
            .insert(word.to_lowercase());
    }

    /// Reads `lang \t word` lines.
    pub fn read(reader: impl BufRead) -> Result<Self, CorpusError> {
        let mut list = WordList::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((lang, word)) = line.split_once('\t') else {
                return Err(CorpusError::Malformed {
                    line: i + 1,
                    message: "expected `lang<TAB>word`".into(),
                });
            };
            let lang = Lang::new(lang).map_err(|e| CorpusError::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            list.insert(lang, word.trim());
        }
        Ok(list)
    }

    pub fn allows(&self, lang: &Lang, word: &str) -> bool {
        self.words.get(lang).is_none_or(|set| set.contains(word))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn en() -> Lang {
        Lang::new("en").unwrap()
    }

    #[test]
    fn lookup_and_fallback() {
        let map = LemmaMap::from_entries([(en(), "loved", "love")]).unwrap();
        assert_eq!(map.normalize(&en(), "Loved"), "love");
        assert_eq!(map.normalize(&en(), "love"), "love");
        assert_eq!(map.normalize(&en(), "Kind"), "kind");
        assert_eq!(map.normalize(&Lang::new("ja").unwrap(), "loved"), "loved");
    }

    #[test]
    fn chained_entries_rejected() {
        let err = LemmaMap::from_entries([(en(), "loved", "love"), (en(), "love", "lov")]);
        assert!(matches!(err, Err(CorpusError::NonIdempotentLemma { .. })));
        // self-mapping representatives are fine
        LemmaMap::from_entries([(en(), "loved", "love"), (en(), "love", "love")]).unwrap();
    }

    #[test]
    fn reads_file_format() {
        let text = "# lemmas\nen\tLoved\tlove\nen\tloves\tlove\n\nja\t美しく\t美しい\n";
        let map = LemmaMap::read(text.as_bytes()).unwrap();
        assert_eq!(map.normalize(&en(), "LOVES"), "love");
        assert_eq!(map.normalize(&Lang::new("ja").unwrap(), "美しく"), "美しい");
        let bad = LemmaMap::read("en\tloved\n".as_bytes());
        assert!(matches!(bad, Err(CorpusError::Malformed { line: 1, .. })));
    }

    #[test]
    fn word_list_filters_only_listed_languages() {
        let list = WordList::read("en\tcat\nen\tDog\n".as_bytes()).unwrap();
        assert!(list.allows(&en(), "dog"));
        assert!(!list.allows(&en(), "the"));
        assert!(list.allows(&Lang::new("ja").unwrap(), "anything"));
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(
            entries in proptest::collection::vec(("[a-eA-E]{1,3}", "[a-e]{1,3}"), 0..12),
            probe in "[a-eA-E]{0,4}",
        ) {
            // keep only entries that form a valid (idempotent) map
            let mut reps: BTreeMap<String, String> = BTreeMap::new();
            for (s, r) in entries {
                let s = s.to_lowercase();
                if reps.contains_key(&r) || reps.values().any(|v| v == &s) {
                    continue;
                }
                reps.insert(s, r);
            }
            let map = LemmaMap::from_entries(reps.into_iter().map(|(s, r)| (en(), s, r))).unwrap();
            let once = map.normalize(&en(), &probe);
            prop_assert_eq!(map.normalize(&en(), &once), once);
        }
    }
}
