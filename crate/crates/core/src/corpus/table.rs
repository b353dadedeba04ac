use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::BufRead;

use super::CorpusError;
use crate::lang::{parse_ordered_pair, Lang};

const MAGIC: &str = "#interlangue-counts v1";
const PAIRS_HEADER: &str = "#pairs";
const OCCURRENCES_HEADER: &str = "#occurrences";
const PLACEHOLDER: &str = "_";

/// Directional translation counts for one ordered language pair `(l1, l2)`.
///
/// `pair_counts[(u, v)]` is how often `u` (an `l1` word) was aligned to `v`
/// (an `l2` word). Occurrence counts are kept per side, since the same string
/// can be a word of both languages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationCountTable {
    source_lang: Lang,
    target_lang: Lang,
    pair_counts: BTreeMap<(String, String), u64>,
    source_occurrences: BTreeMap<String, u64>,
    target_occurrences: BTreeMap<String, u64>,
    total: u64,
}

impl TranslationCountTable {
    pub fn new(source_lang: Lang, target_lang: Lang) -> Self {
        TranslationCountTable {
            source_lang,
            target_lang,
            pair_counts: BTreeMap::new(),
            source_occurrences: BTreeMap::new(),
            target_occurrences: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn source_lang(&self) -> &Lang {
        &self.source_lang
    }

    pub fn target_lang(&self) -> &Lang {
        &self.target_lang
    }

    /// `T`, the sum of every pair count.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn pair_count(&self, source: &str, target: &str) -> u64 {
        self.pair_counts
            .get(&(source.to_string(), target.to_string()))
            .copied()
            .unwrap_or(0)
    }

    pub fn pair_counts(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.pair_counts
            .iter()
            .map(|((u, v), c)| (u.as_str(), v.as_str(), *c))
    }

    pub fn source_occurrences(&self) -> &BTreeMap<String, u64> {
        &self.source_occurrences
    }

    pub fn target_occurrences(&self) -> &BTreeMap<String, u64> {
        &self.target_occurrences
    }

    pub fn is_empty(&self) -> bool {
        self.pair_counts.is_empty()
            && self.source_occurrences.is_empty()
            && self.target_occurrences.is_empty()
    }

    pub fn add_pair(&mut self, source: &str, target: &str, count: u64) {
        if count == 0 {
            return;
        }
        *self
            .pair_counts
            .entry((source.to_string(), target.to_string()))
            .or_default() += count;
        self.total += count;
    }

    pub fn add_source_occurrence(&mut self, word: &str, count: u64) {
        *self.source_occurrences.entry(word.to_string()).or_default() += count;
    }

    pub fn add_target_occurrence(&mut self, word: &str, count: u64) {
        *self.target_occurrences.entry(word.to_string()).or_default() += count;
    }

    /// Adds `other` into `self`. Associative and commutative.
    pub fn merge(&mut self, other: &TranslationCountTable) -> Result<(), CorpusError> {
        if other.source_lang != self.source_lang || other.target_lang != self.target_lang {
            return Err(CorpusError::InvalidTable(format!(
                "cannot merge {}-{} into {}-{}",
                other.source_lang, other.target_lang, self.source_lang, self.target_lang
            )));
        }
        for ((u, v), c) in &other.pair_counts {
            self.add_pair(u, v, *c);
        }
        for (w, c) in &other.source_occurrences {
            self.add_source_occurrence(w, *c);
        }
        for (w, c) in &other.target_occurrences {
            self.add_target_occurrence(w, *c);
        }
        Ok(())
    }

    /// Checks `T = sum c(u,v)` and that each word's occurrence count covers its pair counts.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let sum: u64 = self.pair_counts.values().sum();
        if sum != self.total {
            return Err(CorpusError::InvalidTable(format!(
                "total {} differs from sum of pair counts {sum}",
                self.total
            )));
        }
        for ((u, v), c) in &self.pair_counts {
            let cu = self.source_occurrences.get(u).copied().unwrap_or(0);
            let cv = self.target_occurrences.get(v).copied().unwrap_or(0);
            if cu < *c || cv < *c {
                return Err(CorpusError::InvalidTable(format!(
                    "pair ({u}, {v}) count {c} exceeds occurrence counts ({cu}, {cv})"
                )));
            }
        }
        Ok(())
    }

    /// Serializes to the count-table TSV format.
    ///
    /// ```text
    /// #interlangue-counts v1
    /// lang_pair<TAB>en<TAB>ja
    /// total<TAB>T
    /// #pairs
    /// u<TAB>v<TAB>c          one row per (u, v), sorted
    /// #occurrences
    /// u<TAB>_<TAB>c          source-language words, sorted
    /// _<TAB>v<TAB>c          target-language words, sorted
    /// ```
    ///
    /// A literal `_` word or a word starting with `\` is written with a
    /// leading `\`.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{MAGIC}").unwrap();
        writeln!(out, "lang_pair\t{}\t{}", self.source_lang, self.target_lang).unwrap();
        writeln!(out, "total\t{}", self.total).unwrap();
        writeln!(out, "{PAIRS_HEADER}").unwrap();
        for ((u, v), c) in &self.pair_counts {
            writeln!(out, "{}\t{}\t{c}", escape(u), escape(v)).unwrap();
        }
        writeln!(out, "{OCCURRENCES_HEADER}").unwrap();
        for (w, c) in &self.source_occurrences {
            writeln!(out, "{}\t{PLACEHOLDER}\t{c}", escape(w)).unwrap();
        }
        for (w, c) in &self.target_occurrences {
            writeln!(out, "{PLACEHOLDER}\t{}\t{c}", escape(w)).unwrap();
        }
        out
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<(), CorpusError> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, CorpusError> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn read(reader: impl BufRead) -> Result<Self, CorpusError> {
        #[derive(PartialEq)]
        enum Section {
            Header,
            Pairs,
            Occurrences,
        }
        let malformed = |line: usize, message: String| CorpusError::Malformed { line, message };

        let mut section = Section::Header;
        let mut langs: Option<(Lang, Lang)> = None;
        let mut declared_total: Option<(usize, u64)> = None;
        let mut table: Option<TranslationCountTable> = None;
        let mut saw_magic = false;

        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.is_empty() {
                continue;
            }
            if !saw_magic {
                if line != MAGIC {
                    return Err(malformed(line_no, format!("expected {MAGIC:?}")));
                }
                saw_magic = true;
                continue;
            }
            if line == PAIRS_HEADER {
                if section != Section::Header {
                    return Err(malformed(line_no, "unexpected #pairs section".into()));
                }
                let (l1, l2) = langs
                    .clone()
                    .ok_or_else(|| malformed(line_no, "missing lang_pair header".into()))?;
                if declared_total.is_none() {
                    return Err(malformed(line_no, "missing total header".into()));
                }
                table = Some(TranslationCountTable::new(l1, l2));
                section = Section::Pairs;
                continue;
            }
            if line == OCCURRENCES_HEADER {
                if section != Section::Pairs {
                    return Err(malformed(line_no, "unexpected #occurrences section".into()));
                }
                section = Section::Occurrences;
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            match section {
                Section::Header => match cols.as_slice() {
                    ["lang_pair", a, b] => {
                        let pair = parse_ordered_pair(&format!("{a}-{b}"))
                            .map_err(|e| malformed(line_no, e.to_string()))?;
                        langs = Some(pair);
                    }
                    ["total", t] => {
                        let t = parse_count(t).map_err(|m| malformed(line_no, m))?;
                        declared_total = Some((line_no, t));
                    }
                    _ => return Err(malformed(line_no, format!("unknown header row {line:?}"))),
                },
                Section::Pairs => {
                    let t = table.as_mut().expect("table created at #pairs");
                    let [u, v, c] = cols.as_slice() else {
                        return Err(malformed(line_no, "expected `u<TAB>v<TAB>count`".into()));
                    };
                    if *u == PLACEHOLDER || *v == PLACEHOLDER {
                        return Err(malformed(line_no, "placeholder `_` in #pairs".into()));
                    }
                    let (u, v) = (unescape(u), unescape(v));
                    let c = parse_count(c).map_err(|m| malformed(line_no, m))?;
                    if c == 0 {
                        return Err(malformed(line_no, "pair count must be positive".into()));
                    }
                    if t.pair_counts.contains_key(&(u.clone(), v.clone())) {
                        return Err(malformed(line_no, format!("duplicate pair ({u}, {v})")));
                    }
                    t.add_pair(&u, &v, c);
                }
                Section::Occurrences => {
                    let t = table.as_mut().expect("table created at #pairs");
                    let [u, v, c] = cols.as_slice() else {
                        return Err(malformed(line_no, "expected `w<TAB>_<TAB>count`".into()));
                    };
                    let c = parse_count(c).map_err(|m| malformed(line_no, m))?;
                    let (map, word) = match (*u == PLACEHOLDER, *v == PLACEHOLDER) {
                        (false, true) => (&mut t.source_occurrences, unescape(u)),
                        (true, false) => (&mut t.target_occurrences, unescape(v)),
                        _ => {
                            return Err(malformed(
                                line_no,
                                "occurrence rows need exactly one `_` column".into(),
                            ))
                        }
                    };
                    if map.insert(word.clone(), c).is_some() {
                        return Err(malformed(
                            line_no,
                            format!("duplicate occurrence row for {word}"),
                        ));
                    }
                }
            }
        }
        if !saw_magic {
            return Err(malformed(1, "empty file".into()));
        }
        let table = table.ok_or_else(|| malformed(0, "missing #pairs section".into()))?;
        let (total_line, total) = declared_total.expect("checked at #pairs");
        if total != table.total {
            return Err(malformed(
                total_line,
                format!(
                    "total {total} differs from sum of pair counts {}",
                    table.total
                ),
            ));
        }
        table.validate()?;
        Ok(table)
    }
}

fn parse_count(s: &str) -> Result<u64, String> {
    if s.starts_with('-') {
        return Err(format!("negative count {s}"));
    }
    s.parse::<u64>().map_err(|_| format!("invalid count {s:?}"))
}

fn escape(word: &str) -> String {
    if word == PLACEHOLDER || word.starts_with('\\') {
        format!("\\{word}")
    } else {
        word.to_string()
    }
}

fn unescape(word: &str) -> String {
    word.strip_prefix('\\').unwrap_or(word).to_string()
}
