//! The word network: one node per `(language, representative word)`, one
//! undirected edge per translation relation, weighted by its count.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::corpus::TranslationCountTable;
use crate::lang::{Lang, LangPair, PairSpec, WordId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum NetworkError {
    #[error("count table {0}-{1} given twice")]
    DuplicateLanguagePair(Lang, Lang),
    #[error("language pair {0} has no counted translations (T = 0)")]
    EmptyCorpusPair(LangPair),
    #[error("no count table for language pair {0}")]
    UnknownPair(LangPair),
    #[error("word {0} is not in the network")]
    UnknownWord(WordId),
    #[error("{0} and {1} are in the same language")]
    SameLanguage(WordId, WordId),
}

/// Immutable once built; cheap to share behind an `Arc`.
#[derive(Debug, Clone, Default)]
pub struct LangueNetwork {
    /// Sorted, so node indices follow `WordId` order.
    words: Vec<WordId>,
    index: HashMap<WordId, usize>,
    occurrences: Vec<u64>,
    /// Per node, `(neighbor, c)` sorted by neighbor index.
    adjacency: Vec<Vec<(usize, u64)>>,
    totals: BTreeMap<LangPair, u64>,
    /// Per node, partner language -> sum of the node's pair counts into that language.
    row_sums: Vec<BTreeMap<Lang, u64>>,
}

impl LangueNetwork {
    /// Builds the network from directional count tables.
    ///
    /// Tables for `(l1, l2)` and `(l2, l1)` are both allowed and are summed
    /// into one undirected pair; the same ordered pair twice is an error.
    pub fn build(tables: &[TranslationCountTable]) -> Result<Self, NetworkError> {
        let mut seen = BTreeSet::new();
        let mut totals: BTreeMap<LangPair, u64> = BTreeMap::new();
        let mut edges: BTreeMap<(WordId, WordId), u64> = BTreeMap::new();
        let mut occurrences: BTreeMap<WordId, u64> = BTreeMap::new();

        for table in tables {
            let (l1, l2) = (table.source_lang().clone(), table.target_lang().clone());
            if !seen.insert((l1.clone(), l2.clone())) {
                return Err(NetworkError::DuplicateLanguagePair(l1, l2));
            }
            let pair = LangPair::new(l1.clone(), l2.clone())
                .map_err(|_| NetworkError::DuplicateLanguagePair(l1.clone(), l2.clone()))?;
            *totals.entry(pair).or_default() += table.total();

            for (u, v, c) in table.pair_counts() {
                let a = WordId::new(l1.clone(), u);
                let b = WordId::new(l2.clone(), v);
                let key = if a < b { (a, b) } else { (b, a) };
                *edges.entry(key).or_default() += c;
            }
            for (w, c) in table.source_occurrences() {
                *occurrences
                    .entry(WordId::new(l1.clone(), w.as_str()))
                    .or_default() += c;
            }
            for (w, c) in table.target_occurrences() {
                *occurrences
                    .entry(WordId::new(l2.clone(), w.as_str()))
                    .or_default() += c;
            }
        }

        let mut nodes: BTreeSet<WordId> = occurrences.keys().cloned().collect();
        for (a, b) in edges.keys() {
            nodes.insert(a.clone());
            nodes.insert(b.clone());
        }
        let words: Vec<WordId> = nodes.into_iter().collect();
        let index: HashMap<WordId, usize> = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        let occ = words
            .iter()
            .map(|w| occurrences.get(w).copied().unwrap_or(0))
            .collect();

        let mut adjacency = vec![Vec::new(); words.len()];
        let mut row_sums = vec![BTreeMap::new(); words.len()];
        for ((a, b), c) in edges {
            if c == 0 {
                continue;
            }
            let (ia, ib) = (index[&a], index[&b]);
            adjacency[ia].push((ib, c));
            adjacency[ib].push((ia, c));
            *row_sums[ia].entry(b.lang.clone()).or_default() += c;
            *row_sums[ib].entry(a.lang.clone()).or_default() += c;
        }
        for adj in &mut adjacency {
            adj.sort_unstable_by_key(|(n, _)| *n);
        }

        Ok(LangueNetwork {
            words,
            index,
            occurrences: occ,
            adjacency,
            totals,
            row_sums,
        })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn edge_total(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn words(&self) -> &[WordId] {
        &self.words
    }

    pub fn word(&self, idx: usize) -> &WordId {
        &self.words[idx]
    }

    pub fn index_of(&self, word: &WordId) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &WordId) -> bool {
        self.index.contains_key(word)
    }

    /// Node weight: token occurrences summed over every table the word appears in.
    pub fn occurrence(&self, idx: usize) -> u64 {
        self.occurrences[idx]
    }

    /// All edges of a node as `(neighbor index, c)`, sorted by neighbor.
    pub fn edges(&self, idx: usize) -> &[(usize, u64)] {
        &self.adjacency[idx]
    }

    /// Symmetrized translation count between two nodes, 0 if unconnected.
    pub fn edge_count(&self, a: usize, b: usize) -> u64 {
        let adj = &self.adjacency[a];
        adj.binary_search_by_key(&b, |(n, _)| *n)
            .map(|i| adj[i].1)
            .unwrap_or(0)
    }

    /// `T` for a language pair, summed over both directions.
    pub fn total(&self, pair: &LangPair) -> Option<u64> {
        self.totals.get(pair).copied()
    }

    pub fn language_pairs(&self) -> impl Iterator<Item = (&LangPair, u64)> {
        self.totals.iter().map(|(p, t)| (p, *t))
    }

    /// Fails unless every pair in `pairs` has a table with `T > 0`.
    pub fn check_pairs(&self, pairs: &PairSpec) -> Result<(), NetworkError> {
        for p in pairs.iter() {
            match self.totals.get(p) {
                None => return Err(NetworkError::UnknownPair(p.clone())),
                Some(0) => return Err(NetworkError::EmptyCorpusPair(p.clone())),
                Some(_) => {}
            }
        }
        Ok(())
    }

    /// Neighbors of `idx` whose language pair with it is in `pairs`.
    pub fn neighbor_indices<'a>(
        &'a self,
        idx: usize,
        pairs: &'a PairSpec,
    ) -> impl Iterator<Item = (usize, u64)> + 'a {
        let lang = &self.words[idx].lang;
        self.adjacency[idx]
            .iter()
            .copied()
            .filter(move |(n, _)| pairs.contains(lang, &self.words[*n].lang))
    }

    /// Translation neighbors of `word` under `pairs`. Unknown words have none.
    pub fn neighbors(&self, word: &WordId, pairs: &PairSpec) -> BTreeSet<WordId> {
        match self.index_of(word) {
            Some(idx) => self
                .neighbor_indices(idx, pairs)
                .map(|(n, _)| self.words[n].clone())
                .collect(),
            None => BTreeSet::new(),
        }
    }

    fn pair_total(&self, pair: &LangPair) -> Result<u64, NetworkError> {
        match self.totals.get(pair) {
            None => Err(NetworkError::UnknownPair(pair.clone())),
            Some(0) => Err(NetworkError::EmptyCorpusPair(pair.clone())),
            Some(t) => Ok(*t),
        }
    }

    /// `c(u,v) / T` for the pair's language pair.
    pub fn normalized_pair_count_idx(&self, a: usize, b: usize) -> Result<f64, NetworkError> {
        let (wa, wb) = (&self.words[a], &self.words[b]);
        if wa.lang == wb.lang {
            return Err(NetworkError::SameLanguage(wa.clone(), wb.clone()));
        }
        let pair = LangPair::new(wa.lang.clone(), wb.lang.clone())
            .map_err(|_| NetworkError::SameLanguage(wa.clone(), wb.clone()))?;
        let t = self.pair_total(&pair)?;
        Ok(self.edge_count(a, b) as f64 / t as f64)
    }

    pub fn normalized_pair_count(&self, u: &WordId, v: &WordId) -> Result<f64, NetworkError> {
        let a = self
            .index_of(u)
            .ok_or_else(|| NetworkError::UnknownWord(u.clone()))?;
        let b = self
            .index_of(v)
            .ok_or_else(|| NetworkError::UnknownWord(v.clone()))?;
        self.normalized_pair_count_idx(a, b)
    }

    /// Mean over the languages paired with `u`'s language in `pairs` of
    /// `sum_v c(u,v) / T`, where `v` ranges over every word of the partner
    /// language. Zero when `u`'s language takes part in no pair.
    pub fn normalized_word_count_idx(
        &self,
        idx: usize,
        pairs: &PairSpec,
    ) -> Result<f64, NetworkError> {
        let lang = &self.words[idx].lang;
        let mut sum = 0.0;
        let mut n = 0usize;
        for pair in pairs.iter() {
            let Some(partner) = pair.other(lang) else {
                continue;
            };
            let t = self.pair_total(pair)?;
            let row = self.row_sums[idx].get(partner).copied().unwrap_or(0);
            sum += row as f64 / t as f64;
            n += 1;
        }
        Ok(if n == 0 { 0.0 } else { sum / n as f64 })
    }

    pub fn normalized_word_count(&self, u: &WordId, pairs: &PairSpec) -> Result<f64, NetworkError> {
        let idx = self
            .index_of(u)
            .ok_or_else(|| NetworkError::UnknownWord(u.clone()))?;
        self.normalized_word_count_idx(idx, pairs)
    }

    /// Words of `lang` starting with `prefix`, in sorted order.
    pub fn search_prefix(&self, lang: &Lang, prefix: &str, limit: usize) -> Vec<WordId> {
        let start = self
            .words
            .partition_point(|w| (&w.lang, w.word.as_str()) < (lang, prefix));
        self.words[start..]
            .iter()
            .take_while(|w| &w.lang == lang && w.word.starts_with(prefix))
            .take(limit)
            .cloned()
            .collect()
    }

    /// JSON view of nodes, edges and language-pair totals.
    pub fn export(&self) -> NetworkExport {
        let nodes = self
            .words
            .iter()
            .zip(&self.occurrences)
            .map(|(w, c)| ExportNode {
                lang: w.lang.clone(),
                word: w.word.clone(),
                count: *c,
            })
            .collect();
        let mut edges = Vec::new();
        for (a, adj) in self.adjacency.iter().enumerate() {
            for &(b, c) in adj.iter().filter(|(b, _)| *b > a) {
                edges.push(ExportEdge {
                    u: self.words[a].clone(),
                    v: self.words[b].clone(),
                    count: c,
                });
            }
        }
        let pairs = self
            .totals
            .iter()
            .map(|(p, t)| ExportPair {
                langs: p.clone(),
                total: *t,
            })
            .collect();
        NetworkExport {
            nodes,
            edges,
            pairs,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkExport {
    pub nodes: Vec<ExportNode>,
    pub edges: Vec<ExportEdge>,
    pub pairs: Vec<ExportPair>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportNode {
    pub lang: Lang,
    pub word: String,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportEdge {
    pub u: WordId,
    pub v: WordId,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportPair {
    pub langs: LangPair,
    pub total: u64,
}
