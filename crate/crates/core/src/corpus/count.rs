use std::collections::{BTreeMap, BTreeSet};

use super::{
    align, tokenize, AlignMethod, CorpusError, DiceStats, LemmaMap, SentencePair, TokenizerConfig,
    TranslationCountTable, WordList,
};
use crate::lang::Lang;
use crate::par::{self, Execution};

/// Sentence pairs handled per work item when counting in parallel.
const CHUNK: usize = 256;

#[derive(Debug, Clone)]
pub struct CountOptions<'a> {
    pub tokenizer: TokenizerConfig,
    pub lemmas: &'a LemmaMap,
    pub word_list: Option<&'a WordList>,
    pub method: AlignMethod,
    /// Record which sentence pairs contributed to each `(u, v)` count.
    pub record_provenance: bool,
}

/// Sentence pairs (by index into the counted slice) behind each `(u, v)` count.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ProvenanceIndex {
    links: BTreeMap<(String, String), Vec<usize>>,
}

impl ProvenanceIndex {
    pub fn sentences(&self, source: &str, target: &str) -> &[usize] {
        self.links
            .get(&(source.to_string(), target.to_string()))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, String), &Vec<usize>)> {
        self.links.iter()
    }

    fn record(&mut self, source: &str, target: &str, index: usize) {
        self.links
            .entry((source.to_string(), target.to_string()))
            .or_default()
            .push(index);
    }

    fn merge(&mut self, other: ProvenanceIndex) {
        for (k, mut v) in other.links {
            let entry = self.links.entry(k).or_default();
            entry.append(&mut v);
            entry.sort_unstable();
        }
    }
}

#[derive(Debug, Clone)]
pub struct CountOutput {
    pub table: TranslationCountTable,
    pub provenance: Option<ProvenanceIndex>,
}

/// Runs the translation counter over `pairs`, all of which must be `source_lang -> target_lang`.
///
/// Each distinct link contributes one count to `c(normalize(u), normalize(v))`
/// when both words pass the word list. Within one sentence pair the
/// contribution to a given `(u, v)` is capped at the number of occurrences of
/// `u` and of `v` in that pair, so a word's occurrence count always covers
/// its pair counts even under many-to-many alignments.
pub fn count_translations(
    pairs: &[SentencePair],
    source_lang: &Lang,
    target_lang: &Lang,
    opts: &CountOptions<'_>,
) -> Result<CountOutput, CorpusError> {
    count_with(
        Execution::for_len(pairs.len()),
        CHUNK,
        pairs,
        source_lang,
        target_lang,
        opts,
    )
}

#[doc(hidden)]
pub fn count_with(
    exec: Execution,
    chunk_len: usize,
    pairs: &[SentencePair],
    source_lang: &Lang,
    target_lang: &Lang,
    opts: &CountOptions<'_>,
) -> Result<CountOutput, CorpusError> {
    for p in pairs {
        if &p.source_lang != source_lang || &p.target_lang != target_lang {
            return Err(CorpusError::MixedLanguagePair {
                id: p.id.clone(),
                expected_source: source_lang.clone(),
                expected_target: target_lang.clone(),
                found_source: p.source_lang.clone(),
                found_target: p.target_lang.clone(),
            });
        }
    }

    let chunks: Vec<(usize, &[SentencePair])> = pairs
        .chunks(chunk_len.max(1))
        .enumerate()
        .map(|(i, c)| (i * chunk_len.max(1), c))
        .collect();

    let tokens_of = |p: &SentencePair| -> (Vec<String>, Vec<String>) {
        let norm = |text: &str, lang: &Lang| -> Vec<String> {
            tokenize(text, &opts.tokenizer)
                .into_iter()
                .map(|t| opts.lemmas.normalize(lang, &t))
                .collect()
        };
        (
            norm(&p.source_text, source_lang),
            norm(&p.target_text, target_lang),
        )
    };

    let stats = match opts.method {
        AlignMethod::Provided => None,
        AlignMethod::Dice { .. } => {
            let partial = par::map_slice(exec, &chunks, |(_, chunk)| {
                let mut s = DiceStats::default();
                for p in *chunk {
                    let (src, tgt) = tokens_of(p);
                    s.observe(&src, &tgt);
                }
                s
            });
            let mut stats = DiceStats::default();
            for s in partial {
                stats.merge(s);
            }
            Some(stats)
        }
    };

    let partial = par::map_slice(exec, &chunks, |(offset, chunk)| {
        let mut table = TranslationCountTable::new(source_lang.clone(), target_lang.clone());
        let mut prov = ProvenanceIndex::default();
        for (k, p) in chunk.iter().enumerate() {
            let (src, tgt) = tokens_of(p);
            let links = align(p, &src, &tgt, &opts.method, stats.as_ref())?;
            count_pair(
                &mut table,
                opts.record_provenance.then_some(&mut prov),
                offset + k,
                (&src, &tgt),
                &links,
                (source_lang, target_lang),
                opts.word_list,
            );
        }
        Ok::<_, CorpusError>((table, prov))
    });

    let mut table = TranslationCountTable::new(source_lang.clone(), target_lang.clone());
    let mut provenance = ProvenanceIndex::default();
    for part in partial {
        let (t, p) = part?;
        table.merge(&t)?;
        provenance.merge(p);
    }
    debug_assert!(table.validate().is_ok());
    Ok(CountOutput {
        table,
        provenance: opts.record_provenance.then_some(provenance),
    })
}

fn count_pair(
    table: &mut TranslationCountTable,
    provenance: Option<&mut ProvenanceIndex>,
    index: usize,
    (src, tgt): (&[String], &[String]),
    links: &[(usize, usize)],
    (source_lang, target_lang): (&Lang, &Lang),
    word_list: Option<&WordList>,
) {
    let allowed = |lang: &Lang, w: &str| word_list.is_none_or(|l| l.allows(lang, w));

    let mut src_occ: BTreeMap<&str, u64> = BTreeMap::new();
    for w in src.iter().filter(|w| allowed(source_lang, w)) {
        *src_occ.entry(w).or_default() += 1;
    }
    let mut tgt_occ: BTreeMap<&str, u64> = BTreeMap::new();
    for w in tgt.iter().filter(|w| allowed(target_lang, w)) {
        *tgt_occ.entry(w).or_default() += 1;
    }
    for (w, c) in &src_occ {
        table.add_source_occurrence(w, *c);
    }
    for (w, c) in &tgt_occ {
        table.add_target_occurrence(w, *c);
    }

    let distinct: BTreeSet<(usize, usize)> = links.iter().copied().collect();
    let mut per_word: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for (i, j) in distinct {
        let (u, v) = (src[i].as_str(), tgt[j].as_str());
        if src_occ.contains_key(u) && tgt_occ.contains_key(v) {
            *per_word.entry((u, v)).or_default() += 1;
        }
    }
    let mut provenance = provenance;
    for ((u, v), n) in per_word {
        let inc = n.min(src_occ[u]).min(tgt_occ[v]);
        table.add_pair(u, v, inc);
        if let Some(prov) = provenance.as_deref_mut() {
            prov.record(u, v, index);
        }
    }
}
