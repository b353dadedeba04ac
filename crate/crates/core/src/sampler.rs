//! Example sentences for the translation edges currently on screen.
//!
//! Edges are drawn with probability proportional to `c_uv * alpha_x^|m_uv|`,
//! where `m_uv` is the edge midpoint, so examples concentrate near the center.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{ProvenanceIndex, SentencePair};
use crate::lang::{PairSpec, WordId};
use crate::network::LangueNetwork;
use crate::space::{norm, SpaceState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SampleError {
    #[error("no active edge has example sentences")]
    NoExamples,
    #[error("edge {u} - {v} is not active")]
    EdgeNotActive { u: WordId, v: WordId },
    #[error("example count must be at least 1")]
    InvalidCount,
}

/// Sentence pairs keyed by the translation edges they support.
#[derive(Debug, Clone, Default)]
pub struct ExampleStore {
    sentences: Vec<SentencePair>,
    index: BTreeMap<(WordId, WordId), Vec<usize>>,
}

fn edge_key(u: &WordId, v: &WordId) -> (WordId, WordId) {
    if u <= v {
        (u.clone(), v.clone())
    } else {
        (v.clone(), u.clone())
    }
}

impl ExampleStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the sentence pairs of one counting run with its provenance index.
    pub fn add(&mut self, pairs: &[SentencePair], provenance: &ProvenanceIndex) {
        let base = self.sentences.len();
        self.sentences.extend_from_slice(pairs);
        for ((s, t), ids) in provenance.iter() {
            let Some(first) = ids.first().map(|&i| &pairs[i]) else {
                continue;
            };
            let u = WordId::new(first.source_lang.clone(), s.clone());
            let v = WordId::new(first.target_lang.clone(), t.clone());
            let entry = self.index.entry(edge_key(&u, &v)).or_default();
            entry.extend(ids.iter().map(|i| base + i));
            entry.dedup();
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn sentences_for(&self, u: &WordId, v: &WordId) -> Vec<&SentencePair> {
        self.index
            .get(&edge_key(u, v))
            .map(|ids| ids.iter().map(|&i| &self.sentences[i]).collect())
            .unwrap_or_default()
    }

    fn ids(&self, u: &WordId, v: &WordId) -> &[usize] {
        self.index.get(&edge_key(u, v)).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRequest {
    pub n: usize,
    /// Restricts sampling to one edge.
    pub edge: Option<(WordId, WordId)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeight {
    pub u: WordId,
    pub v: WordId,
    /// Selection probability of the edge.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub pair: SentencePair,
    /// The highlighted link, oriented like `pair`.
    pub u: WordId,
    pub v: WordId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleBatch {
    pub examples: Vec<Example>,
    pub weights: Vec<EdgeWeight>,
}

/// Selection probabilities for every active edge that has examples.
///
/// Computed in log space and normalized, so far-away edges get a tiny but
/// well-defined share instead of underflowing the whole distribution.
pub fn edge_weights(
    state: &SpaceState,
    network: &LangueNetwork,
    pairs: &PairSpec,
    store: &ExampleStore,
    alpha_x: f64,
) -> Vec<EdgeWeight> {
    let mut logs = Vec::new();
    for (u, a) in state.iter() {
        for (n, c) in network.neighbor_indices(a.node(), pairs) {
            let v = network.word(n);
            if v <= u || c == 0 {
                continue;
            }
            let Some(b) = state.get(v) else { continue };
            if store.ids(u, v).is_empty() {
                continue;
            }
            let mid: Vec<f64> = a.x.iter().zip(&b.x).map(|(p, q)| 0.5 * (p + q)).collect();
            logs.push((
                u.clone(),
                v.clone(),
                (c as f64).ln() + norm(&mid) * alpha_x.ln(),
            ));
        }
    }
    let max = logs.iter().map(|l| l.2).fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = logs.iter().map(|l| (l.2 - max).exp()).collect();
    let sum: f64 = raw.iter().sum();
    logs.into_iter()
        .zip(raw)
        .map(|((u, v, _), r)| EdgeWeight {
            u,
            v,
            weight: r / sum,
        })
        .collect()
}

fn oriented(pair: &SentencePair, u: &WordId, v: &WordId) -> (WordId, WordId) {
    if pair.source_lang == u.lang {
        (u.clone(), v.clone())
    } else {
        (v.clone(), u.clone())
    }
}

/// Draws `request.n` examples, one uniformly chosen sentence pair per drawn edge.
pub fn sample_examples(
    state: &SpaceState,
    network: &LangueNetwork,
    pairs: &PairSpec,
    store: &ExampleStore,
    alpha_x: f64,
    request: &ExampleRequest,
    rng: &mut impl Rng,
) -> Result<ExampleBatch, SampleError> {
    if request.n == 0 {
        return Err(SampleError::InvalidCount);
    }
    let weights = match &request.edge {
        Some((u, v)) => {
            let active = state.contains(u)
                && state.contains(v)
                && pairs.contains(&u.lang, &v.lang)
                && network
                    .index_of(u)
                    .zip(network.index_of(v))
                    .is_some_and(|(a, b)| network.edge_count(a, b) > 0);
            if !active {
                return Err(SampleError::EdgeNotActive {
                    u: u.clone(),
                    v: v.clone(),
                });
            }
            if store.ids(u, v).is_empty() {
                return Err(SampleError::NoExamples);
            }
            let (u, v) = edge_key(u, v);
            vec![EdgeWeight { u, v, weight: 1.0 }]
        }
        None => edge_weights(state, network, pairs, store, alpha_x),
    };
    if weights.is_empty() {
        return Err(SampleError::NoExamples);
    }
    let dist = WeightedIndex::new(weights.iter().map(|w| w.weight))
        .map_err(|_| SampleError::NoExamples)?;
    let examples = (0..request.n)
        .map(|_| {
            let e = &weights[dist.sample(rng)];
            let ids = store.ids(&e.u, &e.v);
            let pair = &store.sentences[ids[rng.random_range(0..ids.len())]];
            let (u, v) = oriented(pair, &e.u, &e.v);
            Example {
                pair: pair.clone(),
                u,
                v,
            }
        })
        .collect();
    Ok(ExampleBatch { examples, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{count_translations, AlignMethod, CountOptions, LemmaMap, TokenizerConfig};
    use crate::lang::Lang;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn l(s: &str) -> Lang {
        Lang::new(s).unwrap()
    }

    fn w(lang: &str, word: &str) -> WordId {
        WordId::new(l(lang), word)
    }

    fn corpus() -> Vec<SentencePair> {
        let rows = [
            ("s1", "a b", "x y", vec![(0, 0), (1, 1)]),
            ("s2", "a", "x", vec![(0, 0)]),
            ("s3", "a c", "x z", vec![(0, 0), (1, 1)]),
            ("s4", "b", "y", vec![(0, 0)]),
        ];
        rows.into_iter()
            .map(|(id, s, t, links)| {
                SentencePair::new(id, l("en"), l("ja"), s, t)
                    .unwrap()
                    .with_alignment(links)
            })
            .collect()
    }

    fn setup() -> (LangueNetwork, ExampleStore, Vec<SentencePair>) {
        let pairs = corpus();
        let lemmas = LemmaMap::default();
        let opts = CountOptions {
            tokenizer: TokenizerConfig::default(),
            lemmas: &lemmas,
            word_list: None,
            method: AlignMethod::Provided,
            record_provenance: true,
        };
        let out = count_translations(&pairs, &l("en"), &l("ja"), &opts).unwrap();
        let mut store = ExampleStore::new();
        store.add(&pairs, out.provenance.as_ref().unwrap());
        (LangueNetwork::build(&[out.table]).unwrap(), store, pairs)
    }

    fn state(net: &LangueNetwork, coords: &[(&str, &str, [f64; 2])]) -> SpaceState {
        let mut s = SpaceState::new(net, w("en", "a"), 2, 1).unwrap();
        for (lang, word, x) in coords {
            s.insert(net, w(lang, word), x.to_vec(), 1).unwrap();
        }
        s
    }

    #[test]
    fn store_indexes_both_orientations() {
        let (_, store, _) = setup();
        let ids: Vec<&str> = store
            .sentences_for(&w("ja", "x"), &w("en", "a"))
            .iter()
            .map(|p| p.id.as_str())
            .collect();
        assert_eq!(ids, ["s1", "s2", "s3"]);
    }

    #[test]
    fn weights_follow_counts_and_distance() {
        let (net, store, _) = setup();
        let s = state(
            &net,
            &[
                ("ja", "x", [0.0, 0.0]),
                ("en", "b", [2.0, 0.0]),
                ("ja", "y", [2.0, 0.0]),
            ],
        );
        let ws = edge_weights(&s, &net, &PairSpec::parse("en-ja").unwrap(), &store, 0.5);
        assert_eq!(ws.len(), 2);
        // a-x: c = 3 at the center; b-y: c = 2 at distance 2
        let expect = [3.0, 2.0 * 0.25];
        let total: f64 = expect.iter().sum();
        for (got, e) in ws.iter().zip(expect) {
            assert!((got.weight - e / total).abs() < 1e-12);
        }
    }

    #[test]
    fn far_edges_get_no_mass() {
        let (net, store, _) = setup();
        let s = state(
            &net,
            &[
                ("ja", "x", [0.0, 0.0]),
                ("en", "b", [1e6, 0.0]),
                ("ja", "y", [1e6, 0.0]),
            ],
        );
        let ws = edge_weights(&s, &net, &PairSpec::parse("en-ja").unwrap(), &store, 0.8);
        assert_eq!(ws[0].weight, 1.0);
        assert_eq!(ws[1].weight, 0.0);
    }

    #[test]
    fn explicit_edge_bypasses_sampling() {
        let (net, store, _) = setup();
        let s = state(
            &net,
            &[
                ("ja", "x", [0.0, 0.0]),
                ("en", "b", [1.0, 0.0]),
                ("ja", "y", [1.0, 0.0]),
            ],
        );
        let req = ExampleRequest {
            n: 10,
            edge: Some((w("ja", "y"), w("en", "b"))),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let batch = sample_examples(
            &s,
            &net,
            &PairSpec::parse("en-ja").unwrap(),
            &store,
            0.8,
            &req,
            &mut rng,
        )
        .unwrap();
        assert_eq!(batch.examples.len(), 10);
        for ex in &batch.examples {
            assert_eq!((ex.u.clone(), ex.v.clone()), (w("en", "b"), w("ja", "y")));
            assert!(["s1", "s4"].contains(&ex.pair.id.as_str()));
        }
    }

    #[test]
    fn errors() {
        let (net, store, _) = setup();
        let pairs = PairSpec::parse("en-ja").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let lone = state(&net, &[]);
        let req = ExampleRequest { n: 1, edge: None };
        assert_eq!(
            sample_examples(&lone, &net, &pairs, &store, 0.8, &req, &mut rng).unwrap_err(),
            SampleError::NoExamples
        );
        let req = ExampleRequest {
            n: 1,
            edge: Some((w("en", "a"), w("ja", "x"))),
        };
        assert!(matches!(
            sample_examples(&lone, &net, &pairs, &store, 0.8, &req, &mut rng),
            Err(SampleError::EdgeNotActive { .. })
        ));
        let req = ExampleRequest { n: 0, edge: None };
        assert_eq!(
            sample_examples(&lone, &net, &pairs, &store, 0.8, &req, &mut rng).unwrap_err(),
            SampleError::InvalidCount
        );
    }
}
