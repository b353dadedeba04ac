//! A serializable picture of a session's active words and springs.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::lang::{Lang, PairSpec, WordId};
use crate::network::LangueNetwork;
use crate::space::{
    compute_charges_springs, Energy, FrozenField, SolverConfig, SpaceError, SpaceState, Spring,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotWord {
    pub lang: Lang,
    pub word: String,
    pub x: Vec<f64>,
    /// Charge `q`.
    pub q: f64,
    /// Residence time `t`.
    pub t: u32,
    /// Corpus occurrence count.
    pub count: u64,
}

impl SnapshotWord {
    pub fn id(&self) -> WordId {
        WordId::new(self.lang.clone(), self.word.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEdge {
    pub u: WordId,
    pub v: WordId,
    pub c: u64,
    pub kbar: f64,
    pub k: f64,
    /// `k |x_u - x_v|^2`.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub dim: usize,
    pub round: u64,
    pub pinned: WordId,
    pub pairs: PairSpec,
    pub config: SolverConfig,
    /// `C`; absent when no weighted translation edge is active.
    pub charge_scale: Option<f64>,
    pub words: Vec<SnapshotWord>,
    pub edges: Vec<SnapshotEdge>,
    pub energy: Energy,
}

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed snapshot: {0}")]
    Json(#[from] serde_json::Error),
    #[error("edge references unknown word {0}")]
    UnknownWord(WordId),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

impl Snapshot {
    /// Captures `state` with charges and springs recomputed for its current
    /// positions and residence times.
    pub fn capture(
        state: &SpaceState,
        network: &LangueNetwork,
        pairs: &PairSpec,
        config: &SolverConfig,
        round: u64,
    ) -> Result<Self, SpaceError> {
        let mut state = state.clone();
        match compute_charges_springs(&mut state, network, pairs, config) {
            Ok(()) => {}
            Err(SpaceError::DegenerateScale) => state.clear_forces(),
            Err(e) => return Err(e),
        }
        let degenerate = state.charge_scale().is_none();
        let words: Vec<SnapshotWord> = state
            .iter()
            .map(|(w, a)| SnapshotWord {
                lang: w.lang.clone(),
                word: w.word.clone(),
                x: a.x.clone(),
                q: a.charge,
                t: a.residence,
                count: network.occurrence(a.node()),
            })
            .collect();
        let edges = if degenerate {
            Vec::new()
        } else {
            state
                .springs()
                .iter()
                .map(|s| {
                    let d2 = sq_dist(&state.get(&s.u).unwrap().x, &state.get(&s.v).unwrap().x);
                    SnapshotEdge {
                        u: s.u.clone(),
                        v: s.v.clone(),
                        c: s.count,
                        kbar: s.kbar,
                        k: s.k,
                        energy: s.k * d2,
                    }
                })
                .collect()
        };
        let mut snap = Snapshot {
            dim: state.dim(),
            round,
            pinned: state.pinned().clone(),
            pairs: pairs.clone(),
            config: config.clone(),
            charge_scale: state.charge_scale(),
            words,
            edges,
            energy: Energy::default(),
        };
        snap.energy = snap.recompute_energy()?;
        Ok(snap)
    }

    /// The frozen field described by the snapshot's own charges and springs.
    pub fn field(&self) -> Result<FrozenField, SnapshotError> {
        let mut langs: HashMap<&Lang, usize> = HashMap::new();
        let mut index: HashMap<WordId, usize> = HashMap::new();
        let mut groups = Vec::with_capacity(self.words.len());
        for (i, w) in self.words.iter().enumerate() {
            let next = langs.len();
            groups.push(*langs.entry(&w.lang).or_insert(next));
            index.insert(w.id(), i);
        }
        let lookup = |w: &WordId| {
            index
                .get(w)
                .copied()
                .ok_or_else(|| SnapshotError::UnknownWord(w.clone()))
        };
        let springs = self
            .edges
            .iter()
            .map(|e| {
                Ok(Spring {
                    a: lookup(&e.u)?,
                    b: lookup(&e.v)?,
                    k: e.k,
                })
            })
            .collect::<Result<Vec<_>, SnapshotError>>()?;
        let charges = self.words.iter().map(|w| w.q).collect();
        let pinned = index.get(&self.pinned).copied();
        Ok(FrozenField::new(
            self.dim,
            groups,
            charges,
            springs,
            pinned,
            self.config.delta,
        )?)
    }

    /// `E_total` evaluated on the snapshot's coordinates, charges and springs.
    pub fn recompute_energy(&self) -> Result<Energy, SpaceError> {
        let field = self.field().map_err(|e| match e {
            SnapshotError::Space(s) => s,
            other => SpaceError::InvalidConfig(other.to_string()),
        })?;
        let x: Vec<f64> = self
            .words
            .iter()
            .flat_map(|w| w.x.iter().copied())
            .collect();
        Ok(field.energy(&x))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("snapshots serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, SnapshotError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SnapshotError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SnapshotError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn word(&self, id: &WordId) -> Option<&SnapshotWord> {
        self.words
            .iter()
            .find(|w| w.lang == id.lang && w.word == id.word)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TranslationCountTable;

    fn l(s: &str) -> Lang {
        Lang::new(s).unwrap()
    }

    fn w(lang: &str, word: &str) -> WordId {
        WordId::new(l(lang), word)
    }

    fn fixture() -> (LangueNetwork, SpaceState) {
        let mut t = TranslationCountTable::new(l("en"), l("ja"));
        for (u, v, c) in [("a", "x", 4), ("a", "y", 1), ("b", "y", 2)] {
            t.add_pair(u, v, c);
            t.add_source_occurrence(u, c);
            t.add_target_occurrence(v, c);
        }
        let net = LangueNetwork::build(&[t]).unwrap();
        let mut s = SpaceState::new(&net, w("en", "a"), 2, 2).unwrap();
        s.insert(&net, w("ja", "x"), vec![0.5, 0.0], 2).unwrap();
        s.insert(&net, w("ja", "y"), vec![-0.5, 0.5], 1).unwrap();
        s.insert(&net, w("en", "b"), vec![0.0, 1.0], 3).unwrap();
        (net, s)
    }

    /// Energy straight from the definitions, using only snapshot fields.
    fn oracle_energy(s: &Snapshot) -> f64 {
        let dist = |a: &[f64], b: &[f64]| sq_dist(a, b).sqrt();
        let mut rep = 0.0;
        for (i, a) in s.words.iter().enumerate() {
            for b in &s.words[i + 1..] {
                if a.lang == b.lang {
                    rep += a.q * b.q / dist(&a.x, &b.x).max(s.config.delta);
                }
            }
        }
        let att: f64 = s
            .edges
            .iter()
            .map(|e| {
                let xu = &s.word(&e.u).unwrap().x;
                let xv = &s.word(&e.v).unwrap().x;
                e.k * sq_dist(xu, xv)
            })
            .sum();
        rep + att
    }

    #[test]
    fn capture_reports_consistent_energy() {
        let (net, state) = fixture();
        let pairs = PairSpec::parse("en-ja").unwrap();
        let snap = Snapshot::capture(&state, &net, &pairs, &SolverConfig::default(), 4).unwrap();
        assert_eq!(snap.words.len(), 4);
        assert_eq!(snap.edges.len(), 3);
        let oracle = oracle_energy(&snap);
        assert!((snap.energy.total - oracle).abs() < 1e-12 * oracle.max(1.0));
        let edge_sum: f64 = snap.edges.iter().map(|e| e.energy).sum();
        assert!((snap.energy.att - edge_sum).abs() < 1e-12);
        assert_eq!(snap.word(&w("ja", "x")).unwrap().count, 4);
        assert_eq!(snap.word(&w("en", "b")).unwrap().t, 3);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let (net, state) = fixture();
        let pairs = PairSpec::parse("en-ja").unwrap();
        let snap = Snapshot::capture(&state, &net, &pairs, &SolverConfig::default(), 0).unwrap();
        let text = snap.to_json();
        let back = Snapshot::from_json(&text).unwrap();
        assert_eq!(back, snap);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn degenerate_state_has_no_forces() {
        let (net, _) = fixture();
        let mut s = SpaceState::new(&net, w("en", "a"), 2, 0).unwrap();
        s.insert(&net, w("ja", "x"), vec![0.5, 0.0], 0).unwrap();
        let pairs = PairSpec::parse("en-ja").unwrap();
        let snap = Snapshot::capture(&s, &net, &pairs, &SolverConfig::default(), 0).unwrap();
        assert!(snap.edges.is_empty());
        assert!(snap.words.iter().all(|w| w.q == 0.0));
        assert_eq!(snap.energy.total, 0.0);
        assert_eq!(snap.charge_scale, None);
    }
}
