//! The exploration loop: settle the coordinates, then grow the active set
//! from words near the center and prune words that drifted away.
//!
//! Every change is recorded as an [`Event`]; replaying the log with
//! [`Replay`] reconstructs the active set and coordinates bit for bit.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lang::{PairSpec, WordId};
use crate::network::{LangueNetwork, NetworkError};
use crate::space::{
    self, initial_coordinate, norm, Energy, RoundOutcome, SolverConfig, SpaceError, SpaceState,
};

/// Step-size halvings tried when a round produces non-finite coordinates.
const MAX_STEP_RETRIES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExplorerError {
    #[error("unknown word {0}")]
    UnknownWord(WordId),
    #[error("language pair has no counts: {0}")]
    EmptyPair(NetworkError),
    #[error("{0} is not active in this session")]
    NotActive(WordId),
    #[error("event log gap: expected seq {expected}, got {got}")]
    SeqGap { expected: u64, got: u64 },
    #[error("event log is inconsistent: {0}")]
    InconsistentLog(String),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordCoord {
    #[serde(flatten)]
    pub word: WordId,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// New coordinates for every word that moved during the round.
    CoordsUpdated {
        coords: Vec<WordCoord>,
        converged: bool,
        iterations: usize,
        energy: Energy,
    },
    WordAdded {
        word: WordId,
        x: Vec<f64>,
        residence: u32,
    },
    WordRemoved {
        word: WordId,
    },
    /// `word` is pinned and every coordinate was shifted by `-offset`.
    Recentered {
        word: WordId,
        offset: Vec<f64>,
    },
    /// The round converged; every active word's residence time grew by one.
    Converged,
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::CoordsUpdated { .. } => "coords_updated",
            EventKind::WordAdded { .. } => "word_added",
            EventKind::WordRemoved { .. } => "word_removed",
            EventKind::Recentered { .. } => "recentered",
            EventKind::Converged => "converged",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    /// Starts at 1 and increases by one per event.
    pub seq: u64,
    /// The step that emitted the event; 0 for session start.
    pub round: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl Event {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("events serialize")
    }
}

/// Writes events as JSON lines.
pub fn write_jsonl<'a>(events: impl IntoIterator<Item = &'a Event>) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_json());
        out.push('\n');
    }
    out
}

pub fn read_jsonl(text: &str) -> Result<Vec<Event>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Settling,
    /// Enough consecutive converged rounds without additions or removals.
    Steady,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    /// Seeds the placement jitter of new words.
    pub rng_seed: u64,
    /// Converged rounds without changes before the session counts as steady.
    pub idle_rounds: u32,
}

impl Default for SessionOptions {
    fn default() -> Self {
        SessionOptions {
            rng_seed: 0,
            idle_rounds: 3,
        }
    }
}

/// What the add/prune phase of one step did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expansion {
    pub parents: BTreeSet<WordId>,
    pub added: Option<WordId>,
    pub removed: Vec<WordId>,
}

pub struct ExplorationSession {
    id: String,
    network: Arc<LangueNetwork>,
    pairs: PairSpec,
    config: SolverConfig,
    options: SessionOptions,
    state: SpaceState,
    phase: Phase,
    events: Vec<Event>,
    round: u64,
    idle: u32,
    last_expansion: Expansion,
}

impl std::fmt::Debug for ExplorationSession {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExplorationSession")
            .field("id", &self.id)
            .field("pairs", &self.pairs)
            .field("pinned", self.state.pinned())
            .field("active", &self.state.len())
            .field("round", &self.round)
            .field("phase", &self.phase)
            .finish()
    }
}

impl ExplorationSession {
    /// Starts from `seed` plus its immediate neighbors under `pairs`.
    ///
    /// All of them start with a residence time of 1 so the first round has
    /// non-zero weights. The seed is pinned at the origin and its neighbors
    /// are placed around it by [`initial_coordinate`].
    pub fn start(
        id: impl Into<String>,
        seed: WordId,
        pairs: PairSpec,
        network: Arc<LangueNetwork>,
        config: SolverConfig,
        options: SessionOptions,
    ) -> Result<Self, ExplorerError> {
        config.validate()?;
        if !network.contains(&seed) {
            return Err(ExplorerError::UnknownWord(seed));
        }
        network
            .check_pairs(&pairs)
            .map_err(ExplorerError::EmptyPair)?;

        let state = SpaceState::new(&network, seed.clone(), config.dim, 1)?;
        let mut session = ExplorationSession {
            id: id.into(),
            network,
            pairs,
            config,
            options,
            state,
            phase: Phase::Settling,
            events: Vec::new(),
            round: 0,
            idle: 0,
            last_expansion: Expansion::default(),
        };
        session.emit(EventKind::WordAdded {
            word: seed.clone(),
            x: vec![0.0; session.config.dim],
            residence: 1,
        });

        let neighbors = session.network.neighbors(&seed, &session.pairs);
        let placed = neighbors
            .iter()
            .map(|n| {
                initial_coordinate(
                    n,
                    &session.state,
                    &session.network,
                    &session.pairs,
                    &session.config,
                    session.options.rng_seed,
                )
                .map(|x| (n.clone(), x))
            })
            .collect::<Result<Vec<_>, _>>()?;
        for (word, x) in placed {
            session
                .state
                .insert(&session.network, word.clone(), x.clone(), 1)?;
            session.emit(EventKind::WordAdded {
                word,
                x,
                residence: 1,
            });
        }
        session.emit(EventKind::Recentered {
            word: seed,
            offset: vec![0.0; session.config.dim],
        });
        if neighbors.is_empty() {
            session.phase = Phase::Steady;
        }
        Ok(session)
    }

    /// Rebuilds a session from its event log.
    pub fn resume(
        id: impl Into<String>,
        pairs: PairSpec,
        network: Arc<LangueNetwork>,
        config: SolverConfig,
        options: SessionOptions,
        events: Vec<Event>,
    ) -> Result<Self, ExplorerError> {
        config.validate()?;
        let replay = Replay::from_events(config.dim, &events)?;
        let pinned = replay
            .pinned
            .clone()
            .ok_or_else(|| ExplorerError::InconsistentLog("no pinned word".into()))?;
        let pin = &replay.words[&pinned];
        let mut state = SpaceState::new(&network, pinned.clone(), config.dim, pin.residence)
            .map_err(|_| ExplorerError::UnknownWord(pinned.clone()))?;
        for (w, r) in replay.words.iter().filter(|(w, _)| *w != &pinned) {
            state
                .insert(&network, w.clone(), r.x.clone(), r.residence)
                .map_err(|_| ExplorerError::UnknownWord(w.clone()))?;
        }
        Ok(ExplorationSession {
            id: id.into(),
            network,
            pairs,
            config,
            options,
            state,
            phase: Phase::Settling,
            events,
            round: replay.round,
            idle: 0,
            last_expansion: Expansion::default(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn pairs(&self) -> &PairSpec {
        &self.pairs
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn options(&self) -> &SessionOptions {
        &self.options
    }

    pub fn network(&self) -> &Arc<LangueNetwork> {
        &self.network
    }

    pub fn state(&self) -> &SpaceState {
        &self.state
    }

    /// Mutable access for building fixtures; bypasses the event log.
    #[doc(hidden)]
    pub fn state_mut(&mut self) -> &mut SpaceState {
        &mut self.state
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Events with `seq > after`.
    pub fn events_after(&self, after: u64) -> &[Event] {
        let start = self.events.partition_point(|e| e.seq <= after);
        &self.events[start..]
    }

    pub fn last_seq(&self) -> u64 {
        self.events.last().map_or(0, |e| e.seq)
    }

    /// The parents, addition and removals of the most recent converged step.
    pub fn last_expansion(&self) -> &Expansion {
        &self.last_expansion
    }

    fn emit(&mut self, kind: EventKind) -> Event {
        let event = Event {
            seq: self.last_seq() + 1,
            round: self.round,
            kind,
        };
        self.events.push(event.clone());
        event
    }

    fn settle(&mut self) -> Result<RoundOutcome, ExplorerError> {
        let backup = self.state.clone();
        let mut step = self.config.step;
        for _ in 0..MAX_STEP_RETRIES {
            match space::update_coordinates_with_step(
                &mut self.state,
                &self.network,
                &self.pairs,
                &self.config,
                step,
            ) {
                Ok(outcome) => return Ok(outcome),
                Err(SpaceError::NonFiniteCoordinate) => {
                    self.state = backup.clone();
                    step *= 0.5;
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(SpaceError::NonFiniteCoordinate.into())
    }

    /// One pass of the loop body: update coordinates and, if they converged,
    /// add the best candidate and prune. Returns the events it emitted.
    pub fn step(&mut self) -> Result<Vec<Event>, ExplorerError> {
        self.round += 1;
        let first = self.events.len();
        let before: BTreeMap<WordId, Vec<f64>> = self
            .state
            .iter()
            .map(|(w, a)| (w.clone(), a.x.clone()))
            .collect();
        let outcome = self.settle()?;
        let coords = self
            .state
            .iter()
            .filter(|(w, a)| before.get(*w) != Some(&a.x))
            .map(|(w, a)| WordCoord {
                word: w.clone(),
                x: a.x.clone(),
            })
            .collect();
        self.emit(EventKind::CoordsUpdated {
            coords,
            converged: outcome.converged,
            iterations: outcome.iterations,
            energy: outcome.energy,
        });
        if outcome.converged {
            self.emit(EventKind::Converged);
            let expansion = self.expand_and_prune()?;
            let changed = expansion.added.is_some() || !expansion.removed.is_empty();
            if changed {
                self.idle = 0;
                self.phase = Phase::Settling;
            } else {
                self.idle += 1;
                if self.idle >= self.options.idle_rounds {
                    self.phase = Phase::Steady;
                }
            }
        }
        Ok(self.events[first..].to_vec())
    }

    fn candidate_norms(
        &self,
        parents: &BTreeSet<usize>,
    ) -> Result<Option<(WordId, Vec<f64>)>, ExplorerError> {
        let net = &self.network;
        let candidates: BTreeSet<usize> = parents
            .iter()
            .flat_map(|&p| net.neighbor_indices(p, &self.pairs).map(|(n, _)| n))
            .filter(|&n| !self.state.contains(net.word(n)))
            .collect();
        let mut best: Option<(f64, WordId, Vec<f64>)> = None;
        // node order is WordId order, so the first minimum wins ties lexicographically
        for n in candidates {
            let word = net.word(n);
            let x = initial_coordinate(
                word,
                &self.state,
                net,
                &self.pairs,
                &self.config,
                self.options.rng_seed,
            )?;
            let r = norm(&x);
            if best.as_ref().is_none_or(|(b, _, _)| r < *b) {
                best = Some((r, word.clone(), x));
            }
        }
        Ok(best.map(|(_, w, x)| (w, x)))
    }

    fn connected_to(&self, word: &WordId, parents: &BTreeSet<usize>) -> bool {
        let node = self.state.get(word).expect("active word").node();
        parents.contains(&node)
            || self
                .network
                .neighbor_indices(node, &self.pairs)
                .any(|(n, _)| parents.contains(&n))
    }

    fn remove_word(
        &mut self,
        word: &WordId,
        removed: &mut Vec<WordId>,
    ) -> Result<(), ExplorerError> {
        self.state.remove(word)?;
        self.emit(EventKind::WordRemoved { word: word.clone() });
        removed.push(word.clone());
        Ok(())
    }

    /// The add/prune phase run after a converged round.
    ///
    /// 1. Parents are the active words within `r_par` of the origin.
    /// 2. Of the inactive words linked to a parent, the one whose initial
    ///    coordinate lies closest to the origin is added (ties go to the
    ///    smaller `(lang, word)`).
    /// 3. Words that are neither parents nor linked to one are removed.
    /// 4. While more than `n_max` words are active the farthest from the
    ///    origin is removed (ties go to the larger `(lang, word)`).
    /// 5. Should step 4 have removed a parent, words left without a link to
    ///    a remaining parent are removed as well.
    pub fn expand_and_prune(&mut self) -> Result<Expansion, ExplorerError> {
        let r_par = self.config.r_par;
        let parent_words: BTreeSet<WordId> = self
            .state
            .iter()
            .filter(|(_, a)| norm(&a.x) <= r_par)
            .map(|(w, _)| w.clone())
            .collect();
        let mut parents: BTreeSet<usize> = parent_words
            .iter()
            .map(|w| self.state.get(w).unwrap().node())
            .collect();

        let mut expansion = Expansion {
            parents: parent_words,
            ..Expansion::default()
        };

        if let Some((word, x)) = self.candidate_norms(&parents)? {
            self.state
                .insert(&self.network, word.clone(), x.clone(), 0)?;
            self.emit(EventKind::WordAdded {
                word: word.clone(),
                x,
                residence: 0,
            });
            expansion.added = Some(word);
        }

        let orphans: Vec<WordId> = self
            .state
            .iter()
            .map(|(w, _)| w.clone())
            .filter(|w| !self.connected_to(w, &parents))
            .collect();
        for w in orphans {
            self.remove_word(&w, &mut expansion.removed)?;
        }

        let mut dropped_parent = false;
        while self.state.len() > self.config.n_max {
            let pinned = self.state.pinned().clone();
            let farthest = self
                .state
                .iter()
                .filter(|(w, _)| **w != pinned)
                .map(|(w, a)| (norm(&a.x), w.clone()))
                .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
            let Some((_, w)) = farthest else { break };
            let node = self.state.get(&w).unwrap().node();
            dropped_parent |= parents.remove(&node);
            self.remove_word(&w, &mut expansion.removed)?;
        }

        if dropped_parent {
            loop {
                let orphans: Vec<WordId> = self
                    .state
                    .iter()
                    .map(|(w, _)| w.clone())
                    .filter(|w| !self.connected_to(w, &parents))
                    .collect();
                if orphans.is_empty() {
                    break;
                }
                for w in orphans {
                    self.remove_word(&w, &mut expansion.removed)?;
                }
            }
        }

        self.last_expansion = expansion.clone();
        Ok(expansion)
    }

    /// Pins `word` and shifts the whole configuration so it sits at the origin.
    pub fn recenter(&mut self, word: &WordId) -> Result<Vec<Event>, ExplorerError> {
        if !self.state.contains(word) {
            return Err(ExplorerError::NotActive(word.clone()));
        }
        let offset = self.state.recenter(word)?;
        let event = self.emit(EventKind::Recentered {
            word: word.clone(),
            offset,
        });
        self.phase = Phase::Settling;
        self.idle = 0;
        Ok(vec![event])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayWord {
    pub x: Vec<f64>,
    pub residence: u32,
}

/// Rebuilds the active set from an event log.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub dim: usize,
    pub words: BTreeMap<WordId, ReplayWord>,
    pub pinned: Option<WordId>,
    pub last_seq: u64,
    pub round: u64,
}

impl Replay {
    pub fn new(dim: usize) -> Self {
        Replay {
            dim,
            words: BTreeMap::new(),
            pinned: None,
            last_seq: 0,
            round: 0,
        }
    }

    pub fn from_events<'a>(
        dim: usize,
        events: impl IntoIterator<Item = &'a Event>,
    ) -> Result<Self, ExplorerError> {
        let mut r = Replay::new(dim);
        for e in events {
            r.apply(e)?;
        }
        Ok(r)
    }

    pub fn apply(&mut self, event: &Event) -> Result<(), ExplorerError> {
        if event.seq != self.last_seq + 1 {
            return Err(ExplorerError::SeqGap {
                expected: self.last_seq + 1,
                got: event.seq,
            });
        }
        let bad = |m: String| ExplorerError::InconsistentLog(m);
        match &event.kind {
            EventKind::CoordsUpdated { coords, .. } => {
                for c in coords {
                    let w = self
                        .words
                        .get_mut(&c.word)
                        .ok_or_else(|| bad(format!("coords for inactive {}", c.word)))?;
                    w.x = c.x.clone();
                }
            }
            EventKind::WordAdded { word, x, residence } => {
                let prev = self.words.insert(
                    word.clone(),
                    ReplayWord {
                        x: x.clone(),
                        residence: *residence,
                    },
                );
                if prev.is_some() {
                    return Err(bad(format!("{word} added twice")));
                }
            }
            EventKind::WordRemoved { word } => {
                self.words
                    .remove(word)
                    .ok_or_else(|| bad(format!("removing inactive {word}")))?;
            }
            EventKind::Recentered { word, offset } => {
                if !self.words.contains_key(word) {
                    return Err(bad(format!("recentering on inactive {word}")));
                }
                for (w, r) in self.words.iter_mut() {
                    if w == word {
                        r.x.iter_mut().for_each(|v| *v = 0.0);
                    } else {
                        for (v, o) in r.x.iter_mut().zip(offset) {
                            *v -= o;
                        }
                    }
                }
                self.pinned = Some(word.clone());
            }
            EventKind::Converged => {
                for r in self.words.values_mut() {
                    r.residence = r.residence.saturating_add(1);
                }
            }
        }
        self.last_seq = event.seq;
        self.round = event.round;
        Ok(())
    }

    pub fn coords(&self) -> BTreeMap<WordId, Vec<f64>> {
        self.words
            .iter()
            .map(|(w, r)| (w.clone(), r.x.clone()))
            .collect()
    }
}

#[cfg(test)]
mod tests;
