//! The word space: charges, springs and coordinates for the active word set.
//!
//! Words of one language repel like charges, translation pairs attract like
//! springs. Charges and spring constants are rebuilt from the counts at the
//! start of every round, weighted by how long a word has been active and how
//! close it sits to the pinned center, then held fixed while the coordinates
//! descend the energy.

mod config;
mod field;

pub use config::{SolverConfig, DEFAULT_CONFIG_TOML};
pub use field::{att_energy, rep_energy, Descent, Energy, FrozenField, Relaxation, Spring};

use std::collections::{BTreeMap, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::lang::{Lang, PairSpec, WordId};
use crate::network::{LangueNetwork, NetworkError};

pub use field::norm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("charge scale is undefined: no weighted translation edge among active words")]
    DegenerateScale,
    #[error("a coordinate became non-finite")]
    NonFiniteCoordinate,
    #[error("{0} has no active translation neighbor")]
    NoActiveNeighbor(WordId),
    #[error("{0} is not in the network")]
    UnknownWord(WordId),
    #[error("{0} is not active")]
    NotActive(WordId),
    #[error("{0} is already active")]
    AlreadyActive(WordId),
    #[error("the pinned word {0} cannot be removed")]
    PinnedRemoval(WordId),
    #[error("expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("spring {0}-{1} does not join two languages")]
    InvalidSpring(usize, usize),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// `(1 - alpha_t^t) * alpha_x^|x|`.
pub fn weight_p(residence: u32, x: &[f64], config: &SolverConfig) -> f64 {
    let p_t = 1.0 - config.alpha_t.powi(residence as i32);
    let p_x = config.alpha_x.powf(norm(x));
    p_t * p_x
}

/// `f(c) = c^gamma`.
pub fn damp(c: f64, gamma: f64) -> f64 {
    c.powf(gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveWord {
    #[serde(skip)]
    node: usize,
    pub x: Vec<f64>,
    /// Converged rounds since the word became active.
    pub residence: u32,
    /// Cached charge `q_u`.
    pub charge: f64,
}

impl ActiveWord {
    pub fn node(&self) -> usize {
        self.node
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedSpring {
    pub u: WordId,
    pub v: WordId,
    /// Symmetrized translation count.
    pub count: u64,
    /// Unweighted spring constant `f(c_bar) / C`.
    pub kbar: f64,
    /// `kbar * p_u * p_v`.
    pub k: f64,
}

/// Active words, their coordinates, residence times and cached charges/springs.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceState {
    dim: usize,
    words: BTreeMap<WordId, ActiveWord>,
    pinned: WordId,
    springs: Vec<CachedSpring>,
    scale: Option<f64>,
}

impl SpaceState {
    /// A state holding only `pinned`, at the origin.
    pub fn new(
        network: &LangueNetwork,
        pinned: WordId,
        dim: usize,
        residence: u32,
    ) -> Result<Self, SpaceError> {
        let node = network
            .index_of(&pinned)
            .ok_or_else(|| SpaceError::UnknownWord(pinned.clone()))?;
        let mut words = BTreeMap::new();
        words.insert(
            pinned.clone(),
            ActiveWord {
                node,
                x: vec![0.0; dim],
                residence,
                charge: 0.0,
            },
        );
        Ok(SpaceState {
            dim,
            words,
            pinned,
            springs: Vec::new(),
            scale: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn pinned(&self) -> &WordId {
        &self.pinned
    }

    pub fn contains(&self, word: &WordId) -> bool {
        self.words.contains_key(word)
    }

    pub fn get(&self, word: &WordId) -> Option<&ActiveWord> {
        self.words.get(word)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&WordId, &ActiveWord)> {
        self.words.iter()
    }

    pub fn springs(&self) -> &[CachedSpring] {
        &self.springs
    }

    /// The normalizing divisor `C` from the last charge computation.
    pub fn charge_scale(&self) -> Option<f64> {
        self.scale
    }

    pub fn insert(
        &mut self,
        network: &LangueNetwork,
        word: WordId,
        x: Vec<f64>,
        residence: u32,
    ) -> Result<(), SpaceError> {
        if x.len() != self.dim {
            return Err(SpaceError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if self.words.contains_key(&word) {
            return Err(SpaceError::AlreadyActive(word));
        }
        let node = network
            .index_of(&word)
            .ok_or_else(|| SpaceError::UnknownWord(word.clone()))?;
        self.words.insert(
            word,
            ActiveWord {
                node,
                x,
                residence,
                charge: 0.0,
            },
        );
        Ok(())
    }

    pub fn remove(&mut self, word: &WordId) -> Result<ActiveWord, SpaceError> {
        if word == &self.pinned {
            return Err(SpaceError::PinnedRemoval(word.clone()));
        }
        let removed = self
            .words
            .remove(word)
            .ok_or_else(|| SpaceError::NotActive(word.clone()))?;
        self.springs.retain(|s| &s.u != word && &s.v != word);
        Ok(removed)
    }

    /// Overwrites one word's coordinates. The pinned word stays at the origin.
    pub fn set_coords(&mut self, word: &WordId, x: Vec<f64>) -> Result<(), SpaceError> {
        if x.len() != self.dim {
            return Err(SpaceError::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let w = self
            .words
            .get_mut(word)
            .ok_or_else(|| SpaceError::NotActive(word.clone()))?;
        if word != &self.pinned {
            w.x = x;
        }
        Ok(())
    }

    /// Pins `word` and translates every coordinate by `-x_word`. Returns the offset.
    pub fn recenter(&mut self, word: &WordId) -> Result<Vec<f64>, SpaceError> {
        let offset = self
            .words
            .get(word)
            .ok_or_else(|| SpaceError::NotActive(word.clone()))?
            .x
            .clone();
        for (w, a) in self.words.iter_mut() {
            if w == word {
                a.x.iter_mut().for_each(|v| *v = 0.0);
            } else {
                for (v, o) in a.x.iter_mut().zip(&offset) {
                    *v -= o;
                }
            }
        }
        self.pinned = word.clone();
        Ok(offset)
    }

    pub fn increment_residence(&mut self) {
        for a in self.words.values_mut() {
            a.residence = a.residence.saturating_add(1);
        }
    }

    pub(crate) fn clear_forces(&mut self) {
        for a in self.words.values_mut() {
            a.charge = 0.0;
        }
        self.springs.clear();
        self.scale = None;
    }

    /// Flat coordinates in word order.
    pub fn flat_coords(&self) -> Vec<f64> {
        self.words
            .values()
            .flat_map(|a| a.x.iter().copied())
            .collect()
    }

    fn write_flat_coords(&mut self, x: &[f64]) {
        let dim = self.dim;
        for (i, (w, a)) in self.words.iter_mut().enumerate() {
            if w != &self.pinned {
                a.x.copy_from_slice(&x[i * dim..(i + 1) * dim]);
            }
        }
    }

    /// The cached charges and springs as a frozen field over words in `BTreeMap` order.
    pub fn frozen_field(&self, delta: f64) -> Result<FrozenField, SpaceError> {
        let mut lang_ids: HashMap<&Lang, usize> = HashMap::new();
        let mut positions: HashMap<&WordId, usize> = HashMap::new();
        let mut groups = Vec::with_capacity(self.len());
        let mut charges = Vec::with_capacity(self.len());
        let mut pinned = None;
        for (i, (w, a)) in self.words.iter().enumerate() {
            let next = lang_ids.len();
            groups.push(*lang_ids.entry(&w.lang).or_insert(next));
            charges.push(a.charge);
            positions.insert(w, i);
            if w == &self.pinned {
                pinned = Some(i);
            }
        }
        let springs = self
            .springs
            .iter()
            .map(|s| Spring {
                a: positions[&s.u],
                b: positions[&s.v],
                k: s.k,
            })
            .collect();
        FrozenField::new(self.dim, groups, charges, springs, pinned, delta)
    }
}

/// Rebuilds the cached charges `q_u` and springs `k_uv` from the counts and
/// the current positions and residence times.
///
/// The divisor `C` is the `p_s p_t`-weighted mean of `f(c_bar_st)` over all
/// cross-language word pairs `(s, t)` of the active set whose language pair is
/// in `pairs`. Fails with `DegenerateScale` (leaving the caches untouched) if
/// that mean is undefined or zero.
pub fn compute_charges_springs(
    state: &mut SpaceState,
    network: &LangueNetwork,
    pairs: &PairSpec,
    config: &SolverConfig,
) -> Result<(), SpaceError> {
    let entries: Vec<(&WordId, &ActiveWord)> = state.words.iter().collect();
    let n = entries.len();

    let mut langs: Vec<&Lang> = entries.iter().map(|(w, _)| &w.lang).collect();
    langs.sort();
    langs.dedup();
    let lang_idx: Vec<usize> = entries
        .iter()
        .map(|(w, _)| langs.binary_search(&&w.lang).unwrap())
        .collect();
    let allowed: Vec<Vec<bool>> = langs
        .iter()
        .map(|a| langs.iter().map(|b| pairs.contains(a, b)).collect())
        .collect();

    let weights: Vec<f64> = entries
        .iter()
        .map(|(_, a)| weight_p(a.residence, &a.x, config))
        .collect();

    // `num` accumulates f / f_ref so that equal counts give C = f_ref exactly.
    let mut f_ref = None;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !allowed[lang_idx[i]][lang_idx[j]] {
                continue;
            }
            let pp = weights[i] * weights[j];
            den += pp;
            let (ni, nj) = (entries[i].1.node, entries[j].1.node);
            let count = network.edge_count(ni, nj);
            if count > 0 {
                let f = damp(network.normalized_pair_count_idx(ni, nj)?, config.gamma);
                let r = *f_ref.get_or_insert(f);
                num += pp * (f / r);
                edges.push((i, j, count, f));
            }
        }
    }
    if !(den > 0.0 && num > 0.0 && f_ref.is_some_and(|f| f > 0.0)) {
        return Err(SpaceError::DegenerateScale);
    }
    let scale = f_ref.unwrap_or(0.0) * (num / den);

    let charges: Vec<f64> = entries
        .iter()
        .zip(&weights)
        .map(|((_, a), p)| {
            let cu = network.normalized_word_count_idx(a.node, pairs)?;
            Ok(damp(cu, config.gamma) / scale * p)
        })
        .collect::<Result<_, SpaceError>>()?;
    let springs: Vec<CachedSpring> = edges
        .into_iter()
        .map(|(i, j, count, f)| {
            let kbar = f / scale;
            CachedSpring {
                u: entries[i].0.clone(),
                v: entries[j].0.clone(),
                count,
                kbar,
                k: kbar * weights[i] * weights[j],
            }
        })
        .collect();

    for (a, q) in state.words.values_mut().zip(charges) {
        a.charge = q;
    }
    state.springs = springs;
    state.scale = Some(scale);
    Ok(())
}

/// Energy of the current coordinates under the cached charges and springs.
pub fn total_energy(state: &SpaceState, config: &SolverConfig) -> Result<Energy, SpaceError> {
    Ok(state
        .frozen_field(config.delta)?
        .energy(&state.flat_coords()))
}

/// Analytic gradient per active word under the cached charges and springs.
pub fn gradient(
    state: &SpaceState,
    config: &SolverConfig,
) -> Result<BTreeMap<WordId, Vec<f64>>, SpaceError> {
    let g = state
        .frozen_field(config.delta)?
        .gradient(&state.flat_coords());
    Ok(state
        .words
        .keys()
        .zip(g.chunks(state.dim))
        .map(|(w, gi)| (w.clone(), gi.to_vec()))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub energy: Energy,
}

/// One coordinate-update round: rebuild charges and springs, freeze them,
/// then descend. Every residence time grows by one when the round converges.
///
/// When the charge scale is undefined (no weighted translation edge among
/// the active words) nothing moves and the round counts as converged, which
/// ages the newly added words so the next round has weight to work with.
pub fn update_coordinates(
    state: &mut SpaceState,
    network: &LangueNetwork,
    pairs: &PairSpec,
    config: &SolverConfig,
) -> Result<RoundOutcome, SpaceError> {
    update_coordinates_with_step(state, network, pairs, config, config.step)
}

/// As [`update_coordinates`] with an explicit descent step size.
pub fn update_coordinates_with_step(
    state: &mut SpaceState,
    network: &LangueNetwork,
    pairs: &PairSpec,
    config: &SolverConfig,
    step: f64,
) -> Result<RoundOutcome, SpaceError> {
    match compute_charges_springs(state, network, pairs, config) {
        Ok(()) => {}
        Err(SpaceError::DegenerateScale) => {
            state.clear_forces();
            state.increment_residence();
            return Ok(RoundOutcome {
                converged: true,
                iterations: 0,
                energy: Energy::default(),
            });
        }
        Err(e) => return Err(e),
    }
    let field = state.frozen_field(config.delta)?;
    let mut x = state.flat_coords();
    let relax = field.relax(
        &mut x,
        &Descent {
            step,
            max_iters: config.max_iters_per_round,
            epsilon: config.epsilon,
        },
    )?;
    state.write_flat_coords(&x);
    if relax.converged {
        state.increment_residence();
    }
    Ok(RoundOutcome {
        converged: relax.converged,
        iterations: relax.iterations,
        energy: relax.energy,
    })
}

/// Deterministic offset of length `radius` for `word`, derived from `seed`.
pub fn jitter(word: &WordId, seed: u64, dim: usize, radius: f64) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(word.lang.as_str().as_bytes());
    hasher.update([0u8]);
    hasher.update(word.word.as_bytes());
    let digest: [u8; 32] = hasher.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(digest);
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
    let n = norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|c| *c *= radius / n);
    } else if let Some(first) = v.first_mut() {
        *first = radius;
    }
    v
}

/// Count-weighted centroid of `word`'s active neighbors (under `pairs`), plus
/// a deterministic jitter of length `config.delta`.
pub fn initial_coordinate(
    word: &WordId,
    state: &SpaceState,
    network: &LangueNetwork,
    pairs: &PairSpec,
    config: &SolverConfig,
    seed: u64,
) -> Result<Vec<f64>, SpaceError> {
    let centroid = neighbor_centroid(word, state, network, pairs)?;
    let j = jitter(word, seed, state.dim, config.delta);
    Ok(centroid.iter().zip(&j).map(|(c, d)| c + d).collect())
}

fn neighbor_centroid(
    word: &WordId,
    state: &SpaceState,
    network: &LangueNetwork,
    pairs: &PairSpec,
) -> Result<Vec<f64>, SpaceError> {
    let idx = network
        .index_of(word)
        .ok_or_else(|| SpaceError::UnknownWord(word.clone()))?;
    let mut sum = vec![0.0; state.dim];
    let mut weight = 0u64;
    for (n, c) in network.neighbor_indices(idx, pairs) {
        if let Some(a) = state.words.get(network.word(n)) {
            for (s, x) in sum.iter_mut().zip(&a.x) {
                *s += c as f64 * x;
            }
            weight += c;
        }
    }
    if weight == 0 {
        return Err(SpaceError::NoActiveNeighbor(word.clone()));
    }
    Ok(sum.into_iter().map(|s| s / weight as f64).collect())
}
