use std::collections::{BTreeSet, HashMap};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CorpusError, SentencePair};

/// A `(source token index, target token index)` link.
pub type Link = (usize, usize);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum AlignMethod {
    /// Use the alignment stored with the sentence pair.
    Provided,
    /// Link every token pair whose sentence-level Dice coefficient reaches `threshold`.
    Dice { threshold: f64 },
}

impl FromStr for AlignMethod {
    type Err = CorpusError;

    /// `provided` or `dice:<threshold>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "provided" {
            return Ok(AlignMethod::Provided);
        }
        if let Some(t) = s.strip_prefix("dice:") {
            if let Ok(threshold) = t.parse::<f64>() {
                if threshold.is_finite() {
                    return Ok(AlignMethod::Dice { threshold });
                }
            }
        }
        Err(CorpusError::InvalidMethod(s.to_string()))
    }
}

/// Sentence-level co-occurrence statistics over normalized tokens.
#[derive(Debug, Clone, Default)]
pub struct DiceStats {
    cooccurrence: HashMap<(String, String), u64>,
    source_freq: HashMap<String, u64>,
    target_freq: HashMap<String, u64>,
}

impl DiceStats {
    /// Accumulates one sentence pair. Repeated tokens within a sentence count once.
    pub fn observe(&mut self, source: &[String], target: &[String]) {
        let src: BTreeSet<&String> = source.iter().collect();
        let tgt: BTreeSet<&String> = target.iter().collect();
        for s in &src {
            *self.source_freq.entry((*s).clone()).or_default() += 1;
        }
        for t in &tgt {
            *self.target_freq.entry((*t).clone()).or_default() += 1;
        }
        for s in &src {
            for t in &tgt {
                *self
                    .cooccurrence
                    .entry(((*s).clone(), (*t).clone()))
                    .or_default() += 1;
            }
        }
    }

    pub fn merge(&mut self, other: DiceStats) {
        for (k, v) in other.cooccurrence {
            *self.cooccurrence.entry(k).or_default() += v;
        }
        for (k, v) in other.source_freq {
            *self.source_freq.entry(k).or_default() += v;
        }
        for (k, v) in other.target_freq {
            *self.target_freq.entry(k).or_default() += v;
        }
    }

    /// `2 c(u,v) / (n(u) + n(v))`, zero for unseen words.
    pub fn dice(&self, source: &str, target: &str) -> f64 {
        let nu = self.source_freq.get(source).copied().unwrap_or(0);
        let nv = self.target_freq.get(target).copied().unwrap_or(0);
        if nu + nv == 0 {
            return 0.0;
        }
        let c = self
            .cooccurrence
            .get(&(source.to_string(), target.to_string()))
            .copied()
            .unwrap_or(0);
        2.0 * c as f64 / (nu + nv) as f64
    }
}

/// Token links for one sentence pair.
///
/// `source` and `target` are the pair's normalized tokens; provided links are
/// range-checked against them.
pub fn align(
    pair: &SentencePair,
    source: &[String],
    target: &[String],
    method: &AlignMethod,
    stats: Option<&DiceStats>,
) -> Result<Vec<Link>, CorpusError> {
    match method {
        AlignMethod::Provided => {
            let links = pair
                .alignment
                .as_ref()
                .ok_or_else(|| CorpusError::MissingAlignment {
                    id: pair.id.clone(),
                })?;
            for &(i, j) in links {
                if i >= source.len() || j >= target.len() {
                    return Err(CorpusError::AlignmentOutOfRange {
                        id: pair.id.clone(),
                        source_index: i,
                        target_index: j,
                        source_len: source.len(),
                        target_len: target.len(),
                    });
                }
            }
            Ok(links.clone())
        }
        AlignMethod::Dice { threshold } => {
            let stats = stats.ok_or(CorpusError::MissingCooccurrenceStats)?;
            let mut links = Vec::new();
            for (i, u) in source.iter().enumerate() {
                for (j, v) in target.iter().enumerate() {
                    if stats.dice(u, v) >= *threshold {
                        links.push((i, j));
                    }
                }
            }
            Ok(links)
        }
    }
}
