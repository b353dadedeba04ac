//! Offline layouts: a session run for a fixed number of steps.

use std::sync::Arc;

use crate::explorer::{Event, ExplorationSession, ExplorerError, SessionOptions};
use crate::lang::{PairSpec, WordId};
use crate::network::LangueNetwork;
use crate::snapshot::Snapshot;
use crate::space::SolverConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct LayoutRun {
    pub snapshot: Snapshot,
    pub events: Vec<Event>,
}

/// Starts a session at `seed` and runs `rounds` steps.
pub fn run_layout(
    network: Arc<LangueNetwork>,
    seed: WordId,
    pairs: PairSpec,
    config: SolverConfig,
    rounds: u64,
    rng_seed: u64,
) -> Result<LayoutRun, ExplorerError> {
    let options = SessionOptions {
        rng_seed,
        ..SessionOptions::default()
    };
    let mut session = ExplorationSession::start("layout", seed, pairs, network, config, options)?;
    for _ in 0..rounds {
        session.step()?;
    }
    session_snapshot(&session).map(|snapshot| LayoutRun {
        snapshot,
        events: session.events().to_vec(),
    })
}

pub fn session_snapshot(session: &ExplorationSession) -> Result<Snapshot, ExplorerError> {
    Ok(Snapshot::capture(
        session.state(),
        session.network(),
        session.pairs(),
        session.config(),
        session.round(),
    )?)
}
