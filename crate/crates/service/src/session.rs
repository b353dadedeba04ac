//! One worker thread per live session; handlers talk to it via a command queue
//! and read the state it publishes after each round.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tokio::sync::{oneshot, watch};

use interlangue_core::explorer::read_jsonl;
use interlangue_core::{
    Event, ExplorationSession, ExplorerError, LangueNetwork, PairSpec, Phase, SessionOptions,
    SolverConfig, SpaceState, WordId,
};

#[derive(Debug, Clone)]
pub struct WorkerSettings {
    /// How long a steady session waits for commands before its thread exits.
    pub park_after: Duration,
    /// Pause between rounds; zero runs rounds back to back.
    pub round_interval: Duration,
    /// A session that has not settled after this many rounds stops stepping
    /// until the next command.
    pub max_rounds: u64,
    pub log_dir: Option<PathBuf>,
}

pub(crate) enum Command {
    Recenter {
        word: WordId,
        reply: oneshot::Sender<Result<Event, ExplorerError>>,
    },
}

/// Everything handlers may read without talking to the worker.
#[derive(Debug, Clone)]
pub struct View {
    pub events: Vec<Event>,
    pub state: SpaceState,
    pub phase: Phase,
    pub round: u64,
    pub parked: bool,
    pub stalled: bool,
    pub failure: Option<String>,
}

impl View {
    /// No more events will appear without a command.
    pub fn idle(&self) -> bool {
        self.parked || self.stalled || self.failure.is_some() || self.phase == Phase::Steady
    }

    pub fn last_seq(&self) -> u64 {
        self.events.last().map_or(0, |e| e.seq)
    }

    pub fn events_after(&self, after: u64) -> &[Event] {
        let start = self.events.partition_point(|e| e.seq <= after);
        &self.events[start..]
    }
}

/// Persisted next to the event log so a parked session survives a restart.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionMeta {
    pub id: String,
    pub pairs: PairSpec,
    pub config: SolverConfig,
    pub options: SessionOptions,
}

pub struct SessionHandle {
    pub meta: SessionMeta,
    view: Mutex<View>,
    notify: watch::Sender<u64>,
    commands: Mutex<Option<Sender<Command>>>,
    pub(crate) rng: Mutex<ChaCha8Rng>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

fn log_paths(dir: &Path, id: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{id}.meta.json")),
        dir.join(format!("{id}.jsonl")),
    )
}

impl SessionHandle {
    fn new(meta: SessionMeta, view: View) -> Arc<Self> {
        let (notify, _) = watch::channel(view.last_seq());
        let rng = ChaCha8Rng::seed_from_u64(meta.options.rng_seed);
        Arc::new(SessionHandle {
            meta,
            view: Mutex::new(view),
            notify,
            commands: Mutex::new(None),
            rng: Mutex::new(rng),
        })
    }

    pub fn id(&self) -> &str {
        &self.meta.id
    }

    pub fn view(&self) -> MutexGuard<'_, View> {
        lock(&self.view)
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.notify.subscribe()
    }

    fn publish(
        &self,
        session: &ExplorationSession,
        stalled: bool,
        failure: Option<String>,
    ) -> Vec<Event> {
        let new = {
            let mut v = self.view();
            let new = session.events_after(v.last_seq()).to_vec();
            v.events.extend(new.iter().cloned());
            v.state = session.state().clone();
            v.phase = session.phase();
            v.round = session.round();
            v.stalled = stalled;
            v.failure = failure;
            new
        };
        self.notify.send_replace(self.view().last_seq());
        new
    }

    /// Starts a fresh session and its worker.
    pub fn spawn(
        session: ExplorationSession,
        settings: WorkerSettings,
    ) -> std::io::Result<Arc<Self>> {
        let meta = SessionMeta {
            id: session.id().to_string(),
            pairs: session.pairs().clone(),
            config: session.config().clone(),
            options: session.options().clone(),
        };
        if let Some(dir) = &settings.log_dir {
            std::fs::create_dir_all(dir)?;
            let (meta_path, log_path) = log_paths(dir, &meta.id);
            std::fs::write(meta_path, serde_json::to_string_pretty(&meta)?)?;
            File::create(log_path)?;
        }
        let view = View {
            events: Vec::new(),
            state: session.state().clone(),
            phase: session.phase(),
            round: session.round(),
            parked: false,
            stalled: false,
            failure: None,
        };
        let handle = SessionHandle::new(meta, view);
        let mut slot = lock(&handle.commands);
        *slot = Some(start_worker(&handle, session, settings));
        drop(slot);
        Ok(handle)
    }

    /// Loads a parked session from `dir`.
    pub fn load(dir: &Path, id: &str, network: &LangueNetwork) -> Option<Arc<Self>> {
        let (meta_path, log_path) = log_paths(dir, id);
        let meta: SessionMeta =
            serde_json::from_str(&std::fs::read_to_string(meta_path).ok()?).ok()?;
        let events = read_jsonl(&std::fs::read_to_string(log_path).ok()?).ok()?;
        let replay = interlangue_core::Replay::from_events(meta.config.dim, &events).ok()?;
        let pinned = replay.pinned.clone()?;
        let mut state = SpaceState::new(
            network,
            pinned.clone(),
            meta.config.dim,
            replay.words.get(&pinned)?.residence,
        )
        .ok()?;
        for (w, r) in replay.words.iter().filter(|(w, _)| **w != pinned) {
            state
                .insert(network, w.clone(), r.x.clone(), r.residence)
                .ok()?;
        }
        let view = View {
            events,
            state,
            phase: Phase::Steady,
            round: replay.round,
            parked: true,
            stalled: false,
            failure: None,
        };
        Some(SessionHandle::new(meta, view))
    }

    /// Sends a command, restarting the worker first if the session is parked.
    pub(crate) fn send(
        self: &Arc<Self>,
        network: &Arc<LangueNetwork>,
        settings: &WorkerSettings,
        command: Option<Command>,
    ) -> Result<(), ExplorerError> {
        let mut slot = lock(&self.commands);
        if slot.is_none() {
            let events = self.view().events.clone();
            let session = ExplorationSession::resume(
                self.meta.id.clone(),
                self.meta.pairs.clone(),
                network.clone(),
                self.meta.config.clone(),
                self.meta.options.clone(),
                events,
            )?;
            {
                let mut v = self.view();
                v.parked = false;
                v.stalled = false;
                v.phase = session.phase();
            }
            *slot = Some(start_worker(self, session, settings.clone()));
        }
        if let Some(cmd) = command {
            // the worker only drops its receiver after clearing the slot under this lock
            let _ = slot.as_ref().expect("worker running").send(cmd);
        }
        Ok(())
    }

    /// Restarts the worker of a parked session.
    pub fn wake(
        self: &Arc<Self>,
        network: &Arc<LangueNetwork>,
        settings: &WorkerSettings,
    ) -> Result<(), ExplorerError> {
        self.send(network, settings, None)
    }

    pub fn is_parked(&self) -> bool {
        lock(&self.commands).is_none()
    }
}

fn start_worker(
    handle: &Arc<SessionHandle>,
    session: ExplorationSession,
    settings: WorkerSettings,
) -> Sender<Command> {
    let (tx, rx) = mpsc::channel();
    let handle = handle.clone();
    std::thread::Builder::new()
        .name(format!("session-{}", handle.id()))
        .spawn(move || Worker::new(handle, session, rx, settings).run())
        .expect("spawn session worker");
    tx
}

struct Worker {
    handle: Arc<SessionHandle>,
    session: ExplorationSession,
    rx: Receiver<Command>,
    settings: WorkerSettings,
    log: Option<File>,
    rounds_since_command: u64,
}

impl Worker {
    fn new(
        handle: Arc<SessionHandle>,
        session: ExplorationSession,
        rx: Receiver<Command>,
        settings: WorkerSettings,
    ) -> Self {
        let log = settings.log_dir.as_ref().and_then(|dir| {
            let (_, path) = log_paths(dir, handle.id());
            OpenOptions::new().create(true).append(true).open(path).ok()
        });
        Worker {
            handle,
            session,
            rx,
            settings,
            log,
            rounds_since_command: 0,
        }
    }

    fn publish(&mut self, failure: Option<String>) {
        let stalled = self.rounds_since_command >= self.settings.max_rounds;
        let new = self.handle.publish(&self.session, stalled, failure);
        if let Some(f) = &mut self.log {
            let text = interlangue_core::explorer::write_jsonl(&new);
            if let Err(e) = f.write_all(text.as_bytes()).and_then(|_| f.flush()) {
                tracing::warn!(session = self.handle.id(), "event log write failed: {e}");
                self.log = None;
            }
        }
    }

    fn apply(&mut self, cmd: Command) {
        match cmd {
            Command::Recenter { word, reply } => {
                let result = self
                    .session
                    .recenter(&word)
                    .map(|mut events| events.remove(0));
                self.rounds_since_command = 0;
                self.publish(None);
                let _ = reply.send(result);
            }
        }
    }

    /// Parks unless a command slipped in; returns whether it parked.
    fn park(&mut self) -> bool {
        let mut slot = lock(&self.handle.commands);
        if let Ok(cmd) = self.rx.try_recv() {
            drop(slot);
            self.apply(cmd);
            return false;
        }
        *slot = None;
        self.handle.view().parked = true;
        drop(slot);
        self.handle.notify.send_modify(|_| {});
        true
    }

    fn run(mut self) {
        self.publish(None);
        loop {
            while let Ok(cmd) = self.rx.try_recv() {
                self.apply(cmd);
            }
            let idle = self.session.phase() == Phase::Steady
                || self.rounds_since_command >= self.settings.max_rounds;
            if idle {
                match self.rx.recv_timeout(self.settings.park_after) {
                    Ok(cmd) => {
                        self.apply(cmd);
                        continue;
                    }
                    Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => {
                        if self.park() {
                            return;
                        }
                        continue;
                    }
                }
            }
            match self.session.step() {
                Ok(_) => {
                    self.rounds_since_command += 1;
                    self.publish(None);
                }
                Err(e) => {
                    tracing::error!(session = self.handle.id(), "step failed: {e}");
                    self.publish(Some(e.to_string()));
                    *lock(&self.handle.commands) = None;
                    self.handle.view().parked = true;
                    self.handle.notify.send_modify(|_| {});
                    return;
                }
            }
            if !self.settings.round_interval.is_zero() {
                std::thread::sleep(self.settings.round_interval);
            }
        }
    }
}
