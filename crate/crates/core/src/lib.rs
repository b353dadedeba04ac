//! Translation-count networks and the charge/spring word space built on top of them.
//!
//! The pipeline runs in four stages:
//!
//! - [`corpus`] turns sentence-aligned bilingual text into per-language-pair
//!   translation count tables.
//! - [`network`] merges those tables into an undirected, weighted word graph.
//! - [`space`] places active words in `R^d`, repelling words of the same
//!   language and pulling translation pairs together with springs.
//! - [`explorer`] grows and prunes the active word set around a pinned
//!   center word, emitting an append-only event log.
//!
//! [`sampler`] draws example sentence pairs for the edges currently on screen,
//! [`snapshot`] and [`svg`] serialize a layout for offline use.

pub mod corpus;
pub mod explorer;
pub mod lang;
pub mod layout;
pub mod network;
pub mod par;
pub mod sampler;
pub mod snapshot;
pub mod space;
pub mod svg;

pub use corpus::{
    AlignMethod, CorpusError, CountOptions, CountOutput, LemmaMap, SentencePair, TokenizerConfig,
    TokenizerMode, TranslationCountTable, WordList,
};

pub use explorer::{
    Event, EventKind, ExplorationSession, ExplorerError, Phase, Replay, SessionOptions,
};
pub use lang::{Lang, LangError, LangPair, PairSpec, WordId};
pub use layout::{run_layout, LayoutRun};
pub use network::{LangueNetwork, NetworkError};
pub use sampler::{ExampleBatch, ExampleRequest, ExampleStore, SampleError};
pub use snapshot::Snapshot;
pub use space::{Energy, SolverConfig, SpaceError, SpaceState};
