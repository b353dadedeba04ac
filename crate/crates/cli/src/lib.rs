//! `interlangue count|build-network|layout|export|serve`.
//!
//! Exit codes: 0 success, 1 usage, 2 data (unreadable or invalid input),
//! 3 numeric (the solver produced non-finite coordinates).

use std::ffi::OsString;
use std::fs::File;
use std::io::BufReader;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use interlangue_core::corpus::{count_translations, read_corpus};
use interlangue_core::explorer::write_jsonl;
use interlangue_core::{
    run_layout, svg, AlignMethod, CorpusError, CountOptions, ExampleStore, ExplorerError, Lang,
    LangueNetwork, LemmaMap, PairSpec, SolverConfig, SpaceError, TokenizerConfig, TokenizerMode,
    TranslationCountTable, WordId, WordList,
};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Help or version text requested; printed to stdout, exit 0.
    #[error("{0}")]
    Help(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Help(_) => 0,
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ExplorerError> for CliError {
    fn from(e: ExplorerError) -> Self {
        match e {
            ExplorerError::Space(SpaceError::NonFiniteCoordinate) => {
                CliError::Numeric(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Data(format!("{}: {e}", path.display()))
}

#[derive(Debug, Parser)]
#[command(name = "interlangue", version, about = "Translation-count word maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Count translations in a sentence-aligned corpus and write a count table.
    Count(CountArgs),
    /// Merge count tables and write the network as JSON.
    BuildNetwork(BuildArgs),
    /// Run an exploration session offline and write its snapshot.
    Layout(LayoutArgs),
    /// Render a snapshot as SVG.
    Export(ExportArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct TokenArgs {
    /// whitespace or unicode
    #[arg(long, default_value = "whitespace")]
    tokenizer: TokenizerMode,
    #[arg(long)]
    no_lowercase: bool,
    #[arg(long)]
    strip_punctuation: bool,
    /// Lemma map: lang<TAB>surface<TAB>representative per line.
    #[arg(long)]
    lemmas: Option<PathBuf>,
    /// Word list: lang<TAB>word per line; other words are ignored.
    #[arg(long)]
    words: Option<PathBuf>,
    /// provided or dice:THRESHOLD
    #[arg(long, default_value = "provided")]
    align: AlignMethod,
}

impl TokenArgs {
    fn tokenizer(&self) -> TokenizerConfig {
        TokenizerConfig {
            mode: self.tokenizer,
            lowercase: !self.no_lowercase,
            strip_punctuation: self.strip_punctuation,
        }
    }

    fn lemmas(&self) -> Result<LemmaMap, CliError> {
        match &self.lemmas {
            Some(p) => Ok(LemmaMap::read(open(p)?)?),
            None => Ok(LemmaMap::default()),
        }
    }

    fn words(&self) -> Result<Option<WordList>, CliError> {
        self.words
            .as_ref()
            .map(|p| Ok(WordList::read(open(p)?)?))
            .transpose()
    }
}

#[derive(Debug, Args)]
struct CountArgs {
    /// Corpus file: id<TAB>source<TAB>target[<TAB>alignment[<TAB>tag]] per line.
    corpus: PathBuf,
    #[arg(long)]
    src: Lang,
    #[arg(long)]
    tgt: Lang,
    #[command(flatten)]
    tokens: TokenArgs,
    /// Worker threads for counting.
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct BuildArgs {
    /// Count tables written by `count`.
    #[arg(required = true)]
    tables: Vec<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct LayoutArgs {
    /// Count tables written by `count`.
    #[arg(required = true)]
    tables: Vec<PathBuf>,
    /// Center word as lang:word.
    #[arg(long)]
    seed: String,
    /// Language pairs such as en-ja,en-fr; every pair in the tables by default.
    #[arg(long)]
    langs: Option<String>,
    #[arg(long, default_value_t = 10)]
    rounds: u64,
    /// Solver settings (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed_rng: u64,
    /// Snapshot JSON output.
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Event log output (JSON lines).
    #[arg(long)]
    events: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExportArgs {
    snapshot: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// SRC:TGT:FILE corpus to count with example provenance; repeatable.
    #[arg(long = "corpus")]
    corpora: Vec<String>,
    /// Extra count tables without examples; repeatable.
    #[arg(long = "table")]
    tables: Vec<PathBuf>,
    #[command(flatten)]
    tokens: TokenArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed_rng: u64,
    /// Directory for session event logs; enables resuming after a restart.
    #[arg(long)]
    log_dir: Option<PathBuf>,
    /// Seconds a steady session waits before its worker is parked.
    #[arg(long, default_value_t = 300)]
    park_after: u64,
    /// Pause between rounds, in milliseconds.
    #[arg(long, default_value_t = 0)]
    round_interval_ms: u64,
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn load_config(path: Option<&Path>) -> Result<SolverConfig, CliError> {
    match path {
        None => Ok(SolverConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| io_err(p, e))?;
            SolverConfig::from_toml(&text).map_err(|e| io_err(p, e))
        }
    }
}

fn load_network(paths: &[PathBuf]) -> Result<LangueNetwork, CliError> {
    let tables = paths
        .iter()
        .map(|p| TranslationCountTable::load(p).map_err(|e| io_err(p, e)))
        .collect::<Result<Vec<_>, _>>()?;
    LangueNetwork::build(&tables).map_err(|e| CliError::Data(e.to_string()))
}

fn pair_spec(langs: Option<&str>, network: &LangueNetwork) -> Result<PairSpec, CliError> {
    match langs {
        Some(s) => PairSpec::parse(s).map_err(|e| CliError::Usage(format!("--langs: {e}"))),
        None => Ok(PairSpec::new(
            network.language_pairs().map(|(p, _)| p.clone()),
        )),
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Help(e.to_string())
        }
        _ => CliError::Usage(e.to_string()),
    })?;
    match cli.command {
        Command::Count(a) => count(a),
        Command::BuildNetwork(a) => build_network(a),
        Command::Layout(a) => layout(a),
        Command::Export(a) => export(a),
        Command::Serve(a) => serve(a),
    }
}

fn count(a: CountArgs) -> Result<(), CliError> {
    let pairs = read_corpus(open(&a.corpus)?, &a.src, &a.tgt).map_err(|e| io_err(&a.corpus, e))?;
    let lemmas = a.tokens.lemmas()?;
    let words = a.tokens.words()?;
    let opts = CountOptions {
        tokenizer: a.tokens.tokenizer(),
        lemmas: &lemmas,
        word_list: words.as_ref(),
        method: a.tokens.align,
        record_provenance: false,
    };
    let out = match a.jobs {
        Some(0) => return Err(CliError::Usage("--jobs must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(e.to_string()))?
            .install(|| count_translations(&pairs, &a.src, &a.tgt, &opts))?,
        None => count_translations(&pairs, &a.src, &a.tgt, &opts)?,
    };
    out.table.save(&a.output).map_err(|e| io_err(&a.output, e))
}

fn build_network(a: BuildArgs) -> Result<(), CliError> {
    let net = load_network(&a.tables)?;
    let mut text = serde_json::to_string_pretty(&net.export()).expect("network serializes");
    text.push('\n');
    write(&a.output, &text)
}

fn layout(a: LayoutArgs) -> Result<(), CliError> {
    let seed = WordId::parse(&a.seed).map_err(|e| CliError::Usage(format!("--seed: {e}")))?;
    let config = load_config(a.config.as_deref())?;
    let network = load_network(&a.tables)?;
    let pairs = pair_spec(a.langs.as_deref(), &network)?;
    let run = run_layout(Arc::new(network), seed, pairs, config, a.rounds, a.seed_rng)?;
    write(&a.output, &run.snapshot.to_json())?;
    if let Some(p) = &a.svg {
        write(p, &svg::render(&run.snapshot))?;
    }
    if let Some(p) = &a.events {
        write(p, &write_jsonl(&run.events))?;
    }
    Ok(())
}

fn export(a: ExportArgs) -> Result<(), CliError> {
    let snap = interlangue_core::Snapshot::load(&a.snapshot).map_err(|e| io_err(&a.snapshot, e))?;
    write(&a.output, &svg::render(&snap))
}

/// Parses `SRC:TGT:PATH`.
fn corpus_spec(s: &str) -> Result<(Lang, Lang, PathBuf), CliError> {
    let mut parts = s.splitn(3, ':');
    let bad = || CliError::Usage(format!("--corpus expects SRC:TGT:FILE, got {s:?}"));
    let src = parts.next().ok_or_else(bad)?;
    let tgt = parts.next().ok_or_else(bad)?;
    let path = parts.next().ok_or_else(bad)?;
    let lang = |l: &str| Lang::new(l).map_err(|e| CliError::Usage(format!("--corpus: {e}")));
    Ok((lang(src)?, lang(tgt)?, PathBuf::from(path)))
}

fn serve(a: ServeArgs) -> Result<(), CliError> {
    if a.corpora.is_empty() && a.tables.is_empty() {
        return Err(CliError::Usage(
            "serve needs at least one --corpus or --table".into(),
        ));
    }
    let solver = load_config(a.config.as_deref())?;
    let lemmas = a.tokens.lemmas()?;
    let words = a.tokens.words()?;
    let mut tables = Vec::new();
    let mut store = ExampleStore::new();
    for spec in &a.corpora {
        let (src, tgt, path) = corpus_spec(spec)?;
        let pairs = read_corpus(open(&path)?, &src, &tgt).map_err(|e| io_err(&path, e))?;
        let opts = CountOptions {
            tokenizer: a.tokens.tokenizer(),
            lemmas: &lemmas,
            word_list: words.as_ref(),
            method: a.tokens.align,
            record_provenance: true,
        };
        let out = count_translations(&pairs, &src, &tgt, &opts)?;
        store.add(
            &pairs,
            out.provenance.as_ref().expect("provenance requested"),
        );
        tables.push(out.table);
    }
    for p in &a.tables {
        tables.push(TranslationCountTable::load(p).map_err(|e| io_err(p, e))?);
    }
    let network = LangueNetwork::build(&tables).map_err(|e| CliError::Data(e.to_string()))?;

    let mut config = interlangue_service::ServiceConfig {
        solver,
        rng_seed: a.seed_rng,
        ..Default::default()
    };
    config.worker.park_after = Duration::from_secs(a.park_after);
    config.worker.round_interval = Duration::from_millis(a.round_interval_ms);
    config.worker.log_dir = a.log_dir.clone();
    let state = interlangue_service::AppState::new(Arc::new(network), Arc::new(store), config);

    let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Data(e.to_string()))?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(a.addr)
            .await
            .map_err(|e| CliError::Data(format!("bind {}: {e}", a.addr)))?;
        let local = listener
            .local_addr()
            .map_err(|e| CliError::Data(e.to_string()))?;
        eprintln!("listening on http://{local}/v1");
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        interlangue_service::serve(listener, state, shutdown)
            .await
            .map_err(|e| CliError::Data(e.to_string()))
    })
}
