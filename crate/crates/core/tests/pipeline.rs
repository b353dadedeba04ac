use std::io::Cursor;
use std::sync::Arc;

use interlangue_core::corpus::{count_with, read_corpus};
use interlangue_core::explorer::{read_jsonl, write_jsonl};
use interlangue_core::par::Execution;
use interlangue_core::{
    run_layout, svg, AlignMethod, CountOptions, Lang, LangueNetwork, LemmaMap, PairSpec, Replay,
    SentencePair, Snapshot, SolverConfig, TokenizerConfig, TranslationCountTable, WordId,
};

const CORPUS: &str = "\
s1\tthe red apple\tringo wa akai\t0-2 1-2 2-0
s2\ta red car\takai kuruma\t1-0 2-1
s3\tthe apple tree\tringo no ki\t1-0 2-2
s4\tred and green\taka to midori\t0-0 2-2
s5\tgreen tree\tmidori no ki\t0-0 1-2
";

fn lang(s: &str) -> Lang {
    Lang::new(s).unwrap()
}

fn opts(lemmas: &LemmaMap) -> CountOptions<'_> {
    CountOptions {
        tokenizer: TokenizerConfig::default(),
        lemmas,
        word_list: None,
        method: AlignMethod::Provided,
        record_provenance: true,
    }
}

fn counted() -> TranslationCountTable {
    let pairs = read_corpus(Cursor::new(CORPUS), &lang("en"), &lang("ja")).unwrap();
    let lemmas = LemmaMap::default();
    interlangue_core::corpus::count_translations(&pairs, &lang("en"), &lang("ja"), &opts(&lemmas))
        .unwrap()
        .table
}

#[test]
fn corpus_counts() {
    let t = counted();
    assert_eq!(t.pair_count("red", "akai"), 2);
    assert_eq!(t.pair_count("apple", "ringo"), 2);
    assert_eq!(t.pair_count("green", "midori"), 2);
    assert_eq!(t.pair_count("tree", "ki"), 2);
    assert_eq!(t.pair_count("the", "akai"), 1);
    assert_eq!(t.pair_count("red", "aka"), 1);
    assert_eq!(t.total(), 11);
}

#[test]
fn table_round_trips_through_tsv() {
    let t = counted();
    let back = TranslationCountTable::read(Cursor::new(t.to_tsv())).unwrap();
    assert_eq!(back, t);
}

#[test]
fn sequential_and_parallel_counts_agree() {
    let words = ["alpha", "beta", "gamma", "delta", "eps"];
    let pairs: Vec<SentencePair> = (0..500)
        .map(|i| {
            let a = words[i % 5];
            let b = words[(i * 7 + 3) % 5];
            SentencePair::new(
                format!("p{i}"),
                lang("en"),
                lang("fr"),
                format!("{a} {b}"),
                format!("{b}_fr {a}_fr"),
            )
            .unwrap()
            .with_alignment(vec![(0, 1), (1, 0)])
        })
        .collect();
    let lemmas = LemmaMap::default();
    let o = opts(&lemmas);
    let seq = count_with(
        Execution::Sequential,
        17,
        &pairs,
        &lang("en"),
        &lang("fr"),
        &o,
    )
    .unwrap();
    let par = count_with(
        Execution::Parallel,
        17,
        &pairs,
        &lang("en"),
        &lang("fr"),
        &o,
    )
    .unwrap();
    assert_eq!(seq.table, par.table);
    assert_eq!(seq.provenance, par.provenance);
    assert_eq!(seq.table.total(), 1000);
}

#[test]
fn layout_snapshot_and_log_are_consistent() {
    let net = Arc::new(LangueNetwork::build(&[counted()]).unwrap());
    let seed = WordId::new(lang("en"), "red");
    let pairs = PairSpec::parse("en-ja").unwrap();
    let run = run_layout(
        net.clone(),
        seed.clone(),
        pairs.clone(),
        SolverConfig::default(),
        25,
        5,
    )
    .unwrap();
    let again = run_layout(net, seed.clone(), pairs, SolverConfig::default(), 25, 5).unwrap();
    assert_eq!(run, again);

    let snap = &run.snapshot;
    assert_eq!(snap.pinned, seed);
    assert_eq!(snap.round, 25);
    let back = Snapshot::from_json(&snap.to_json()).unwrap();
    assert_eq!(&back, snap);
    assert_eq!(svg::render(&back), svg::render(snap));

    let log = write_jsonl(&run.events);
    let events = read_jsonl(&log).unwrap();
    assert_eq!(events, run.events);
    let replay = Replay::from_events(2, &events).unwrap();
    let coords = replay.coords();
    assert_eq!(coords.len(), snap.words.len());
    for w in &snap.words {
        assert_eq!(coords[&WordId::new(w.lang.clone(), &w.word)], w.x);
    }
}
