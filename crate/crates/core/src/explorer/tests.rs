use super::*;
use crate::corpus::TranslationCountTable;
use crate::lang::Lang;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

fn l(s: &str) -> Lang {
    Lang::new(s).unwrap()
}

fn w(lang: &str, word: &str) -> WordId {
    WordId::new(l(lang), word)
}

fn network(rows: &[(&str, &str, u64)]) -> Arc<LangueNetwork> {
    let mut t = TranslationCountTable::new(l("en"), l("ja"));
    for (u, v, c) in rows {
        t.add_pair(u, v, *c);
        t.add_source_occurrence(u, *c);
        t.add_target_occurrence(v, *c);
    }
    Arc::new(LangueNetwork::build(&[t]).unwrap())
}

fn en_ja() -> PairSpec {
    PairSpec::parse("en-ja").unwrap()
}

fn start(net: &Arc<LangueNetwork>, seed: WordId, config: SolverConfig) -> ExplorationSession {
    ExplorationSession::start(
        "t",
        seed,
        en_ja(),
        net.clone(),
        config,
        SessionOptions::default(),
    )
    .unwrap()
}

fn kinds(events: &[Event]) -> Vec<&'static str> {
    events.iter().map(|e| e.kind.name()).collect()
}

#[test]
fn start_places_seed_and_neighbors() {
    let net = network(&[
        ("beautiful", "utsukushii", 2),
        ("beautiful", "kirei", 1),
        ("world", "sekai", 3),
    ]);
    let s = start(&net, w("en", "beautiful"), SolverConfig::default());
    assert_eq!(s.state().len(), 3);
    assert_eq!(s.state().pinned(), &w("en", "beautiful"));
    assert_eq!(
        s.state().get(&w("en", "beautiful")).unwrap().x,
        vec![0.0, 0.0]
    );
    for (_, a) in s.state().iter() {
        assert_eq!(a.residence, 1);
    }
    assert_eq!(
        kinds(s.events()),
        ["word_added", "word_added", "word_added", "recentered"]
    );
    let seqs: Vec<u64> = s.events().iter().map(|e| e.seq).collect();
    assert_eq!(seqs, [1, 2, 3, 4]);
    assert_eq!(s.phase(), Phase::Settling);
    // neighbors start at the seed plus a jitter of length delta
    let x = &s.state().get(&w("ja", "kirei")).unwrap().x;
    assert!((norm(x) - 1e-6).abs() < 1e-12);
}

#[test]
fn isolated_seed_is_steady() {
    let mut t = TranslationCountTable::new(l("en"), l("ja"));
    t.add_pair("a", "x", 2);
    t.add_source_occurrence("a", 2);
    t.add_target_occurrence("x", 2);
    t.add_source_occurrence("lonely", 4);
    let net = Arc::new(LangueNetwork::build(&[t]).unwrap());
    let mut s = start(&net, w("en", "lonely"), SolverConfig::default());
    assert_eq!(s.state().len(), 1);
    assert_eq!(s.phase(), Phase::Steady);
    let events = s.step().unwrap();
    assert_eq!(kinds(&events), ["coords_updated", "converged"]);
    assert_eq!(s.state().len(), 1);
}

#[test]
fn unknown_seed() {
    let net = network(&[("a", "x", 1)]);
    let err = ExplorationSession::start(
        "t",
        w("en", "nope"),
        en_ja(),
        net,
        SolverConfig::default(),
        SessionOptions::default(),
    )
    .unwrap_err();
    assert_eq!(err, ExplorerError::UnknownWord(w("en", "nope")));
}

#[test]
fn unknown_pair() {
    let net = network(&[("a", "x", 1)]);
    let err = ExplorationSession::start(
        "t",
        w("en", "a"),
        PairSpec::parse("en-fr").unwrap(),
        net,
        SolverConfig::default(),
        SessionOptions::default(),
    )
    .unwrap_err();
    assert!(matches!(err, ExplorerError::EmptyPair(_)));
}

#[test]
fn fixed_point_emits_only_round_events() {
    let net = network(&[("a", "x", 5), ("a", "y", 3)]);
    let cfg = SolverConfig {
        r_par: 10.0,
        ..SolverConfig::default()
    };
    let mut s = start(&net, w("en", "a"), cfg);
    let words: Vec<WordId> = s.state().iter().map(|(w, _)| w.clone()).collect();
    for _ in 0..20 {
        let events = s.step().unwrap();
        for e in &events {
            assert!(matches!(
                e.kind,
                EventKind::CoordsUpdated { .. } | EventKind::Converged
            ));
        }
    }
    let after: Vec<WordId> = s.state().iter().map(|(w, _)| w.clone()).collect();
    assert_eq!(words, after);
    assert_eq!(s.phase(), Phase::Steady);
}

#[test]
fn candidate_between_two_parents_is_added() {
    // c links to both a and b, which sit symmetrically about the origin, so
    // its centroid is the origin; d links only to a and would land at (0.3, 0)
    let net = network(&[
        ("a", "m", 4),
        ("b", "m", 4),
        ("a", "c", 2),
        ("b", "c", 2),
        ("a", "d", 7),
    ]);
    let mut s = start(&net, w("ja", "m"), SolverConfig::default());
    s.state_mut()
        .set_coords(&w("en", "a"), vec![0.3, 0.0])
        .unwrap();
    s.state_mut()
        .set_coords(&w("en", "b"), vec![-0.3, 0.0])
        .unwrap();
    let before = s.last_seq();
    let exp = s.expand_and_prune().unwrap();
    assert_eq!(exp.added, Some(w("ja", "c")));
    assert!(exp.removed.is_empty());
    let new = s.events_after(before);
    assert_eq!(new.len(), 1);
    match &new[0].kind {
        EventKind::WordAdded { word, x, residence } => {
            assert_eq!(word, &w("ja", "c"));
            assert_eq!(*residence, 0);
            assert!((norm(x) - 1e-6).abs() < 1e-12);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn n_max_removes_largest_norms() {
    let net = network(&[("p", "a", 1), ("p", "b", 1), ("p", "c", 1), ("p", "d", 1)]);
    let cfg = SolverConfig {
        n_max: 3,
        ..SolverConfig::default()
    };
    let mut s = start(&net, w("en", "p"), cfg);
    let coords = [
        ("a", [0.1, 0.0]),
        ("b", [0.5, 0.0]),
        ("c", [0.0, 1.0]),
        ("d", [-1.2, 0.0]),
    ];
    for (word, x) in coords {
        s.state_mut()
            .set_coords(&w("ja", word), x.to_vec())
            .unwrap();
    }
    let before = s.last_seq();
    let exp = s.expand_and_prune().unwrap();
    assert_eq!(exp.removed, vec![w("ja", "d"), w("ja", "c")]);
    assert_eq!(
        kinds(s.events_after(before)),
        ["word_removed", "word_removed"]
    );
    assert_eq!(s.state().len(), 3);
}

#[test]
fn non_parents_without_parent_edges_are_pruned() {
    // x is far away and only linked to y, which is also far away
    let net = network(&[("p", "a", 3), ("y", "a", 1), ("y", "x", 1)]);
    let mut s = start(&net, w("en", "p"), SolverConfig::default());
    s.state_mut()
        .set_coords(&w("ja", "a"), vec![5.0, 0.0])
        .unwrap();
    // a is no parent but linked to p; nothing else active yet
    let exp = s.expand_and_prune().unwrap();
    assert!(exp.removed.is_empty());
    assert_eq!(exp.added, None);
    assert!(s.state().contains(&w("ja", "a")));
}

#[test]
fn recenter_translates_everything() {
    let net = network(&[("p", "a", 1), ("p", "b", 1)]);
    let mut s = start(&net, w("en", "p"), SolverConfig::default());
    s.state_mut()
        .set_coords(&w("ja", "a"), vec![1.0, 1.0])
        .unwrap();
    s.state_mut()
        .set_coords(&w("ja", "b"), vec![2.0, -1.0])
        .unwrap();
    let events = s.recenter(&w("ja", "a")).unwrap();
    assert_eq!(kinds(&events), ["recentered"]);
    assert_eq!(s.state().pinned(), &w("ja", "a"));
    assert_eq!(s.state().get(&w("ja", "a")).unwrap().x, vec![0.0, 0.0]);
    assert_eq!(s.state().get(&w("en", "p")).unwrap().x, vec![-1.0, -1.0]);
    assert_eq!(s.state().get(&w("ja", "b")).unwrap().x, vec![1.0, -2.0]);
    for (_, a) in s.state().iter() {
        assert_eq!(a.residence, 1);
    }
}

#[test]
fn recenter_on_pinned_is_identity() {
    let net = network(&[("p", "a", 1), ("p", "b", 1)]);
    let mut s = start(&net, w("en", "p"), SolverConfig::default());
    for _ in 0..3 {
        s.step().unwrap();
    }
    let before = s.state().flat_coords();
    s.recenter(&w("en", "p")).unwrap();
    assert_eq!(s.state().flat_coords(), before);
}

#[test]
fn recenter_on_inactive() {
    let net = network(&[("p", "a", 1), ("q", "b", 1)]);
    let mut s = start(&net, w("en", "p"), SolverConfig::default());
    assert_eq!(
        s.recenter(&w("ja", "b")).unwrap_err(),
        ExplorerError::NotActive(w("ja", "b"))
    );
}

/// Chain-like network with cross links: en:e0..e{n}, ja:j0..j{n}.
fn ladder(n: usize, seed: u64) -> Arc<LangueNetwork> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut t = TranslationCountTable::new(l("en"), l("ja"));
    fn add(t: &mut TranslationCountTable, u: String, v: String, c: u64) {
        t.add_pair(&u, &v, c);
        t.add_source_occurrence(&u, c);
        t.add_target_occurrence(&v, c);
    }
    for i in 0..n {
        add(
            &mut t,
            format!("e{i}"),
            format!("j{i}"),
            rng.random_range(1..10),
        );
        if i + 1 < n {
            add(
                &mut t,
                format!("e{i}"),
                format!("j{}", i + 1),
                rng.random_range(1..10),
            );
        }
        if rng.random_bool(0.3) {
            let k = rng.random_range(0..n);
            if t.pair_count(&format!("e{i}"), &format!("j{k}")) == 0 {
                add(
                    &mut t,
                    format!("e{i}"),
                    format!("j{k}"),
                    rng.random_range(1..5),
                );
            }
        }
    }
    Arc::new(LangueNetwork::build(&[t]).unwrap())
}

fn assert_invariants(s: &ExplorationSession) {
    let st = s.state();
    assert!(st.len() <= s.config().n_max);
    assert!(st.contains(st.pinned()));
    let exp = s.last_expansion();
    let parents: BTreeSet<WordId> = exp
        .parents
        .iter()
        .filter(|p| st.contains(p))
        .cloned()
        .collect();
    let net = s.network();
    for (w, _) in st.iter() {
        if parents.contains(w) {
            continue;
        }
        let linked = parents
            .iter()
            .any(|p| net.neighbors(p, s.pairs()).contains(w));
        assert!(linked, "{w} is neither a parent nor linked to one");
    }
}

#[test]
fn replay_matches_live_state() {
    let net = ladder(30, 1);
    let cfg = SolverConfig {
        n_max: 12,
        ..SolverConfig::default()
    };
    let mut s = start(&net, w("en", "e10"), cfg);
    for i in 0..60 {
        s.step().unwrap();
        if i == 30 {
            let target = s.state().iter().nth(2).unwrap().0.clone();
            s.recenter(&target).unwrap();
        }
    }
    let replay = Replay::from_events(2, s.events()).unwrap();
    let live: BTreeMap<WordId, Vec<f64>> = s
        .state()
        .iter()
        .map(|(w, a)| (w.clone(), a.x.clone()))
        .collect();
    assert_eq!(replay.coords(), live);
    assert_eq!(replay.pinned.as_ref(), Some(s.state().pinned()));
    for (w, a) in s.state().iter() {
        assert_eq!(replay.words[w].residence, a.residence, "{w}");
    }

    let text = write_jsonl(s.events());
    let parsed = read_jsonl(&text).unwrap();
    assert_eq!(parsed, s.events());
}

#[test]
fn replay_rejects_gaps() {
    let net = network(&[("p", "a", 1)]);
    let s = start(&net, w("en", "p"), SolverConfig::default());
    let mut events = s.events().to_vec();
    events.remove(1);
    assert!(matches!(
        Replay::from_events(2, &events),
        Err(ExplorerError::SeqGap {
            expected: 2,
            got: 3
        })
    ));
}

#[test]
fn resumed_session_continues_identically() {
    let net = ladder(20, 4);
    let cfg = SolverConfig {
        n_max: 10,
        ..SolverConfig::default()
    };
    let mut a = start(&net, w("en", "e5"), cfg.clone());
    for _ in 0..15 {
        a.step().unwrap();
    }
    let mut b = ExplorationSession::resume(
        "t",
        en_ja(),
        net.clone(),
        cfg,
        SessionOptions::default(),
        a.events().to_vec(),
    )
    .unwrap();
    for _ in 0..15 {
        assert_eq!(a.step().unwrap(), b.step().unwrap());
    }
}

#[test]
fn event_json_shape() {
    let e = Event {
        seq: 3,
        round: 1,
        kind: EventKind::WordAdded {
            word: w("ja", "kirei"),
            x: vec![0.5, -1.0],
            residence: 0,
        },
    };
    assert_eq!(
        e.to_json(),
        r#"{"seq":3,"round":1,"kind":"word_added","word":{"lang":"ja","word":"kirei"},"x":[0.5,-1.0],"residence":0}"#
    );
    let c = Event {
        seq: 4,
        round: 1,
        kind: EventKind::Converged,
    };
    assert_eq!(c.to_json(), r#"{"seq":4,"round":1,"kind":"converged"}"#);
    assert_eq!(serde_json::from_str::<Event>(&c.to_json()).unwrap(), c);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn steps_preserve_invariants(seed in 0u64..1000, n_max in 3usize..15, start_at in 0usize..25) {
        let net = ladder(25, seed);
        let cfg = SolverConfig { n_max, ..SolverConfig::default() };
        let mut s = start(&net, w("en", &format!("e{start_at}")), cfg);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..30 {
            let events = s.step().unwrap();
            let converged = events.iter().any(|e| e.kind == EventKind::Converged);
            if converged {
                assert_invariants(&s);
            }
            if rng.random_bool(0.1) {
                let k = rng.random_range(0..s.state().len());
                let target = s.state().iter().nth(k).unwrap().0.clone();
                s.recenter(&target).unwrap();
            }
        }
        let seqs: Vec<u64> = s.events().iter().map(|e| e.seq).collect();
        prop_assert_eq!(seqs, (1..=s.events().len() as u64).collect::<Vec<_>>());
    }
}
