use std::collections::BTreeSet;

use proptest::prelude::*;
use racewitness::baselines::hb_races;
use racewitness::io::{emit_raw, emit_trace, parse, parse_raw, parse_str, TraceFormat};
use racewitness::m2::{m2, M2Options};
use racewitness::oracle::{oracle_races, random_raw, random_trace, Params};
use racewitness::trace::{build_trace, BuildOptions, EventId};

fn params() -> impl Strategy<Value = Params> {
    (2usize..=3, 4usize..=12, 1usize..=3, 0usize..=2).prop_map(|(threads, events, vars, locks)| Params {
        threads,
        events,
        vars,
        locks,
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, ..ProptestConfig::default() })]

    #[test]
    fn raw_round_trip(seed in any::<u64>(), p in params()) {
        let raw = random_raw(seed, p);
        let mut text = Vec::new();
        emit_raw(&raw, &mut text).unwrap();
        prop_assert_eq!(parse_raw(&text, TraceFormat::Simple).unwrap(), raw);
    }

    #[test]
    fn emitted_trace_reparses_to_same_events(seed in any::<u64>(), p in params()) {
        let t = random_trace(seed, p);
        let mut text = Vec::new();
        emit_trace(&t, &mut text).unwrap();
        let text = String::from_utf8(text).unwrap();
        let stripped: String = text.lines().map(|l| l.split(" #").next().unwrap().to_string() + "\n").collect();
        let u = parse_str(&stripped).unwrap();
        prop_assert_eq!(u.len(), t.len());
        for e in 0..t.len() as EventId {
            prop_assert_eq!(t.event(e).op, u.event(e).op);
            prop_assert_eq!(t.thread_of(e), u.thread_of(e));
            prop_assert_eq!(t.obs(e), u.obs(e));
        }
    }

    #[test]
    fn parser_never_panics(text in "(T[0-9] (r|w|acq|rel|fork|join|frob) [a-z0-9]{0,3}( @[a-z.:0-9]{1,6})?\n){0,8}") {
        let _ = parse(text.as_bytes(), TraceFormat::Simple, BuildOptions::default());
        let _ = parse(text.as_bytes(), TraceFormat::Std, BuildOptions::default());
    }

    #[test]
    fn confirmed_hb_races_are_reported(seed in any::<u64>(), p in params()) {
        let t = random_trace(seed, p);
        let oracle = oracle_races(&t, 16).unwrap();
        let z: BTreeSet<_> = m2(&t, &M2Options::default()).pairs().into_iter().collect();
        for pair in hb_races(&t) {
            if oracle.contains(&pair) {
                prop_assert!(z.contains(&pair), "{:?}", pair);
            }
        }
    }

    #[test]
    fn m2_is_deterministic_across_jobs(seed in any::<u64>()) {
        let p = Params { threads: 4, events: 60, vars: 4, locks: 2 };
        let t = random_trace(seed, p);
        let one = m2(&t, &M2Options { jobs: 1, ..M2Options::default() });
        let many = m2(&t, &M2Options { jobs: 3, ..M2Options::default() });
        prop_assert_eq!(one.pairs(), many.pairs());
        prop_assert_eq!(one.is_complete(), many.is_complete());
    }

    #[test]
    fn pruning_does_not_change_results(seed in any::<u64>(), p in params()) {
        let t = random_trace(seed, p);
        let pruned = m2(&t, &M2Options::default());
        let full = m2(&t, &M2Options { prune: false, ..M2Options::default() });
        prop_assert_eq!(pruned.pairs(), full.pairs());
    }
}

#[test]
fn raw_lines_survive_build() {
    let raw = random_raw(
        3,
        Params {
            threads: 3,
            events: 20,
            vars: 2,
            locks: 1,
        },
    );
    let t = build_trace(&raw, BuildOptions::default()).unwrap();
    assert_eq!(t.input_len(), 20);
    for (i, r) in raw.iter().enumerate() {
        let e = t.by_index(i as u32 + 1).unwrap();
        assert_eq!(t.thread_name(t.thread_of(e)), r.thread);
    }
}
