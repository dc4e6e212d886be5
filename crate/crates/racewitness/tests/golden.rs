//! Oracle race sets for the fixtures, pinned in `fixtures/*.races`.
//! Set `RACEWITNESS_BLESS=1` to rewrite them.

mod common;

use std::collections::BTreeSet;

use common::{fixture, fixture_path, index_pairs};
use racewitness::m2::{m2, M2Options};
use racewitness::oracle::oracle_races;

const FIXTURES: [&str; 6] = [
    "two_sections",
    "nested_locks",
    "closure_chain",
    "three_threads",
    "race_free",
    "open_section",
];

fn render(pairs: &[(u32, u32)]) -> String {
    pairs.iter().map(|(a, b)| format!("e{a} e{b}\n")).collect()
}

#[test]
fn oracle_matches_golden_files() {
    for name in FIXTURES {
        let t = fixture(&format!("{name}.trace"));
        let oracle: Vec<_> = oracle_races(&t, 20).unwrap().into_iter().collect();
        let got = render(&index_pairs(&t, &oracle));
        let path = fixture_path(&format!("{name}.races"));
        if std::env::var_os("RACEWITNESS_BLESS").is_some() {
            std::fs::write(&path, &got).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(got, want, "{name}");
    }
}

#[test]
fn m2_matches_golden_files_when_complete() {
    for name in FIXTURES {
        let t = fixture(&format!("{name}.trace"));
        let res = m2(&t, &M2Options::default());
        if !res.is_complete() {
            continue;
        }
        let z: BTreeSet<_> = res.pairs().into_iter().collect();
        let z: Vec<_> = z.into_iter().collect();
        let want = std::fs::read_to_string(fixture_path(&format!("{name}.races"))).unwrap();
        assert_eq!(render(&index_pairs(&t, &z)), want, "{name}");
    }
}
