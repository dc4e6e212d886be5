#![allow(dead_code)]

pub mod naive_dag;
pub mod saturation;

use std::path::PathBuf;

use racewitness::io::parse_str;
use racewitness::trace::{EventId, Frontier, Trace};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> Trace {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    parse_str(&text).expect("fixture parses")
}

/// Event id for a 1-based input index.
pub fn ev(t: &Trace, index: u32) -> EventId {
    t.by_index(index).expect("index in range")
}

/// 1-based input indices of a sequence, init writes dropped.
pub fn indices(t: &Trace, seq: &[EventId]) -> Vec<u32> {
    seq.iter()
        .filter(|&&e| !t.is_init(e))
        .map(|&e| t.event(e).index)
        .collect()
}

pub fn index_pairs(t: &Trace, pairs: &[(EventId, EventId)]) -> Vec<(u32, u32)> {
    pairs
        .iter()
        .map(|&(a, b)| (t.event(a).index, t.event(b).index))
        .collect()
}

/// Every event of the trace, as a frontier.
pub fn full_frontier(t: &Trace) -> Frontier {
    Frontier((0..t.width() as u32).map(|q| t.chain(q).len() as u32).collect())
}
