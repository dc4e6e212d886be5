mod common;

use common::naive_dag::differential_ops;
use racewitness::dag::{DagError, PartialOrderDs};

#[test]
fn random_ops_match_naive() {
    let mut total = 0;
    for seed in 0..1000 {
        total += differential_ops(seed, 100).unwrap();
    }
    assert!(total >= 100_000);
}

#[test]
fn out_of_range_and_cycles() {
    let mut ds = PartialOrderDs::new(&[2, 2], &[]).unwrap();
    let mut ch = Vec::new();
    assert!(matches!(
        ds.insert((0, 2), (1, 0), &mut ch),
        Err(DagError::OutOfRange(0, 2))
    ));
    assert!(matches!(
        ds.insert((2, 0), (1, 0), &mut ch),
        Err(DagError::OutOfRange(2, 0))
    ));
    ds.insert((0, 1), (1, 0), &mut ch).unwrap();
    assert!(matches!(ds.insert((1, 0), (0, 0), &mut ch), Err(DagError::Cycle)));
    assert!(PartialOrderDs::new(&[2, 2], &[((0, 1), (1, 0)), ((1, 1), (0, 0))]).is_err());
}

#[test]
fn changes_cover_moved_successors() {
    let mut ds = PartialOrderDs::new(&[4, 4, 4], &[((0, 1), (1, 2))]).unwrap();
    let mut ch = Vec::new();
    ds.insert((1, 2), (2, 3), &mut ch).unwrap();
    assert!(ch.iter().any(|c| c.from.0 == 0 && c.to == (2, 3)));
    assert!(ch.iter().any(|c| c.from == (1, 2) && c.to == (2, 3)));
    ch.clear();
    ds.insert((1, 2), (2, 3), &mut ch).unwrap();
    assert!(ch.is_empty());
}
