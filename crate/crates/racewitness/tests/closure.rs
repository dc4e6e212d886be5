mod common;

use common::saturation::Naive;
use common::{ev, fixture, full_frontier, index_pairs};
use racewitness::closure::{closure, ClosedPo, Discipline};
use racewitness::decision::joint_cone;
use racewitness::oracle::{random_trace, Params};
use racewitness::trace::{EventId, Frontier, Trace};

fn agree(q: &ClosedPo<'_>, n: &Naive<'_>, tag: &str) {
    assert_eq!(n.mismatch(q), None, "{tag}");
}

fn frontiers(t: &Trace, seed: u64) -> Vec<Frontier> {
    let mut out = vec![full_frontier(t)];
    let accesses: Vec<EventId> = (0..t.len() as EventId)
        .filter(|&e| !t.is_init(e) && t.event(e).op.is_access())
        .collect();
    for (k, &a) in accesses.iter().enumerate() {
        let b = accesses[(k * 7 + seed as usize) % accesses.len()];
        if t.thread_of(a) != t.thread_of(b) {
            out.push(joint_cone(t, a, b).0);
        }
        if out.len() > 4 {
            break;
        }
    }
    out
}

#[test]
fn closure_matches_saturation() {
    let mut checked = 0;
    for (k, n) in [(2, 14), (3, 16), (4, 18)] {
        let p = Params {
            threads: k,
            events: n,
            vars: 2,
            locks: 2,
        };
        for seed in 0..120 {
            let t = random_trace(seed, p);
            for x in frontiers(&t, seed) {
                if !x.is_lock_feasible(&t) {
                    continue;
                }
                let mut naive = Naive::new(&t, &x);
                let ok = naive.saturate();
                for d in [Discipline::Fifo, Discipline::Lifo] {
                    match closure(&t, &x, d) {
                        Ok(q) => {
                            assert!(ok, "seed {seed}: closure succeeded, saturation found a cycle");
                            agree(&q, &naive, &format!("seed {seed} k {k} {d:?}"));
                            checked += 1;
                        }
                        // X comes from the trace, whose order is a linearization.
                        Err(e) => panic!("seed {seed}: cycle {e:?} (saturation ok: {ok})"),
                    }
                }
            }
        }
    }
    assert!(checked > 500, "{checked}");
}

#[test]
fn insertions_match_saturation() {
    let p = Params {
        threads: 3,
        events: 16,
        vars: 2,
        locks: 2,
    };
    let mut inserts = 0;
    for seed in 0..150 {
        let t = random_trace(seed, p);
        let x = full_frontier(&t);
        let Ok(mut q) = closure(&t, &x, Discipline::Fifo) else {
            continue;
        };
        let mut naive = Naive::new(&t, &x);
        assert!(naive.saturate());
        let evs = x.events(&t);
        'pairs: for &a in &evs {
            for &b in &evs {
                if a >= b || t.is_init(a) || q.ordered(a, b) {
                    continue;
                }
                naive.add(a, b);
                let ok = naive.saturate();
                match q.clone().insert_and_close(a, b) {
                    Ok(next) => {
                        assert!(ok, "seed {seed}");
                        agree(&next, &naive, &format!("seed {seed} insert {:?}", (a, b)));
                        q = next;
                        inserts += 1;
                    }
                    Err(_) => {
                        assert!(!ok, "seed {seed}: spurious cycle on insert");
                        break 'pairs;
                    }
                }
            }
        }
    }
    assert!(inserts > 100, "{inserts}");
}

#[test]
fn closure_chain_is_forced() {
    let t = fixture("closure_chain.trace");
    let (x, _) = joint_cone(&t, ev(&t, 10), ev(&t, 19));
    let q = closure(&t, &x, Discipline::Lifo).unwrap();
    assert!(q.le(ev(&t, 14), ev(&t, 5)));
    assert!(q.le(ev(&t, 15), ev(&t, 4)));
    assert_eq!(index_pairs(&t, q.inserted()), vec![(14, 5), (15, 4)]);
}
