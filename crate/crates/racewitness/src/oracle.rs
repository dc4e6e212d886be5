//! Ground truth for tiny traces: explore every correct reordering and
//! collect the pairs that can end one. Also a seeded generator of small
//! well-formed traces for differential testing.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{build_trace, BuildOptions, EventId, Op, RawEvent, ThreadId, Trace, INIT_THREAD, NONE};

pub const DEFAULT_MAX_EVENTS: usize = 16;
pub const HARD_MAX_EVENTS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("trace has {events} events, oracle limit is {limit}")]
    TooLarge { events: usize, limit: usize },
}

/// A race pair with the earlier event first.
pub type Pair = (EventId, EventId);

struct Search<'t> {
    t: &'t Trace,
    seen: HashSet<Vec<u32>>,
    races: BTreeSet<Pair>,
    preds: Vec<EventId>,
}

impl<'t> Search<'t> {
    fn next_of(&self, f: &[u32], q: usize) -> Option<EventId> {
        self.t.chain(q as ThreadId).get(f[q] as usize).copied()
    }

    fn po_enabled(&mut self, f: &[u32], e: EventId) -> bool {
        self.preds.clear();
        self.t.cross_preds(e, &mut self.preds);
        self.preds
            .iter()
            .all(|&p| self.t.ord(p) < f[self.t.thread_of(p) as usize])
    }

    /// State layout: per-thread frontier, then last writer per variable,
    /// then lock holder per lock.
    fn run(&mut self) {
        let t = self.t;
        let (k, nv) = (t.width(), t.var_count());
        let mut start = vec![0u32; k];
        start.extend(std::iter::repeat_n(NONE, nv + t.lock_count()));
        let mut stack = vec![start];
        while let Some(state) = stack.pop() {
            if !self.seen.insert(state.clone()) {
                continue;
            }
            let f = &state[..k];
            let mut next: Vec<Option<EventId>> = Vec::with_capacity(k);
            for q in 0..k {
                let n = self.next_of(f, q).filter(|&e| self.po_enabled(f, e));
                next.push(n);
            }
            for a in 1..k {
                for b in a + 1..k {
                    if let (Some(x), Some(y)) = (next[a], next[b]) {
                        let (ex, ey) = (t.event(x), t.event(y));
                        if ex.op.is_access() && ey.op.is_access() && t.conflicting(x, y) {
                            self.races.insert((x.min(y), x.max(y)));
                        }
                    }
                }
            }
            for (q, n) in next.iter().enumerate() {
                let Some(e) = *n else { continue };
                let ev = t.event(e);
                let mut s = state.clone();
                match ev.op {
                    Op::Read => {
                        if Some(state[k + ev.target as usize]) != t.obs(e) {
                            continue;
                        }
                    }
                    Op::Write => s[k + ev.target as usize] = e,
                    Op::Acquire => {
                        let slot = k + nv + ev.target as usize;
                        if state[slot] != NONE {
                            continue;
                        }
                        s[slot] = q as u32;
                    }
                    Op::Release => s[k + nv + ev.target as usize] = NONE,
                    Op::Fork | Op::Join => {}
                }
                s[q] += 1;
                if !self.seen.contains(&s) {
                    stack.push(s);
                }
            }
        }
    }
}

/// Every predictable race of `t`, as pairs ordered by trace position.
pub fn oracle_races(t: &Trace, max_events: usize) -> Result<BTreeSet<Pair>, OracleError> {
    let limit = max_events.min(HARD_MAX_EVENTS);
    if t.input_len() > limit {
        return Err(OracleError::TooLarge {
            events: t.input_len(),
            limit,
        });
    }
    let mut s = Search {
        t,
        seen: HashSet::new(),
        races: BTreeSet::new(),
        preds: Vec::new(),
    };
    s.run();
    debug_assert!(s
        .races
        .iter()
        .all(|&(a, b)| t.thread_of(a) != INIT_THREAD && t.thread_of(b) != INIT_THREAD));
    Ok(s.races)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Params {
    pub threads: usize,
    pub events: usize,
    pub vars: usize,
    pub locks: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            threads: 2,
            events: 10,
            vars: 2,
            locks: 1,
        }
    }
}

/// Raw events of a random well-formed trace with exactly `p.events` events.
/// Critical sections are well nested, and every lock acquired is released
/// before the end.
pub fn random_raw(seed: u64, p: Params) -> Vec<RawEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let threads = p.threads.max(1);
    let vars = p.vars.max(1);
    let mut stacks: Vec<Vec<usize>> = vec![Vec::new(); threads];
    let mut holder: Vec<Option<usize>> = vec![None; p.locks];
    let mut out = Vec::with_capacity(p.events);
    let push = |out: &mut Vec<RawEvent>, th: usize, op: Op, target: String| {
        let mut r = RawEvent::new(&format!("T{}", th + 1), op, &target);
        r.line = out.len() + 1;
        out.push(r);
    };
    for emitted in 0..p.events {
        let remaining = p.events - emitted;
        let held: usize = stacks.iter().map(Vec::len).sum();
        if remaining == held {
            let mut owners: Vec<usize> = (0..threads).filter(|&q| !stacks[q].is_empty()).collect();
            owners.shuffle(&mut rng);
            let th = owners[0];
            let l = stacks[th].pop().expect("held lock");
            holder[l] = None;
            push(&mut out, th, Op::Release, format!("l{l}"));
            continue;
        }
        let th = rng.gen_range(0..threads);
        let roll: f64 = rng.gen();
        if !stacks[th].is_empty() && roll < 0.2 {
            let l = stacks[th].pop().expect("held lock");
            holder[l] = None;
            push(&mut out, th, Op::Release, format!("l{l}"));
            continue;
        }
        let free: Vec<usize> = (0..p.locks).filter(|&l| holder[l].is_none()).collect();
        if roll < 0.4 && !free.is_empty() && remaining >= held + 2 {
            let l = free[rng.gen_range(0..free.len())];
            holder[l] = Some(th);
            stacks[th].push(l);
            push(&mut out, th, Op::Acquire, format!("l{l}"));
            continue;
        }
        let op = if rng.gen_bool(0.5) { Op::Read } else { Op::Write };
        let v = rng.gen_range(0..vars);
        push(&mut out, th, op, format!("x{v}"));
    }
    out
}

/// A random well-formed trace; see [`random_raw`].
pub fn random_trace(seed: u64, p: Params) -> Trace {
    build_trace(&random_raw(seed, p), BuildOptions::default()).expect("generated traces are well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::parse_str;

    #[test]
    fn single_thread_has_no_races() {
        let t = parse_str("T1 w x\nT1 r x\nT1 w x\n").unwrap();
        assert!(oracle_races(&t, 16).unwrap().is_empty());
    }

    #[test]
    fn plain_conflict() {
        let t = parse_str("T1 w x\nT2 w x\n").unwrap();
        let r = oracle_races(&t, 16).unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn lock_protected_pair_is_not_a_race() {
        let t = parse_str("T1 acq l\nT1 w x\nT1 rel l\nT2 acq l\nT2 w x\nT2 rel l\n").unwrap();
        assert!(oracle_races(&t, 16).unwrap().is_empty());
    }

    #[test]
    fn too_large() {
        let t = random_trace(
            1,
            Params {
                threads: 2,
                events: 21,
                vars: 2,
                locks: 1,
            },
        );
        assert!(matches!(
            oracle_races(&t, 30),
            Err(OracleError::TooLarge { limit: 20, .. })
        ));
    }

    #[test]
    fn generator_is_deterministic() {
        let p = Params {
            threads: 3,
            events: 12,
            vars: 3,
            locks: 2,
        };
        assert_eq!(random_raw(42, p), random_raw(42, p));
        assert_ne!(random_raw(42, p), random_raw(43, p));
        assert_eq!(random_raw(5, p).len(), 12);
    }

    #[test]
    fn no_locks_no_lock_events() {
        let p = Params {
            threads: 3,
            events: 30,
            vars: 2,
            locks: 0,
        };
        for s in 0..50 {
            assert!(random_raw(s, p).iter().all(|r| r.op.is_access()));
        }
    }
}
