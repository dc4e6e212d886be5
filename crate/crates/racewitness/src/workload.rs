//! Synthetic large traces: lock-protected shared state, thread-private
//! state and a known number of sparse racy accesses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::trace::{Op, RawEvent};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScaleParams {
    pub events: usize,
    pub threads: usize,
    pub locks: usize,
    /// Shared variables; variable `v` is always accessed under lock `v % locks`.
    pub shared_vars: usize,
    pub private_vars: usize,
    /// Racy pairs, one fresh variable each.
    pub races: usize,
    /// How many of the racy pairs put the first access inside a critical
    /// section.
    pub locked_races: usize,
    pub seed: u64,
}

impl Default for ScaleParams {
    fn default() -> Self {
        ScaleParams {
            events: 1_000_000,
            threads: 8,
            locks: 8,
            shared_vars: 64,
            private_vars: 4,
            races: 100,
            locked_races: 10,
            seed: 7,
        }
    }
}

struct Out {
    events: Vec<RawEvent>,
}

impl Out {
    fn push(&mut self, th: usize, op: Op, target: String, loc: Option<String>) {
        let mut r = RawEvent::new(&format!("T{}", th + 1), op, &target);
        r.location = loc;
        r.line = self.events.len() + 1;
        self.events.push(r);
    }
}

/// Generate a trace of about `p.events` events. Critical sections are
/// emitted contiguously, so lock-protected accesses never race. Each racy
/// pair touches a variable nothing else touches, so it contributes exactly
/// one race.
pub fn scale_raw(p: &ScaleParams) -> Vec<RawEvent> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let threads = p.threads.max(2);
    let locks = p.locks.max(1);
    let shared = p.shared_vars.max(1);
    let private = p.private_vars.max(1);
    let mut out = Out {
        events: Vec::with_capacity(p.events + 16),
    };
    let gap = if p.races == 0 {
        usize::MAX
    } else {
        (p.events / (p.races + 1)).max(8)
    };
    let lock_every = p.races.checked_div(p.locked_races).map_or(usize::MAX, |n| n.max(1));
    let mut next_race = gap;
    let mut placed = 0;

    while out.events.len() < p.events {
        if placed < p.races && out.events.len() >= next_race {
            let a = rng.gen_range(0..threads);
            let b = (a + rng.gen_range(1..threads)) % threads;
            let var = format!("race{placed}");
            let locked = placed % lock_every == 0;
            let l = rng.gen_range(0..locks);
            if locked {
                out.push(a, Op::Acquire, format!("l{l}"), None);
            }
            out.push(a, Op::Write, var.clone(), Some(format!("racy.c:{}", 100 + 2 * placed)));
            if locked {
                out.push(a, Op::Release, format!("l{l}"), None);
            }
            let op = if rng.gen_bool(0.5) { Op::Read } else { Op::Write };
            out.push(b, op, var, Some(format!("racy.c:{}", 101 + 2 * placed)));
            placed += 1;
            next_race += gap;
            continue;
        }
        let th = rng.gen_range(0..threads);
        if rng.gen_bool(0.5) {
            let l = rng.gen_range(0..locks);
            out.push(th, Op::Acquire, format!("l{l}"), None);
            for _ in 0..rng.gen_range(1..=4) {
                // Pick a variable guarded by l.
                let slots = (shared + locks - 1 - l) / locks;
                let v = l + locks * rng.gen_range(0..slots.max(1));
                let v = if v < shared { v } else { l };
                let op = if rng.gen_bool(0.5) { Op::Read } else { Op::Write };
                out.push(th, op, format!("s{v}"), None);
            }
            out.push(th, Op::Release, format!("l{l}"), None);
        } else {
            for _ in 0..rng.gen_range(1..=4) {
                let v = rng.gen_range(0..private);
                let op = if rng.gen_bool(0.5) { Op::Read } else { Op::Write };
                out.push(th, op, format!("p{th}_{v}"), None);
            }
        }
    }
    out.events
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{build_trace, BuildOptions};

    #[test]
    fn small_instance_is_well_formed() {
        let p = ScaleParams {
            events: 5000,
            races: 10,
            locked_races: 3,
            ..Default::default()
        };
        let raw = scale_raw(&p);
        assert!(raw.len() >= 5000);
        let t = build_trace(&raw, BuildOptions::default()).unwrap();
        assert_eq!(t.thread_count(), 8);
        assert_eq!(raw.iter().filter(|r| r.target.starts_with("race")).count(), 20);
    }

    #[test]
    fn deterministic() {
        let p = ScaleParams {
            events: 2000,
            ..Default::default()
        };
        assert_eq!(scale_raw(&p), scale_raw(&p));
    }
}
