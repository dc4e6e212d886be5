//! Relative causal cones.
//!
//! The cone of `e` relative to thread `p` starts from everything `e` needs
//! to be enabled: its program-order predecessors, closed under program
//! order and observation. Then, for every thread other than `p` and the
//! thread of `e`, critical sections left open in the cone are run to
//! completion whenever the thread releases them at all, and the result is
//! re-closed. That completion step is the only approximation; cones where
//! it added nothing are exact lower bounds.

use crate::trace::{EventId, Frontier, ThreadId, Trace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cone {
    /// Program-order and observation closure of the predecessors of `e`.
    pub base: Frontier,
    /// `base` plus completed critical sections of third threads.
    pub full: Frontier,
    pub event: EventId,
    pub relative_to: ThreadId,
}

impl Cone {
    /// True when completing critical sections added events.
    pub fn cp4_used(&self) -> bool {
        self.base != self.full
    }

    pub fn contains(&self, t: &Trace, e: EventId) -> bool {
        self.full.contains(t, e)
    }

    pub fn open_acquires(&self, t: &Trace) -> Vec<EventId> {
        self.full.open_acquires(t)
    }
}

/// Raise `f` to the least fixpoint of critical-section completion on every
/// thread except `p` and `own`.
pub fn complete_sections(t: &Trace, f: &mut Frontier, p: ThreadId, own: ThreadId) {
    loop {
        let mut changed = false;
        for q in 0..t.width() as ThreadId {
            if q == p || q == own {
                continue;
            }
            let cur = f.0[q as usize];
            let to = t.close_to(q, cur);
            if to > cur {
                f.0[q as usize] = to;
                f.join(t.clock(t.chain(q)[to as usize - 1]));
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

pub fn rcone(t: &Trace, e: EventId, p: ThreadId) -> Cone {
    let base = t.base_clock(e);
    let mut full = base.clone();
    complete_sections(t, &mut full, p, t.thread_of(e));
    Cone {
        base,
        full,
        event: e,
        relative_to: p,
    }
}

/// Cone of `next`, a program-order successor of `cone.event` on the same
/// thread, reusing the work already done.
pub fn rcone_extend(t: &Trace, cone: &Cone, next: EventId) -> Cone {
    debug_assert_eq!(t.thread_of(next), t.thread_of(cone.event));
    debug_assert!(t.ord(next) > t.ord(cone.event));
    let step = t.base_clock(next);
    let base = cone.base.joined(&step);
    let mut full = cone.full.joined(&step);
    complete_sections(t, &mut full, cone.relative_to, t.thread_of(next));
    Cone {
        base,
        full,
        event: next,
        relative_to: cone.relative_to,
    }
}
