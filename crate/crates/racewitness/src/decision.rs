//! Deciding a single pair: build the joint cone, close it, totally order
//! the conflicting events outside one thread, and linearize.

use serde::Serialize;

use crate::closure::{ClosedPo, Infeasible};
use crate::cone::rcone;
use crate::linearize::max_min;
use crate::trace::{check_race, EventId, Frontier, Op, ThreadId, Trace, INIT_THREAD};

/// Why a pair was not reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reject {
    /// Not two conflicting accesses on different user threads.
    NotConflicting,
    /// One of the events lies in the joint cone.
    InCone,
    /// The joint cone has two open critical sections on one lock.
    LockInfeasible,
    /// Closing the cone produced a cycle.
    ClosureCycle,
    /// Every branch ran into a cycle while ordering conflicts.
    BranchesInfeasible,
    /// A witness was produced but failed replay. Never expected.
    WitnessRejected,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Meta {
    /// Critical-section completion enlarged one of the cones.
    pub cp4_used: bool,
    /// At least one arbitrary ordering was inserted in some branch.
    pub inserted: bool,
}

impl Meta {
    /// A negative answer under these conditions may be a missed race.
    pub fn incomplete(&self) -> bool {
        self.cp4_used || self.inserted
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Decision {
    Race {
        witness: Vec<EventId>,
        branch: u8,
        meta: Meta,
    },
    NoRace {
        reason: Reject,
        meta: Meta,
    },
}

impl Decision {
    pub fn is_race(&self) -> bool {
        matches!(self, Decision::Race { .. })
    }

    pub fn meta(&self) -> Meta {
        match self {
            Decision::Race { meta, .. } | Decision::NoRace { meta, .. } => *meta,
        }
    }

    pub fn witness(&self) -> Option<&[EventId]> {
        match self {
            Decision::Race { witness, .. } => Some(witness),
            Decision::NoRace { .. } => None,
        }
    }
}

/// Outcome of one branch.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Branch {
    Race(Vec<EventId>),
    Infeasible(Infeasible),
    Rejected(Reject),
}

/// Two accesses to the same variable on different user threads, one a write.
pub fn is_candidate(t: &Trace, e1: EventId, e2: EventId) -> bool {
    let (a, b) = (t.event(e1), t.event(e2));
    a.op.is_access()
        && b.op.is_access()
        && a.thread != b.thread
        && a.thread != INIT_THREAD
        && b.thread != INIT_THREAD
        && t.conflicting(e1, e2)
}

/// Earliest event before `e` in trace order, in X, on a thread other than
/// `skip` and `e`'s own, conflicting with `e` and unordered with it in `q`.
fn earliest_unordered(q: &ClosedPo<'_>, e: EventId, skip: ThreadId) -> Option<EventId> {
    let t = q.trace();
    let x = q.frontier();
    let ev = *t.event(e);
    let maps = t.maps();
    let mut best: Option<EventId> = None;
    for c in 0..t.width() as ThreadId {
        if c == skip || c == ev.thread || c == INIT_THREAD || x.0[c as usize] == 0 {
            continue;
        }
        let list: &[EventId] = match ev.op {
            Op::Read => maps.var_access(c, ev.target).map_or(&[], |a| &a.writes),
            Op::Write => maps.var_access(c, ev.target).map_or(&[], |a| &a.all),
            Op::Acquire | Op::Release => maps.lock_access(c, ev.target).map_or(&[], |a| &a.all),
            _ => &[],
        };
        if list.is_empty() {
            continue;
        }
        let lo_pos = q.predecessor_pos(e, c).map_or(0, |p| p + 1);
        let hi_pos = q.successor_pos(e, c).unwrap_or(x.0[c as usize]);
        if lo_pos >= hi_pos {
            continue;
        }
        let lo = t.chain(c)[lo_pos as usize];
        let hi = t.bound(c, hi_pos).min(e);
        let i = list.partition_point(|&f| f < lo);
        if let Some(&f) = list.get(i) {
            if f < hi && best.is_none_or(|b| f < b) {
                best = Some(f);
            }
        }
    }
    best
}

/// Order every conflicting unordered pair outside thread `xi`, then
/// linearize with `xi` as the eager side.
fn run_branch<'t>(mut q: ClosedPo<'t>, xi: ThreadId, inserted: &mut bool) -> Result<Vec<EventId>, Branch> {
    let t = q.trace();
    let events: Vec<EventId> = q
        .frontier()
        .events(t)
        .into_iter()
        .filter(|&e| {
            let ev = t.event(e);
            ev.thread != xi && ev.thread != INIT_THREAD && (ev.op.is_access() || ev.op.is_lock())
        })
        .collect();
    // Pairs are taken by the later event in trace order, each paired with
    // the earliest unordered conflicting event before it.
    for e in events {
        while let Some(f) = earliest_unordered(&q, e, xi) {
            *inserted = true;
            q = q.insert_and_close(f, e).map_err(Branch::Infeasible)?;
        }
    }
    debug_assert!(q.frontier().size() > 2000 || crate::linearize::is_m_trace(&q, xi));
    max_min(&q, xi).map_err(|_| Branch::Rejected(Reject::WitnessRejected))
}

/// Append the racy pair in trace order unless that would end on a read
/// with nothing written before it.
fn finish_witness(t: &Trace, mut lin: Vec<EventId>, e1: EventId, e2: EventId) -> Vec<EventId> {
    let (a, b) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
    let ea = t.event(a);
    let written = ea.op == Op::Write
        || t.init_len() > 0
        || lin.iter().any(|&w| {
            let ew = t.event(w);
            ew.op == Op::Write && ew.target == ea.target
        });
    if written {
        lin.extend([a, b]);
    } else {
        lin.extend([b, a]);
    }
    lin
}

fn branch_in(t: &Trace, e1: EventId, e2: EventId, q: &ClosedPo<'_>, i: u8, inserted: &mut bool) -> Branch {
    let xi = t.thread_of(if i == 1 { e1 } else { e2 });
    match run_branch(q.clone(), xi, inserted) {
        Ok(lin) => {
            let w = finish_witness(t, lin, e1, e2);
            match check_race(t, &w, e1, e2) {
                Ok(()) => Branch::Race(w),
                Err(why) => {
                    log::error!(
                        "witness for e{},e{} failed replay: {why}",
                        t.event(e1).index,
                        t.event(e2).index
                    );
                    Branch::Rejected(Reject::WitnessRejected)
                }
            }
        }
        Err(b) => b,
    }
}

fn prepare<'t>(t: &'t Trace, e1: EventId, e2: EventId, x: &Frontier) -> Result<ClosedPo<'t>, Reject> {
    if x.contains(t, e1) || x.contains(t, e2) {
        return Err(Reject::InCone);
    }
    if !x.is_lock_feasible(t) {
        return Err(Reject::LockInfeasible);
    }
    ClosedPo::respect(t, x)
        .and_then(|p| p.close())
        .map_err(|_| Reject::ClosureCycle)
}

/// Decide `(e1, e2)` over a precomputed joint cone `x`.
pub fn decide_in(t: &Trace, e1: EventId, e2: EventId, x: &Frontier, cp4_used: bool) -> Decision {
    let mut meta = Meta {
        cp4_used,
        inserted: false,
    };
    if !is_candidate(t, e1, e2) {
        return Decision::NoRace {
            reason: Reject::NotConflicting,
            meta,
        };
    }
    let q = match prepare(t, e1, e2, x) {
        Ok(q) => q,
        Err(reason) => return Decision::NoRace { reason, meta },
    };
    let mut reason = Reject::BranchesInfeasible;
    for i in [1u8, 2] {
        match branch_in(t, e1, e2, &q, i, &mut meta.inserted) {
            Branch::Race(witness) => {
                return Decision::Race {
                    witness,
                    branch: i,
                    meta,
                }
            }
            Branch::Rejected(r) => reason = r,
            Branch::Infeasible(_) => {}
        }
    }
    Decision::NoRace { reason, meta }
}

/// Joint cone of the pair and whether completion enlarged it.
pub fn joint_cone(t: &Trace, e1: EventId, e2: EventId) -> (Frontier, bool) {
    let c1 = rcone(t, e1, t.thread_of(e2));
    let c2 = rcone(t, e2, t.thread_of(e1));
    (c1.full.joined(&c2.full), c1.cp4_used() || c2.cp4_used())
}

/// Joint cone without critical-section completion.
pub fn joint_base_cone(t: &Trace, e1: EventId, e2: EventId) -> Frontier {
    let c1 = rcone(t, e1, t.thread_of(e2));
    let c2 = rcone(t, e2, t.thread_of(e1));
    c1.base.joined(&c2.base)
}

/// Decide whether `(e1, e2)` is a predictable race, trying the branch
/// with `e1`'s thread as the eager side first.
pub fn race_decision(t: &Trace, e1: EventId, e2: EventId) -> Decision {
    if !is_candidate(t, e1, e2) {
        return Decision::NoRace {
            reason: Reject::NotConflicting,
            meta: Meta::default(),
        };
    }
    let (x, cp4) = joint_cone(t, e1, e2);
    let d = decide_in(t, e1, e2, &x, cp4);
    if cp4 && !d.is_race() {
        // Completed sections can drag in events the race does not need.
        let b = decide_in(t, e1, e2, &joint_base_cone(t, e1, e2), false);
        if b.is_race() {
            return b;
        }
    }
    d
}

/// Run a single branch: `i == 1` makes `e1`'s thread the eager side.
pub fn decide_branch(t: &Trace, e1: EventId, e2: EventId, i: u8) -> Branch {
    if !is_candidate(t, e1, e2) {
        return Branch::Rejected(Reject::NotConflicting);
    }
    let (x, _) = joint_cone(t, e1, e2);
    match prepare(t, e1, e2, &x) {
        Ok(q) => branch_in(t, e1, e2, &q, i, &mut false),
        Err(r) => Branch::Rejected(r),
    }
}

/// A race decision is only accepted with a witness that replays.
pub fn verify_decision(t: &Trace, e1: EventId, e2: EventId, d: &Decision) -> bool {
    match d {
        Decision::Race { witness, .. } => check_race(t, witness, e1, e2).is_ok(),
        Decision::NoRace { .. } => true,
    }
}
