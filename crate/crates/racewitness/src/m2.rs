//! The full race-detection driver.
//!
//! For every access `e1` and every other thread `p`, the conflicting
//! accesses of `p` after `e1` are scanned in program order while the cone
//! of the current `e2` is extended incrementally. The scan stops once `e1`
//! is in the causal past of `e2`. Pairs whose joint cone has no open
//! critical section are races right away, with the cone itself as the
//! witness prefix; the rest go through the full pair decision.
//!
//! Rejections that might be missed races are kept in a separate set. When
//! that set is empty the result is complete for the trace.

use rayon::prelude::*;
use serde::Serialize;

use crate::cone::{rcone, rcone_extend, Cone};
use crate::decision::{decide_in, Decision, Meta, Reject};
use crate::trace::{check_race, EventId, Frontier, Op, ThreadId, Trace, INIT_THREAD};

/// How a reported race is witnessed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witness {
    /// The prefix-closed set, in trace order, followed by the pair.
    Prefix(Frontier),
    Explicit(Vec<EventId>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RaceReport {
    pub e1: EventId,
    pub e2: EventId,
    pub witness: Witness,
    pub meta: Meta,
}

impl RaceReport {
    /// The witness as an event sequence ending with the racy pair.
    pub fn witness_events(&self, t: &Trace) -> Vec<EventId> {
        match &self.witness {
            Witness::Explicit(w) => w.clone(),
            Witness::Prefix(f) => {
                let mut w = f.events(t);
                w.extend([self.e1, self.e2]);
                w
            }
        }
    }
}

/// A pair that was not reported although it may be a race.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Unresolved {
    pub e1: EventId,
    pub e2: EventId,
    pub reason: Reject,
    pub meta: Meta,
}

#[derive(Clone, Debug, Default)]
pub struct RaceSet {
    /// Reported races, sorted by (e1, e2).
    pub z: Vec<RaceReport>,
    /// Rejections that do not rule out a race, sorted by (e1, e2).
    pub c: Vec<Unresolved>,
    /// Candidate pairs examined.
    pub examined: usize,
    /// Variables dropped before the scan.
    pub pruned_vars: usize,
    /// The pair budget ran out before every candidate was examined.
    pub truncated: bool,
}

impl RaceSet {
    /// No race can have been missed.
    pub fn is_complete(&self) -> bool {
        self.c.is_empty() && !self.truncated
    }

    pub fn pairs(&self) -> Vec<(EventId, EventId)> {
        self.z.iter().map(|r| (r.e1, r.e2)).collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct M2Options {
    /// Worker threads; 0 uses the global pool.
    pub jobs: usize,
    /// Stop after examining this many candidate pairs.
    pub max_pairs: Option<usize>,
    /// Drop variables that cannot race before scanning.
    pub prune: bool,
}

impl Default for M2Options {
    fn default() -> Self {
        M2Options {
            jobs: 0,
            max_pairs: None,
            prune: true,
        }
    }
}

/// Variables that may still hold a race.
#[derive(Clone, Debug)]
pub struct Candidates {
    live: Vec<bool>,
}

impl Candidates {
    pub fn all(t: &Trace) -> Self {
        Candidates {
            live: vec![true; t.var_count()],
        }
    }

    pub fn is_live(&self, var: u32) -> bool {
        self.live[var as usize]
    }

    pub fn live_count(&self) -> usize {
        self.live.iter().filter(|&&b| b).count()
    }

    /// The pair is worth deciding: conflicting accesses on a live variable,
    /// neither in the causal past of the other, no lock held by both.
    pub fn admits(&self, t: &Trace, e1: EventId, e2: EventId) -> bool {
        let (a, b) = (t.event(e1), t.event(e2));
        a.op.is_access()
            && b.op.is_access()
            && a.thread != b.thread
            && a.thread != INIT_THREAD
            && b.thread != INIT_THREAD
            && t.conflicting(e1, e2)
            && self.is_live(a.target)
            && !t.in_base(e2, e1)
            && !t.in_base(e1, e2)
            && !share_lock(t, e1, e2)
    }
}

fn share_lock(t: &Trace, e1: EventId, e2: EventId) -> bool {
    let l1 = t.locks_held_at(e1);
    !l1.is_empty() && t.locks_held_at(e2).iter().any(|l| l1.contains(l))
}

/// Drop variables whose accesses all hold a common lock, and variables
/// where every access already has each other thread's last conflicting
/// access in its causal past.
pub fn prune_candidates(t: &Trace) -> Candidates {
    let mut live = vec![false; t.var_count()];
    let maps = t.maps();
    let users: Vec<ThreadId> = (1..t.width() as ThreadId).collect();
    for (x, slot) in live.iter_mut().enumerate() {
        let x = x as u32;
        let accessing: Vec<ThreadId> = users
            .iter()
            .copied()
            .filter(|&q| maps.var_access(q, x).is_some())
            .collect();
        let writers = accessing
            .iter()
            .filter(|&&q| maps.var_access(q, x).is_some_and(|a| !a.writes.is_empty()))
            .count();
        if accessing.len() < 2 || writers == 0 {
            continue;
        }
        let mut common: Option<Vec<u32>> = None;
        for &q in &accessing {
            for &e in &maps.var_access(q, x).expect("accessing thread").all {
                let held = t.locks_held_at(e);
                common = Some(match common {
                    None => held,
                    Some(c) => c.into_iter().filter(|l| held.contains(l)).collect(),
                });
                if common.as_ref().is_some_and(Vec::is_empty) {
                    break;
                }
            }
        }
        if common.is_some_and(|c| !c.is_empty()) {
            continue;
        }
        'scan: for &p in &accessing {
            for &e in &maps.var_access(p, x).expect("accessing thread").all {
                let is_write = t.event(e).op == Op::Write;
                for &q in &accessing {
                    if q == p {
                        continue;
                    }
                    let a = maps.var_access(q, x).expect("accessing thread");
                    let list = if is_write { &a.all } else { &a.writes };
                    let i = list.partition_point(|&f| f < e);
                    if i > 0 && !t.in_base(e, list[i - 1]) {
                        *slot = true;
                        break 'scan;
                    }
                }
            }
        }
    }
    Candidates { live }
}

enum Outcome {
    Race(RaceReport),
    Unresolved(Unresolved),
}

struct ScanResult {
    /// Outcomes tagged with the ordinal of the examined pair.
    outcomes: Vec<(usize, Outcome)>,
    examined: usize,
    truncated: bool,
}

fn verified(t: &Trace, r: RaceReport) -> Outcome {
    let w = r.witness_events(t);
    match check_race(t, &w, r.e1, r.e2) {
        Ok(()) => Outcome::Race(r),
        Err(why) => {
            log::error!(
                "dropping e{},e{}: witness failed replay: {why}",
                t.event(r.e1).index,
                t.event(r.e2).index
            );
            Outcome::Unresolved(Unresolved {
                e1: r.e1,
                e2: r.e2,
                reason: Reject::WitnessRejected,
                meta: r.meta,
            })
        }
    }
}

/// Decide one pair over the joint cone `x`.
fn attempt(t: &Trace, e1: EventId, e2: EventId, x: &Frontier, cp4: bool) -> Result<RaceReport, (Reject, Meta)> {
    let meta = Meta {
        cp4_used: cp4,
        inserted: false,
    };
    if x.contains(t, e1) || x.contains(t, e2) {
        return Err((Reject::InCone, meta));
    }
    if !x.has_open_acquires(t) {
        return Ok(RaceReport {
            e1,
            e2,
            witness: Witness::Prefix(x.clone()),
            meta,
        });
    }
    match decide_in(t, e1, e2, x, cp4) {
        Decision::Race { witness, meta, .. } => Ok(RaceReport {
            e1,
            e2,
            witness: Witness::Explicit(witness),
            meta,
        }),
        Decision::NoRace { reason, meta } => Err((reason, meta)),
    }
}

/// Scan the conflicting accesses of thread `p` after `e1`.
fn scan(t: &Trace, e1: EventId, p: ThreadId, limit: usize) -> ScanResult {
    let mut res = ScanResult {
        outcomes: Vec::new(),
        examined: 0,
        truncated: false,
    };
    let ev = t.event(e1);
    let Some(acc) = t.maps().var_access(p, ev.target) else {
        return res;
    };
    let list = if ev.op == Op::Write { &acc.all } else { &acc.writes };
    let start = list.partition_point(|&f| f <= e1);
    if start == list.len() {
        return res;
    }
    let cone1 = rcone(t, e1, p);
    let mut cone2: Option<Cone> = None;
    for &e2 in &list[start..] {
        if t.in_base(e2, e1) {
            break;
        }
        cone2 = Some(match cone2 {
            None => rcone(t, e2, ev.thread),
            Some(c) => rcone_extend(t, &c, e2),
        });
        if share_lock(t, e1, e2) {
            continue;
        }
        if res.examined == limit {
            res.truncated = true;
            break;
        }
        let n = res.examined;
        res.examined += 1;
        let c2 = cone2.as_ref().expect("cone set above");
        let cp4 = cone1.cp4_used() || c2.cp4_used();
        let mut out = attempt(t, e1, e2, &cone1.full.joined(&c2.full), cp4);
        if cp4 && out.is_err() {
            // Completed sections can drag in events the race does not need.
            if let Ok(r) = attempt(t, e1, e2, &cone1.base.joined(&c2.base), false) {
                out = Ok(r);
            }
        }
        match out {
            Ok(r) => res.outcomes.push((n, verified(t, r))),
            Err((reason, meta)) => {
                if reason == Reject::InCone || meta.incomplete() {
                    res.outcomes
                        .push((n, Outcome::Unresolved(Unresolved { e1, e2, reason, meta })));
                }
            }
        }
    }
    res
}

/// Scan units in trace order of `e1`, then by thread.
fn units(t: &Trace, cand: &Candidates) -> Vec<(EventId, ThreadId)> {
    let maps = t.maps();
    let mut threads_of: Vec<Vec<ThreadId>> = vec![Vec::new(); t.var_count()];
    for x in 0..t.var_count() as u32 {
        if cand.is_live(x) {
            threads_of[x as usize] = (1..t.width() as ThreadId)
                .filter(|&q| maps.var_access(q, x).is_some())
                .collect();
        }
    }
    let mut out = Vec::new();
    for e in t.init_len() as EventId..t.len() as EventId {
        let ev = t.event(e);
        if !ev.op.is_access() || !cand.is_live(ev.target) {
            continue;
        }
        for &p in &threads_of[ev.target as usize] {
            if p != ev.thread {
                out.push((e, p));
            }
        }
    }
    out
}

fn run(t: &Trace, cand: &Candidates, opts: &M2Options) -> RaceSet {
    let units = units(t, cand);
    let mut set = RaceSet {
        pruned_vars: t.var_count() - cand.live_count(),
        ..RaceSet::default()
    };
    let absorb = |set: &mut RaceSet, r: ScanResult| {
        set.examined += r.examined;
        set.truncated |= r.truncated;
        for (_, o) in r.outcomes {
            match o {
                Outcome::Race(r) => set.z.push(r),
                Outcome::Unresolved(u) => set.c.push(u),
            }
        }
    };
    match opts.max_pairs {
        None => {
            let results: Vec<ScanResult> = units.par_iter().map(|&(e1, p)| scan(t, e1, p, usize::MAX)).collect();
            for r in results {
                absorb(&mut set, r);
            }
        }
        Some(budget) => {
            // Batches keep the cut-off independent of scheduling.
            const BATCH: usize = 256;
            for chunk in units.chunks(BATCH) {
                let remaining = budget - set.examined;
                if remaining == 0 {
                    set.truncated = true;
                    break;
                }
                let results: Vec<ScanResult> = chunk.par_iter().map(|&(e1, p)| scan(t, e1, p, remaining)).collect();
                for mut r in results {
                    let left = budget - set.examined;
                    if r.examined > left {
                        r.truncated = true;
                        r.examined = left;
                        keep_first_examined(&mut r, left);
                    }
                    absorb(&mut set, r);
                }
            }
        }
    }
    set.z.sort_by_key(|r| (r.e1, r.e2));
    set.c.sort_by_key(|u| (u.e1, u.e2));
    set
}

fn keep_first_examined(r: &mut ScanResult, n: usize) {
    r.outcomes.retain(|(i, _)| *i < n);
}

/// Run the full analysis.
pub fn m2(t: &Trace, opts: &M2Options) -> RaceSet {
    let cand = if opts.prune {
        prune_candidates(t)
    } else {
        Candidates::all(t)
    };
    if opts.jobs == 0 {
        return run(t, &cand, opts);
    }
    match rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build() {
        Ok(pool) => pool.install(|| run(t, &cand, opts)),
        Err(e) => {
            log::warn!(
                "cannot build a pool of {} workers ({e}); using the global pool",
                opts.jobs
            );
            run(t, &cand, opts)
        }
    }
}

/// Scan one (e1, p) unit on its own.
pub fn m2_scan(t: &Trace, e1: EventId, p: ThreadId) -> RaceSet {
    let r = scan(t, e1, p, usize::MAX);
    let mut set = RaceSet {
        examined: r.examined,
        ..RaceSet::default()
    };
    for (_, o) in r.outcomes {
        match o {
            Outcome::Race(r) => set.z.push(r),
            Outcome::Unresolved(u) => set.c.push(u),
        }
    }
    set
}
