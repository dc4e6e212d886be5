//! Trace closure of a partial order over a feasible prefix-closed set, with
//! incremental edge insertion. Closure adds the orderings forced by the
//! observation function (a conflicting write ordered before a read must
//! also precede the read's observation, and a write ordered after an
//! observation must follow its readers) and by lock semantics (once two
//! critical sections on a lock are ordered, the first release precedes the
//! second acquire). An ordering that would close a cycle makes the set
//! infeasible.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::dag::{Change, Node, PartialOrderDs};
use crate::trace::{EventId, Frontier, Op, ThreadId, Trace};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Discipline {
    #[default]
    Fifo,
    Lifo,
}

/// Closure failed: ordering `edge` would contradict orderings already forced.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Infeasible {
    pub edge: (EventId, EventId),
}

type Shared = Arc<(Vec<u32>, Vec<u32>)>;

/// A partial order over a feasible set X, kept in a reachability structure.
#[derive(Clone)]
pub struct ClosedPo<'t> {
    t: &'t Trace,
    x: Frontier,
    bounds: Vec<EventId>,
    ds: PartialOrderDs,
    base_edges: Vec<(EventId, EventId)>,
    inserted: Vec<(EventId, EventId)>,
    work: VecDeque<(EventId, EventId)>,
    discipline: Discipline,
    shared: Vec<Option<Shared>>,
    changed: Vec<Change>,
}

impl std::fmt::Debug for ClosedPo<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClosedPo")
            .field("x", &self.x)
            .field("base_edges", &self.base_edges)
            .field("inserted", &self.inserted)
            .finish()
    }
}

/// Cross-chain edges of the weakest partial order over X that respects the
/// trace: program order across threads, observation edges, and every
/// release ordered before each open acquire of the same lock.
pub fn respect_edges(t: &Trace, x: &Frontier) -> Vec<(EventId, EventId)> {
    let mut edges = Vec::new();
    let mut preds = Vec::new();
    for q in 0..t.width() {
        for &e in &t.chain(q as ThreadId)[..x.0[q] as usize] {
            preds.clear();
            t.cross_preds(e, &mut preds);
            edges.extend(preds.iter().map(|&p| (p, e)));
            if let Some(w) = t.obs(e) {
                if t.thread_of(w) != q as ThreadId {
                    edges.push((w, e));
                }
            }
        }
    }
    for acq in x.open_acquires(t) {
        let l = t.event(acq).target;
        let p = t.thread_of(acq);
        for q in 0..t.width() as ThreadId {
            if q == p || x.0[q as usize] == 0 {
                continue;
            }
            let bound = t.bound(q, x.0[q as usize]);
            if let Some(rel) = t.maps().before_release(q, l, bound - 1) {
                edges.push((rel, acq));
            }
        }
    }
    edges.sort_unstable();
    edges.dedup();
    edges
}

impl<'t> ClosedPo<'t> {
    /// The respecting partial order over X, not yet closed.
    pub fn respect(t: &'t Trace, x: &Frontier) -> Result<Self, Infeasible> {
        let edges = respect_edges(t, x);
        let node = |e: EventId| (t.thread_of(e), t.ord(e));
        let ds_edges: Vec<(Node, Node)> = edges.iter().map(|&(a, b)| (node(a), node(b))).collect();
        let ds = match PartialOrderDs::new(&x.0, &ds_edges) {
            Ok(ds) => ds,
            Err(_) => {
                return Err(Infeasible {
                    edge: edges.last().copied().unwrap_or((0, 0)),
                })
            }
        };
        let k = t.width();
        Ok(ClosedPo {
            t,
            x: x.clone(),
            bounds: (0..k).map(|q| t.bound(q as ThreadId, x.0[q])).collect(),
            ds,
            base_edges: edges,
            inserted: Vec::new(),
            work: VecDeque::new(),
            discipline: Discipline::Fifo,
            shared: vec![None; k * k],
            changed: Vec::new(),
        })
    }

    pub fn with_discipline(mut self, d: Discipline) -> Self {
        self.discipline = d;
        self
    }

    pub fn trace(&self) -> &'t Trace {
        self.t
    }

    pub fn frontier(&self) -> &Frontier {
        &self.x
    }

    pub fn contains(&self, e: EventId) -> bool {
        self.x.contains(self.t, e)
    }

    /// Cross edges the order was built from.
    pub fn base_edges(&self) -> &[(EventId, EventId)] {
        &self.base_edges
    }

    /// Edges added by closure or explicit insertion, in insertion order.
    /// Pushed edges that were already implied are not listed.
    pub fn inserted(&self) -> &[(EventId, EventId)] {
        &self.inserted
    }

    fn node(&self, e: EventId) -> Node {
        (self.t.thread_of(e), self.t.ord(e))
    }

    fn event_at(&self, (c, p): Node) -> EventId {
        self.t.chain(c)[p as usize]
    }

    /// `a` is ordered at or before `b`. Both must be in X.
    pub fn le(&self, a: EventId, b: EventId) -> bool {
        self.ds.query(self.node(a), self.node(b))
    }

    pub fn ordered(&self, a: EventId, b: EventId) -> bool {
        self.le(a, b) || self.le(b, a)
    }

    /// Latest event of `thread`'s part of X ordered before `e`.
    pub fn predecessor(&self, e: EventId, thread: ThreadId) -> Option<EventId> {
        self.ds
            .predecessor(self.node(e), thread)
            .map(|p| self.event_at((thread, p)))
    }

    /// Earliest event of `thread`'s part of X ordered after `e`.
    pub fn successor(&self, e: EventId, thread: ThreadId) -> Option<EventId> {
        self.ds
            .successor(self.node(e), thread)
            .map(|p| self.event_at((thread, p)))
    }

    pub fn predecessor_pos(&self, e: EventId, thread: ThreadId) -> Option<u32> {
        self.ds.predecessor(self.node(e), thread)
    }

    pub fn successor_pos(&self, e: EventId, thread: ThreadId) -> Option<u32> {
        self.ds.successor(self.node(e), thread)
    }

    fn push(&mut self, a: EventId, b: EventId) {
        if a != b {
            self.work.push_back((a, b));
        }
    }

    fn shared(&mut self, i: ThreadId, j: ThreadId) -> Shared {
        let k = self.t.width();
        let slot = i as usize * k + j as usize;
        if let Some(s) = &self.shared[slot] {
            return s.clone();
        }
        let maps = self.t.maps();
        let mut vars: Vec<u32> = maps
            .variables_of(i)
            .filter(|(v, a)| !a.writes.is_empty() && maps.var_access(j, **v).is_some())
            .map(|(v, _)| *v)
            .collect();
        let mut locks: Vec<u32> = maps
            .locks_of(i)
            .filter(|(l, _)| maps.lock_access(j, **l).is_some())
            .map(|(l, _)| *l)
            .collect();
        vars.sort_unstable();
        locks.sort_unstable();
        let s = Arc::new((vars, locks));
        self.shared[slot] = Some(s.clone());
        s
    }

    /// Last reader of `w` on each thread, restricted to X.
    fn push_last_readers(&mut self, w: EventId, before: EventId) {
        let t = self.t;
        let readers = t.maps().readers(w);
        let mut i = 0;
        while i < readers.len() {
            let p = t.thread_of(readers[i]);
            let end = i + readers[i..].partition_point(|&r| t.thread_of(r) == p);
            let bound = self.bounds[p as usize];
            let seg = &readers[i..end];
            let n = seg.partition_point(|&r| r < bound);
            if n > 0 {
                self.push(seg[n - 1], before);
            }
            i = end;
        }
    }

    /// Rules for the ordered pair `e1 <= e2`, skipping variables and locks
    /// whose last write or acquire up to `e1` sits at or before position
    /// `lo`: the pair ending there was already ordered before `e2`, so it
    /// produced the same constraints.
    fn pair_rules(&mut self, e1: EventId, e2: EventId, lo: Option<u32>) {
        let t = self.t;
        let (i, j) = (t.thread_of(e1), t.thread_of(e2));
        let fresh = |e: EventId| lo.is_none_or(|lo| t.ord(e) > lo);
        let shared = self.shared(i, j);
        let bound = self.bounds[j as usize];
        for &x in &shared.0 {
            let Some(w) = t.maps().before_write(i, x, e1).filter(|&w| fresh(w)) else {
                continue;
            };
            if let Some(r) = t.maps().after_read(j, x, e2, bound) {
                let o = t.obs(r).expect("read has observation");
                if o != w {
                    self.push(w, o);
                }
            }
            if let Some(wbar) = t.maps().after_write(j, x, e2, bound) {
                self.push_last_readers(w, wbar);
            }
        }
        for &l in &shared.1 {
            let Some(acq1) = t.maps().before_acquire(i, l, e1).filter(|&a| fresh(a)) else {
                continue;
            };
            let Some(rel1) = t.matching(acq1).filter(|&r| r < self.bounds[i as usize]) else {
                continue;
            };
            let Some(rel2) = t.maps().after_release(j, l, e2, bound) else {
                continue;
            };
            let acq2 = t.matching(rel2).expect("release has acquire");
            if acq1 != acq2 {
                self.push(rel1, acq2);
            }
        }
    }

    /// Rules for `b` alone, given `e1` on another chain ordered before it.
    /// Over all `b` of a chain segment this covers what `pair_rules` does
    /// for the segment's first event.
    fn event_rules(&mut self, e1: EventId, b: EventId) {
        let t = self.t;
        let i = t.thread_of(e1);
        let ev = *t.event(b);
        match ev.op {
            Op::Read => {
                if let Some(w) = t.maps().before_write(i, ev.target, e1) {
                    let o = t.obs(b).expect("read has observation");
                    if o != w {
                        self.push(w, o);
                    }
                }
            }
            Op::Write => {
                if let Some(w) = t.maps().before_write(i, ev.target, e1) {
                    self.push_last_readers(w, b);
                }
            }
            Op::Release => {
                let Some(acq1) = t.maps().before_acquire(i, ev.target, e1) else {
                    return;
                };
                let Some(rel1) = t.matching(acq1).filter(|&r| r < self.bounds[i as usize]) else {
                    return;
                };
                let acq2 = t.matching(b).expect("release has acquire");
                if acq1 != acq2 {
                    self.push(rel1, acq2);
                }
            }
            _ => {}
        }
    }

    /// Constraints from a frontier change: positions `[to, old_succ)` of
    /// the target chain just became reachable from `from`.
    fn apply_change(&mut self, c: Change) {
        let (i, p) = c.from;
        let (j, s) = c.to;
        let end = c.old_succ.min(self.x.0[j as usize]);
        let e1 = self.event_at((i, p));
        let shared = self.shared(i, j);
        if (end - s) as usize <= 4 * (shared.0.len() + shared.1.len() + 1) {
            for pos in s..end {
                let b = self.event_at((j, pos));
                self.event_rules(e1, b);
            }
        } else {
            self.pair_rules(e1, self.event_at((j, s)), c.old_pred);
        }
    }

    fn same_chain_rules(&mut self) {
        let t = self.t;
        for q in 0..t.width() as ThreadId {
            let n = self.x.0[q as usize] as usize;
            let mut last_write: std::collections::HashMap<u32, EventId> = Default::default();
            for &e in &t.chain(q)[..n] {
                let ev = *t.event(e);
                match ev.op {
                    Op::Read => {
                        if let Some(&w) = last_write.get(&ev.target) {
                            let o = t.obs(e).expect("read has observation");
                            if o != w {
                                self.push(w, o);
                            }
                        }
                    }
                    Op::Write => {
                        if let Some(&w) = last_write.get(&ev.target) {
                            self.push_last_readers(w, e);
                        }
                        last_write.insert(ev.target, e);
                    }
                    _ => {}
                }
            }
        }
    }

    /// Every event against its latest predecessor on each other chain.
    fn cross_chain_rules(&mut self) {
        let t = self.t;
        let k = t.width() as ThreadId;
        for j in 0..k {
            for pos in 0..self.x.0[j as usize] {
                let b = self.event_at((j, pos));
                let op = t.event(b).op;
                if !(op.is_access() || op == Op::Release) {
                    continue;
                }
                for i in 0..k {
                    if i == j || self.x.0[i as usize] == 0 {
                        continue;
                    }
                    if let Some(p) = self.ds.predecessor((j, pos), i) {
                        self.event_rules(self.event_at((i, p)), b);
                    }
                }
            }
        }
    }

    fn drain(&mut self) -> Result<(), Infeasible> {
        while let Some((a, b)) = match self.discipline {
            Discipline::Fifo => self.work.pop_front(),
            Discipline::Lifo => self.work.pop_back(),
        } {
            let (na, nb) = (self.node(a), self.node(b));
            if self.ds.query(nb, na) {
                self.work.clear();
                return Err(Infeasible { edge: (a, b) });
            }
            if self.ds.query(na, nb) {
                continue;
            }
            let mut changed = std::mem::take(&mut self.changed);
            changed.clear();
            self.ds.insert(na, nb, &mut changed).expect("acyclic insert");
            self.inserted.push((a, b));
            for &c in &changed {
                self.apply_change(c);
            }
            self.changed = changed;
        }
        Ok(())
    }

    /// Close the order under the observation and lock rules.
    pub fn close(mut self) -> Result<Self, Infeasible> {
        self.same_chain_rules();
        self.cross_chain_rules();
        self.drain()?;
        Ok(self)
    }

    /// Add `a <= b` and restore closure.
    pub fn insert_and_close(mut self, a: EventId, b: EventId) -> Result<Self, Infeasible> {
        debug_assert!(self.contains(a) && self.contains(b));
        self.push(a, b);
        self.drain()?;
        Ok(self)
    }

    /// All pairs (a, b) of distinct events of X with a ordered before b.
    pub fn relation(&self) -> Vec<(EventId, EventId)> {
        let evs = self.x.events(self.t);
        let mut out = Vec::new();
        for &a in &evs {
            for &b in &evs {
                if a != b && self.le(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }
}

/// Respecting order over X, then its closure.
pub fn closure<'t>(t: &'t Trace, x: &Frontier, discipline: Discipline) -> Result<ClosedPo<'t>, Infeasible> {
    ClosedPo::respect(t, x)?.with_discipline(discipline).close()
}
