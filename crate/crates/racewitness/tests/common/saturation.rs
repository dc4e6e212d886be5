use racewitness::closure::respect_edges;
use racewitness::trace::{EventId, Frontier, Op, Trace};

/// Saturation over every ordered pair, as a boolean matrix over X.
pub struct Naive<'t> {
    t: &'t Trace,
    x: Frontier,
    pub evs: Vec<EventId>,
    pub le: Vec<Vec<bool>>,
}

impl<'t> Naive<'t> {
    pub fn new(t: &'t Trace, x: &Frontier) -> Self {
        let evs = x.events(t);
        let n = t.len();
        let mut le = vec![vec![false; n]; n];
        for &a in &evs {
            for &b in &evs {
                if t.thread_of(a) == t.thread_of(b) && t.ord(a) <= t.ord(b) {
                    le[a as usize][b as usize] = true;
                }
            }
        }
        for (a, b) in respect_edges(t, x) {
            le[a as usize][b as usize] = true;
        }
        Naive {
            t,
            x: x.clone(),
            evs,
            le,
        }
    }

    fn transitive(&mut self) -> bool {
        for &k in &self.evs {
            for &i in &self.evs {
                if self.le[i as usize][k as usize] {
                    for &j in &self.evs {
                        if self.le[k as usize][j as usize] {
                            self.le[i as usize][j as usize] = true;
                        }
                    }
                }
            }
        }
        self.evs.iter().all(|&a| {
            self.evs
                .iter()
                .all(|&b| a == b || !(self.le[a as usize][b as usize] && self.le[b as usize][a as usize]))
        })
    }

    fn chain_in_x(&self, q: u32) -> &[EventId] {
        &self.t.chain(q)[..self.x.0[q as usize] as usize]
    }

    /// One round of the rules over all ordered pairs; true if anything grew.
    fn round(&mut self) -> bool {
        let t = self.t;
        let mut add = Vec::new();
        for &a in &self.evs {
            for &b in &self.evs {
                if a == b || !self.le[a as usize][b as usize] {
                    continue;
                }
                let (i, j) = (t.thread_of(a), t.thread_of(b));
                let ci: Vec<EventId> = self
                    .chain_in_x(i)
                    .iter()
                    .copied()
                    .filter(|&e| t.ord(e) <= t.ord(a))
                    .collect();
                let cj: Vec<EventId> = self
                    .chain_in_x(j)
                    .iter()
                    .copied()
                    .filter(|&e| t.ord(e) >= t.ord(b))
                    .collect();
                for x in 0..t.var_count() as u32 {
                    let is = |e: EventId, op: Op| t.event(e).op == op && t.event(e).target == x;
                    let Some(&w) = ci.iter().rev().find(|&&e| is(e, Op::Write)) else {
                        continue;
                    };
                    if let Some(&r) = cj.iter().find(|&&e| is(e, Op::Read)) {
                        let o = t.obs(r).unwrap();
                        if o != w {
                            add.push((w, o));
                        }
                    }
                    if let Some(&wb) = cj.iter().find(|&&e| is(e, Op::Write)) {
                        for &r in &self.evs {
                            if t.event(r).op == Op::Read && t.obs(r) == Some(w) {
                                add.push((r, wb));
                            }
                        }
                    }
                }
                for l in 0..t.lock_count() as u32 {
                    let is = |e: EventId, op: Op| t.event(e).op == op && t.event(e).target == l;
                    let Some(&acq1) = ci.iter().rev().find(|&&e| is(e, Op::Acquire)) else {
                        continue;
                    };
                    let Some(rel1) = t.matching(acq1).filter(|&r| self.x.contains(t, r)) else {
                        continue;
                    };
                    let Some(&rel2) = cj.iter().find(|&&e| is(e, Op::Release)) else {
                        continue;
                    };
                    let acq2 = t.matching(rel2).unwrap();
                    if acq1 != acq2 {
                        add.push((rel1, acq2));
                    }
                }
            }
        }
        let mut grew = false;
        for (a, b) in add {
            if !self.le[a as usize][b as usize] {
                self.le[a as usize][b as usize] = true;
                grew = true;
            }
        }
        grew
    }

    /// Saturate; `false` on a cycle.
    pub fn saturate(&mut self) -> bool {
        loop {
            if !self.transitive() {
                return false;
            }
            if !self.round() {
                return true;
            }
        }
    }

    pub fn add(&mut self, a: EventId, b: EventId) {
        self.le[a as usize][b as usize] = true;
    }
}

impl Naive<'_> {
    /// First pair on which `q` and the saturation disagree.
    pub fn mismatch(&self, q: &racewitness::closure::ClosedPo<'_>) -> Option<(EventId, EventId)> {
        for &a in &self.evs {
            for &b in &self.evs {
                if q.le(a, b) != self.le[a as usize][b as usize] {
                    return Some((a, b));
                }
            }
        }
        None
    }
}
