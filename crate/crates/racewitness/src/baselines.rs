//! Single-pass vector-clock race predictors used for comparison: HB, SHB,
//! WCP and DC (without its vindication phase).
//!
//! Each method yields, for every event `b`, a clock whose entry for thread
//! `q` counts the events of `q` ordered before `b`. A conflicting pair is a
//! race when the earlier event is not covered by the later one's clock.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::str::FromStr;

use crate::trace::{EventId, Op, ThreadId, Trace, INIT_THREAD, NONE};

pub type Pair = (EventId, EventId);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Hb,
    Shb,
    Wcp,
    Dc,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Hb, Method::Shb, Method::Wcp, Method::Dc];

    pub fn name(self) -> &'static str {
        match self {
            Method::Hb => "hb",
            Method::Shb => "shb",
            Method::Wcp => "wcp",
            Method::Dc => "dc",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "hb" => Ok(Method::Hb),
            "shb" => Ok(Method::Shb),
            "wcp" => Ok(Method::Wcp),
            "dc" => Ok(Method::Dc),
            other => Err(format!("unknown method '{other}' (expected hb, shb, wcp or dc)")),
        }
    }
}

/// Flat per-event clocks, `width` entries per event.
#[derive(Clone, Debug)]
pub struct Clocks {
    width: usize,
    data: Vec<u32>,
}

impl Clocks {
    fn new(t: &Trace) -> Self {
        Clocks {
            width: t.width(),
            data: vec![0; t.len() * t.width()],
        }
    }

    pub fn get(&self, e: EventId) -> &[u32] {
        &self.data[e as usize * self.width..(e as usize + 1) * self.width]
    }

    fn get_mut(&mut self, e: EventId) -> &mut [u32] {
        &mut self.data[e as usize * self.width..(e as usize + 1) * self.width]
    }

    /// Join the clock of `src` into `dst`, where `src < dst`.
    fn join_from(&mut self, dst: EventId, src: EventId) {
        debug_assert!(src < dst);
        let w = self.width;
        let (lo, hi) = self.data.split_at_mut(dst as usize * w);
        let s = &lo[src as usize * w..(src as usize + 1) * w];
        join(&mut hi[..w], s);
    }

    /// `a` is covered by the clock of `b`.
    pub fn covers(&self, t: &Trace, b: EventId, a: EventId) -> bool {
        self.get(b)[t.thread_of(a) as usize] > t.ord(a)
    }
}

fn join(dst: &mut [u32], src: &[u32]) {
    for (d, &s) in dst.iter_mut().zip(src) {
        if s > *d {
            *d = s;
        }
    }
}

fn join_preds(t: &Trace, c: &mut Clocks, e: EventId, preds: &mut Vec<EventId>) {
    preds.clear();
    t.po_preds(e, preds);
    for &p in preds.iter() {
        c.join_from(e, p);
    }
}

/// Program order, fork/join and init edges included.
pub fn po_clocks(t: &Trace) -> Clocks {
    let mut c = Clocks::new(t);
    let mut preds = Vec::new();
    for e in 0..t.len() as EventId {
        join_preds(t, &mut c, e, &mut preds);
        c.get_mut(e)[t.thread_of(e) as usize] = t.ord(e) + 1;
    }
    c
}

/// Happens-before; with `observations` also every read after the write it
/// observes (schedulable happens-before).
pub fn hb_clocks(t: &Trace, observations: bool) -> Clocks {
    let mut c = Clocks::new(t);
    let mut last_rel = vec![NONE; t.lock_count()];
    let mut preds = Vec::new();
    for e in 0..t.len() as EventId {
        join_preds(t, &mut c, e, &mut preds);
        let ev = *t.event(e);
        match ev.op {
            Op::Acquire if last_rel[ev.target as usize] != NONE => {
                c.join_from(e, last_rel[ev.target as usize]);
            }
            Op::Release => last_rel[ev.target as usize] = e,
            Op::Read if observations => {
                if let Some(w) = t.obs(e) {
                    c.join_from(e, w);
                }
            }
            _ => {}
        }
        c.get_mut(e)[ev.thread as usize] = t.ord(e) + 1;
    }
    c
}

struct Section {
    lock: u32,
    reads: HashSet<u32>,
    writes: HashSet<u32>,
}

/// Shared pass for WCP and DC. With `hb` given, computes the strict WCP
/// clocks: lock rules contribute the HB clock of the earlier release, and
/// clocks flow along release-acquire edges. Without it, computes DC clocks,
/// which contain program order and feed rules with their own values.
fn lock_rule_clocks(t: &Trace, hb: Option<&Clocks>) -> Clocks {
    let mut c = Clocks::new(t);
    let w = t.width();
    let mut last_rel = vec![NONE; t.lock_count()];
    let mut open: Vec<Vec<Section>> = (0..w).map(|_| Vec::new()).collect();
    // Completed sections per (lock, thread) as (acquire, release).
    let mut done: HashMap<(u32, ThreadId), Vec<(EventId, EventId)>> = HashMap::new();
    // Next unchecked completed section, per (releasing thread, lock, other thread).
    let mut ptr: HashMap<(ThreadId, u32, ThreadId), usize> = HashMap::new();
    let mut lw: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
    let mut lr: HashMap<(u32, u32), Vec<u32>> = HashMap::new();
    let mut preds = Vec::new();
    let left = |c: &Clocks, e: EventId| -> Vec<u32> {
        match hb {
            Some(h) => h.get(e).to_vec(),
            None => c.get(e).to_vec(),
        }
    };

    for e in 0..t.len() as EventId {
        join_preds(t, &mut c, e, &mut preds);
        let ev = *t.event(e);
        let th = ev.thread;
        match ev.op {
            Op::Acquire => {
                if hb.is_some() && last_rel[ev.target as usize] != NONE {
                    c.join_from(e, last_rel[ev.target as usize]);
                }
                open[th as usize].push(Section {
                    lock: ev.target,
                    reads: HashSet::new(),
                    writes: HashSet::new(),
                });
            }
            Op::Read | Op::Write => {
                let x = ev.target;
                let mut acc = vec![0u32; w];
                for s in open[th as usize].iter_mut() {
                    if let Some(v) = lw.get(&(s.lock, x)) {
                        join(&mut acc, v);
                    }
                    if ev.op == Op::Write {
                        if let Some(v) = lr.get(&(s.lock, x)) {
                            join(&mut acc, v);
                        }
                        s.writes.insert(x);
                    } else {
                        s.reads.insert(x);
                    }
                }
                join(c.get_mut(e), &acc);
            }
            Op::Release => {
                let l = ev.target;
                let s = open[th as usize].pop().expect("well-nested release");
                debug_assert_eq!(s.lock, l);
                loop {
                    let mut changed = false;
                    for q in 0..w as ThreadId {
                        if q == th {
                            continue;
                        }
                        let Some(list) = done.get(&(l, q)) else { continue };
                        let p = ptr.entry((th, l, q)).or_insert(0);
                        while *p < list.len() && c.covers(t, e, list[*p].0) {
                            let rel1 = list[*p].1;
                            let v = left(&c, rel1);
                            join(c.get_mut(e), &v);
                            *p += 1;
                            changed = true;
                        }
                    }
                    if !changed {
                        break;
                    }
                }
                if hb.is_none() {
                    c.get_mut(e)[th as usize] = t.ord(e) + 1;
                }
                let v = left(&c, e);
                for x in s.reads {
                    join(lr.entry((l, x)).or_insert_with(|| vec![0; w]), &v);
                }
                for x in s.writes {
                    join(lw.entry((l, x)).or_insert_with(|| vec![0; w]), &v);
                }
                let acq = t.matching(e).expect("release has acquire");
                done.entry((l, th)).or_default().push((acq, e));
                last_rel[l as usize] = e;
            }
            Op::Fork | Op::Join => {}
        }
        if hb.is_none() {
            c.get_mut(e)[th as usize] = t.ord(e) + 1;
        }
    }
    c
}

/// Ordering clocks of `method`: entry q counts the events of thread q
/// ordered before each event, program order included.
pub fn clocks(t: &Trace, method: Method) -> Clocks {
    match method {
        Method::Hb => hb_clocks(t, false),
        Method::Shb => hb_clocks(t, true),
        Method::Dc => lock_rule_clocks(t, None),
        Method::Wcp => {
            let h = hb_clocks(t, false);
            let mut p = lock_rule_clocks(t, Some(&h));
            let po = po_clocks(t);
            for (a, &b) in p.data.iter_mut().zip(&po.data) {
                *a = (*a).max(b);
            }
            p
        }
    }
}

/// Conflicting access pairs on different user threads left unordered.
pub fn races_from(t: &Trace, c: &Clocks) -> BTreeSet<Pair> {
    let mut out = BTreeSet::new();
    let maps = t.maps();
    for b in 0..t.len() as EventId {
        let ev = *t.event(b);
        if !ev.op.is_access() || ev.thread == INIT_THREAD {
            continue;
        }
        let past = c.get(b);
        for q in 1..t.width() as ThreadId {
            if q == ev.thread {
                continue;
            }
            let Some(a) = maps.var_access(q, ev.target) else {
                continue;
            };
            let list = if ev.op == Op::Write { &a.all } else { &a.writes };
            let end = list.partition_point(|&f| f < b);
            let start = list[..end].partition_point(|&f| t.ord(f) < past[q as usize]);
            out.extend(list[start..end].iter().map(|&f| (f, b)));
        }
    }
    out
}

pub fn races(t: &Trace, method: Method) -> BTreeSet<Pair> {
    races_from(t, &clocks(t, method))
}

pub fn hb_races(t: &Trace) -> BTreeSet<Pair> {
    races(t, Method::Hb)
}

pub fn shb_races(t: &Trace) -> BTreeSet<Pair> {
    races(t, Method::Shb)
}

pub fn wcp_races(t: &Trace) -> BTreeSet<Pair> {
    races(t, Method::Wcp)
}

pub fn dc_races(t: &Trace) -> BTreeSet<Pair> {
    races(t, Method::Dc)
}
