//! Trace model: events, per-thread chains, the observation function, lock
//! matching, program order with fork/join edges, and the predicates over
//! event sets and reorderings that every other module is checked against.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Dense position of an event in the trace, synthesized init writes included.
pub type EventId = u32;
/// Dense thread number; 0 is the reserved init thread.
pub type ThreadId = u32;

/// Sentinel for "no event" / "no value".
pub const NONE: u32 = u32::MAX;
pub const INIT_THREAD: ThreadId = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Read,
    Write,
    Acquire,
    Release,
    Fork,
    Join,
}

impl Op {
    pub fn mnemonic(self) -> &'static str {
        match self {
            Op::Read => "r",
            Op::Write => "w",
            Op::Acquire => "acq",
            Op::Release => "rel",
            Op::Fork => "fork",
            Op::Join => "join",
        }
    }

    /// Case-insensitive op name, with a few common aliases.
    pub fn parse(s: &str) -> Option<Op> {
        let op = match s.to_ascii_lowercase().as_str() {
            "r" | "read" => Op::Read,
            "w" | "write" => Op::Write,
            "acq" | "acquire" | "lock" => Op::Acquire,
            "rel" | "release" | "unlock" => Op::Release,
            "fork" => Op::Fork,
            "join" => Op::Join,
            _ => return None,
        };
        Some(op)
    }

    pub fn is_access(self) -> bool {
        matches!(self, Op::Read | Op::Write)
    }

    pub fn is_lock(self) -> bool {
        matches!(self, Op::Acquire | Op::Release)
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.mnemonic())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    pub op: Op,
    pub thread: ThreadId,
    /// Variable, lock or thread id, depending on `op`.
    pub target: u32,
    /// 1-based position in the input; 0 for synthesized init writes.
    pub index: u32,
    /// Interned location label, or `NONE`.
    pub location: u32,
    /// Source line the event was parsed from; 0 when unknown.
    pub line: u32,
}

/// An event as read from input, before interning.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawEvent {
    pub thread: String,
    pub op: Op,
    pub target: String,
    pub location: Option<String>,
    pub line: usize,
}

impl RawEvent {
    pub fn new(thread: &str, op: Op, target: &str) -> Self {
        RawEvent {
            thread: thread.to_string(),
            op,
            target: target.to_string(),
            location: None,
            line: 0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TraceError {
    #[error("empty trace")]
    Empty,
    #[error("malformed trace at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

fn malformed(raw: &RawEvent, reason: String) -> TraceError {
    TraceError::Malformed { line: raw.line, reason }
}

#[derive(Clone, Copy, Debug)]
pub struct BuildOptions {
    /// Prepend one write per variable on the init thread.
    pub init_writes: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { init_writes: true }
    }
}

#[derive(Default)]
struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&id) = self.ids.get(s) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(s.to_string());
        self.ids.insert(s.to_string(), id);
        id
    }
}

/// Accesses of one thread to one variable, as sorted event ids.
#[derive(Clone, Debug, Default)]
pub struct VarAccess {
    pub reads: Vec<EventId>,
    pub writes: Vec<EventId>,
    pub all: Vec<EventId>,
}

/// Lock events of one thread on one lock, as sorted event ids.
#[derive(Clone, Debug, Default)]
pub struct LockAccess {
    pub acquires: Vec<EventId>,
    pub releases: Vec<EventId>,
    pub all: Vec<EventId>,
}

fn first_at_or_after(list: &[EventId], e: EventId, bound: EventId) -> Option<EventId> {
    let i = list.partition_point(|&x| x < e);
    list.get(i).copied().filter(|&x| x < bound)
}

fn last_at_or_before(list: &[EventId], e: EventId) -> Option<EventId> {
    let i = list.partition_point(|&x| x <= e);
    if i == 0 {
        None
    } else {
        Some(list[i - 1])
    }
}

/// The After/Before/F lookup tables. Every lookup takes an exclusive upper
/// bound on event ids so callers can restrict results to a prefix-closed set.
#[derive(Clone, Debug, Default)]
pub struct EventMaps {
    vars: Vec<HashMap<u32, VarAccess>>,
    locks: Vec<HashMap<u32, LockAccess>>,
    reader_off: Vec<u32>,
    readers: Vec<EventId>,
}

impl EventMaps {
    pub fn var_access(&self, thread: ThreadId, var: u32) -> Option<&VarAccess> {
        self.vars[thread as usize].get(&var)
    }

    pub fn lock_access(&self, thread: ThreadId, lock: u32) -> Option<&LockAccess> {
        self.locks[thread as usize].get(&lock)
    }

    pub fn after_read(&self, thread: ThreadId, var: u32, e: EventId, bound: EventId) -> Option<EventId> {
        first_at_or_after(&self.var_access(thread, var)?.reads, e, bound)
    }

    pub fn after_write(&self, thread: ThreadId, var: u32, e: EventId, bound: EventId) -> Option<EventId> {
        first_at_or_after(&self.var_access(thread, var)?.writes, e, bound)
    }

    pub fn before_write(&self, thread: ThreadId, var: u32, e: EventId) -> Option<EventId> {
        last_at_or_before(&self.var_access(thread, var)?.writes, e)
    }

    pub fn before_acquire(&self, thread: ThreadId, lock: u32, e: EventId) -> Option<EventId> {
        last_at_or_before(&self.lock_access(thread, lock)?.acquires, e)
    }

    pub fn before_release(&self, thread: ThreadId, lock: u32, e: EventId) -> Option<EventId> {
        last_at_or_before(&self.lock_access(thread, lock)?.releases, e)
    }

    pub fn after_release(&self, thread: ThreadId, lock: u32, e: EventId, bound: EventId) -> Option<EventId> {
        first_at_or_after(&self.lock_access(thread, lock)?.releases, e, bound)
    }

    /// Reads observing `w`, sorted by (thread, id).
    pub fn readers(&self, w: EventId) -> &[EventId] {
        let (a, b) = (self.reader_off[w as usize], self.reader_off[w as usize + 1]);
        &self.readers[a as usize..b as usize]
    }

    pub fn variables_of(&self, thread: ThreadId) -> impl Iterator<Item = (&u32, &VarAccess)> {
        self.vars[thread as usize].iter()
    }

    pub fn locks_of(&self, thread: ThreadId) -> impl Iterator<Item = (&u32, &LockAccess)> {
        self.locks[thread as usize].iter()
    }
}

/// An immutable, validated trace.
#[derive(Clone, Debug)]
pub struct Trace {
    events: Vec<Event>,
    thread_names: Vec<String>,
    var_names: Vec<String>,
    lock_names: Vec<String>,
    loc_names: Vec<String>,
    chains: Vec<Vec<EventId>>,
    ord: Vec<u32>,
    obs: Vec<EventId>,
    matching: Vec<EventId>,
    fork_src: Vec<EventId>,
    join_src: Vec<EventId>,
    init_len: u32,
    width: usize,
    clocks: Vec<u32>,
    table_off: Vec<usize>,
    open_depth: Vec<u32>,
    open_top: Vec<EventId>,
    close_to: Vec<u32>,
    maps: EventMaps,
    warnings: Vec<String>,
}

/// Validate raw events and build a trace.
pub fn build_trace(raw: &[RawEvent], opts: BuildOptions) -> Result<Trace, TraceError> {
    if raw.is_empty() {
        return Err(TraceError::Empty);
    }
    let mut threads = Interner::default();
    threads.intern("init");
    let mut vars = Interner::default();
    let mut locks = Interner::default();
    let mut locs = Interner::default();

    let mut events = Vec::with_capacity(raw.len());
    for (i, r) in raw.iter().enumerate() {
        if r.thread.is_empty() || r.target.is_empty() {
            return Err(malformed(r, "missing thread or target".into()));
        }
        let thread = threads.intern(&r.thread);
        let target = match r.op {
            Op::Read | Op::Write => vars.intern(&r.target),
            Op::Acquire | Op::Release => locks.intern(&r.target),
            Op::Fork | Op::Join => threads.intern(&r.target),
        };
        let location = match &r.location {
            Some(l) => locs.intern(l),
            None => NONE,
        };
        events.push(Event {
            op: r.op,
            thread,
            target,
            index: i as u32 + 1,
            location,
            line: r.line as u32,
        });
    }

    let init_len = if opts.init_writes { vars.names.len() } else { 0 };
    let mut all = Vec::with_capacity(init_len + events.len());
    for v in 0..init_len as u32 {
        all.push(Event {
            op: Op::Write,
            thread: INIT_THREAD,
            target: v,
            index: 0,
            location: NONE,
            line: 0,
        });
    }
    all.extend(events);
    let events = all;
    let n = events.len();
    let width = threads.names.len();
    let raw_of = |id: usize| &raw[id - init_len];

    let mut chains: Vec<Vec<EventId>> = vec![Vec::new(); width];
    let mut ord = vec![0u32; n];
    let mut obs = vec![NONE; n];
    let mut matching = vec![NONE; n];
    let mut fork_src = vec![NONE; width];
    let mut join_src = vec![NONE; n];
    let mut joined = vec![NONE; width];
    let mut last_write = vec![NONE; vars.names.len()];
    let mut held: Vec<Option<(ThreadId, EventId)>> = vec![None; locks.names.len()];
    let mut stacks: Vec<Vec<EventId>> = vec![Vec::new(); width];
    let mut warnings = Vec::new();

    for (id, e) in events.iter().enumerate() {
        let idu = id as EventId;
        let th = e.thread as usize;
        if joined[th] != NONE {
            return Err(malformed(
                raw_of(id),
                format!("thread {} has events after being joined", threads.names[th]),
            ));
        }
        match e.op {
            Op::Read => {
                let w = last_write[e.target as usize];
                if w == NONE {
                    return Err(malformed(
                        raw_of(id),
                        format!("read of never-written variable {}", vars.names[e.target as usize]),
                    ));
                }
                obs[id] = w;
            }
            Op::Write => last_write[e.target as usize] = idu,
            Op::Acquire => {
                let l = e.target as usize;
                if let Some((holder, _)) = held[l] {
                    let reason = if holder == e.thread {
                        format!("re-entrant acquire of lock {}", locks.names[l])
                    } else {
                        format!(
                            "acquire of lock {} held by thread {}",
                            locks.names[l], threads.names[holder as usize]
                        )
                    };
                    return Err(malformed(raw_of(id), reason));
                }
                held[l] = Some((e.thread, idu));
                stacks[th].push(idu);
            }
            Op::Release => {
                let l = e.target as usize;
                let acq = match held[l] {
                    Some((holder, acq)) if holder == e.thread => acq,
                    _ => {
                        return Err(malformed(
                            raw_of(id),
                            format!("release of lock {} not held by this thread", locks.names[l]),
                        ))
                    }
                };
                if stacks[th].last() != Some(&acq) {
                    return Err(malformed(
                        raw_of(id),
                        format!("critical sections not well-nested at release of {}", locks.names[l]),
                    ));
                }
                stacks[th].pop();
                held[l] = None;
                matching[acq as usize] = idu;
                matching[id] = acq;
            }
            Op::Fork => {
                let u = e.target as usize;
                if u == th {
                    return Err(malformed(raw_of(id), "thread forks itself".into()));
                }
                if !chains[u].is_empty() {
                    return Err(malformed(
                        raw_of(id),
                        format!("forked thread {} already has events", threads.names[u]),
                    ));
                }
                if fork_src[u] != NONE {
                    let msg = format!(
                        "line {}: thread {} forked more than once, later fork ignored",
                        e.line, threads.names[u]
                    );
                    log::warn!("{msg}");
                    warnings.push(msg);
                } else {
                    fork_src[u] = idu;
                }
            }
            Op::Join => {
                let u = e.target as usize;
                if u == th {
                    return Err(malformed(raw_of(id), "thread joins itself".into()));
                }
                match chains[u].last() {
                    Some(&last) => join_src[id] = last,
                    None => {
                        let msg = format!(
                            "line {}: join of thread {} which has no events, edge skipped",
                            e.line, threads.names[u]
                        );
                        log::warn!("{msg}");
                        warnings.push(msg);
                    }
                }
                joined[u] = idu;
            }
        }
        ord[id] = chains[th].len() as u32;
        chains[th].push(idu);
    }

    let mut t = Trace {
        events,
        thread_names: threads.names,
        var_names: vars.names,
        lock_names: locks.names,
        loc_names: locs.names,
        chains,
        ord,
        obs,
        matching,
        fork_src,
        join_src,
        init_len: init_len as u32,
        width,
        clocks: Vec::new(),
        table_off: Vec::new(),
        open_depth: Vec::new(),
        open_top: Vec::new(),
        close_to: Vec::new(),
        maps: EventMaps::default(),
        warnings,
    };
    t.compute_clocks();
    t.compute_lock_tables();
    t.compute_maps();
    Ok(t)
}

impl Trace {
    fn compute_clocks(&mut self) {
        let w = self.width;
        let mut clocks = vec![0u32; self.events.len() * w];
        let mut preds = Vec::with_capacity(4);
        for id in 0..self.events.len() {
            preds.clear();
            self.po_preds(id as EventId, &mut preds);
            let e = self.events[id];
            if e.op == Op::Read {
                preds.push(self.obs[id]);
            }
            let (before, rest) = clocks.split_at_mut(id * w);
            let cur = &mut rest[..w];
            for &p in &preds {
                let pc = &before[p as usize * w..(p as usize + 1) * w];
                for (c, &v) in cur.iter_mut().zip(pc) {
                    *c = (*c).max(v);
                }
            }
            cur[e.thread as usize] = self.ord[id] + 1;
        }
        self.clocks = clocks;
    }

    fn compute_lock_tables(&mut self) {
        let mut off = Vec::with_capacity(self.width + 1);
        let mut total = 0usize;
        for c in &self.chains {
            off.push(total);
            total += c.len() + 1;
        }
        off.push(total);
        let mut depth = vec![0u32; total];
        let mut top = vec![NONE; total];
        let mut close = vec![0u32; total];
        for (q, chain) in self.chains.iter().enumerate() {
            // (acquire, best close-to frontier among this entry and those below)
            let mut stack: Vec<(EventId, u32)> = Vec::new();
            for j in 0..=chain.len() {
                let slot = off[q] + j;
                depth[slot] = stack.len() as u32;
                top[slot] = stack.last().map_or(NONE, |s| s.0);
                close[slot] = stack.last().map_or(j as u32, |s| s.1.max(j as u32));
                if j == chain.len() {
                    break;
                }
                let id = chain[j];
                let e = self.events[id as usize];
                match e.op {
                    Op::Acquire => {
                        let below = stack.last().map_or(0, |s| s.1);
                        let m = self.matching[id as usize];
                        let here = if m == NONE { 0 } else { self.ord[m as usize] + 1 };
                        stack.push((id, below.max(here)));
                    }
                    Op::Release => {
                        stack.pop();
                    }
                    _ => {}
                }
            }
        }
        self.table_off = off;
        self.open_depth = depth;
        self.open_top = top;
        self.close_to = close;
    }

    fn compute_maps(&mut self) {
        let mut vars: Vec<HashMap<u32, VarAccess>> = vec![HashMap::new(); self.width];
        let mut locks: Vec<HashMap<u32, LockAccess>> = vec![HashMap::new(); self.width];
        let n = self.events.len();
        let mut count = vec![0u32; n + 1];
        for (id, e) in self.events.iter().enumerate() {
            let idu = id as EventId;
            match e.op {
                Op::Read | Op::Write => {
                    let a = vars[e.thread as usize].entry(e.target).or_default();
                    if e.op == Op::Read {
                        a.reads.push(idu);
                        count[self.obs[id] as usize + 1] += 1;
                    } else {
                        a.writes.push(idu);
                    }
                    a.all.push(idu);
                }
                Op::Acquire | Op::Release => {
                    let a = locks[e.thread as usize].entry(e.target).or_default();
                    if e.op == Op::Acquire {
                        a.acquires.push(idu);
                    } else {
                        a.releases.push(idu);
                    }
                    a.all.push(idu);
                }
                _ => {}
            }
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut fill = count.clone();
        let mut readers = vec![0; count[n] as usize];
        for (id, e) in self.events.iter().enumerate() {
            if e.op == Op::Read {
                let w = self.obs[id] as usize;
                readers[fill[w] as usize] = id as EventId;
                fill[w] += 1;
            }
        }
        for w in 0..n {
            let seg = &mut readers[count[w] as usize..count[w + 1] as usize];
            if seg.len() > 1 {
                let events = &self.events;
                seg.sort_by_key(|&r| (events[r as usize].thread, r));
            }
        }
        self.maps = EventMaps {
            vars,
            locks,
            reader_off: count,
            readers,
        };
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of events that came from the input (init writes excluded).
    pub fn input_len(&self) -> usize {
        self.events.len() - self.init_len as usize
    }

    pub fn init_len(&self) -> usize {
        self.init_len as usize
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn event(&self, e: EventId) -> &Event {
        &self.events[e as usize]
    }

    /// Event id for a 1-based input index.
    pub fn by_index(&self, index: u32) -> Option<EventId> {
        if index == 0 || index as usize > self.input_len() {
            None
        } else {
            Some(self.init_len + index - 1)
        }
    }

    /// Map 1-based input indices to event ids; panics on out-of-range input.
    pub fn ids(&self, indices: &[u32]) -> Vec<EventId> {
        indices
            .iter()
            .map(|&i| self.by_index(i).unwrap_or_else(|| panic!("no event with index {i}")))
            .collect()
    }

    /// Number of chains, the init thread included.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of user threads (k).
    pub fn thread_count(&self) -> usize {
        self.width - 1
    }

    pub fn chain(&self, thread: ThreadId) -> &[EventId] {
        &self.chains[thread as usize]
    }

    pub fn ord(&self, e: EventId) -> u32 {
        self.ord[e as usize]
    }

    pub fn thread_of(&self, e: EventId) -> ThreadId {
        self.events[e as usize].thread
    }

    pub fn is_init(&self, e: EventId) -> bool {
        e < self.init_len
    }

    pub fn thread_name(&self, t: ThreadId) -> &str {
        &self.thread_names[t as usize]
    }

    pub fn var_name(&self, v: u32) -> &str {
        &self.var_names[v as usize]
    }

    pub fn lock_name(&self, l: u32) -> &str {
        &self.lock_names[l as usize]
    }

    pub fn location_name(&self, l: u32) -> Option<&str> {
        if l == NONE {
            None
        } else {
            Some(&self.loc_names[l as usize])
        }
    }

    pub fn var_count(&self) -> usize {
        self.var_names.len()
    }

    pub fn lock_count(&self) -> usize {
        self.lock_names.len()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Name of the target of `e`, whatever its kind.
    pub fn target_name(&self, e: EventId) -> &str {
        let ev = &self.events[e as usize];
        match ev.op {
            Op::Read | Op::Write => self.var_name(ev.target),
            Op::Acquire | Op::Release => self.lock_name(ev.target),
            Op::Fork | Op::Join => self.thread_name(ev.target),
        }
    }

    /// The write observed by read `r`.
    pub fn obs(&self, r: EventId) -> Option<EventId> {
        let w = self.obs[r as usize];
        (w != NONE).then_some(w)
    }

    /// Matching release of an acquire, or matching acquire of a release.
    pub fn matching(&self, e: EventId) -> Option<EventId> {
        let m = self.matching[e as usize];
        (m != NONE).then_some(m)
    }

    /// The fork event that starts `thread`, if any.
    pub fn fork_of(&self, thread: ThreadId) -> Option<EventId> {
        let f = self.fork_src[thread as usize];
        (f != NONE).then_some(f)
    }

    pub fn maps(&self) -> &EventMaps {
        &self.maps
    }

    /// Two distinct events conflict: same variable with at least one
    /// write, or same lock.
    pub fn conflicting(&self, a: EventId, b: EventId) -> bool {
        if a == b {
            return false;
        }
        let (x, y) = (&self.events[a as usize], &self.events[b as usize]);
        if x.op.is_access() && y.op.is_access() {
            x.target == y.target && (x.op == Op::Write || y.op == Op::Write)
        } else if x.op.is_lock() && y.op.is_lock() {
            x.target == y.target
        } else {
            false
        }
    }

    /// Immediate program-order predecessors of `e` on other chains: the last
    /// init write and the fork for a thread's first event, and the last
    /// event of the joined thread for a join.
    pub fn cross_preds(&self, e: EventId, out: &mut Vec<EventId>) {
        let ev = &self.events[e as usize];
        if self.ord[e as usize] == 0 && ev.thread != INIT_THREAD {
            if self.init_len > 0 {
                out.push(self.init_len - 1);
            }
            let f = self.fork_src[ev.thread as usize];
            if f != NONE {
                out.push(f);
            }
        }
        if ev.op == Op::Join && self.join_src[e as usize] != NONE {
            out.push(self.join_src[e as usize]);
        }
    }

    /// All immediate program-order predecessors of `e`.
    pub fn po_preds(&self, e: EventId, out: &mut Vec<EventId>) {
        let o = self.ord[e as usize];
        if o > 0 {
            out.push(self.chains[self.thread_of(e) as usize][o as usize - 1]);
        }
        self.cross_preds(e, out);
    }

    /// Frontier of the least prefix-closed, observation-closed set that
    /// contains `e`.
    pub fn clock(&self, e: EventId) -> &[u32] {
        &self.clocks[e as usize * self.width..(e as usize + 1) * self.width]
    }

    /// Frontier of everything that must precede `e` for it to be enabled:
    /// its program-order predecessors and their causal past. The
    /// observation of `e` itself is not included.
    pub fn base_clock(&self, e: EventId) -> Frontier {
        let mut f = Frontier::empty(self.width);
        let mut preds = Vec::with_capacity(3);
        self.po_preds(e, &mut preds);
        for p in preds {
            f.join(self.clock(p));
        }
        f
    }

    /// `other` is in the base cone of `e`, without building the frontier.
    pub fn in_base(&self, e: EventId, other: EventId) -> bool {
        let q = self.thread_of(other) as usize;
        let need = self.ord(other);
        let th = self.thread_of(e);
        let o = self.ord[e as usize];
        let sees = |p: EventId| self.clock(p)[q] > need;
        if o > 0 && sees(self.chains[th as usize][o as usize - 1]) {
            return true;
        }
        if o == 0 && th != INIT_THREAD {
            if self.init_len > 0 && sees(self.init_len - 1) {
                return true;
            }
            let f = self.fork_src[th as usize];
            if f != NONE && sees(f) {
                return true;
            }
        }
        let j = self.join_src[e as usize];
        j != NONE && sees(j)
    }

    fn slot(&self, thread: ThreadId, pos: u32) -> usize {
        self.table_off[thread as usize] + pos as usize
    }

    /// Number of open acquires among the first `pos` events of `thread`.
    pub fn open_depth(&self, thread: ThreadId, pos: u32) -> u32 {
        self.open_depth[self.slot(thread, pos)]
    }

    /// Innermost open acquire among the first `pos` events of `thread`.
    pub fn open_top(&self, thread: ThreadId, pos: u32) -> Option<EventId> {
        let a = self.open_top[self.slot(thread, pos)];
        (a != NONE).then_some(a)
    }

    /// Smallest prefix length of `thread` at or above `pos` that closes
    /// every matched acquire open at `pos`.
    pub fn close_to(&self, thread: ThreadId, pos: u32) -> u32 {
        self.close_to[self.slot(thread, pos)]
    }

    /// Locks held by `thread` after its first `pos` events, innermost first.
    pub fn held_locks(&self, thread: ThreadId, pos: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut a = self.open_top(thread, pos);
        while let Some(acq) = a {
            out.push(self.events[acq as usize].target);
            a = self.open_top(thread, self.ord[acq as usize]);
        }
        out
    }

    /// Locks held while `e` executes.
    pub fn locks_held_at(&self, e: EventId) -> Vec<u32> {
        self.held_locks(self.thread_of(e), self.ord[e as usize])
    }

    /// Exclusive event-id bound for a frontier entry: the chain's events in
    /// the set are exactly those of `thread` with id below the bound.
    pub fn bound(&self, thread: ThreadId, pos: u32) -> EventId {
        let c = &self.chains[thread as usize];
        if (pos as usize) < c.len() {
            c[pos as usize]
        } else {
            self.events.len() as EventId
        }
    }
}

/// A prefix-closed event set represented by per-thread prefix lengths.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Frontier(pub Vec<u32>);

impl Frontier {
    pub fn empty(width: usize) -> Self {
        Frontier(vec![0; width])
    }

    pub fn from_clock(c: &[u32]) -> Self {
        Frontier(c.to_vec())
    }

    pub fn join(&mut self, other: &[u32]) {
        for (a, &b) in self.0.iter_mut().zip(other) {
            if b > *a {
                *a = b;
            }
        }
    }

    pub fn joined(&self, other: &Frontier) -> Frontier {
        let mut f = self.clone();
        f.join(&other.0);
        f
    }

    pub fn contains(&self, t: &Trace, e: EventId) -> bool {
        t.ord(e) < self.0[t.thread_of(e) as usize]
    }

    pub fn size(&self) -> usize {
        self.0.iter().map(|&x| x as usize).sum()
    }

    /// Events of the set in trace order.
    pub fn events(&self, t: &Trace) -> Vec<EventId> {
        let mut out = Vec::with_capacity(self.size());
        let end = (0..t.width())
            .filter(|&q| self.0[q] > 0)
            .map(|q| t.chain(q as ThreadId)[self.0[q] as usize - 1] + 1)
            .max()
            .unwrap_or(0);
        for e in 0..end {
            if self.contains(t, e) {
                out.push(e);
            }
        }
        out
    }

    pub fn is_subset(&self, other: &Frontier) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// True if the set is closed under cross-chain program-order edges.
    pub fn is_po_closed(&self, t: &Trace) -> bool {
        let mut preds = Vec::new();
        for q in 0..t.width() {
            let f = self.0[q];
            if f as usize > t.chain(q as ThreadId).len() {
                return false;
            }
            for &e in &t.chain(q as ThreadId)[..f as usize] {
                preds.clear();
                t.cross_preds(e, &mut preds);
                if preds.iter().any(|&p| !self.contains(t, p)) {
                    return false;
                }
            }
        }
        true
    }

    /// Open acquires of the set, innermost first per thread.
    pub fn open_acquires(&self, t: &Trace) -> Vec<EventId> {
        let mut out = Vec::new();
        for q in 0..t.width() {
            let mut a = t.open_top(q as ThreadId, self.0[q]);
            while let Some(acq) = a {
                out.push(acq);
                a = t.open_top(q as ThreadId, t.ord(acq));
            }
        }
        out.sort_unstable();
        out
    }

    pub fn has_open_acquires(&self, t: &Trace) -> bool {
        (0..t.width()).any(|q| t.open_depth(q as ThreadId, self.0[q]) > 0)
    }

    /// Open acquires hold pairwise distinct locks. Releases always have
    /// their acquire in a prefix-closed set.
    pub fn is_lock_feasible(&self, t: &Trace) -> bool {
        let mut seen: Vec<u32> = Vec::new();
        for q in 0..t.width() {
            if t.open_depth(q as ThreadId, self.0[q]) == 0 {
                continue;
            }
            for l in t.held_locks(q as ThreadId, self.0[q]) {
                if seen.contains(&l) {
                    return false;
                }
                seen.push(l);
            }
        }
        true
    }

    pub fn is_observation_feasible(&self, t: &Trace) -> bool {
        for q in 0..t.width() {
            for &e in &t.chain(q as ThreadId)[..self.0[q] as usize] {
                if let Some(w) = t.obs(e) {
                    if !self.contains(t, w) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// An arbitrary event set, as a membership bitmap over event ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventSet {
    bits: Vec<bool>,
}

impl EventSet {
    pub fn new(t: &Trace) -> Self {
        EventSet {
            bits: vec![false; t.len()],
        }
    }

    pub fn from_ids(t: &Trace, ids: &[EventId]) -> Self {
        let mut s = EventSet::new(t);
        for &e in ids {
            s.bits[e as usize] = true;
        }
        s
    }

    /// Set of the given 1-based input indices plus every init write.
    pub fn from_indices(t: &Trace, indices: &[u32]) -> Self {
        let mut s = EventSet::from_ids(t, &t.ids(indices));
        for e in 0..t.init_len() {
            s.bits[e] = true;
        }
        s
    }

    pub fn from_frontier(t: &Trace, f: &Frontier) -> Self {
        EventSet::from_ids(t, &f.events(t))
    }

    pub fn insert(&mut self, e: EventId) {
        self.bits[e as usize] = true;
    }

    pub fn contains(&self, e: EventId) -> bool {
        self.bits[e as usize]
    }

    pub fn ids(&self) -> Vec<EventId> {
        (0..self.bits.len() as EventId)
            .filter(|&e| self.bits[e as usize])
            .collect()
    }

    pub fn len(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Frontier of the set if it is prefix-closed, `None` otherwise.
    pub fn frontier(&self, t: &Trace) -> Option<Frontier> {
        let mut f = Frontier::empty(t.width());
        for q in 0..t.width() {
            let chain = t.chain(q as ThreadId);
            let n = chain.iter().take_while(|&&e| self.contains(e)).count();
            if chain[n..].iter().any(|&e| self.contains(e)) {
                return None;
            }
            f.0[q] = n as u32;
        }
        f.is_po_closed(t).then_some(f)
    }
}

/// Acquires in `x` whose matching release is not in `x`.
pub fn open_acquires(t: &Trace, x: &EventSet) -> Vec<EventId> {
    x.ids()
        .into_iter()
        .filter(|&e| t.event(e).op == Op::Acquire)
        .filter(|&e| t.matching(e).is_none_or(|m| !x.contains(m)))
        .collect()
}

/// Prefix-closed, observation-feasible and lock-feasible.
pub fn is_feasible(t: &Trace, x: &EventSet) -> bool {
    if x.frontier(t).is_none() {
        return false;
    }
    for e in x.ids() {
        let ev = t.event(e);
        if ev.op == Op::Read && !x.contains(t.obs(e).expect("read has observation")) {
            return false;
        }
        if ev.op == Op::Release && !x.contains(t.matching(e).expect("release has acquire")) {
            return false;
        }
    }
    let open = open_acquires(t, x);
    for (i, &a) in open.iter().enumerate() {
        for &b in &open[i + 1..] {
            if t.event(a).target == t.event(b).target {
                return false;
            }
        }
    }
    true
}

/// Replays a candidate reordering, tracking per-thread progress, lock
/// holders and the last writer of every variable.
struct Replay<'t> {
    t: &'t Trace,
    next: Vec<u32>,
    holder: Vec<ThreadId>,
    last_write: Vec<EventId>,
}

impl<'t> Replay<'t> {
    fn new(t: &'t Trace) -> Self {
        Replay {
            t,
            next: vec![0; t.width()],
            holder: vec![NONE; t.lock_count()],
            last_write: vec![NONE; t.var_count()],
        }
    }

    fn executed(&self, e: EventId) -> bool {
        self.t.ord(e) < self.next[self.t.thread_of(e) as usize]
    }

    /// `e` is the next event of its thread and its cross-chain
    /// predecessors have executed.
    fn is_next(&self, e: EventId) -> bool {
        if self.t.ord(e) != self.next[self.t.thread_of(e) as usize] {
            return false;
        }
        let mut preds = Vec::with_capacity(3);
        self.t.cross_preds(e, &mut preds);
        preds.iter().all(|&p| self.executed(p))
    }

    fn step(&mut self, e: EventId) -> Result<(), String> {
        let t = self.t;
        if e as usize >= t.len() {
            return Err(format!("event id {e} out of range"));
        }
        if !self.is_next(e) {
            return Err(format!("e{} is not enabled", t.event(e).index));
        }
        let ev = *t.event(e);
        match ev.op {
            Op::Read => {
                if Some(self.last_write[ev.target as usize]) != t.obs(e) {
                    return Err(format!("e{} observes a different write", ev.index));
                }
            }
            Op::Write => self.last_write[ev.target as usize] = e,
            Op::Acquire => {
                if self.holder[ev.target as usize] != NONE {
                    return Err(format!("e{} acquires a held lock", ev.index));
                }
                self.holder[ev.target as usize] = ev.thread;
            }
            Op::Release => {
                if self.holder[ev.target as usize] != ev.thread {
                    return Err(format!("e{} releases a lock it does not hold", ev.index));
                }
                self.holder[ev.target as usize] = NONE;
            }
            Op::Fork | Op::Join => {}
        }
        self.next[ev.thread as usize] += 1;
        Ok(())
    }
}

/// Init writes are implicit: a sequence without any of them is checked as
/// if the full init prefix ran first.
fn with_init(t: &Trace, seq: &[EventId]) -> Vec<EventId> {
    if seq.iter().any(|&e| t.is_init(e)) {
        seq.to_vec()
    } else {
        (0..t.init_len() as EventId).chain(seq.iter().copied()).collect()
    }
}

/// Explain why `t_star` is not a correct reordering of `t`.
pub fn check_reordering(t: &Trace, t_star: &[EventId]) -> Result<(), String> {
    let mut r = Replay::new(t);
    for e in with_init(t, t_star) {
        r.step(e)?;
    }
    Ok(())
}

pub fn is_correct_reordering(t: &Trace, t_star: &[EventId]) -> bool {
    check_reordering(t, t_star).is_ok()
}

/// Explain why `t_star` does not exhibit a race on `(e1, e2)`.
pub fn check_race(t: &Trace, t_star: &[EventId], e1: EventId, e2: EventId) -> Result<(), String> {
    let n = t_star.len();
    if n < 2 {
        return Err("witness shorter than two events".into());
    }
    let (a, b) = (t_star[n - 2], t_star[n - 1]);
    if !((a == e1 && b == e2) || (a == e2 && b == e1)) {
        return Err("witness does not end with the racy pair".into());
    }
    if e1 as usize >= t.len() || e2 as usize >= t.len() {
        return Err("racy event out of range".into());
    }
    let (x, y) = (t.event(a), t.event(b));
    if x.thread == y.thread || x.thread == INIT_THREAD || y.thread == INIT_THREAD {
        return Err("racy events share a thread".into());
    }
    if !x.op.is_access() || !y.op.is_access() || !t.conflicting(a, b) {
        return Err("racy events do not conflict".into());
    }
    let prefix = with_init(t, &t_star[..n - 2]);
    let mut r = Replay::new(t);
    for &e in &prefix {
        r.step(e)?;
    }
    if !r.is_next(a) || !r.is_next(b) {
        return Err("racy events are not both enabled after the prefix".into());
    }
    if x.op == Op::Read && r.last_write[x.target as usize] == NONE {
        return Err("first racy read has no preceding write".into());
    }
    Ok(())
}

/// `t_star` is a correct reordering followed by `e1, e2` (either order),
/// both enabled, on different threads, and conflicting.
pub fn exhibits_race(t: &Trace, t_star: &[EventId], e1: EventId, e2: EventId) -> bool {
    check_race(t, t_star, e1, e2).is_ok()
}
