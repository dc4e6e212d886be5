//! Linearization of a closed partial order into a correct reordering.
//!
//! X is split into X1, the part of X on one thread, and X2, the rest. The
//! order on X2 must already be total on conflicting events. Events of X1
//! are placed as early as the order allows and events of X2 as late, so
//! every unordered pair (a in X1, b in X2) comes out with a first.

use thiserror::Error;

use crate::closure::ClosedPo;
use crate::trace::{EventId, ThreadId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("linearization precondition violated: {0}")]
pub struct PreconditionViolation(pub String);

/// Every pair of conflicting events of X outside thread `x1` is ordered.
pub fn is_m_trace(q: &ClosedPo<'_>, x1: ThreadId) -> bool {
    let t = q.trace();
    let evs: Vec<EventId> = q
        .frontier()
        .events(t)
        .into_iter()
        .filter(|&e| t.thread_of(e) != x1)
        .collect();
    for (i, &a) in evs.iter().enumerate() {
        for &b in &evs[i + 1..] {
            if t.thread_of(a) != t.thread_of(b) && t.conflicting(a, b) && !q.ordered(a, b) {
                return false;
            }
        }
    }
    true
}

/// Topological order of `q` with X1 events scheduled eagerly. Ties go to
/// X1 first, then to the lowest chain index.
pub fn max_min(q: &ClosedPo<'_>, x1: ThreadId) -> Result<Vec<EventId>, PreconditionViolation> {
    let t = q.trace();
    let x = q.frontier();
    let k = t.width() as ThreadId;
    let mut heads = vec![0u32; k as usize];
    let total = x.size();
    let mut out = Vec::with_capacity(total);
    let order: Vec<ThreadId> = std::iter::once(x1).chain((0..k).filter(|&c| c != x1)).collect();
    let x1_len = x.0[x1 as usize];

    // First unmet condition of a chain head: heads[d] must reach the value.
    // Conditions only get easier as heads advance.
    let blocker = |heads: &[u32], c: ThreadId| -> Option<(ThreadId, u32)> {
        let b = t.chain(c)[heads[c as usize] as usize];
        for d in 0..k {
            if d == c || x.0[d as usize] == 0 {
                continue;
            }
            if let Some(p) = q.predecessor_pos(b, d) {
                if p >= heads[d as usize] {
                    return Some((d, p + 1));
                }
            }
        }
        if c != x1 && x1_len > 0 {
            let need = q.successor_pos(b, x1).unwrap_or(x1_len).min(x1_len);
            if heads[x1 as usize] < need {
                return Some((x1, need));
            }
        }
        None
    };

    #[derive(Clone, Copy)]
    enum State {
        Stale,
        Ready,
        Wait(ThreadId, u32),
    }
    let mut state = vec![State::Stale; k as usize];
    while out.len() < total {
        let mut pick = None;
        for &c in &order {
            if heads[c as usize] >= x.0[c as usize] {
                continue;
            }
            let st = &mut state[c as usize];
            if let State::Wait(d, v) = *st {
                if heads[d as usize] >= v {
                    *st = State::Stale;
                }
            }
            if let State::Stale = *st {
                *st = match blocker(&heads, c) {
                    None => State::Ready,
                    Some((d, v)) => State::Wait(d, v),
                };
            }
            if let State::Ready = *st {
                pick = Some(c);
                break;
            }
        }
        let Some(c) = pick else {
            return Err(PreconditionViolation(format!(
                "no schedulable event after {} of {}",
                out.len(),
                total
            )));
        };
        out.push(t.chain(c)[heads[c as usize] as usize]);
        heads[c as usize] += 1;
        state[c as usize] = State::Stale;
    }
    Ok(out)
}
