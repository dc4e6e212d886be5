mod common;

use std::collections::BTreeSet;

use common::{ev, fixture};
use racewitness::baselines::{dc_races, hb_races, races, shb_races, wcp_races, Method};
use racewitness::oracle::{oracle_races, random_trace, Params};
use racewitness::trace::{EventId, Op, Trace};

type Rel = Vec<Vec<bool>>;

#[allow(clippy::needless_range_loop)]
fn close(r: &mut Rel) {
    let n = r.len();
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
}

fn compose(a: &Rel, b: &Rel) -> Rel {
    let n = a.len();
    let mut out = vec![vec![false; n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] {
                for j in 0..n {
                    if b[k][j] {
                        out[i][j] = true;
                    }
                }
            }
        }
    }
    out
}

fn merge(dst: &mut Rel, src: &Rel) -> bool {
    let mut changed = false;
    for (d, s) in dst.iter_mut().zip(src) {
        for (x, &y) in d.iter_mut().zip(s) {
            if y && !*x {
                *x = true;
                changed = true;
            }
        }
    }
    changed
}

fn po(t: &Trace) -> Rel {
    let n = t.len();
    let mut r = vec![vec![false; n]; n];
    let mut preds = Vec::new();
    for e in 0..n as EventId {
        preds.clear();
        t.po_preds(e, &mut preds);
        for &p in &preds {
            r[p as usize][e as usize] = true;
        }
    }
    close(&mut r);
    r
}

fn hb(t: &Trace, obs: bool) -> Rel {
    let mut r = po(t);
    for a in 0..t.len() as EventId {
        for b in a + 1..t.len() as EventId {
            let (ea, eb) = (t.event(a), t.event(b));
            if ea.op == Op::Release && eb.op == Op::Acquire && ea.target == eb.target {
                r[a as usize][b as usize] = true;
            }
        }
        if obs && t.event(a).op == Op::Read {
            if let Some(w) = t.obs(a) {
                r[w as usize][a as usize] = true;
            }
        }
    }
    close(&mut r);
    r
}

/// Critical sections as (acquire, release or None, events inside).
fn sections(t: &Trace) -> Vec<(EventId, Option<EventId>, Vec<EventId>)> {
    let mut out = Vec::new();
    for a in 0..t.len() as EventId {
        if t.event(a).op != Op::Acquire {
            continue;
        }
        let th = t.thread_of(a);
        let rel = t.matching(a);
        let inside = t
            .chain(th)
            .iter()
            .copied()
            .filter(|&e| e > a && rel.is_none_or(|r| e < r))
            .collect();
        out.push((a, rel, inside));
    }
    out
}

fn refl(mut r: Rel) -> Rel {
    for (i, row) in r.iter_mut().enumerate() {
        row[i] = true;
    }
    r
}

fn rule_one(t: &Trace, r: &mut Rel) {
    let cs = sections(t);
    for (a1, r1, in1) in &cs {
        let Some(r1) = *r1 else { continue };
        for (a2, _, in2) in &cs {
            if a2 <= a1 || t.event(*a1).target != t.event(*a2).target {
                continue;
            }
            for &e2 in in2 {
                if in1.iter().any(|&e1| t.conflicting(e1, e2)) {
                    r[r1 as usize][e2 as usize] = true;
                }
            }
        }
    }
}

fn rule_two(t: &Trace, r: &mut Rel) -> bool {
    let cs = sections(t);
    let mut changed = false;
    for (a1, r1, _) in &cs {
        let Some(r1) = *r1 else { continue };
        for (a2, r2, _) in &cs {
            let Some(r2) = *r2 else { continue };
            if a2 <= a1 || t.event(*a1).target != t.event(*a2).target {
                continue;
            }
            if r[*a1 as usize][r2 as usize] && !r[r1 as usize][r2 as usize] {
                r[r1 as usize][r2 as usize] = true;
                changed = true;
            }
        }
    }
    changed
}

fn naive_wcp(t: &Trace) -> Rel {
    let h = refl(hb(t, false));
    let n = t.len();
    let mut w = vec![vec![false; n]; n];
    rule_one(t, &mut w);
    loop {
        let c = compose(&compose(&h, &w), &h);
        let mut changed = merge(&mut w, &c);
        changed |= rule_two(t, &mut w);
        if !changed {
            break;
        }
    }
    merge(&mut w, &po(t));
    w
}

fn naive_dc(t: &Trace) -> Rel {
    let mut d = po(t);
    rule_one(t, &mut d);
    loop {
        close(&mut d);
        if !rule_two(t, &mut d) {
            break;
        }
    }
    d
}

fn unordered(t: &Trace, r: &Rel) -> BTreeSet<(EventId, EventId)> {
    let mut out = BTreeSet::new();
    for a in 0..t.len() as EventId {
        for b in a + 1..t.len() as EventId {
            if t.is_init(a) || t.thread_of(a) == t.thread_of(b) || !t.event(a).op.is_access() {
                continue;
            }
            if t.event(b).op.is_access() && t.conflicting(a, b) && !r[a as usize][b as usize] {
                out.insert((a, b));
            }
        }
    }
    out
}

#[test]
fn clocks_match_naive_relations() {
    for (k, locks) in [(2, 1), (2, 2), (3, 2), (4, 2)] {
        let p = Params {
            threads: k,
            events: 24,
            vars: 2,
            locks,
        };
        for seed in 0..150 {
            let t = random_trace(seed, p);
            assert_eq!(hb_races(&t), unordered(&t, &hb(&t, false)), "hb seed {seed} k {k}");
            assert_eq!(shb_races(&t), unordered(&t, &hb(&t, true)), "shb seed {seed} k {k}");
            assert_eq!(wcp_races(&t), unordered(&t, &naive_wcp(&t)), "wcp seed {seed} k {k}");
            assert_eq!(dc_races(&t), unordered(&t, &naive_dc(&t)), "dc seed {seed} k {k}");
        }
    }
}

#[test]
fn containments() {
    let p = Params {
        threads: 3,
        events: 40,
        vars: 3,
        locks: 2,
    };
    for seed in 0..200 {
        let t = random_trace(seed, p);
        let s = shb_races(&t);
        let h = hb_races(&t);
        let w = wcp_races(&t);
        let d = dc_races(&t);
        assert!(s.is_subset(&h), "seed {seed}");
        assert!(h.is_subset(&w), "seed {seed}");
        assert!(w.is_subset(&d), "seed {seed}");
    }
}

#[test]
fn first_hb_race_is_real() {
    let p = Params {
        threads: 3,
        events: 14,
        vars: 2,
        locks: 2,
    };
    for seed in 0..200 {
        let t = random_trace(seed, p);
        let o = oracle_races(&t, 20).unwrap();
        if !shb_races(&t).is_empty() {
            assert!(!o.is_empty(), "seed {seed}");
        }
    }
}

#[test]
fn two_sections_pair_ordered_by_all() {
    let t = fixture("two_sections.trace");
    for m in Method::ALL {
        let r = races(&t, m);
        assert!(!r.contains(&(ev(&t, 2), ev(&t, 7))), "{}", m.name());
    }
}

#[test]
fn nested_locks_only_dc_reports_pair() {
    let t = fixture("nested_locks.trace");
    let pair = (ev(&t, 2), ev(&t, 14));
    assert!(!hb_races(&t).contains(&pair));
    assert!(!wcp_races(&t).contains(&pair));
    assert!(dc_races(&t).contains(&pair));
    assert!(oracle_races(&t, 16).unwrap().contains(&pair));
}
