//! Incremental reachability over a DAG made of totally ordered chains plus
//! cross edges. For every ordered chain pair the earliest reachable node of
//! the target chain is kept in a suffix-minimum Fenwick tree, so queries,
//! successor and predecessor lookups cost O(log n) and an insert O(k² log n).

use std::collections::VecDeque;

use thiserror::Error;

/// A node: (chain, position within the chain).
pub type Node = (u32, u32);

/// Marks "unreachable" in the backing arrays.
pub const INF: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DagError {
    #[error("edge would close a cycle")]
    Cycle,
    #[error("node ({0}, {1}) out of range")]
    OutOfRange(u32, u32),
}

/// Dynamic suffix minima over an array with decrease-only updates.
#[derive(Clone, Debug)]
pub struct SuffixMin {
    // 1-based Fenwick over the reversed array: slot r covers index n - r.
    tree: Vec<u32>,
    n: usize,
}

fn lowbit(i: usize) -> usize {
    i & i.wrapping_neg()
}

impl SuffixMin {
    pub fn new(n: usize) -> Self {
        SuffixMin {
            tree: vec![INF; n + 1],
            n,
        }
    }

    /// Build from a backing array in O(n).
    pub fn from_values(values: &[u32]) -> Self {
        let n = values.len();
        let mut tree = vec![INF; n + 1];
        for r in 1..=n {
            tree[r] = tree[r].min(values[n - r]);
            let up = r + lowbit(r);
            if up <= n {
                tree[up] = tree[up].min(tree[r]);
            }
        }
        SuffixMin { tree, n }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// A[i] = min(A[i], v).
    pub fn update(&mut self, i: usize, v: u32) {
        debug_assert!(i < self.n);
        let mut r = self.n - i;
        // Covering slots only shrink going up, so stop at the first one
        // already at or below v.
        while r <= self.n && self.tree[r] > v {
            self.tree[r] = v;
            r += lowbit(r);
        }
    }

    /// min A[i..n]; `INF` when `i >= n`.
    pub fn min(&self, i: usize) -> u32 {
        if i >= self.n {
            return INF;
        }
        let mut r = self.n - i;
        let mut m = INF;
        while r > 0 {
            m = m.min(self.tree[r]);
            r -= lowbit(r);
        }
        m
    }

    /// max{ j : A[j] <= v }.
    pub fn argleq(&self, v: u32) -> Option<usize> {
        // Largest r whose reversed prefix minimum still exceeds v.
        let mut pos = 0usize;
        let mut acc = INF;
        let mut step = if self.n == 0 {
            0
        } else {
            1usize << (usize::BITS - 1 - self.n.leading_zeros())
        };
        while step > 0 {
            let next = pos + step;
            if next <= self.n && acc.min(self.tree[next]) > v {
                pos = next;
                acc = acc.min(self.tree[next]);
            }
            step >>= 1;
        }
        if pos == self.n {
            None
        } else {
            Some(self.n - (pos + 1))
        }
    }
}

/// A source node whose earliest reachable node on another chain moved
/// earlier after an insert.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Change {
    pub from: Node,
    pub to: Node,
    /// Successor of `from` on `to`'s chain before the insert, `INF` if none.
    pub old_succ: u32,
    /// Predecessor of `to` on `from`'s chain before the insert.
    pub old_pred: Option<u32>,
}

/// Reachability structure over `k` chains with cross edges.
#[derive(Clone, Debug)]
pub struct PartialOrderDs {
    lens: Vec<u32>,
    k: usize,
    // fts[i1 * k + i2]: for node (i1, j), the earliest reachable position in chain i2.
    fts: Vec<SuffixMin>,
}

impl PartialOrderDs {
    /// Build from chain lengths and cross edges in O(k² n).
    pub fn new(lens: &[u32], edges: &[(Node, Node)]) -> Result<Self, DagError> {
        let k = lens.len();
        let mut offset = Vec::with_capacity(k + 1);
        let mut total = 0usize;
        for &l in lens {
            offset.push(total);
            total += l as usize;
        }
        offset.push(total);
        let check = |(c, p): Node| -> Result<usize, DagError> {
            if (c as usize) < k && p < lens[c as usize] {
                Ok(offset[c as usize] + p as usize)
            } else {
                Err(DagError::OutOfRange(c, p))
            }
        };

        // Out-adjacency of cross edges, CSR.
        let mut deg = vec![0u32; total + 1];
        let mut indeg = vec![0u32; total];
        let mut flat = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            let (ia, ib) = (check(a)?, check(b)?);
            deg[ia + 1] += 1;
            indeg[ib] += 1;
            flat.push((ia, ib));
        }
        for i in 0..total {
            deg[i + 1] += deg[i];
        }
        let mut fill = deg.clone();
        let mut adj = vec![0usize; flat.len()];
        for &(ia, ib) in &flat {
            adj[fill[ia] as usize] = ib;
            fill[ia] += 1;
        }
        let mut node_of = Vec::with_capacity(total);
        for (c, &l) in lens.iter().enumerate() {
            for p in 0..l {
                node_of.push((c as u32, p));
            }
        }
        for c in 0..k {
            for p in 1..lens[c] as usize {
                indeg[offset[c] + p] += 1;
            }
        }

        // Kahn order; a leftover node means a cycle.
        let mut order = Vec::with_capacity(total);
        let mut queue: VecDeque<usize> = (0..total).filter(|&i| indeg[i] == 0).collect();
        while let Some(i) = queue.pop_front() {
            order.push(i);
            let (c, p) = node_of[i];
            let mut relax = |j: usize, queue: &mut VecDeque<usize>| {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push_back(j);
                }
            };
            if p + 1 < lens[c as usize] {
                relax(i + 1, &mut queue);
            }
            for &j in &adj[deg[i] as usize..deg[i + 1] as usize] {
                relax(j, &mut queue);
            }
        }
        if order.len() != total {
            return Err(DagError::Cycle);
        }

        // succ[i * k + c]: earliest reachable position in chain c.
        let mut succ = vec![INF; total * k];
        let mut row = vec![INF; k];
        for &i in order.iter().rev() {
            let (c, p) = node_of[i];
            row.fill(INF);
            row[c as usize] = p;
            let next = (p + 1 < lens[c as usize]).then_some(i + 1);
            for j in next
                .into_iter()
                .chain(adj[deg[i] as usize..deg[i + 1] as usize].iter().copied())
            {
                for (a, &b) in row.iter_mut().zip(&succ[j * k..(j + 1) * k]) {
                    *a = (*a).min(b);
                }
            }
            succ[i * k..(i + 1) * k].copy_from_slice(&row);
        }

        let mut fts = Vec::with_capacity(k * k);
        let mut values = Vec::new();
        for i1 in 0..k {
            for i2 in 0..k {
                if i1 == i2 {
                    fts.push(SuffixMin::new(0));
                    continue;
                }
                values.clear();
                values.extend((0..lens[i1] as usize).map(|p| succ[(offset[i1] + p) * k + i2]));
                fts.push(SuffixMin::from_values(&values));
            }
        }
        Ok(PartialOrderDs {
            lens: lens.to_vec(),
            k,
            fts,
        })
    }

    pub fn chain_count(&self) -> usize {
        self.k
    }

    pub fn chain_len(&self, c: u32) -> u32 {
        self.lens[c as usize]
    }

    fn ft(&self, i1: u32, i2: u32) -> &SuffixMin {
        &self.fts[i1 as usize * self.k + i2 as usize]
    }

    /// Earliest position of chain `i` reachable from `u`.
    pub fn successor(&self, u: Node, i: u32) -> Option<u32> {
        if u.0 == i {
            return Some(u.1);
        }
        let s = self.ft(u.0, i).min(u.1 as usize);
        (s != INF).then_some(s)
    }

    /// Latest position of chain `i` that reaches `u`.
    pub fn predecessor(&self, u: Node, i: u32) -> Option<u32> {
        if u.0 == i {
            return Some(u.1);
        }
        self.ft(i, u.0).argleq(u.1).map(|p| p as u32)
    }

    /// `u` reaches `v` (reflexive).
    pub fn query(&self, u: Node, v: Node) -> bool {
        if u.0 == v.0 {
            u.1 <= v.1
        } else {
            self.ft(u.0, v.0).min(u.1 as usize) <= v.1
        }
    }

    /// Add the edge `u -> v`. Every (predecessor, successor) frontier pair
    /// whose reachability changed is appended to `changed`.
    pub fn insert(&mut self, u: Node, v: Node, changed: &mut Vec<Change>) -> Result<(), DagError> {
        for (c, p) in [u, v] {
            if c as usize >= self.k || p >= self.lens[c as usize] {
                return Err(DagError::OutOfRange(c, p));
            }
        }
        if u != v && self.query(v, u) {
            return Err(DagError::Cycle);
        }
        if self.query(u, v) {
            return Ok(());
        }
        let k = self.k as u32;
        let preds: Vec<Option<u32>> = (0..k).map(|i| self.predecessor(u, i)).collect();
        let succs: Vec<Option<u32>> = (0..k).map(|i| self.successor(v, i)).collect();
        for i1 in 0..k {
            let Some(p) = preds[i1 as usize] else { continue };
            for i2 in 0..k {
                if i1 == i2 {
                    continue;
                }
                let Some(s) = succs[i2 as usize] else { continue };
                let old_succ = self.ft(i1, i2).min(p as usize);
                if old_succ > s {
                    let old_pred = self.predecessor((i2, s), i1);
                    self.fts[(i1 * k + i2) as usize].update(p as usize, s);
                    changed.push(Change {
                        from: (i1, p),
                        to: (i2, s),
                        old_succ,
                        old_pred,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_min_basics() {
        let vals = [5, 3, 7, 7, 9, INF];
        let s = SuffixMin::from_values(&vals);
        for i in 0..=vals.len() {
            let want = vals[i..].iter().copied().min().unwrap_or(INF);
            assert_eq!(s.min(i), want, "min({i})");
        }
        assert_eq!(s.argleq(2), None);
        assert_eq!(s.argleq(3), Some(1));
        assert_eq!(s.argleq(7), Some(3));
        assert_eq!(s.argleq(100), Some(4));
    }

    #[test]
    fn suffix_min_updates_match_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 8, 17, 64] {
            let mut vals: Vec<u32> = (0..n).map(|_| rng.gen_range(0..50)).collect();
            let mut s = SuffixMin::from_values(&vals);
            for _ in 0..200 {
                let i = rng.gen_range(0..n);
                let v = rng.gen_range(0..50);
                vals[i] = vals[i].min(v);
                s.update(i, v);
                let q = rng.gen_range(0..=n);
                assert_eq!(s.min(q), vals[q..].iter().copied().min().unwrap_or(INF));
                let v = rng.gen_range(0..50);
                let want = (0..n).rev().find(|&j| vals[j] <= v);
                assert_eq!(s.argleq(v), want);
            }
        }
    }

    #[test]
    fn disconnected_and_connected() {
        let ds = PartialOrderDs::new(&[3, 3], &[]).unwrap();
        assert!(!ds.query((0, 0), (1, 0)));
        assert_eq!(ds.successor((0, 0), 1), None);
        let ds = PartialOrderDs::new(&[3, 3], &[((0, 0), (1, 1))]).unwrap();
        assert!(ds.query((0, 0), (1, 2)));
        assert!(!ds.query((0, 1), (1, 2)));
    }

    #[test]
    fn successor_predecessor() {
        let ds = PartialOrderDs::new(&[3, 3], &[((0, 0), (1, 2))]).unwrap();
        assert_eq!(ds.successor((0, 0), 1), Some(2));
        assert_eq!(ds.predecessor((1, 2), 0), Some(0));
        assert_eq!(ds.predecessor((1, 1), 0), None);
    }

    #[test]
    fn reflexive_and_chain_order() {
        let ds = PartialOrderDs::new(&[6], &[]).unwrap();
        assert!(ds.query((0, 2), (0, 2)));
        assert!(ds.query((0, 1), (0, 4)));
        assert!(!ds.query((0, 4), (0, 1)));
    }

    #[test]
    fn insert_then_query_and_idempotent() {
        let mut ds = PartialOrderDs::new(&[5, 5], &[]).unwrap();
        let mut changed = Vec::new();
        ds.insert((0, 0), (1, 0), &mut changed).unwrap();
        assert!(ds.query((0, 0), (1, 4)));
        assert_eq!(
            changed,
            vec![Change {
                from: (0, 0),
                to: (1, 0),
                old_succ: INF,
                old_pred: None
            }]
        );
        changed.clear();
        ds.insert((0, 0), (1, 0), &mut changed).unwrap();
        assert!(changed.is_empty());
    }

    #[test]
    fn cycles_rejected() {
        let mut ds = PartialOrderDs::new(&[2, 2], &[((0, 1), (1, 0))]).unwrap();
        let mut changed = Vec::new();
        assert_eq!(ds.insert((1, 1), (0, 0), &mut changed), Err(DagError::Cycle));
        assert_eq!(
            PartialOrderDs::new(&[2, 2], &[((0, 1), (1, 0)), ((1, 1), (0, 0))]).unwrap_err(),
            DagError::Cycle
        );
        assert!(matches!(
            PartialOrderDs::new(&[2], &[((0, 2), (0, 0))]),
            Err(DagError::OutOfRange(0, 2))
        ));
    }
}
