use racewitness::dag::Node;

/// Chains plus cross edges, with reachability recomputed from scratch.
pub struct NaiveDag {
    lens: Vec<u32>,
    offset: Vec<usize>,
    edges: Vec<(Node, Node)>,
    reach: Vec<Vec<bool>>,
}

impl NaiveDag {
    pub fn new(lens: &[u32]) -> Self {
        let mut offset = vec![0];
        for &l in lens {
            offset.push(offset.last().unwrap() + l as usize);
        }
        let mut d = NaiveDag {
            lens: lens.to_vec(),
            offset,
            edges: Vec::new(),
            reach: Vec::new(),
        };
        d.recompute();
        d
    }

    fn id(&self, u: Node) -> usize {
        self.offset[u.0 as usize] + u.1 as usize
    }

    fn recompute(&mut self) {
        let n = *self.offset.last().unwrap();
        let mut adj = vec![Vec::new(); n];
        for c in 0..self.lens.len() {
            for p in 1..self.lens[c] {
                adj[self.id((c as u32, p - 1))].push(self.id((c as u32, p)));
            }
        }
        for &(u, v) in &self.edges {
            adj[self.id(u)].push(self.id(v));
        }
        self.reach = (0..n)
            .map(|s| {
                let mut seen = vec![false; n];
                let mut stack = vec![s];
                seen[s] = true;
                while let Some(x) = stack.pop() {
                    for &y in &adj[x] {
                        if !seen[y] {
                            seen[y] = true;
                            stack.push(y);
                        }
                    }
                }
                seen
            })
            .collect();
    }

    pub fn query(&self, u: Node, v: Node) -> bool {
        self.reach[self.id(u)][self.id(v)]
    }

    pub fn successor(&self, u: Node, i: u32) -> Option<u32> {
        (0..self.lens[i as usize]).find(|&p| self.query(u, (i, p)))
    }

    pub fn predecessor(&self, u: Node, i: u32) -> Option<u32> {
        (0..self.lens[i as usize]).rev().find(|&p| self.query((i, p), u))
    }

    /// Add `u -> v`; false (and no change) if it closes a cycle.
    pub fn insert(&mut self, u: Node, v: Node) -> bool {
        if u != v && self.query(v, u) {
            return false;
        }
        self.edges.push((u, v));
        self.recompute();
        true
    }
}

/// Run `ops` random insert/query/successor/predecessor operations on a
/// random DAG of width at most 8 against the naive model. Returns the
/// number of operations checked.
pub fn differential_ops(seed: u64, ops: usize) -> Result<usize, String> {
    use racewitness::dag::{DagError, PartialOrderDs};
    use rand::{Rng, SeedableRng};

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(1..=8u32);
    let lens: Vec<u32> = (0..k).map(|_| rng.gen_range(1..=6)).collect();
    let node = |rng: &mut rand_chacha::ChaCha8Rng| {
        let c = rng.gen_range(0..k);
        (c, rng.gen_range(0..lens[c as usize]))
    };
    let mut ds = PartialOrderDs::new(&lens, &[]).map_err(|e| format!("{e:?}"))?;
    let mut naive = NaiveDag::new(&lens);
    let mut changed = Vec::new();
    for op in 0..ops {
        let (u, v) = (node(&mut rng), node(&mut rng));
        let i = rng.gen_range(0..k);
        let fail = |what: &str| Err(format!("seed {seed} op {op}: {what} {u:?} {v:?} chain {i}"));
        match rng.gen_range(0..4) {
            0 => {
                let ok = naive.insert(u, v);
                match ds.insert(u, v, &mut changed) {
                    Ok(()) if ok => {}
                    Err(DagError::Cycle) if !ok => {}
                    _ => return fail("insert"),
                }
            }
            1 if ds.query(u, v) != naive.query(u, v) => return fail("query"),
            2 if ds.successor(u, i) != naive.successor(u, i) => return fail("successor"),
            3 if ds.predecessor(u, i) != naive.predecessor(u, i) => return fail("predecessor"),
            _ => {}
        }
    }
    Ok(ops)
}
