//! Weighted balanced k-way graph partitioning of the transaction graph.
//!
//! Vertices are accounts, edge weights count how often two accounts were
//! written by the same transaction. The objective is the total weight of
//! edges cut by the partition, subject to a hard cap on vertices per
//! cluster.
//!
//! [`partition_greedy`] is a small multilevel scheme: heavy-edge matching
//! coarsens the graph, greedy graph growing seeds the coarsest partition and
//! boundary refinement improves it while projecting back.
//! [`partition_bruteforce`] enumerates every partition of graphs of up to
//! [`BRUTEFORCE_MAX_VERTICES`] vertices and serves as the reference.

use std::collections::{BTreeMap, HashMap};

use indexmap::IndexMap;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::seed::rng_for;
use crate::types::{AccountId, ShardId, Transaction};

pub const BRUTEFORCE_MAX_VERTICES: usize = 12;

/// Undirected graph with positive integer edge weights and no self-loops.
/// Vertices keep their insertion order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WeightedGraph {
    vertices: IndexMap<AccountId, ()>,
    adj: Vec<BTreeMap<usize, u64>>,
    edge_count: usize,
}

impl WeightedGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Co-occurrence graph: every pair of accounts written by the same
    /// transaction adds 1 to their edge.
    pub fn from_transactions<'a>(txs: impl IntoIterator<Item = &'a Transaction>) -> Self {
        let mut g = WeightedGraph::new();
        for tx in txs {
            for a in &tx.write_set {
                g.add_vertex(*a);
            }
            for (i, a) in tx.write_set.iter().enumerate() {
                for b in &tx.write_set[i + 1..] {
                    g.add_weight(*a, *b, 1).expect("write sets hold distinct accounts");
                }
            }
        }
        g
    }

    pub fn add_vertex(&mut self, v: AccountId) -> usize {
        if let Some(i) = self.vertices.get_index_of(&v) {
            return i;
        }
        self.vertices.insert(v, ());
        self.adj.push(BTreeMap::new());
        self.vertices.len() - 1
    }

    /// Adds `w` to the weight of edge `{a, b}`, creating vertices and the
    /// edge as needed.
    pub fn add_weight(&mut self, a: AccountId, b: AccountId, w: u64) -> Result<()> {
        if a == b {
            return Err(Error::SelfLoop(a.to_hex()));
        }
        if w == 0 {
            return Ok(());
        }
        let (ia, ib) = (self.add_vertex(a), self.add_vertex(b));
        let entry = self.adj[ia].entry(ib).or_insert(0);
        if *entry == 0 {
            self.edge_count += 1;
        }
        *entry += w;
        *self.adj[ib].entry(ia).or_insert(0) += w;
        Ok(())
    }

    /// Online update: the weight of exactly one edge grows by one.
    pub fn online_increment(&mut self, a: AccountId, b: AccountId) -> Result<()> {
        self.add_weight(a, b, 1)
    }

    pub fn weight(&self, a: &AccountId, b: &AccountId) -> u64 {
        match (self.vertices.get_index_of(a), self.vertices.get_index_of(b)) {
            (Some(ia), Some(ib)) => self.adj[ia].get(&ib).copied().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn vertices(&self) -> impl Iterator<Item = &AccountId> {
        self.vertices.keys()
    }

    pub fn vertex(&self, index: usize) -> &AccountId {
        self.vertices.get_index(index).expect("vertex index in range").0
    }

    /// Each edge once, as `(u, v, w)` vertex indices with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().filter(move |(v, _)| **v > u).map(move |(v, w)| (u, *v, *w)))
    }

    pub fn total_weight(&self) -> u64 {
        self.edges().map(|(_, _, w)| w).sum()
    }

    fn level(&self) -> Level {
        Level {
            vw: vec![1; self.vertex_count()],
            adj: self
                .adj
                .iter()
                .map(|nb| nb.iter().map(|(v, w)| (*v, *w)).collect())
                .collect(),
        }
    }
}

/// Assignment of every vertex to a cluster in `0..k`, each cluster holding
/// at most `balance_cap` vertices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub assignment: IndexMap<AccountId, usize>,
    pub k: usize,
    pub balance_cap: usize,
}

impl Partition {
    pub fn cluster_of(&self, v: &AccountId) -> Option<usize> {
        self.assignment.get(v).copied()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for c in self.assignment.values() {
            sizes[*c] += 1;
        }
        sizes
    }

    pub fn is_feasible(&self) -> bool {
        self.cluster_sizes().iter().all(|&s| s <= self.balance_cap)
    }

    /// Assignment vector in graph vertex order.
    pub fn vector(&self, graph: &WeightedGraph) -> Option<Vec<usize>> {
        graph.vertices().map(|v| self.cluster_of(v)).collect()
    }

    pub fn to_shard_map(&self) -> HashMap<AccountId, ShardId> {
        self.assignment
            .iter()
            .map(|(a, c)| (*a, ShardId(*c as u32)))
            .collect()
    }

    fn from_vector(graph: &WeightedGraph, parts: &[usize], k: usize, balance_cap: usize) -> Self {
        Partition {
            assignment: graph.vertices().copied().zip(parts.iter().copied()).collect(),
            k,
            balance_cap,
        }
    }
}

/// Sum of the weights of edges whose endpoints lie in different clusters.
pub fn cut_weight(graph: &WeightedGraph, partition: &Partition) -> Result<u64> {
    let parts = graph
        .vertices()
        .map(|v| partition.cluster_of(v).ok_or_else(|| Error::UncoveredVertex(v.to_hex())))
        .collect::<Result<Vec<_>>>()?;
    Ok(cut_of(graph, &parts))
}

fn cut_of(graph: &WeightedGraph, parts: &[usize]) -> u64 {
    graph
        .edges()
        .filter(|(u, v, _)| parts[*u] != parts[*v])
        .map(|(_, _, w)| w)
        .sum()
}

fn check_feasible(n: usize, k: usize, cap: usize) -> Result<()> {
    if k == 0 || cap.saturating_mul(k) < n {
        return Err(Error::Infeasible {
            vertices: n,
            clusters: k,
            cap,
        });
    }
    Ok(())
}

/// Vertex cap giving every cluster `imbalance` times its fair share.
pub fn balance_cap(vertices: usize, k: usize, imbalance: f64) -> usize {
    if k == 0 {
        return 0;
    }
    let fair = vertices.div_ceil(k);
    ((vertices as f64 / k as f64 * imbalance).ceil() as usize).max(fair)
}

/// Exhaustive minimum-cut partition. Ties go to the lexicographically
/// smallest assignment vector (in vertex order).
pub fn partition_bruteforce(graph: &WeightedGraph, k: usize, balance_cap: usize) -> Result<Partition> {
    let n = graph.vertex_count();
    if n > BRUTEFORCE_MAX_VERTICES {
        return Err(Error::TooLarge(n));
    }
    check_feasible(n, k, balance_cap)?;
    let adj: Vec<Vec<(usize, u64)>> = (0..n)
        .map(|u| graph.adj[u].iter().filter(|(v, _)| **v < u).map(|(v, w)| (*v, *w)).collect())
        .collect();

    struct Search<'a> {
        adj: &'a [Vec<(usize, u64)>],
        k: usize,
        cap: usize,
        parts: Vec<usize>,
        sizes: Vec<usize>,
        best: Option<(u64, Vec<usize>)>,
    }

    impl Search<'_> {
        // Restricted growth strings: vertex i uses a label at most one above
        // the largest label so far. Every labeling has exactly one such
        // canonical form and it is the lexicographically smallest of its
        // relabelings, so scanning them in order yields the smallest optimum.
        fn go(&mut self, i: usize, used: usize, cut: u64) {
            if let Some((best, _)) = &self.best {
                if cut >= *best {
                    return;
                }
            }
            if i == self.parts.len() {
                self.best = Some((cut, self.parts.clone()));
                return;
            }
            let max_label = (used + 1).min(self.k);
            for c in 0..max_label {
                if self.sizes[c] == self.cap {
                    continue;
                }
                let added: u64 = self.adj[i]
                    .iter()
                    .filter(|(v, _)| self.parts[*v] != c)
                    .map(|(_, w)| w)
                    .sum();
                self.parts[i] = c;
                self.sizes[c] += 1;
                self.go(i + 1, used.max(c + 1), cut + added);
                self.sizes[c] -= 1;
            }
            self.parts[i] = usize::MAX;
        }
    }

    let mut search = Search {
        adj: &adj,
        k,
        cap: balance_cap,
        parts: vec![usize::MAX; n],
        sizes: vec![0; k],
        best: None,
    };
    search.go(0, 0, 0);
    let parts = search.best.map(|(_, p)| p).unwrap_or_default();
    Ok(Partition::from_vector(graph, &parts, k, balance_cap))
}

/// Multilevel greedy partition. Deterministic for a given graph, `k`, cap
/// and seed.
pub fn partition_greedy(graph: &WeightedGraph, k: usize, balance_cap: usize, seed: u64) -> Result<Partition> {
    let n = graph.vertex_count();
    check_feasible(n, k, balance_cap)?;
    if n == 0 {
        return Ok(Partition::from_vector(graph, &[], k, balance_cap));
    }
    if k == 1 {
        return Ok(Partition::from_vector(graph, &vec![0; n], k, balance_cap));
    }
    let finest = graph.level();
    let mut levels = vec![finest];
    let mut maps: Vec<Vec<usize>> = Vec::new();
    let target = (20 * k).max(64);
    let max_vw = (balance_cap as u64 / 4).max(1);
    let mut rng = rng_for(seed, "partition/coarsen");
    while levels.last().unwrap().len() > target {
        let (coarse, map) = levels.last().unwrap().coarsen(max_vw, &mut rng);
        if coarse.len() as f64 > 0.95 * levels.last().unwrap().len() as f64 {
            break;
        }
        levels.push(coarse);
        maps.push(map);
    }

    let coarsest = levels.last().unwrap();
    let mut parts = initial_partition(coarsest, k, balance_cap as u64, seed);
    if parts.is_none() {
        // coarse vertices could not be packed; start over at the finest level
        levels.truncate(1);
        maps.clear();
        parts = initial_partition(&levels[0], k, balance_cap as u64, seed);
    }
    let mut parts = parts.expect("unit-weight vertices always pack under a feasible cap");
    refine(levels.last().unwrap(), &mut parts, k, balance_cap as u64);
    for depth in (0..maps.len()).rev() {
        let map = &maps[depth];
        parts = map.iter().map(|&c| parts[c]).collect();
        refine(&levels[depth], &mut parts, k, balance_cap as u64);
    }
    if n <= 200 {
        swap_refine(&levels[0], &mut parts, k);
    }
    Ok(Partition::from_vector(graph, &parts, k, balance_cap))
}

/// Improves an existing partition in place (online mode: call after
/// weight increments). Vertices missing from the partition are first put in
/// the smallest cluster with room.
pub fn refine_partition(graph: &WeightedGraph, partition: &mut Partition) -> Result<()> {
    let n = graph.vertex_count();
    check_feasible(n, partition.k, partition.balance_cap)?;
    let mut sizes = vec![0usize; partition.k];
    let mut parts: Vec<Option<usize>> = graph.vertices().map(|v| partition.cluster_of(v)).collect();
    for p in parts.iter().flatten() {
        sizes[*p] += 1;
    }
    for p in parts.iter_mut().filter(|p| p.is_none()) {
        let c = (0..partition.k).min_by_key(|&c| (sizes[c], c)).unwrap();
        sizes[c] += 1;
        *p = Some(c);
    }
    let mut parts: Vec<usize> = parts.into_iter().map(|p| p.unwrap()).collect();
    refine(&graph.level(), &mut parts, partition.k, partition.balance_cap as u64);
    *partition = Partition::from_vector(graph, &parts, partition.k, partition.balance_cap);
    Ok(())
}

/// Builds the transaction graph of a whole workload and partitions it into
/// `k` shards with a 5% vertex imbalance allowance.
pub fn partition_workload(txs: &[Transaction], k: usize, seed: u64) -> Result<HashMap<AccountId, ShardId>> {
    let graph = WeightedGraph::from_transactions(txs);
    let cap = balance_cap(graph.vertex_count(), k, 1.05);
    Ok(partition_greedy(&graph, k, cap, seed)?.to_shard_map())
}

struct Level {
    vw: Vec<u64>,
    adj: Vec<Vec<(usize, u64)>>,
}

impl Level {
    fn len(&self) -> usize {
        self.vw.len()
    }

    /// Heavy-edge matching in a seeded random visiting order.
    fn coarsen(&self, max_vw: u64, rng: &mut rand_chacha::ChaCha8Rng) -> (Level, Vec<usize>) {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut mate = vec![usize::MAX; n];
        for &u in &order {
            if mate[u] != usize::MAX {
                continue;
            }
            let best = self.adj[u]
                .iter()
                .filter(|(v, _)| mate[*v] == usize::MAX && self.vw[u] + self.vw[*v] <= max_vw)
                .max_by_key(|(v, w)| (*w, std::cmp::Reverse(*v)));
            match best {
                Some((v, _)) => {
                    mate[u] = *v;
                    mate[*v] = u;
                }
                None => mate[u] = u,
            }
        }
        let mut map = vec![usize::MAX; n];
        let mut next = 0;
        for u in 0..n {
            if map[u] == usize::MAX {
                map[u] = next;
                map[mate[u]] = next;
                next += 1;
            }
        }
        let mut vw = vec![0; next];
        let mut acc: Vec<BTreeMap<usize, u64>> = vec![BTreeMap::new(); next];
        for u in 0..n {
            let cu = map[u];
            vw[cu] += self.vw[u];
            for (v, w) in &self.adj[u] {
                let cv = map[*v];
                if cu != cv {
                    *acc[cu].entry(cv).or_insert(0) += w;
                }
            }
        }
        let adj = acc.into_iter().map(|m| m.into_iter().collect()).collect();
        (Level { vw, adj }, map)
    }
}

fn level_cut(level: &Level, parts: &[usize]) -> u64 {
    let mut cut = 0;
    for (u, nb) in level.adj.iter().enumerate() {
        for (v, w) in nb {
            if *v > u && parts[u] != parts[*v] {
                cut += w;
            }
        }
    }
    cut
}

/// Best of several greedy graph-growing runs. `None` when the vertex weights
/// cannot be packed under the cap.
fn initial_partition(level: &Level, k: usize, cap: u64, seed: u64) -> Option<Vec<usize>> {
    const TRIALS: usize = 6;
    let mut rng = rng_for(seed, "partition/initial");
    let mut best: Option<(u64, Vec<usize>)> = None;
    for trial in 0..TRIALS {
        let mut starts: Vec<usize> = (0..level.len()).collect();
        if trial == 0 {
            // heaviest vertex first
            starts.sort_by_key(|&v| (std::cmp::Reverse(level.vw[v]), v));
        } else {
            starts.shuffle(&mut rng);
        }
        if let Some(mut parts) = grow(level, k, cap, &starts) {
            refine(level, &mut parts, k, cap);
            let cut = level_cut(level, &parts);
            if best.as_ref().is_none_or(|(b, _)| cut < *b) {
                best = Some((cut, parts));
            }
        }
    }
    best.map(|(_, p)| p)
}

fn grow(level: &Level, k: usize, cap: u64, starts: &[usize]) -> Option<Vec<usize>> {
    let n = level.len();
    let total: u64 = level.vw.iter().sum();
    let mut parts = vec![usize::MAX; n];
    let mut weights = vec![0u64; k];
    let mut assigned_weight = 0u64;
    let mut conn: Vec<u64> = vec![0; n];
    #[allow(clippy::needless_range_loop)]
    for c in 0..k.saturating_sub(1) {
        let remaining_clusters = (k - c) as u64;
        let target = (total - assigned_weight).div_ceil(remaining_clusters).min(cap);
        let Some(&seed_v) = starts.iter().find(|&&v| parts[v] == usize::MAX) else {
            break;
        };
        conn.iter_mut().for_each(|x| *x = 0);
        let mut frontier: Vec<usize> = Vec::new();
        let mut next = Some(seed_v);
        while let Some(v) = next {
            parts[v] = c;
            weights[c] += level.vw[v];
            assigned_weight += level.vw[v];
            for (u, w) in &level.adj[v] {
                if parts[*u] == usize::MAX {
                    if conn[*u] == 0 {
                        frontier.push(*u);
                    }
                    conn[*u] += w;
                }
            }
            if weights[c] >= target {
                break;
            }
            frontier.retain(|&u| parts[u] == usize::MAX);
            let room = target - weights[c];
            next = frontier
                .iter()
                .copied()
                .filter(|&u| level.vw[u] <= room)
                .max_by_key(|&u| (conn[u], std::cmp::Reverse(u)))
                .or_else(|| starts.iter().copied().find(|&u| parts[u] == usize::MAX && level.vw[u] <= room));
        }
    }
    // remaining vertices: heaviest first into the lightest cluster with room
    let mut rest: Vec<usize> = (0..n).filter(|&v| parts[v] == usize::MAX).collect();
    rest.sort_by_key(|&v| (std::cmp::Reverse(level.vw[v]), v));
    for v in rest {
        let c = (0..k)
            .filter(|&c| weights[c] + level.vw[v] <= cap)
            .min_by_key(|&c| (weights[c], c))?;
        parts[v] = c;
        weights[c] += level.vw[v];
    }
    Some(parts)
}

/// Greedy boundary refinement: moves single vertices to the neighbouring
/// cluster with the largest positive cut reduction that keeps the target
/// under the cap. Zero-gain moves are taken only when they even out the
/// clusters' internal edge weight.
fn refine(level: &Level, parts: &mut [usize], k: usize, cap: u64) {
    const MAX_PASSES: usize = 16;
    let n = level.len();
    let mut weights = vec![0u64; k];
    let mut internal = vec![0u64; k];
    for u in 0..n {
        weights[parts[u]] += level.vw[u];
        for (v, w) in &level.adj[u] {
            if *v > u && parts[u] == parts[*v] {
                internal[parts[u]] += w;
            }
        }
    }
    let mut conn = vec![0u64; k];
    let mut touched: Vec<usize> = Vec::with_capacity(k);
    for _ in 0..MAX_PASSES {
        let mut moved = false;
        for u in 0..n {
            let from = parts[u];
            for (v, w) in &level.adj[u] {
                let c = parts[*v];
                if conn[c] == 0 {
                    touched.push(c);
                }
                conn[c] += w;
            }
            let own = conn[from];
            let mut best: Option<(usize, u64)> = None;
            for &c in &touched {
                if c == from || weights[c] + level.vw[u] > cap {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((b, bc)) => conn[c] > bc || (conn[c] == bc && internal[c] < internal[b]),
                };
                if better {
                    best = Some((c, conn[c]));
                }
            }
            if let Some((to, to_conn)) = best {
                let take = if to_conn > own {
                    true
                } else if to_conn == own {
                    // strict decrease of the squared internal-weight spread
                    let (a, b) = (internal[from] as i128, internal[to] as i128);
                    let (a2, b2) = (a - own as i128, b + to_conn as i128);
                    a2 * a2 + b2 * b2 < a * a + b * b
                } else {
                    false
                };
                if take {
                    parts[u] = to;
                    weights[from] -= level.vw[u];
                    weights[to] += level.vw[u];
                    internal[from] -= own;
                    internal[to] += to_conn;
                    moved = true;
                }
            }
            for &c in &touched {
                conn[c] = 0;
            }
            touched.clear();
        }
        if !moved {
            break;
        }
    }
}

/// Pairwise exchange pass for small unit-weight graphs: swaps two vertices
/// of different clusters whenever that lowers the cut. Sizes are unchanged,
/// so the cap still holds.
fn swap_refine(level: &Level, parts: &mut [usize], k: usize) {
    let n = level.len();
    let weight = |u: usize, v: usize| -> u64 {
        level.adj[u]
            .binary_search_by_key(&v, |(x, _)| *x)
            .map(|i| level.adj[u][i].1)
            .unwrap_or(0)
    };
    let conn_to = |parts: &[usize], u: usize, c: usize| -> u64 {
        level.adj[u].iter().filter(|(v, _)| parts[*v] == c).map(|(_, w)| w).sum()
    };
    for _ in 0..n {
        let mut best: Option<(i64, usize, usize)> = None;
        for u in 0..n {
            for v in (u + 1)..n {
                let (a, b) = (parts[u], parts[v]);
                if a == b || a >= k || b >= k {
                    continue;
                }
                let gain = conn_to(parts, u, b) as i64 - conn_to(parts, u, a) as i64
                    + conn_to(parts, v, a) as i64
                    - conn_to(parts, v, b) as i64
                    - 2 * weight(u, v) as i64;
                if gain > 0 && best.is_none_or(|(g, _, _)| gain > g) {
                    best = Some((gain, u, v));
                }
            }
        }
        match best {
            Some((_, u, v)) => parts.swap(u, v),
            None => break,
        }
    }
}
