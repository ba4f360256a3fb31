//! Textbook algorithms used to check the reference executor itself.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use crate::graph::Graph;

/// Minimum id of each vertex's connected component (edges read as
/// undirected).
pub fn union_find_components(g: &Graph) -> BTreeMap<u64, u64> {
    let ids: Vec<u64> = g.adj.keys().copied().collect();
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let mut parent: Vec<usize> = (0..ids.len()).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for (u, list) in &g.adj {
        for (v, _) in list {
            let (a, b) = (find(&mut parent, index[u]), find(&mut parent, index[v]));
            // ids are sorted, so the smaller index is the smaller id
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    ids.iter().enumerate().map(|(i, &id)| (id, ids[find(&mut parent, i)])).collect()
}

/// Hop distance from `source` (`f64::INFINITY` when unreachable).
pub fn bfs_levels(g: &Graph, source: u64) -> BTreeMap<u64, f64> {
    let mut dist: BTreeMap<u64, f64> = g.adj.keys().map(|&k| (k, f64::INFINITY)).collect();
    let mut queue = VecDeque::new();
    if let Some(d) = dist.get_mut(&source) {
        *d = 0.0;
        queue.push_back(source);
    }
    while let Some(u) = queue.pop_front() {
        let du = dist[&u];
        for &(v, _) in &g.adj[&u] {
            if dist[&v].is_infinite() {
                dist.insert(v, du + 1.0);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Shortest path lengths from `source`; missing weights count as 1.
pub fn dijkstra(g: &Graph, source: u64) -> BTreeMap<u64, f64> {
    let mut dist: BTreeMap<u64, f64> = g.adj.keys().map(|&k| (k, f64::INFINITY)).collect();
    let mut heap = BinaryHeap::new();
    if let Some(d) = dist.get_mut(&source) {
        *d = 0.0;
        heap.push(Reverse((0u64, source)));
    }
    // weights are small integers in the tests, so distances are exact
    while let Some(Reverse((bits, u))) = heap.pop() {
        let du = f64::from_bits(bits);
        if du > dist[&u] {
            continue;
        }
        for &(v, w) in &g.adj[&u] {
            let nd = du + w.unwrap_or(1.0);
            if nd < dist[&v] {
                dist.insert(v, nd);
                heap.push(Reverse((nd.to_bits(), v)));
            }
        }
    }
    dist
}

/// `steps` rounds of `r <- 0.15/|V| + 0.85 * M r` starting from `1/|V|`,
/// with no redistribution of dangling rank.
pub fn power_iteration(g: &Graph, steps: u64) -> BTreeMap<u64, f64> {
    let ids: Vec<u64> = g.adj.keys().copied().collect();
    let index: BTreeMap<u64, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    let n = ids.len();
    let nv = n as f64;
    let mut r = vec![1.0 / nv; n];
    for _ in 1..steps {
        let mut next = vec![0.0; n];
        for (i, id) in ids.iter().enumerate() {
            let list = &g.adj[id];
            if list.is_empty() {
                continue;
            }
            let share = r[i] / list.len() as f64;
            for (v, _) in list {
                next[index[v]] += share;
            }
        }
        r = next.into_iter().map(|s| 0.15 / nv + 0.85 * s).collect();
    }
    ids.into_iter().zip(r).collect()
}
