//! In-memory graphs for generating inputs, validating them and feeding the
//! reference executor. The engine itself never holds a whole graph.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::VertexId;
use crate::worker::parse_line;

/// Adjacency list entry: neighbor id and optional weight.
pub type Neighbor = (u64, Option<f64>);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Graph {
    pub directed: bool,
    pub adj: BTreeMap<u64, Vec<Neighbor>>,
}

impl Graph {
    pub fn new(directed: bool) -> Self {
        Graph { directed, adj: BTreeMap::new() }
    }

    pub fn add_vertex(&mut self, id: u64) {
        self.adj.entry(id).or_default();
    }

    /// Adds `u -> v`, and `v -> u` too when undirected.
    pub fn add_edge(&mut self, u: u64, v: u64, weight: Option<f64>) {
        self.adj.entry(u).or_default().push((v, weight));
        if self.directed {
            self.add_vertex(v);
        } else {
            self.adj.entry(v).or_default().push((u, weight));
        }
    }

    pub fn num_vertices(&self) -> u64 {
        self.adj.len() as u64
    }

    /// Number of adjacency list items (each undirected edge counts twice).
    pub fn num_arcs(&self) -> u64 {
        self.adj.values().map(|l| l.len() as u64).sum()
    }

    pub fn is_weighted(&self) -> bool {
        self.adj.values().flatten().any(|n| n.1.is_some())
    }

    /// Every listed edge also appears reversed, with the same multiplicity.
    pub fn is_symmetric(&self) -> bool {
        let mut fwd: BTreeMap<(u64, u64), i64> = BTreeMap::new();
        for (&u, list) in &self.adj {
            for &(v, _) in list {
                *fwd.entry((u, v)).or_default() += 1;
                *fwd.entry((v, u)).or_default() -= 1;
            }
        }
        fwd.values().all(|&c| c == 0)
    }

    /// First neighbor id that is not a vertex, if any.
    pub fn dangling(&self) -> Option<VertexId> {
        self.adj.values().flatten().map(|n| n.0).find(|v| !self.adj.contains_key(v)).map(VertexId)
    }

    /// Renames every id through `f`, which must be injective.
    pub fn relabel(&self, f: impl Fn(u64) -> u64) -> Graph {
        let adj = self.adj.iter().map(|(&u, l)| (f(u), l.iter().map(|&(v, w)| (f(v), w)).collect())).collect();
        Graph { directed: self.directed, adj }
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path).map_err(Error::at(path))?);
        let weighted = self.is_weighted();
        let mut line = String::new();
        for (u, list) in &self.adj {
            use std::fmt::Write as _;
            line.clear();
            let _ = write!(line, "{u}\t{}", list.len());
            for &(v, wt) in list {
                let _ = write!(line, " {v}");
                if weighted {
                    let _ = write!(line, " {}", wt.unwrap_or(1.0));
                }
            }
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(Error::at(path))?;
        }
        w.flush().map_err(Error::at(path))
    }

    /// Reads and fully validates a text graph.
    pub fn read_text(path: &Path, directed: bool) -> Result<Graph> {
        let r = BufReader::new(File::open(path).map_err(Error::at(path))?);
        let mut g = Graph::new(directed);
        let mut weighted: Option<bool> = None;
        for (i, line) in r.lines().enumerate() {
            let line = line.map_err(Error::at(path))?;
            let lineno = i as u64 + 1;
            if line.trim().is_empty() {
                continue;
            }
            let p = parse_line(&line).map_err(|msg| Error::Parse { line: lineno, msg })?;
            if !p.neighbors.is_empty() {
                let w = p.neighbors[0].1.is_some();
                if *weighted.get_or_insert(w) != w {
                    return Err(Error::Parse { line: lineno, msg: "mixes weighted and unweighted lists".into() });
                }
            }
            if g.adj.insert(p.id, p.neighbors).is_some() {
                return Err(Error::DuplicateVertex(VertexId(p.id)));
            }
        }
        if let Some(v) = g.dangling() {
            return Err(Error::DanglingNeighbor(v));
        }
        Ok(g)
    }
}

/// How generated vertex ids are chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IdSpace {
    /// `0..n`.
    Dense,
    /// `n` distinct ids drawn from `0..2^40`.
    Sparse,
}

fn ids(n: u64, space: IdSpace, rng: &mut ChaCha8Rng) -> Vec<u64> {
    match space {
        IdSpace::Dense => (0..n).collect(),
        IdSpace::Sparse => {
            let mut set = BTreeSet::new();
            while (set.len() as u64) < n {
                set.insert(rng.gen_range(0..1u64 << 40));
            }
            let mut v: Vec<u64> = set.into_iter().collect();
            v.shuffle(rng);
            v
        }
    }
}

/// Random graph with `n` vertices and `m` edges drawn uniformly (no self
/// loops unless `n == 1`). Weights, if asked for, are integers in `1..=10`.
pub fn random_graph(n: u64, m: u64, directed: bool, weighted: bool, space: IdSpace, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids = ids(n, space, &mut rng);
    let mut g = Graph::new(directed);
    for &id in &ids {
        g.add_vertex(id);
    }
    if n < 2 {
        return g;
    }
    for _ in 0..m {
        let a = rng.gen_range(0..n) as usize;
        let mut b = rng.gen_range(0..n - 1) as usize;
        if b >= a {
            b += 1;
        }
        let w = weighted.then(|| rng.gen_range(1..=10) as f64);
        g.add_edge(ids[a], ids[b], w);
    }
    g
}

/// Undirected graph made of a dense random blob (ids `0..blob`) with a path
/// of `path` vertices hanging off vertex 0. A search started in the blob
/// finishes the blob in a few supersteps and then crawls the path one
/// vertex per superstep.
pub fn path_plus_blob(blob: u64, blob_edges: u64, path: u64, seed: u64) -> Graph {
    let mut g = random_graph(blob, blob_edges, false, false, IdSpace::Dense, seed);
    let mut prev = 0;
    for k in 0..path {
        let id = blob + k;
        g.add_edge(prev, id, None);
        prev = id;
    }
    g
}

/// The 12-vertex directed graph of the recoding walkthrough: three workers,
/// four vertices each, with old id 102 second in worker 2's array.
pub fn recode_example() -> Graph {
    let edges: [(u64, &[u64]); 12] = [
        (98, &[100, 102]),
        (100, &[101, 108]),
        (101, &[102]),
        (102, &[98, 103, 109]),
        (103, &[104]),
        (104, &[105, 110]),
        (105, &[100]),
        (108, &[109, 112]),
        (109, &[119]),
        (110, &[98, 112]),
        (112, &[102]),
        (119, &[110, 101]),
    ];
    let mut g = Graph::new(true);
    for (u, list) in edges {
        g.add_vertex(u);
        for &v in list {
            g.add_edge(u, v, None);
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{hash_partition, Mode};

    #[test]
    fn text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for weighted in [false, true] {
            let g = random_graph(50, 200, true, weighted, IdSpace::Sparse, 3);
            let p = dir.path().join("g.txt");
            g.write_text(&p).unwrap();
            assert_eq!(Graph::read_text(&p, true).unwrap(), g);
        }
    }

    #[test]
    fn undirected_generators_are_symmetric() {
        assert!(random_graph(100, 300, false, true, IdSpace::Dense, 1).is_symmetric());
        assert!(path_plus_blob(100, 300, 20, 1).is_symmetric());
        assert!(!recode_example().is_symmetric());
    }

    #[test]
    fn rejects_duplicates_and_dangling() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        std::fs::write(&p, "1\t1 2\n2\t0\n1\t0\n").unwrap();
        assert!(matches!(Graph::read_text(&p, true), Err(Error::DuplicateVertex(VertexId(1)))));
        std::fs::write(&p, "1\t1 3\n2\t0\n").unwrap();
        assert!(matches!(Graph::read_text(&p, true), Err(Error::DanglingNeighbor(VertexId(3)))));
        std::fs::write(&p, "1\t1 2\n2\n").unwrap();
        assert!(matches!(Graph::read_text(&p, true), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn recode_example_partitions_evenly() {
        let g = recode_example();
        let mut per = [Vec::new(), Vec::new(), Vec::new()];
        for &id in g.adj.keys() {
            per[hash_partition(VertexId(id), 3, Mode::Normal)].push(id);
        }
        assert!(per.iter().all(|p| p.len() == 4));
        assert_eq!(per[2][1], 102);
    }
}
