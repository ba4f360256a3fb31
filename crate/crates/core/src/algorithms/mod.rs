//! Built-in vertex programs.
//!
//! All of them identify vertices by their input ids (`Context::original_id`),
//! so results are the same whether or not the graph was recoded.

use crate::error::{Error, Result};
use crate::model::{mix64, AdjacencyItem, Combiner, Context, VertexId, VertexProgram, VertexState};

/// PageRank with damping 0.85 for a fixed number of supersteps.
///
/// Rank of dangling vertices is not redistributed, so the total drops below
/// one on graphs that have them.
#[derive(Clone, Copy, Debug)]
pub struct PageRank {
    pub steps: u64,
}

impl VertexProgram for PageRank {
    type Value = f64;
    type Edge = ();
    type Message = f64;
    type Aggregate = ();

    fn name(&self) -> &str {
        "pagerank"
    }

    fn compute(
        &self,
        v: &mut VertexState<f64>,
        adj: &[AdjacencyItem<()>],
        msgs: &[f64],
        ctx: &mut Context<'_, f64, ()>,
    ) -> Result<()> {
        let nv = ctx.num_vertices() as f64;
        v.value = if ctx.superstep() == 1 { 1.0 / nv } else { 0.15 / nv + 0.85 * msgs.iter().sum::<f64>() };
        if ctx.superstep() < self.steps {
            if !adj.is_empty() {
                let share = v.value / adj.len() as f64;
                for a in adj {
                    ctx.send(a.neighbor, share);
                }
            }
        } else {
            v.vote_to_halt();
        }
        Ok(())
    }

    fn combiner(&self) -> Option<Combiner<f64>> {
        Some(Combiner::sum_f64())
    }
}

/// Connected components by minimum-label propagation. Expects every edge
/// to be listed in both adjacency lists.
#[derive(Clone, Copy, Debug, Default)]
pub struct HashMin;

impl VertexProgram for HashMin {
    type Value = u64;
    type Edge = ();
    type Message = u64;
    type Aggregate = ();

    fn name(&self) -> &str {
        "hashmin"
    }

    fn compute(
        &self,
        v: &mut VertexState<u64>,
        adj: &[AdjacencyItem<()>],
        msgs: &[u64],
        ctx: &mut Context<'_, u64, ()>,
    ) -> Result<()> {
        let changed = if ctx.superstep() == 1 {
            v.value = ctx.original_id().0;
            true
        } else {
            match msgs.iter().min() {
                Some(&m) if m < v.value => {
                    v.value = m;
                    true
                }
                _ => false,
            }
        };
        if changed {
            for a in adj {
                ctx.send(a.neighbor, v.value);
            }
        }
        v.vote_to_halt();
        Ok(())
    }

    fn combiner(&self) -> Option<Combiner<u64>> {
        // u64::MAX doubles as the empty-slot marker; no vertex may use it as an id
        Some(Combiner::min_u64())
    }
}

/// Single-source shortest paths over non-negative weights. Unweighted
/// inputs get weight 1 per edge, which makes it a breadth-first search.
#[derive(Clone, Copy, Debug)]
pub struct Sssp {
    /// Source, as an input id.
    pub source: VertexId,
}

impl VertexProgram for Sssp {
    type Value = f64;
    type Edge = f64;
    type Message = f64;
    type Aggregate = ();

    fn name(&self) -> &str {
        "sssp"
    }

    fn compute(
        &self,
        v: &mut VertexState<f64>,
        adj: &[AdjacencyItem<f64>],
        msgs: &[f64],
        ctx: &mut Context<'_, f64, ()>,
    ) -> Result<()> {
        let improved = if ctx.superstep() == 1 {
            v.value = if ctx.original_id() == self.source { 0.0 } else { f64::INFINITY };
            v.value == 0.0
        } else {
            let m = msgs.iter().copied().fold(f64::INFINITY, f64::min);
            if m < v.value {
                v.value = m;
                true
            } else {
                false
            }
        };
        if improved {
            for a in adj {
                ctx.send(a.neighbor, v.value + a.weight);
            }
        }
        v.vote_to_halt();
        Ok(())
    }

    fn combiner(&self) -> Option<Combiner<f64>> {
        Some(Combiner::min_f64())
    }

    fn validate_edge(&self, w: &f64) -> Result<()> {
        if *w < 0.0 {
            return Err(Error::Config(format!("negative edge weight {w}; sssp needs non-negative weights")));
        }
        Ok(())
    }
}

/// Sends every vertex's input id to its neighbors for `steps` supersteps.
/// The value is `(ids received, digest)`, where the digest hashes each
/// step's received ids in sorted order. No combiner.
#[derive(Clone, Copy, Debug)]
pub struct Echo {
    pub steps: u64,
}

/// Digest chaining used by [`Echo`].
pub fn echo_digest(mut digest: u64, sorted_ids: &[u64]) -> u64 {
    for &id in sorted_ids {
        digest = mix64(digest ^ mix64(id.wrapping_add(1)));
    }
    digest
}

impl VertexProgram for Echo {
    type Value = (u64, u64);
    type Edge = ();
    type Message = u64;
    type Aggregate = ();

    fn name(&self) -> &str {
        "echo"
    }

    fn compute(
        &self,
        v: &mut VertexState<(u64, u64)>,
        adj: &[AdjacencyItem<()>],
        msgs: &[u64],
        ctx: &mut Context<'_, u64, ()>,
    ) -> Result<()> {
        if !msgs.is_empty() {
            let mut ids = msgs.to_vec();
            ids.sort_unstable();
            v.value = (v.value.0 + ids.len() as u64, echo_digest(v.value.1, &ids));
        }
        let step = ctx.superstep();
        if step <= self.steps {
            let me = ctx.original_id().0;
            for a in adj {
                ctx.send(a.neighbor, me);
            }
        }
        if step >= self.steps {
            v.vote_to_halt();
        }
        Ok(())
    }

    fn render_value(&self, v: &(u64, u64)) -> String {
        format!("{} {:016x}", v.0, v.1)
    }
}

/// Something to do with a vertex program whose type is only known at run time.
pub trait ProgramJob {
    type Output;
    fn run<P: VertexProgram>(self, program: P) -> Self::Output;
}

/// Names accepted by [`Algorithm::parse`].
pub const ALGORITHMS: [&str; 4] = ["pagerank", "hashmin", "sssp", "echo"];

/// A built-in program with its parameters, as chosen on the command line.
#[derive(Clone, Copy, Debug)]
pub enum Algorithm {
    PageRank(PageRank),
    HashMin(HashMin),
    Sssp(Sssp),
    Echo(Echo),
}

impl Algorithm {
    pub fn parse(name: &str, steps: u64, source: u64) -> Result<Self> {
        Ok(match name {
            "pagerank" => Algorithm::PageRank(PageRank { steps }),
            "hashmin" => Algorithm::HashMin(HashMin),
            "sssp" => Algorithm::Sssp(Sssp { source: VertexId(source) }),
            "echo" => Algorithm::Echo(Echo { steps }),
            other => {
                return Err(Error::Config(format!(
                    "unknown algorithm `{other}` (expected one of {})",
                    ALGORITHMS.join(", ")
                )))
            }
        })
    }

    /// Calls `job` with the concrete program.
    pub fn dispatch<J: ProgramJob>(self, job: J) -> J::Output {
        match self {
            Algorithm::PageRank(p) => job.run(p),
            Algorithm::HashMin(p) => job.run(p),
            Algorithm::Sssp(p) => job.run(p),
            Algorithm::Echo(p) => job.run(p),
        }
    }

    /// Whether the algorithm is only meaningful on undirected graphs.
    pub fn needs_undirected(&self) -> bool {
        matches!(self, Algorithm::HashMin(_))
    }

    /// Whether results are floating point and may differ in the last bits
    /// between runs that fold messages in different orders.
    pub fn default_tolerance(&self) -> f64 {
        match self {
            Algorithm::PageRank(_) => 1e-12,
            _ => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::PageRank(_) => "pagerank",
            Algorithm::HashMin(_) => "hashmin",
            Algorithm::Sssp(_) => "sssp",
            Algorithm::Echo(_) => "echo",
        }
    }
}
