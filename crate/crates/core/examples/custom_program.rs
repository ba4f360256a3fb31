//! A user-defined vertex program: degree centrality normalized by the
//! largest degree, found with a global max aggregator in superstep 1.

use std::sync::Arc;

use semistream::graph::{random_graph, IdSpace};
use semistream::model::{AdjacencyItem, Aggregator, Context, JobConfig, VertexProgram, VertexState};
use semistream::worker::{run_job, GraphSource};

struct NormalizedDegree;

impl VertexProgram for NormalizedDegree {
    type Value = f64;
    type Edge = ();
    type Message = ();
    type Aggregate = u64;

    fn name(&self) -> &str {
        "normalized-degree"
    }

    fn aggregator(&self) -> Option<Aggregator<u64>> {
        Some(Aggregator { identity: 0, merge: u64::max })
    }

    fn compute(
        &self,
        vertex: &mut VertexState<f64>,
        _adjacency: &[AdjacencyItem<()>],
        _messages: &[()],
        ctx: &mut Context<'_, (), u64>,
    ) -> semistream::Result<()> {
        if ctx.superstep() == 1 {
            ctx.aggregate(vertex.degree);
        } else {
            vertex.value = vertex.degree as f64 / ctx.aggregated().max(1) as f64;
            vertex.vote_to_halt();
        }
        Ok(())
    }
}

fn main() -> semistream::Result<()> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("graph.txt");
    random_graph(2_000, 15_000, true, false, IdSpace::Sparse, 11).write_text(&input)?;

    let cfg = JobConfig::new(2, dir.path().join("scratch"));
    let out = run_job(Arc::new(NormalizedDegree), &cfg, &GraphSource::Text(input))?;
    let hubs = out.values.iter().filter(|(_, v)| *v == 1.0).count();
    println!("{} supersteps, {hubs} vertex(es) with the maximum degree", out.supersteps());
    Ok(())
}
