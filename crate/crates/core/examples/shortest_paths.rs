//! Single-source shortest paths over weighted edges.

use std::sync::Arc;

use semistream::algorithms::Sssp;
use semistream::graph::{random_graph, IdSpace};
use semistream::model::{JobConfig, VertexId};
use semistream::worker::{run_job, GraphSource};

fn main() -> semistream::Result<()> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("graph.txt");
    let g = random_graph(20_000, 120_000, true, true, IdSpace::Dense, 3);
    g.write_text(&input)?;

    let cfg = JobConfig::new(4, dir.path().join("scratch"));
    let out = run_job(Arc::new(Sssp { source: VertexId(0) }), &cfg, &GraphSource::Text(input))?;

    let reached: Vec<f64> = out.values.iter().map(|(_, d)| *d).filter(|d| d.is_finite()).collect();
    let farthest = reached.iter().copied().fold(0.0, f64::max);
    println!(
        "reached {} of {} vertices in {} supersteps, farthest at distance {farthest}",
        reached.len(),
        out.values.len(),
        out.supersteps()
    );
    Ok(())
}
