//! Ten PageRank supersteps on a random directed graph, four workers.

use std::sync::Arc;

use semistream::algorithms::PageRank;
use semistream::graph::{random_graph, IdSpace};
use semistream::model::JobConfig;
use semistream::worker::{run_job, GraphSource};

fn main() -> semistream::Result<()> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("graph.txt");
    random_graph(10_000, 80_000, true, false, IdSpace::Sparse, 1).write_text(&input)?;

    let cfg = JobConfig::new(4, dir.path().join("scratch"));
    let out = run_job(Arc::new(PageRank { steps: 10 }), &cfg, &GraphSource::Text(input))?;

    let mut ranked = out.values.clone();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    println!("{} supersteps; top vertices:", out.supersteps());
    for (id, rank) in ranked.iter().take(5) {
        println!("  {id}\t{rank:.6}");
    }
    let total: f64 = out.values.iter().map(|(_, r)| r).sum();
    println!("rank mass {total:.6} (dangling vertices leak the rest)");
    Ok(())
}
