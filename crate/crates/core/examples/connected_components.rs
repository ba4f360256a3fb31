//! Hash-Min labels every vertex of an undirected graph with the smallest id
//! in its component.

use std::collections::BTreeMap;
use std::sync::Arc;

use semistream::algorithms::HashMin;
use semistream::graph::{random_graph, IdSpace};
use semistream::model::JobConfig;
use semistream::worker::{run_job, GraphSource};

fn main() -> semistream::Result<()> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("graph.txt");
    // sparse enough to leave several components
    random_graph(5_000, 2_400, false, false, IdSpace::Sparse, 7).write_text(&input)?;

    let cfg = JobConfig::new(3, dir.path().join("scratch"));
    let out = run_job(Arc::new(HashMin), &cfg, &GraphSource::Text(input))?;

    let mut sizes: BTreeMap<u64, usize> = BTreeMap::new();
    for (_, label) in &out.values {
        *sizes.entry(*label).or_default() += 1;
    }
    let mut by_size: Vec<_> = sizes.into_iter().collect();
    by_size.sort_by_key(|&(_, n)| std::cmp::Reverse(n));
    println!("{} components after {} supersteps", by_size.len(), out.supersteps());
    for (label, n) in by_size.iter().take(3) {
        println!("  label {label}: {n} vertices");
    }
    Ok(())
}
