//! Runs a job and the in-memory reference executor side by side.

use std::sync::Arc;

use semistream::algorithms::Sssp;
use semistream::graph::{random_graph, IdSpace};
use semistream::model::{JobConfig, Mode, VertexId};
use semistream::oracle::oracle_run;
use semistream::recode::recode_graph;
use semistream::worker::{run_job, GraphSource};

fn main() -> semistream::Result<()> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("graph.txt");
    let g = random_graph(4_000, 30_000, true, true, IdSpace::Sparse, 9);
    g.write_text(&input)?;
    let source = VertexId(*g.adj.keys().next().unwrap());

    let want = oracle_run(&Sssp { source }, &g, 10_000)?;
    let cfg = JobConfig::new(4, dir.path().join("scratch"));
    recode_graph(&cfg, &input, true, true)?;
    for (mode, src) in
        [(Mode::Normal, GraphSource::Text(input.clone())), (Mode::Recoded, GraphSource::Recoded { weighted: true })]
    {
        let out = run_job(Arc::new(Sssp { source }), &cfg.clone().with_mode(mode), &src)?;
        let diff = out.values.iter().filter(|(id, d)| want.values[&id.0] != *d).count();
        println!(
            "{mode:?}: {} vertices, {diff} differ from the oracle ({} oracle steps)",
            out.values.len(),
            want.steps
        );
    }
    Ok(())
}
