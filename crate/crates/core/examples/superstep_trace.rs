//! Per-superstep counters of one worker over a bandwidth-limited simulated
//! network: compute and send intervals, and how much of the edge stream
//! each step read.

use std::sync::Arc;

use semistream::algorithms::PageRank;
use semistream::graph::{random_graph, IdSpace};
use semistream::model::{JobConfig, SimOptions};
use semistream::worker::{run_job, GraphSource};

fn main() -> semistream::Result<()> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("graph.txt");
    random_graph(20_000, 200_000, true, false, IdSpace::Sparse, 2).write_text(&input)?;

    let cfg = JobConfig::new(4, dir.path().join("scratch"))
        .with_buffers(4096, 64 * 1024, 16)
        .with_sim(SimOptions { nanos_per_byte: 20, ..Default::default() });
    let out = run_job(Arc::new(PageRank { steps: 6 }), &cfg, &GraphSource::Text(input))?;

    let w = &out.workers[0];
    let ms = |ns: u64| ns as f64 / 1e6;
    println!("step  compute(ms)          send(ms)             S^E read/total");
    for s in &w.steps {
        println!(
            "{:>4}  {:>7.2} .. {:>7.2}   {:>7.2} .. {:>7.2}   {}/{}",
            s.step,
            ms(s.compute_start_ns),
            ms(s.compute_end_ns),
            ms(s.send_start_ns),
            ms(s.send_end_ns),
            s.se_bytes_read,
            s.se_bytes
        );
    }
    let overlaps = w.steps.windows(2).filter(|p| p[1].compute_overlaps_send_of(&p[0])).count();
    println!("{overlaps} step(s) began computing while the previous step was still sending");
    Ok(())
}
