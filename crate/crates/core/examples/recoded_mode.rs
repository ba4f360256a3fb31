//! Renumbers the 12-vertex walkthrough graph, then runs PageRank on the
//! recoded store and checks it against a normal-mode run.

use std::sync::Arc;

use semistream::algorithms::PageRank;
use semistream::graph::recode_example;
use semistream::model::{JobConfig, Mode};
use semistream::recode::{read_mapping, recode_graph};
use semistream::worker::{run_job, GraphSource};

fn main() -> semistream::Result<()> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("example.txt");
    recode_example().write_text(&input)?;

    let cfg = JobConfig::new(3, dir.path().join("scratch"));
    let report = recode_graph(&cfg, &input, true, false)?;
    println!(
        "recoded {} vertices / {} arcs with {} messages in {} supersteps",
        report.vertices, report.arcs, report.messages, report.supersteps
    );
    for (old, new) in read_mapping(&cfg)? {
        println!("  {old:>4} -> {new:>2}  (worker {}, position {})", new % 3, new / 3);
    }

    let program = Arc::new(PageRank { steps: 10 });
    let recoded =
        run_job(program.clone(), &cfg.clone().with_mode(Mode::Recoded), &GraphSource::Recoded { weighted: false })?;
    let normal = run_job(program, &cfg, &GraphSource::Text(input))?;
    let worst = normal.values.iter().zip(&recoded.values).map(|(a, b)| (a.1 - b.1).abs()).fold(0.0, f64::max);
    let merges: u64 = recoded.workers.iter().flat_map(|w| &w.steps).map(|s| s.merge_calls).sum();
    println!("largest difference from normal mode {worst:e}; recoded-mode merges: {merges}");
    Ok(())
}
