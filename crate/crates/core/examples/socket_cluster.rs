//! The same job over TCP sockets on localhost, one thread per worker.
//! `semistream run --transport sockets` runs workers as separate processes.

use std::sync::Arc;

use semistream::algorithms::HashMin;
use semistream::graph::{random_graph, IdSpace};
use semistream::model::{JobConfig, TransportKind};
use semistream::worker::{run_job, GraphSource};

fn main() -> semistream::Result<()> {
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("graph.txt");
    random_graph(3_000, 3_000, false, false, IdSpace::Sparse, 5).write_text(&input)?;

    let source = GraphSource::Text(input);
    let sim = run_job(Arc::new(HashMin), &JobConfig::new(4, dir.path().join("a")), &source)?;
    let tcp = run_job(
        Arc::new(HashMin),
        &JobConfig::new(4, dir.path().join("b")).with_transport(TransportKind::Sockets),
        &source,
    )?;
    assert_eq!(sim.values, tcp.values);
    let bytes: u64 = tcp.workers.iter().map(|w| w.transport.bytes_sent).sum();
    println!("{} supersteps, {bytes} bytes over sockets, same labels as the simulated network", tcp.supersteps());
    Ok(())
}
