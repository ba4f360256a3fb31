use std::sync::Arc;
use std::thread;

use crate::comm::{SimNetwork, SocketTransport, Transport};
use crate::error::{Error, Result};
use crate::model::{JobConfig, TransportKind, VertexId, VertexProgram};

use super::{first_real_error, run_worker, GraphSource, WorkerStats};

/// Result of a whole job run in one process.
#[derive(Debug)]
pub struct JobOutput<V> {
    /// `(original id, value)` sorted by id.
    pub values: Vec<(VertexId, V)>,
    pub workers: Vec<WorkerStats>,
}

impl<V> JobOutput<V> {
    pub fn supersteps(&self) -> usize {
        self.workers.iter().map(|w| w.steps.len()).max().unwrap_or(0)
    }
}

/// Runs every worker of a job as a thread of this process, connected by the
/// configured transport.
pub fn run_job<P: VertexProgram>(
    program: Arc<P>,
    cfg: &JobConfig,
    source: &GraphSource,
) -> Result<JobOutput<P::Value>> {
    let n = cfg.num_workers;
    if n == 0 {
        return Err(Error::Config("need at least one worker".into()));
    }
    let transports: Vec<Arc<dyn Transport>> = match cfg.transport {
        TransportKind::Sim => {
            SimNetwork::create(n, cfg.sim.clone(), cfg.in_flight).into_iter().map(|e| e as Arc<dyn Transport>).collect()
        }
        TransportKind::Sockets => {
            SocketTransport::local_mesh(n, cfg.in_flight)?.into_iter().map(|e| e as Arc<dyn Transport>).collect()
        }
    };
    let handles: Vec<_> = transports
        .into_iter()
        .enumerate()
        .map(|(w, t)| {
            let (program, cfg, source) = (program.clone(), cfg.clone(), source.clone());
            thread::Builder::new()
                .name(format!("worker-{w}"))
                .spawn(move || run_worker(&*program, &cfg, w, t, &source))
                .expect("spawn worker thread")
        })
        .collect();
    let mut outputs = Vec::with_capacity(n);
    let mut errors = Vec::new();
    for h in handles {
        match h.join() {
            Ok(Ok(o)) => outputs.push(o),
            Ok(Err(e)) => errors.push(e),
            Err(_) => errors.push(Error::Aborted("worker thread panicked".into())),
        }
    }
    if let Some(e) = first_real_error(errors) {
        return Err(e);
    }
    let mut values: Vec<_> = outputs.iter_mut().flat_map(|o| std::mem::take(&mut o.values)).collect();
    values.sort_by_key(|v| v.0);
    Ok(JobOutput { values, workers: outputs.into_iter().map(|o| o.stats).collect() })
}
