use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::comm::TransportStats;

/// Counters of one superstep on one worker. Times are nanoseconds since the
/// worker started.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: u64,
    pub computed: u64,
    pub messages_sent: u64,
    pub se_bytes: u64,
    pub se_bytes_read: u64,
    pub se_refills: u64,
    pub si_bytes: u64,
    pub si_bytes_read: u64,
    pub oms_bytes_written: u64,
    /// Incoming DATA batches (one sorted run each in normal mode).
    pub batches_received: u64,
    pub merge_calls: u64,
    pub merge_passes: u64,
    pub end_tags: u64,
    pub data_batches_sent: u64,
    pub compute_start_ns: u64,
    pub compute_end_ns: u64,
    pub send_start_ns: u64,
    pub send_end_ns: u64,
}

impl StepStats {
    pub fn compute_ns(&self) -> u64 {
        self.compute_end_ns.saturating_sub(self.compute_start_ns)
    }

    /// Whether this step's compute interval intersects `other`'s send interval.
    pub fn compute_overlaps_send_of(&self, other: &StepStats) -> bool {
        self.compute_start_ns < other.send_end_ns && other.send_start_ns < self.compute_end_ns
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WorkerStats {
    pub worker: usize,
    pub vertices: u64,
    pub edges: u64,
    pub total_vertices: u64,
    pub total_edges: u64,
    /// Largest vertex count of any worker in the job.
    pub max_vertices: u64,
    pub load_ns: u64,
    pub run_ns: u64,
    /// End of the run, on the same clock as the step times.
    pub finish_ns: u64,
    pub steps: Vec<StepStats>,
    pub peak_memory: u64,
    /// Bytes of the vertex array and its parallel columns.
    pub state_bytes: u64,
    pub protocol_violations: u64,
    pub transport: TransportStats,
}

impl WorkerStats {
    /// Wall time of step `i`: from the start of its compute pass to the
    /// start of the next one (or the end of the run).
    pub fn step_wall_ns(&self, i: usize) -> u64 {
        let end = self.steps.get(i + 1).map_or(self.finish_ns, |s| s.compute_start_ns);
        end.saturating_sub(self.steps[i].compute_start_ns)
    }
}

/// Per-step counters written concurrently by the three units.
pub(crate) struct StatsBook {
    epoch: Instant,
    steps: Mutex<BTreeMap<u64, StepStats>>,
}

impl StatsBook {
    pub fn new() -> Self {
        StatsBook { epoch: Instant::now(), steps: Mutex::default() }
    }

    pub fn now(&self) -> u64 {
        self.epoch.elapsed().as_nanos() as u64
    }

    pub fn update(&self, step: u64, f: impl FnOnce(&mut StepStats)) {
        let mut m = self.steps.lock().unwrap();
        let s = m.entry(step).or_insert_with(|| StepStats { step, ..Default::default() });
        f(s);
    }

    pub fn into_steps(self) -> Vec<StepStats> {
        self.steps.into_inner().unwrap().into_values().collect()
    }
}
