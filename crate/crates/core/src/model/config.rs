use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::partition::Mode;
use crate::error::{Error, Result};

pub const DEFAULT_STREAM_BUFFER: usize = 64 * 1024;
pub const DEFAULT_SPLIT_SIZE: usize = 8 * 1024 * 1024;
pub const DEFAULT_MERGE_FANIN: usize = 1000;
pub const DEFAULT_IN_FLIGHT: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransportKind {
    /// TCP sockets between workers (threads or processes).
    Sockets,
    /// In-process network with seeded random delivery delays.
    Sim,
}

impl std::str::FromStr for TransportKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "sockets" => Ok(TransportKind::Sockets),
            "sim" => Ok(TransportKind::Sim),
            other => Err(format!("unknown transport `{other}` (expected sockets or sim)")),
        }
    }
}

/// Knobs of the simulated network.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SimOptions {
    pub seed: u64,
    /// Each batch is held back by a uniform random delay in `[0, max_delay]`.
    pub max_delay: Duration,
    /// Extra fixed latency on specific `(from, to)` links.
    pub slow_links: Vec<(usize, usize, Duration)>,
    /// Per-byte transmission cost in nanoseconds. It occupies the sender's
    /// outgoing link; loopback is free.
    pub nanos_per_byte: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JobConfig {
    pub num_workers: usize,
    /// Buffer size `b` of every sequential stream, in bytes.
    pub stream_buffer: usize,
    /// Maximum file size of a splittable stream, in bytes.
    pub split_size: usize,
    /// Fan-in `k` of external merges.
    pub merge_fanin: usize,
    /// Maximum DATA batches in flight per channel.
    pub in_flight: usize,
    pub mode: Mode,
    pub transport: TransportKind,
    pub sim: SimOptions,
    /// Root of the per-worker scratch directories.
    pub scratch_dir: PathBuf,
    /// Where `part-<worker>` result files go, if anywhere.
    pub output_dir: Option<PathBuf>,
    /// Hard stop; the job fails if it has not converged by then.
    pub max_supersteps: u64,
}

impl JobConfig {
    pub fn new(num_workers: usize, scratch_dir: impl Into<PathBuf>) -> Self {
        JobConfig {
            num_workers,
            stream_buffer: DEFAULT_STREAM_BUFFER,
            split_size: DEFAULT_SPLIT_SIZE,
            merge_fanin: DEFAULT_MERGE_FANIN,
            in_flight: DEFAULT_IN_FLIGHT,
            mode: Mode::Normal,
            transport: TransportKind::Sim,
            sim: SimOptions::default(),
            scratch_dir: scratch_dir.into(),
            output_dir: None,
            max_supersteps: 100_000,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_transport(mut self, transport: TransportKind) -> Self {
        self.transport = transport;
        self
    }

    pub fn with_buffers(mut self, stream_buffer: usize, split_size: usize, merge_fanin: usize) -> Self {
        self.stream_buffer = stream_buffer;
        self.split_size = split_size;
        self.merge_fanin = merge_fanin;
        self
    }

    pub fn with_sim(mut self, sim: SimOptions) -> Self {
        self.sim = sim;
        self
    }

    pub fn with_output(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = Some(dir.into());
        self
    }

    /// `largest_item` is the serialized size of the largest fixed-size item
    /// the job will stream.
    pub fn validate(&self, largest_item: usize) -> Result<()> {
        if self.num_workers == 0 {
            return Err(Error::Config("need at least one worker".into()));
        }
        if self.stream_buffer < largest_item.max(1) {
            return Err(Error::Config(format!(
                "stream buffer of {} bytes cannot hold a {}-byte item",
                self.stream_buffer, largest_item
            )));
        }
        if self.split_size < self.stream_buffer {
            return Err(Error::Config(format!(
                "split size {} is smaller than the stream buffer {}",
                self.split_size, self.stream_buffer
            )));
        }
        if self.merge_fanin < 2 {
            return Err(Error::Config("merge fan-in must be at least 2".into()));
        }
        if self.in_flight == 0 {
            return Err(Error::Config("in-flight window must be positive".into()));
        }
        Ok(())
    }

    pub fn worker_dir(&self, worker: usize) -> PathBuf {
        self.scratch_dir.join(worker.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = JobConfig::new(4, "/tmp/x");
        assert_eq!(c.stream_buffer, 65536);
        assert_eq!(c.split_size, 8_388_608);
        assert_eq!(c.merge_fanin, 1000);
        c.validate(25).unwrap();
    }

    #[test]
    fn rejects_inconsistent_buffers() {
        let c = JobConfig::new(4, "/tmp/x").with_buffers(16, 8, 10);
        assert!(c.validate(16).is_err());
        let c = JobConfig::new(4, "/tmp/x").with_buffers(8, 64, 10);
        assert!(c.validate(16).is_err());
        let c = JobConfig::new(0, "/tmp/x");
        assert!(c.validate(8).is_err());
    }
}
