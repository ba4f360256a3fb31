//! The stats file written by `run` and read by `stats`.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mode, TransportKind};
use crate::worker::WorkerStats;

pub const STATS_FILE: &str = "stats.json";

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JobReport {
    pub algorithm: String,
    pub mode: Mode,
    pub transport: TransportKind,
    pub workers: usize,
    pub supersteps: usize,
    pub wall_ns: u64,
    pub per_worker: Vec<WorkerStats>,
}

impl JobReport {
    pub fn load(path: &Path) -> Result<Self> {
        let path = if path.is_dir() { path.join(STATS_FILE) } else { path.to_path_buf() };
        let text = std::fs::read_to_string(&path).map_err(Error::at(&path))?;
        serde_json::from_str(&text).map_err(|e| Error::Corruption(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, text).map_err(Error::at(path))
    }

    /// Every per-step counter that breaks the one-pass discipline: the edge
    /// stream is read at most once, the incoming message stream exactly
    /// once, and recoded jobs never merge-sort.
    pub fn pass_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for w in &self.per_worker {
            for s in &w.steps {
                let at = format!("worker {} step {}", w.worker, s.step);
                if s.se_bytes_read > s.se_bytes {
                    out.push(format!("{at}: read {} of {} edge stream bytes", s.se_bytes_read, s.se_bytes));
                }
                if s.si_bytes_read != s.si_bytes {
                    out.push(format!("{at}: read {} of {} message stream bytes", s.si_bytes_read, s.si_bytes));
                }
                if self.mode == Mode::Recoded && (s.merge_calls > 0 || s.si_bytes > 0) {
                    out.push(format!("{at}: recoded job merged {} times", s.merge_calls));
                }
            }
        }
        out
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} | {:?} mode | {:?} transport | {} workers | {} supersteps | {:.3} s",
            self.algorithm,
            self.mode,
            self.transport,
            self.workers,
            self.supersteps,
            self.wall_ns as f64 / 1e9
        );
        let _ = writeln!(
            s,
            "{:>4} {:>10} {:>10} {:>8} {:>12} {:>12} {:>12} {:>10} {:>7}",
            "step", "wall ms", "compute ms", "busy %", "SE read", "SI read", "OMS written", "batches", "merges"
        );
        for i in 0..self.supersteps {
            let steps: Vec<_> = self.per_worker.iter().filter_map(|w| w.steps.get(i)).collect();
            let wall = self.per_worker.iter().map(|w| w.step_wall_ns(i)).max().unwrap_or(0);
            let compute = steps.iter().map(|s| s.compute_ns()).max().unwrap_or(0);
            let sum = |f: fn(&crate::worker::StepStats) -> u64| steps.iter().map(|s| f(s)).sum::<u64>();
            let _ = writeln!(
                s,
                "{:>4} {:>10.3} {:>10.3} {:>8.1} {:>12} {:>12} {:>12} {:>10} {:>7}",
                i + 1,
                wall as f64 / 1e6,
                compute as f64 / 1e6,
                if wall > 0 { 100.0 * compute as f64 / wall as f64 } else { 0.0 },
                sum(|s| s.se_bytes_read),
                sum(|s| s.si_bytes_read),
                sum(|s| s.oms_bytes_written),
                sum(|s| s.data_batches_sent),
                sum(|s| s.merge_calls),
            );
        }
        let peak = self.per_worker.iter().map(|w| w.peak_memory).max().unwrap_or(0);
        let _ = writeln!(s, "peak tracked memory per worker: {peak} bytes");
        let violations = self.pass_violations();
        if violations.is_empty() {
            let _ = writeln!(s, "pass bounds: ok");
        } else {
            let _ = writeln!(s, "pass bounds: {} violations", violations.len());
            for v in violations {
                let _ = writeln!(s, "  {v}");
            }
        }
        s
    }
}
