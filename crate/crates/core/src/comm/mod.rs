//! Point-to-point batch transport between workers.
//!
//! Every ordered pair of workers, including a worker and itself, is a FIFO
//! channel. DATA batches are flow-controlled by a credit window per channel;
//! END_TAG and CONTROL batches are not, so the protocol messages that unblock
//! a stalled sender can always get through.

mod control;
mod frame;
mod inbox;
mod sim;
mod socket;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use control::{ControlEvent, ControlPlane, ControlRecord};
pub use frame::{decode_frame, encode_frame, Batch, BatchKind, HEADER_LEN};
pub use inbox::Received;
pub use sim::{SimEndpoint, SimNetwork};
pub use socket::SocketTransport;

use crate::error::Result;

pub trait Transport: Send + Sync {
    fn worker(&self) -> usize;
    fn num_workers(&self) -> usize;

    /// Enqueues `batch` on the channel to `to`. Blocks while the DATA window
    /// of that channel is full.
    fn send(&self, to: usize, batch: Batch) -> Result<()>;

    /// Next batch from any channel. `None` waits indefinitely.
    fn recv_timeout(&self, timeout: Option<Duration>) -> Result<Received>;

    /// Fails every blocked and future call on this worker and tells peers.
    fn abort(&self, reason: &str);

    /// Orderly shutdown once the job has finished.
    fn close(&self);

    fn stats(&self) -> TransportStats;

    /// Blocking receive; `None` once every channel is closed.
    fn recv(&self) -> Result<Option<(usize, Batch)>> {
        loop {
            match self.recv_timeout(None)? {
                Received::Batch(from, b) => return Ok(Some((from, b))),
                Received::Closed => return Ok(None),
                Received::Timeout => {}
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportStats {
    pub data_batches: u64,
    pub end_tags: u64,
    pub control_batches: u64,
    pub bytes_sent: u64,
}

#[derive(Default)]
pub(crate) struct SendCounters {
    data: AtomicU64,
    tags: AtomicU64,
    control: AtomicU64,
    bytes: AtomicU64,
}

impl SendCounters {
    pub fn record(&self, batch: &Batch) {
        let c = match batch.kind {
            BatchKind::Data => &self.data,
            BatchKind::EndTag => &self.tags,
            BatchKind::Control => &self.control,
        };
        c.fetch_add(1, Ordering::Relaxed);
        self.bytes.fetch_add(batch.wire_len() as u64, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> TransportStats {
        TransportStats {
            data_batches: self.data.load(Ordering::Relaxed),
            end_tags: self.tags.load(Ordering::Relaxed),
            control_batches: self.control.load(Ordering::Relaxed),
            bytes_sent: self.bytes.load(Ordering::Relaxed),
        }
    }
}
