//! Accounting for the resident structures of a worker.
//!
//! Buffers and arrays register their size when created and release it when
//! dropped; the tracker keeps the running total and its peak.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

#[derive(Debug, Default)]
struct Counters {
    current: AtomicUsize,
    peak: AtomicUsize,
}

#[derive(Clone, Debug, Default)]
pub struct MemTracker(Option<Arc<Counters>>);

impl MemTracker {
    pub fn new() -> Self {
        MemTracker(Some(Arc::new(Counters::default())))
    }

    /// A tracker that records nothing.
    pub fn disabled() -> Self {
        MemTracker(None)
    }

    pub fn reserve(&self, bytes: usize) -> Reservation {
        if let Some(c) = &self.0 {
            let now = c.current.fetch_add(bytes, Ordering::SeqCst) + bytes;
            c.peak.fetch_max(now, Ordering::SeqCst);
        }
        Reservation { tracker: self.clone(), bytes }
    }

    pub fn current(&self) -> usize {
        self.0.as_ref().map_or(0, |c| c.current.load(Ordering::SeqCst))
    }

    pub fn peak(&self) -> usize {
        self.0.as_ref().map_or(0, |c| c.peak.load(Ordering::SeqCst))
    }
}

/// Releases its bytes on drop.
#[derive(Debug)]
pub struct Reservation {
    tracker: MemTracker,
    bytes: usize,
}

impl Reservation {
    pub fn bytes(&self) -> usize {
        self.bytes
    }

    /// Adjusts the reservation to a new size (for buffers that grow).
    pub fn resize(&mut self, bytes: usize) {
        if bytes == self.bytes {
            return;
        }
        if let Some(c) = &self.tracker.0 {
            if bytes > self.bytes {
                let now = c.current.fetch_add(bytes - self.bytes, Ordering::SeqCst) + (bytes - self.bytes);
                c.peak.fetch_max(now, Ordering::SeqCst);
            } else {
                c.current.fetch_sub(self.bytes - bytes, Ordering::SeqCst);
            }
        }
        self.bytes = bytes;
    }
}

impl Drop for Reservation {
    fn drop(&mut self) {
        if let Some(c) = &self.tracker.0 {
            c.current.fetch_sub(self.bytes, Ordering::SeqCst);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_survives_release() {
        let t = MemTracker::new();
        {
            let _a = t.reserve(100);
            let mut b = t.reserve(50);
            b.resize(80);
            assert_eq!(t.current(), 180);
        }
        assert_eq!(t.current(), 0);
        assert_eq!(t.peak(), 180);
    }
}
