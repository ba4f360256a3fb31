use std::collections::VecDeque;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use super::frame::Batch;
use crate::error::{Error, Result};

/// Outcome of a receive attempt.
#[derive(Debug)]
pub enum Received {
    Batch(usize, Batch),
    Timeout,
    /// Every channel was closed by its sender and drained.
    Closed,
}

struct InboxState {
    queues: Vec<VecDeque<(Instant, Batch)>>,
    open: Vec<bool>,
    aborted: Option<String>,
}

/// Per-receiver queues, one per incoming channel. A batch becomes visible at
/// its delivery time; among visible heads the earliest is returned, so each
/// channel stays FIFO as long as its delivery times are non-decreasing.
pub(crate) struct Inbox {
    state: Mutex<InboxState>,
    cv: Condvar,
}

impl Inbox {
    pub fn new(channels: usize) -> Self {
        Inbox {
            state: Mutex::new(InboxState {
                queues: (0..channels).map(|_| VecDeque::new()).collect(),
                open: vec![true; channels],
                aborted: None,
            }),
            cv: Condvar::new(),
        }
    }

    pub fn push(&self, from: usize, deliver_at: Instant, batch: Batch) {
        let mut s = self.state.lock().unwrap();
        s.queues[from].push_back((deliver_at, batch));
        self.cv.notify_all();
    }

    pub fn close(&self, from: usize) {
        let mut s = self.state.lock().unwrap();
        s.open[from] = false;
        self.cv.notify_all();
    }

    pub fn abort(&self, reason: &str) {
        let mut s = self.state.lock().unwrap();
        if s.aborted.is_none() {
            s.aborted = Some(reason.to_string());
        }
        self.cv.notify_all();
    }

    pub fn pop(&self, timeout: Option<Duration>) -> Result<Received> {
        let deadline = timeout.map(|t| Instant::now() + t);
        let mut s = self.state.lock().unwrap();
        loop {
            if let Some(r) = &s.aborted {
                return Err(Error::Aborted(r.clone()));
            }
            let now = Instant::now();
            let head = s.queues.iter().enumerate().filter_map(|(i, q)| q.front().map(|(t, _)| (*t, i))).min();
            if let Some((t, i)) = head {
                if t <= now {
                    let (_, b) = s.queues[i].pop_front().unwrap();
                    return Ok(Received::Batch(i, b));
                }
            } else if s.open.iter().all(|o| !o) {
                return Ok(Received::Closed);
            }
            let mut wake = head.map(|(t, _)| t);
            if let Some(d) = deadline {
                if d <= now {
                    return Ok(Received::Timeout);
                }
                wake = Some(wake.map_or(d, |w| w.min(d)));
            }
            s = match wake {
                Some(w) => self.cv.wait_timeout(s, w.saturating_duration_since(now)).unwrap().0,
                None => self.cv.wait(s).unwrap(),
            };
        }
    }
}

/// Window of DATA batches a sender may have outstanding on one channel.
pub(crate) struct Credits {
    state: Mutex<(usize, Option<String>)>,
    cv: Condvar,
    limit: usize,
}

impl Credits {
    pub fn new(limit: usize) -> Self {
        Credits { state: Mutex::new((0, None)), cv: Condvar::new(), limit: limit.max(1) }
    }

    pub fn acquire(&self) -> Result<()> {
        let mut s = self.state.lock().unwrap();
        loop {
            if let Some(r) = &s.1 {
                return Err(Error::Aborted(r.clone()));
            }
            if s.0 < self.limit {
                s.0 += 1;
                return Ok(());
            }
            s = self.cv.wait(s).unwrap();
        }
    }

    pub fn release(&self) {
        let mut s = self.state.lock().unwrap();
        s.0 = s.0.saturating_sub(1);
        self.cv.notify_all();
    }

    pub fn abort(&self, reason: &str) {
        let mut s = self.state.lock().unwrap();
        if s.1.is_none() {
            s.1 = Some(reason.to_string());
        }
        self.cv.notify_all();
    }

    #[cfg(test)]
    pub fn in_flight(&self) -> usize {
        self.state.lock().unwrap().0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn delivery_time_gates_visibility() {
        let inbox = Inbox::new(2);
        let later = Instant::now() + Duration::from_millis(30);
        inbox.push(0, later, Batch::end_tag(1));
        inbox.push(1, Instant::now(), Batch::end_tag(2));
        match inbox.pop(None).unwrap() {
            Received::Batch(1, b) => assert_eq!(b.superstep, 2),
            other => panic!("{other:?}"),
        }
        assert!(matches!(inbox.pop(Some(Duration::from_millis(1))).unwrap(), Received::Timeout));
        assert!(matches!(inbox.pop(None).unwrap(), Received::Batch(0, _)));
        assert!(Instant::now() >= later);
    }

    #[test]
    fn closed_after_drain() {
        let inbox = Inbox::new(1);
        inbox.push(0, Instant::now(), Batch::end_tag(1));
        inbox.close(0);
        assert!(matches!(inbox.pop(None).unwrap(), Received::Batch(..)));
        assert!(matches!(inbox.pop(None).unwrap(), Received::Closed));
    }

    #[test]
    fn credits_block_at_limit() {
        let c = Arc::new(Credits::new(2));
        c.acquire().unwrap();
        c.acquire().unwrap();
        let c2 = c.clone();
        let h = std::thread::spawn(move || c2.acquire());
        std::thread::sleep(Duration::from_millis(20));
        assert!(!h.is_finished());
        c.release();
        h.join().unwrap().unwrap();
        assert_eq!(c.in_flight(), 2);
        c.abort("x");
        assert!(c.acquire().is_err());
    }
}
