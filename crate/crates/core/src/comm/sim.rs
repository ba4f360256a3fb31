use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::inbox::{Credits, Inbox, Received};
use super::{Batch, BatchKind, SendCounters, Transport, TransportStats};
use crate::error::{Error, Result};
use crate::model::SimOptions;

/// In-process network. Each batch is delayed by a seeded random amount plus
/// any configured link latency. The per-byte cost occupies the sender's
/// outgoing link, so `send` blocks until the bytes are on the wire, as a
/// socket write does once the kernel buffer is full. Loopback is free.
/// Delivery times on one channel never decrease, which keeps channels FIFO.
pub struct SimNetwork {
    n: usize,
    opts: SimOptions,
    inboxes: Vec<Inbox>,
    credits: Vec<Vec<Credits>>,
    last_delivery: Mutex<Vec<Vec<Instant>>>,
    egress_free: Vec<Mutex<Instant>>,
    rng: Mutex<ChaCha8Rng>,
}

pub struct SimEndpoint {
    net: Arc<SimNetwork>,
    worker: usize,
    counters: SendCounters,
}

impl SimNetwork {
    pub fn create(n: usize, opts: SimOptions, in_flight: usize) -> Vec<Arc<SimEndpoint>> {
        let now = Instant::now();
        let net = Arc::new(SimNetwork {
            n,
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(opts.seed)),
            opts,
            inboxes: (0..n).map(|_| Inbox::new(n)).collect(),
            credits: (0..n).map(|_| (0..n).map(|_| Credits::new(in_flight)).collect()).collect(),
            last_delivery: Mutex::new(vec![vec![now; n]; n]),
            egress_free: (0..n).map(|_| Mutex::new(now)).collect(),
        });
        (0..n)
            .map(|worker| Arc::new(SimEndpoint { net: net.clone(), worker, counters: SendCounters::default() }))
            .collect()
    }

    /// Puts `bytes` on the outgoing link of `from`, sleeping until they
    /// have been transmitted. Returns when the last byte left.
    fn transmit(&self, from: usize, to: usize, bytes: usize) -> Instant {
        let cost = Duration::from_nanos(self.opts.nanos_per_byte.saturating_mul(bytes as u64));
        if from == to || cost.is_zero() {
            return Instant::now();
        }
        let done = {
            let mut free = self.egress_free[from].lock().unwrap();
            let done = Instant::now().max(*free) + cost;
            *free = done;
            done
        };
        let now = Instant::now();
        if done > now {
            std::thread::sleep(done - now);
        }
        done
    }

    fn delay(&self, from: usize, to: usize) -> Duration {
        let mut d = Duration::ZERO;
        if !self.opts.max_delay.is_zero() {
            let max = self.opts.max_delay.as_nanos() as u64;
            d += Duration::from_nanos(self.rng.lock().unwrap().gen_range(0..=max));
        }
        for &(a, b, extra) in &self.opts.slow_links {
            if a == from && b == to {
                d += extra;
            }
        }
        d
    }

    fn abort_all(&self, reason: &str) {
        for inbox in &self.inboxes {
            inbox.abort(reason);
        }
        for row in &self.credits {
            for c in row {
                c.abort(reason);
            }
        }
    }
}

impl Transport for SimEndpoint {
    fn worker(&self) -> usize {
        self.worker
    }

    fn num_workers(&self) -> usize {
        self.net.n
    }

    fn send(&self, to: usize, batch: Batch) -> Result<()> {
        let net = &self.net;
        if to >= net.n {
            return Err(Error::Transport(format!("no worker {to}")));
        }
        if batch.kind == BatchKind::Data {
            net.credits[self.worker][to].acquire()?;
        }
        self.counters.record(&batch);
        let sent = net.transmit(self.worker, to, batch.wire_len());
        let delay = net.delay(self.worker, to);
        // hold the lock across push so delivery order matches time order
        let mut last = net.last_delivery.lock().unwrap();
        let at = (sent + delay).max(last[self.worker][to]);
        last[self.worker][to] = at;
        net.inboxes[to].push(self.worker, at, batch);
        Ok(())
    }

    fn recv_timeout(&self, timeout: Option<Duration>) -> Result<Received> {
        let r = self.net.inboxes[self.worker].pop(timeout)?;
        if let Received::Batch(from, b) = &r {
            if b.kind == BatchKind::Data {
                self.net.credits[*from][self.worker].release();
            }
        }
        Ok(r)
    }

    fn abort(&self, reason: &str) {
        self.net.abort_all(&format!("worker {}: {reason}", self.worker));
    }

    fn close(&self) {
        for inbox in &self.net.inboxes {
            inbox.close(self.worker);
        }
    }

    fn stats(&self) -> TransportStats {
        self.counters.snapshot()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::thread;

    fn opts(seed: u64, max_delay_us: u64) -> SimOptions {
        SimOptions { seed, max_delay: Duration::from_micros(max_delay_us), ..Default::default() }
    }

    #[test]
    fn fifo_under_random_delays() {
        let n = 4;
        let per_channel = 2500u64;
        let eps = SimNetwork::create(n, opts(3, 200), 4);
        let mut handles = Vec::new();
        for ep in eps.clone() {
            handles.push(thread::spawn(move || {
                for seq in 0..per_channel {
                    let to = (seq % n as u64) as usize;
                    ep.send(to, Batch::data(seq, seq.to_le_bytes().to_vec())).unwrap();
                }
            }));
        }
        let receivers: Vec<_> = eps
            .iter()
            .cloned()
            .map(|ep| {
                thread::spawn(move || {
                    let mut last = vec![None::<u64>; n];
                    for _ in 0..(per_channel / n as u64) * n as u64 {
                        let (from, b) = ep.recv().unwrap().unwrap();
                        if let Some(prev) = last[from] {
                            assert!(b.superstep > prev, "channel {from} reordered");
                        }
                        last[from] = Some(b.superstep);
                    }
                })
            })
            .collect();
        for h in handles.into_iter().chain(receivers) {
            h.join().unwrap();
        }
    }

    #[test]
    fn bandwidth_blocks_the_sender() {
        let o = SimOptions { nanos_per_byte: 1000, ..Default::default() };
        let eps = SimNetwork::create(2, o, 8);
        let t = Instant::now();
        for _ in 0..4 {
            eps[0].send(1, Batch::data(1, vec![0; 5000])).unwrap();
        }
        assert!(t.elapsed() >= Duration::from_millis(20));
        let t = Instant::now();
        eps[0].send(0, Batch::data(1, vec![0; 50_000])).unwrap();
        assert!(t.elapsed() < Duration::from_millis(20), "loopback is free");
    }

    #[test]
    fn recv_blocks_when_idle() {
        let eps = SimNetwork::create(2, opts(0, 0), 4);
        let t = Instant::now();
        assert!(matches!(eps[0].recv_timeout(Some(Duration::from_millis(25))).unwrap(), Received::Timeout));
        assert!(t.elapsed() >= Duration::from_millis(25));
    }

    #[test]
    fn each_worker_counts_n_tags() {
        let n = 5;
        let eps = SimNetwork::create(n, opts(9, 100), 4);
        for ep in &eps {
            for to in 0..n {
                ep.send(to, Batch::end_tag(1)).unwrap();
            }
        }
        for ep in &eps {
            let mut tags = 0;
            while let Received::Batch(_, b) = ep.recv_timeout(Some(Duration::from_millis(50))).unwrap() {
                assert_eq!(b.kind, BatchKind::EndTag);
                tags += 1;
            }
            assert_eq!(tags, n);
        }
    }

    #[test]
    fn end_tag_follows_channel_data() {
        let eps = SimNetwork::create(2, opts(5, 500), 8);
        for i in 0..6 {
            eps[0].send(1, Batch::data(1, vec![i])).unwrap();
        }
        eps[0].send(1, Batch::end_tag(1)).unwrap();
        let mut seen = 0;
        loop {
            let (_, b) = eps[1].recv().unwrap().unwrap();
            if b.kind == BatchKind::EndTag {
                break;
            }
            seen += 1;
        }
        assert_eq!(seen, 6);
    }

    #[test]
    fn slow_link_delays_only_that_channel() {
        let o = SimOptions { slow_links: vec![(0, 1, Duration::from_millis(40))], ..Default::default() };
        let eps = SimNetwork::create(3, o, 4);
        let t = Instant::now();
        eps[0].send(1, Batch::end_tag(1)).unwrap();
        eps[0].send(2, Batch::end_tag(1)).unwrap();
        eps[2].recv().unwrap();
        assert!(t.elapsed() < Duration::from_millis(40));
        eps[1].recv().unwrap();
        assert!(t.elapsed() >= Duration::from_millis(40));
    }

    #[test]
    fn abort_wakes_blocked_receivers() {
        let eps = SimNetwork::create(2, opts(0, 0), 4);
        let e1 = eps[1].clone();
        let h = thread::spawn(move || e1.recv());
        thread::sleep(Duration::from_millis(10));
        eps[0].abort("boom");
        assert!(matches!(h.join().unwrap(), Err(Error::Aborted(_))));
    }
}
