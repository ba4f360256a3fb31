//! Allreduce and barrier among workers, coordinated by worker 0 over the
//! ordinary transport as CONTROL batches.
//!
//! Whoever drains the transport must pass every CONTROL batch to
//! [`ControlPlane::handle`]; blocking calls (`wait_result`, `wait_release`)
//! are then satisfied from there.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Condvar, Mutex};

use super::{Batch, BatchKind, Transport};
use crate::error::{Error, Result};

const SUB_CONTRIB: u8 = 0;
const SUB_RESULT: u8 = 1;
const SUB_ENTER: u8 = 2;
const SUB_RELEASE: u8 = 3;
const FIXED: usize = 2 + 4 * 8;

/// Per-worker summary of a superstep.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ControlRecord {
    pub any_sent: bool,
    pub any_active: bool,
    pub vertices: u64,
    /// Largest per-worker vertex count (merged by maximum).
    pub max_vertices: u64,
    pub edges: u64,
    pub messages: u64,
    /// Encoded aggregator value; merged with the plane's merge function.
    pub aggregate: Vec<u8>,
}

impl ControlRecord {
    fn encode(&self, sub: u8) -> Vec<u8> {
        let mut out = Vec::with_capacity(FIXED + self.aggregate.len());
        out.push(sub);
        out.push(self.any_sent as u8 | (self.any_active as u8) << 1);
        for v in [self.vertices, self.max_vertices, self.edges, self.messages] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.aggregate);
        out
    }

    fn decode(buf: &[u8]) -> Result<(u8, ControlRecord)> {
        if buf.len() < FIXED {
            return Err(Error::Framing { needed: FIXED, got: buf.len() });
        }
        let word = |i: usize| u64::from_le_bytes(buf[2 + 8 * i..10 + 8 * i].try_into().unwrap());
        Ok((
            buf[0],
            ControlRecord {
                any_sent: buf[1] & 1 != 0,
                any_active: buf[1] & 2 != 0,
                vertices: word(0),
                max_vertices: word(1),
                edges: word(2),
                messages: word(3),
                aggregate: buf[FIXED..].to_vec(),
            },
        ))
    }

    /// The job stops once nothing was sent and every vertex has halted.
    pub fn terminates(&self) -> bool {
        !self.any_sent && !self.any_active
    }
}

/// What a handled CONTROL batch completed, if anything.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ControlEvent {
    Nothing,
    Result(u64),
    Release(u64),
}

type MergeFn = Box<dyn Fn(&[u8], &[u8]) -> Vec<u8> + Send + Sync>;

#[derive(Default)]
struct PlaneState {
    contribs: BTreeMap<u64, Vec<Option<ControlRecord>>>,
    entered: BTreeMap<u64, usize>,
    results: BTreeMap<u64, ControlRecord>,
    released: BTreeSet<u64>,
    aborted: Option<String>,
}

pub struct ControlPlane {
    worker: usize,
    n: usize,
    merge: MergeFn,
    state: Mutex<PlaneState>,
    cv: Condvar,
}

impl ControlPlane {
    /// `merge` combines two encoded aggregates; it must be associative and
    /// commutative. Contributions are merged in worker order.
    pub fn new(worker: usize, n: usize, merge: impl Fn(&[u8], &[u8]) -> Vec<u8> + Send + Sync + 'static) -> Self {
        ControlPlane { worker, n, merge: Box::new(merge), state: Mutex::default(), cv: Condvar::new() }
    }

    /// A plane whose aggregates are ignored.
    pub fn without_aggregate(worker: usize, n: usize) -> Self {
        Self::new(worker, n, |_, _| Vec::new())
    }

    pub fn contribute(&self, t: &dyn Transport, step: u64, local: &ControlRecord) -> Result<()> {
        t.send(0, Batch::control(step, local.encode(SUB_CONTRIB)))
    }

    pub fn wait_result(&self, step: u64) -> Result<ControlRecord> {
        let mut s = self.state.lock().unwrap();
        loop {
            if let Some(r) = s.results.get(&step) {
                return Ok(r.clone());
            }
            if let Some(e) = &s.aborted {
                return Err(Error::Aborted(e.clone()));
            }
            s = self.cv.wait(s).unwrap();
        }
    }

    pub fn result(&self, step: u64) -> Option<ControlRecord> {
        self.state.lock().unwrap().results.get(&step).cloned()
    }

    /// Sends the local record and waits for the merged one. Needs another
    /// thread to be feeding [`handle`](Self::handle).
    pub fn allreduce(&self, t: &dyn Transport, step: u64, local: &ControlRecord) -> Result<ControlRecord> {
        self.contribute(t, step, local)?;
        self.wait_result(step)
    }

    pub fn enter_barrier(&self, t: &dyn Transport, step: u64) -> Result<()> {
        t.send(0, Batch::control(step, ControlRecord::default().encode(SUB_ENTER)))
    }

    pub fn is_released(&self, step: u64) -> bool {
        self.state.lock().unwrap().released.contains(&step)
    }

    pub fn wait_release(&self, step: u64) -> Result<()> {
        let mut s = self.state.lock().unwrap();
        loop {
            if s.released.contains(&step) {
                return Ok(());
            }
            if let Some(e) = &s.aborted {
                return Err(Error::Aborted(e.clone()));
            }
            s = self.cv.wait(s).unwrap();
        }
    }

    /// Blocks until every worker has entered the barrier of `step`.
    pub fn barrier(&self, t: &dyn Transport, step: u64) -> Result<()> {
        self.enter_barrier(t, step)?;
        self.wait_release(step)
    }

    pub fn abort(&self, reason: &str) {
        let mut s = self.state.lock().unwrap();
        s.aborted.get_or_insert_with(|| reason.to_string());
        self.cv.notify_all();
    }

    fn merge_all(&self, parts: Vec<Option<ControlRecord>>) -> ControlRecord {
        let mut out: Option<ControlRecord> = None;
        for r in parts.into_iter().flatten() {
            out = Some(match out {
                None => r,
                Some(acc) => ControlRecord {
                    any_sent: acc.any_sent || r.any_sent,
                    any_active: acc.any_active || r.any_active,
                    vertices: acc.vertices + r.vertices,
                    max_vertices: acc.max_vertices.max(r.max_vertices),
                    edges: acc.edges + r.edges,
                    messages: acc.messages + r.messages,
                    aggregate: (self.merge)(&acc.aggregate, &r.aggregate),
                },
            });
        }
        out.unwrap_or_default()
    }

    /// Processes one CONTROL batch received from `from`.
    pub fn handle(&self, t: &dyn Transport, from: usize, batch: &Batch) -> Result<ControlEvent> {
        if batch.kind != BatchKind::Control {
            return Err(Error::Protocol(format!("{:?} batch passed to control plane", batch.kind)));
        }
        let step = batch.superstep;
        let (sub, rec) = ControlRecord::decode(&batch.payload)?;
        let coordinator_only = |what: &str| {
            if self.worker != 0 {
                Err(Error::Protocol(format!("worker {} received {what} from {from}", self.worker)))
            } else {
                Ok(())
            }
        };
        match sub {
            SUB_CONTRIB => {
                coordinator_only("a contribution")?;
                let complete = {
                    let mut s = self.state.lock().unwrap();
                    let slots = s.contribs.entry(step).or_insert_with(|| vec![None; self.n]);
                    if slots[from].replace(rec).is_some() {
                        return Err(Error::Protocol(format!("worker {from} contributed twice to step {step}")));
                    }
                    if slots.iter().all(Option::is_some) {
                        s.contribs.remove(&step)
                    } else {
                        None
                    }
                };
                if let Some(parts) = complete {
                    let payload = self.merge_all(parts).encode(SUB_RESULT);
                    for to in 0..self.n {
                        t.send(to, Batch::control(step, payload.clone()))?;
                    }
                }
                Ok(ControlEvent::Nothing)
            }
            SUB_ENTER => {
                coordinator_only("a barrier entry")?;
                let complete = {
                    let mut s = self.state.lock().unwrap();
                    let c = s.entered.entry(step).or_default();
                    *c += 1;
                    *c == self.n
                };
                if complete {
                    self.state.lock().unwrap().entered.remove(&step);
                    let payload = ControlRecord::default().encode(SUB_RELEASE);
                    for to in 0..self.n {
                        t.send(to, Batch::control(step, payload.clone()))?;
                    }
                }
                Ok(ControlEvent::Nothing)
            }
            SUB_RESULT => {
                let mut s = self.state.lock().unwrap();
                s.results.insert(step, rec);
                self.cv.notify_all();
                Ok(ControlEvent::Result(step))
            }
            SUB_RELEASE => {
                let mut s = self.state.lock().unwrap();
                s.released.insert(step);
                self.cv.notify_all();
                Ok(ControlEvent::Release(step))
            }
            other => Err(Error::Protocol(format!("unknown control record {other}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comm::{SimEndpoint, SimNetwork};
    use crate::model::SimOptions;
    use std::sync::Arc;
    use std::thread;
    use std::time::{Duration, Instant};

    fn sum_u64(a: &[u8], b: &[u8]) -> Vec<u8> {
        let x = |v: &[u8]| if v.is_empty() { 0 } else { u64::from_le_bytes(v.try_into().unwrap()) };
        (x(a) + x(b)).to_le_bytes().to_vec()
    }

    /// Runs `body` on every worker with a pump thread feeding the plane.
    fn with_cluster<R: Send + 'static>(
        n: usize,
        seed: u64,
        body: impl Fn(usize, &Arc<SimEndpoint>, &ControlPlane) -> R + Send + Sync + 'static,
    ) -> Vec<R> {
        let opts = SimOptions { seed, max_delay: Duration::from_micros(300), ..Default::default() };
        let eps = SimNetwork::create(n, opts, 4);
        let body = Arc::new(body);
        let handles: Vec<_> = eps
            .into_iter()
            .enumerate()
            .map(|(w, ep)| {
                let body = body.clone();
                thread::spawn(move || {
                    let plane = Arc::new(ControlPlane::new(w, n, sum_u64));
                    let (p2, e2) = (plane.clone(), ep.clone());
                    let pump = thread::spawn(move || {
                        while let Some((from, b)) = e2.recv().unwrap() {
                            p2.handle(&*e2, from, &b).unwrap();
                        }
                    });
                    let r = body(w, &ep, &plane);
                    // let peers finish before closing our channels
                    plane.barrier(&*ep, u64::MAX).unwrap();
                    ep.close();
                    pump.join().unwrap();
                    r
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    }

    #[test]
    fn record_round_trip() {
        let r = ControlRecord {
            any_sent: true,
            any_active: false,
            vertices: 3,
            max_vertices: 3,
            edges: 4,
            messages: 5,
            aggregate: vec![1, 2],
        };
        let (sub, back) = ControlRecord::decode(&r.encode(SUB_RESULT)).unwrap();
        assert_eq!(sub, SUB_RESULT);
        assert_eq!(back, r);
        assert!(ControlRecord::decode(&[0; 3]).is_err());
    }

    #[test]
    fn allreduce_merges_everything() {
        let results = with_cluster(4, 1, |w, ep, plane| {
            let local = ControlRecord {
                any_sent: false,
                any_active: w == 2,
                vertices: 10,
                aggregate: 1u64.to_le_bytes().to_vec(),
                ..Default::default()
            };
            plane.allreduce(&**ep, 1, &local).unwrap()
        });
        for r in &results {
            assert_eq!(r, &results[0]);
            assert!(r.any_active && !r.any_sent && !r.terminates());
            assert_eq!(r.vertices, 40);
            assert_eq!(r.aggregate, 4u64.to_le_bytes().to_vec());
        }
    }

    #[test]
    fn all_quiet_terminates() {
        let results = with_cluster(3, 2, |_, ep, plane| plane.allreduce(&**ep, 7, &ControlRecord::default()).unwrap());
        assert!(results.iter().all(ControlRecord::terminates));
    }

    #[test]
    fn single_worker_barrier() {
        let r = with_cluster(1, 0, |_, ep, plane| {
            plane.barrier(&**ep, 1).unwrap();
            true
        });
        assert_eq!(r, vec![true]);
    }

    #[test]
    fn staggered_barrier_waits_for_slowest() {
        for seed in 0..100u64 {
            let out = with_cluster(3, seed, move |w, ep, plane| {
                thread::sleep(Duration::from_micros(((seed * 7 + w as u64 * 131) % 5) * 400));
                let entered = Instant::now();
                plane.barrier(&**ep, 1).unwrap();
                (entered, Instant::now())
            });
            let last_entry = out.iter().map(|o| o.0).max().unwrap();
            assert!(out.iter().all(|o| o.1 >= last_entry), "seed {seed}: a worker left early");
        }
    }
}
