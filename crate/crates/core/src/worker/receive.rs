//! The receiving unit: builds the input of the next superstep from incoming
//! batches and drives the end-tag count and the barrier.

use std::path::PathBuf;

use crate::comm::{Batch, BatchKind, ControlEvent, ControlPlane, Transport};
use crate::error::{Error, Result};
use crate::memory::{MemTracker, Reservation};
use crate::model::codec::{decode_all, sort_records_by_key};
use crate::model::{Combiner, FixedCodec, MessageEnvelope, Mode, Payload};
use crate::streams::kway_merge;

use super::ledger::{Ledger, StepInput};
use super::stats::StatsBook;

/// Folds a batch into the digest array `A_r` of worker `worker` of `n`.
pub fn digest_incoming<M: Payload>(
    payload: &[u8],
    slots: &mut [M],
    combiner: &Combiner<M>,
    worker: usize,
    n: usize,
) -> Result<()> {
    for env in decode_all::<MessageEnvelope<M>>(payload)? {
        let id = env.target.0;
        let pos = (id / n as u64) as usize;
        if id % n as u64 != worker as u64 || pos >= slots.len() {
            return Err(Error::Protocol(format!("worker {worker} received a message for vertex {id}")));
        }
        slots[pos] = combiner.apply(slots[pos], env.payload);
    }
    Ok(())
}

pub(crate) struct Receiver<'a, M: Payload> {
    pub worker: usize,
    pub n: usize,
    pub mode: Mode,
    pub transport: &'a dyn Transport,
    pub plane: &'a ControlPlane,
    pub ledger: &'a Ledger<M>,
    pub stats: &'a StatsBook,
    pub combiner: Option<Combiner<M>>,
    pub local_vertices: usize,
    pub ims_dir: PathBuf,
    pub fanin: usize,
    pub buffer: usize,
    pub mem: MemTracker,
    pub violations: u64,
    // per-step state
    collecting: u64,
    tags: usize,
    runs: Vec<PathBuf>,
    run_seq: u64,
    digest: Option<(Vec<M>, Reservation)>,
    awaiting: Option<u64>,
}

impl<'a, M: Payload> Receiver<'a, M> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        worker: usize,
        n: usize,
        mode: Mode,
        transport: &'a dyn Transport,
        plane: &'a ControlPlane,
        ledger: &'a Ledger<M>,
        stats: &'a StatsBook,
        combiner: Option<Combiner<M>>,
        local_vertices: usize,
        ims_dir: PathBuf,
        fanin: usize,
        buffer: usize,
        mem: MemTracker,
    ) -> Self {
        Receiver {
            worker,
            n,
            mode,
            transport,
            plane,
            ledger,
            stats,
            combiner,
            local_vertices,
            ims_dir,
            fanin,
            buffer,
            mem,
            violations: 0,
            collecting: 1,
            tags: 0,
            runs: Vec::new(),
            run_seq: 0,
            digest: None,
            awaiting: None,
        }
    }

    fn violation(&mut self, what: String) -> Error {
        self.violations += 1;
        Error::Protocol(what)
    }

    fn on_data(&mut self, from: usize, b: Batch) -> Result<()> {
        if b.superstep != self.collecting || self.awaiting.is_some() {
            return Err(self.violation(format!(
                "DATA of step {} from worker {from} while collecting step {}",
                b.superstep, self.collecting
            )));
        }
        let step = self.collecting;
        self.stats.update(step, |s| s.batches_received += 1);
        let _held = self.mem.reserve(b.payload.len());
        match self.mode {
            Mode::Recoded => {
                let combiner = self.combiner.ok_or_else(|| Error::Config("recoded mode needs a combiner".into()))?;
                let e0 = combiner.identity.ok_or_else(|| Error::Config("recoded mode needs an identity".into()))?;
                let (n, len, mem) = (self.n, self.local_vertices, &self.mem);
                let (slots, _) = self.digest.get_or_insert_with(|| (vec![e0; len], mem.reserve(len * M::SIZE)));
                digest_incoming(&b.payload, slots, &combiner, self.worker, n)?;
            }
            Mode::Normal => {
                // sorted inside the receive buffer and written out as one run
                let mut payload = b.payload;
                sort_records_by_key(&mut payload, MessageEnvelope::<M>::SIZE)?;
                std::fs::create_dir_all(&self.ims_dir).map_err(Error::at(&self.ims_dir))?;
                let path = self.ims_dir.join(format!("run-{}", self.run_seq));
                self.run_seq += 1;
                std::fs::write(&path, &payload).map_err(Error::at(&path))?;
                self.runs.push(path);
            }
        }
        Ok(())
    }

    /// All messages of step `s` are in: hand the next step its input.
    fn finish_step(&mut self) -> Result<()> {
        let s = self.collecting;
        let input = match self.mode {
            Mode::Recoded => match self.digest.take() {
                Some((slots, mem)) => StepInput::Digest(slots, mem),
                None => StepInput::None,
            },
            Mode::Normal if self.runs.is_empty() => StepInput::None,
            Mode::Normal => {
                let out = self.ims_dir.join(format!("SI-{}.bin", s + 1));
                let runs = std::mem::take(&mut self.runs);
                let report = kway_merge(runs, self.fanin, self.combiner, &out, &self.ims_dir, self.buffer, &self.mem)?;
                self.stats.update(s + 1, |st| {
                    st.merge_calls += 1;
                    st.merge_passes += report.passes as u64;
                });
                StepInput::Ims(out)
            }
        };
        self.ledger.permit_compute(s + 1, input);
        self.awaiting = Some(s);
        Ok(())
    }

    fn on_batch(&mut self, from: usize, b: Batch) -> Result<()> {
        match b.kind {
            BatchKind::Control => {
                if let ControlEvent::Release(s) = self.plane.handle(self.transport, from, &b)? {
                    self.ledger.permit_send(s + 1);
                }
            }
            BatchKind::EndTag => {
                if b.superstep != self.collecting || self.awaiting.is_some() {
                    return Err(self.violation(format!(
                        "end tag of step {} from worker {from} while collecting step {}",
                        b.superstep, self.collecting
                    )));
                }
                self.tags += 1;
                let step = self.collecting;
                self.stats.update(step, |s| s.end_tags += 1);
                if self.tags == self.n {
                    self.finish_step()?;
                }
            }
            BatchKind::Data => self.on_data(from, b)?,
        }
        Ok(())
    }

    pub fn run(&mut self, stash: Vec<(usize, Batch)>) -> Result<()> {
        for (from, b) in stash {
            self.on_batch(from, b)?;
        }
        loop {
            if let Some(s) = self.awaiting {
                if let Some(result) = self.plane.result(s) {
                    if result.terminates() {
                        return Ok(());
                    }
                    self.plane.enter_barrier(self.transport, s)?;
                    self.awaiting = None;
                    self.collecting = s + 1;
                    self.tags = 0;
                }
            }
            let (from, b) =
                self.transport.recv()?.ok_or_else(|| Error::Transport("all channels closed mid-job".into()))?;
            self.on_batch(from, b)?;
        }
    }
}
