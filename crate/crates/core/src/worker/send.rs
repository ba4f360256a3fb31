//! The sending unit: ring scan over the outgoing message streams.

use std::fs;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use crate::comm::{Batch, Transport};
use crate::error::{Error, Result};
use crate::memory::{MemTracker, Reservation};
use crate::model::codec::{read_u64, sort_records_by_key};
use crate::model::{Combiner, FixedCodec, MessageEnvelope, Mode, Payload, VertexId};
use crate::streams::{merge_runs_with, FixedRuns, Grouping, SplitFile, SplitHandle};

use super::ledger::Ledger;
use super::stats::StatsBook;

const IDLE_WAIT: Duration = Duration::from_millis(50);

/// Per-destination combine array of recoded mode: one slot per position.
pub struct CombineArray<M> {
    slots: Vec<M>,
    touched: Vec<usize>,
    identity: M,
    combine: fn(M, M) -> M,
    _mem: Reservation,
}

impl<M: Payload> CombineArray<M> {
    pub fn new(len: usize, combiner: Combiner<M>, mem: &MemTracker) -> Result<Self> {
        let identity =
            combiner.identity.ok_or_else(|| Error::Config("recoded mode needs a combiner with an identity".into()))?;
        Ok(CombineArray {
            slots: vec![identity; len],
            touched: Vec::new(),
            identity,
            combine: combiner.combine,
            _mem: mem.reserve(len * M::SIZE),
        })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Folds a message for `target`, owned by worker `dest` of `n`.
    #[inline]
    pub fn fold(&mut self, target: VertexId, payload: M, dest: usize, n: usize) -> Result<()> {
        let pos = (target.0 / n as u64) as usize;
        if target.0 % n as u64 != dest as u64 || pos >= self.slots.len() {
            return Err(Error::Protocol(format!("message for {target} in the stream of worker {dest}")));
        }
        if self.slots[pos] == self.identity {
            self.touched.push(pos);
        }
        self.slots[pos] = (self.combine)(self.slots[pos], payload);
        Ok(())
    }

    /// Emits `(n * pos + dest, slot)` for every slot that differs from the
    /// identity, in position order, and resets them.
    pub fn drain(&mut self, dest: usize, n: usize, out: &mut Vec<u8>) {
        self.touched.sort_unstable();
        self.touched.dedup();
        for &pos in &self.touched {
            let v = std::mem::replace(&mut self.slots[pos], self.identity);
            if v != self.identity {
                let env = MessageEnvelope::new((n * pos + dest) as u64, v);
                let start = out.len();
                out.resize(start + MessageEnvelope::<M>::SIZE, 0);
                env.encode(&mut out[start..]);
            }
        }
        self.touched.clear();
    }

    /// True if every slot holds the identity.
    pub fn is_clean(&self) -> bool {
        self.slots.iter().all(|s| *s == self.identity)
    }
}

/// Folds runs of equal targets of a sorted envelope buffer into its prefix.
pub(crate) fn fold_sorted<M: Payload>(buf: &mut Vec<u8>, combiner: &Combiner<M>) {
    let size = MessageEnvelope::<M>::SIZE;
    let n = buf.len() / size;
    let (mut r, mut w) = (0, 0);
    while r < n {
        let mut acc = MessageEnvelope::<M>::decode(&buf[r * size..]);
        r += 1;
        while r < n && read_u64(&buf[r * size..]) == acc.target.0 {
            acc.payload = combiner.apply(acc.payload, M::decode(&buf[r * size + 8..]));
            r += 1;
        }
        acc.encode(&mut buf[w * size..]);
        w += 1;
    }
    buf.truncate(w * size);
}

/// Merges and folds message files bound for one destination, handing the
/// result to `flush` in batches of at most `max_batch` bytes, each with its
/// reservation. Every file is sorted inside its own buffer.
#[allow(clippy::too_many_arguments)]
pub(crate) fn combine_files<M: Payload>(
    files: &[SplitFile],
    combiner: Combiner<M>,
    run_dir: &std::path::Path,
    fanin: usize,
    buffer: usize,
    max_batch: usize,
    mem: &MemTracker,
    flush: &mut dyn FnMut(Vec<u8>, Reservation) -> Result<()>,
) -> Result<Option<crate::streams::MergeReport>> {
    let size = MessageEnvelope::<M>::SIZE;
    if files.len() == 1 {
        let mut bytes = files[0].read()?;
        let held = mem.reserve(bytes.len());
        sort_records_by_key(&mut bytes, size)?;
        fold_sorted(&mut bytes, &combiner);
        flush(bytes, held)?;
        return Ok(None);
    }
    fs::create_dir_all(run_dir).map_err(Error::at(run_dir))?;
    let mut runs: Vec<PathBuf> = Vec::with_capacity(files.len());
    for (i, f) in files.iter().enumerate() {
        let mut bytes = f.read()?;
        let _held = mem.reserve(bytes.len());
        sort_records_by_key(&mut bytes, size)?;
        let path = run_dir.join(format!("run-{i}"));
        fs::write(&path, &bytes).map_err(Error::at(&path))?;
        runs.push(path);
    }
    let fold = |acc: &mut MessageEnvelope<M>, next: MessageEnvelope<M>| {
        acc.payload = combiner.apply(acc.payload, next.payload)
    };
    let per_batch = (max_batch / size).max(1) * size;
    let mut out = Vec::new();
    let mut held = mem.reserve(0);
    let mut emit = |e: MessageEnvelope<M>| {
        if out.len() + size > per_batch {
            flush(std::mem::take(&mut out), std::mem::replace(&mut held, mem.reserve(0)))?;
        }
        let start = out.len();
        out.resize(start + size, 0);
        e.encode(&mut out[start..]);
        held.resize(out.len());
        Ok(())
    };
    let format = FixedRuns::<MessageEnvelope<M>>::new(buffer, mem);
    let report = merge_runs_with(&format, runs, fanin, Grouping::Fold(&fold), run_dir, &mut emit)?;
    if !out.is_empty() {
        flush(out, held)?;
    }
    Ok(Some(report))
}

pub(crate) struct Sender<'a, M: Payload> {
    pub worker: usize,
    pub n: usize,
    pub mode: Mode,
    pub transport: &'a dyn Transport,
    pub handles: Vec<Arc<SplitHandle>>,
    pub ledger: &'a Ledger<M>,
    pub stats: &'a StatsBook,
    pub combiner: Option<Combiner<M>>,
    pub combine_array: Option<CombineArray<M>>,
    pub run_dir: PathBuf,
    pub fanin: usize,
    pub buffer: usize,
    /// Largest combined batch, the split size.
    pub max_batch: usize,
    pub mem: MemTracker,
}

impl<M: Payload> Sender<'_, M> {
    /// `_held` accounts for `payload` until the transport has taken it.
    fn send_data(&self, to: usize, step: u64, payload: Vec<u8>, _held: Reservation) -> Result<()> {
        self.transport.send(to, Batch::data(step, payload))?;
        self.stats.update(step, |s| s.data_batches_sent += 1);
        Ok(())
    }

    /// Sends from OMS `j`: one file, or every ready file combined.
    fn send_from(&mut self, j: usize, step: u64, limit: u64) -> Result<()> {
        let handle = &self.handles[j];
        match (self.mode, self.combiner) {
            (Mode::Recoded, _) => {
                let files = handle.fetch_all_upto(limit);
                let a_s = self.combine_array.as_mut().expect("combine array in recoded mode");
                for f in &files {
                    let bytes = f.read()?;
                    let _held = self.mem.reserve(bytes.len());
                    let mut c = 0;
                    while c < bytes.len() {
                        let env = MessageEnvelope::<M>::decode(&bytes[c..]);
                        a_s.fold(env.target, env.payload, j, self.n)?;
                        c += MessageEnvelope::<M>::SIZE;
                    }
                    f.remove()?;
                }
                let mut payload = Vec::new();
                a_s.drain(j, self.n, &mut payload);
                if !payload.is_empty() {
                    let held = self.mem.reserve(payload.len());
                    self.send_data(j, step, payload, held)?;
                }
            }
            (Mode::Normal, Some(c)) => {
                let files = handle.fetch_all_upto(limit);
                let mut flush = |payload, held| self.send_data(j, step, payload, held);
                let report = combine_files(
                    &files,
                    c,
                    &self.run_dir,
                    self.fanin,
                    self.buffer,
                    self.max_batch,
                    &self.mem,
                    &mut flush,
                )?;
                for f in &files {
                    f.remove()?;
                }
                if let Some(r) = report {
                    self.stats.update(step, |s| {
                        s.merge_calls += 1;
                        s.merge_passes += r.passes as u64;
                    });
                }
            }
            (Mode::Normal, None) => {
                if let Some(f) = handle.fetch_next_upto(limit) {
                    let bytes = f.read()?;
                    let held = self.mem.reserve(bytes.len());
                    f.remove()?;
                    self.send_data(j, step, bytes, held)?;
                }
            }
        }
        Ok(())
    }

    pub fn run(&mut self) -> Result<()> {
        let signal = self.ledger.signal.clone();
        let mut p = self.worker;
        let mut step = 1;
        loop {
            loop {
                let seen = signal.generation();
                match self.ledger.send_allowed(step)? {
                    Some(true) => break,
                    Some(false) => return Ok(()),
                    None => {
                        signal.wait_past(seen, IDLE_WAIT);
                    }
                }
            }
            let start = self.stats.now();
            self.stats.update(step, |s| s.send_start_ns = start);
            let mut tagged = vec![false; self.n];
            loop {
                let seen = signal.generation();
                let handles = &self.handles;
                let view = self.ledger.send_view(step, || handles.iter().map(|h| h.counters().1).collect())?;
                let mut progressed = false;
                if view.finished {
                    for off in 1..=self.n {
                        let j = (p + off) % self.n;
                        if !tagged[j] && self.handles[j].counters().0 >= view.limits[j] {
                            self.transport.send(j, Batch::end_tag(step))?;
                            tagged[j] = true;
                            progressed = true;
                        }
                    }
                    if tagged.iter().all(|&t| t) {
                        break;
                    }
                }
                for off in 1..=self.n {
                    let j = (p + off) % self.n;
                    if self.handles[j].has_sendable(view.limits[j]) {
                        self.send_from(j, step, view.limits[j])?;
                        p = j;
                        progressed = true;
                        break;
                    }
                }
                if !progressed {
                    signal.wait_past(seen, IDLE_WAIT);
                }
            }
            let end = self.stats.now();
            self.stats.update(step, |s| s.send_end_ns = end);
            step += 1;
        }
    }
}
