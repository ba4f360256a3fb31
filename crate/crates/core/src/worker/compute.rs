//! One compute pass over the state array.

use std::path::Path;

use crate::error::{Error, Result};
use crate::memory::MemTracker;
use crate::model::{
    hash_partition, AdjacencyItem, Context, FixedCodec, MessageEnvelope, Mode, Outbox, VertexId, VertexProgram,
    VertexState,
};
use crate::streams::{ReadStats, ReadStream, SplittableStream};

use super::ledger::StepInput;

/// Routes emitted messages into the OMS of the target's owner.
pub(crate) struct OmsOutbox<'a> {
    pub streams: &'a mut [SplittableStream],
    pub mode: Mode,
}

impl<M: FixedCodec> Outbox<M> for OmsOutbox<'_> {
    #[inline]
    fn push(&mut self, target: VertexId, message: M) -> Result<()> {
        let dest = hash_partition(target, self.streams.len(), self.mode);
        let env = MessageEnvelope { target, payload: message };
        self.streams[dest].append_with(MessageEnvelope::<M>::SIZE, |out| env.encode(out))
    }
}

pub(crate) struct PassReport<A> {
    pub computed: u64,
    pub messages: u64,
    pub any_active: bool,
    pub aggregate: A,
    pub se: ReadStats,
    pub se_bytes: u64,
    pub si: ReadStats,
    pub si_bytes: u64,
}

pub(crate) struct PassEnv<'a> {
    pub step: u64,
    pub num_vertices: u64,
    pub num_workers: usize,
    pub worker: usize,
    pub buffer: usize,
    pub mem: &'a MemTracker,
}

enum Incoming<M: FixedCodec> {
    None,
    Stream(ReadStream<MessageEnvelope<M>>),
    Digest(Vec<M>, M),
}

/// Calls `compute` on every vertex that is active or has messages, in array
/// order. `S^E` is read once; adjacency lists of vertices that need no
/// computation are skipped in runs.
#[allow(clippy::too_many_arguments)]
pub(crate) fn compute_pass<P: VertexProgram>(
    program: &P,
    states: &mut [VertexState<P::Value>],
    original: Option<&[u64]>,
    se_path: &Path,
    input: StepInput<P::Message>,
    aggregated: P::Aggregate,
    outbox: &mut dyn Outbox<P::Message>,
    env: &PassEnv<'_>,
) -> Result<PassReport<P::Aggregate>> {
    let mut se = ReadStream::<AdjacencyItem<P::Edge>>::open(se_path, env.buffer, env.mem)?;
    let se_bytes = se.file_bytes();
    let (mut incoming, _digest_mem) = match input {
        StepInput::None => (Incoming::None, None),
        StepInput::Ims(path) => (Incoming::Stream(ReadStream::open(&path, env.buffer, env.mem)?), None),
        StepInput::Digest(slots, mem) => {
            let e0 = program
                .combiner()
                .and_then(|c| c.identity)
                .ok_or_else(|| Error::Config("recoded mode needs a combiner with an identity".into()))?;
            (Incoming::Digest(slots, e0), Some(mem))
        }
    };
    let si_bytes = match &incoming {
        Incoming::Stream(s) => s.file_bytes(),
        _ => 0,
    };
    let aggregator = program.aggregator();
    let mut aggregate = aggregator.map(|a| a.identity).unwrap_or_default();
    let mut adjacency = Vec::new();
    let mut messages = Vec::new();
    let mut pending_skip = 0u64;
    let mut report = PassReport {
        computed: 0,
        messages: 0,
        any_active: false,
        aggregate,
        se: ReadStats::default(),
        se_bytes,
        si: ReadStats::default(),
        si_bytes,
    };

    for (pos, v) in states.iter_mut().enumerate() {
        messages.clear();
        match &mut incoming {
            Incoming::None => {}
            Incoming::Stream(s) => {
                while let Some(m) = s.peek()? {
                    if m.target > v.id {
                        break;
                    }
                    if m.target < v.id {
                        return Err(Error::UnknownVertex(m.target));
                    }
                    messages.push(m.payload);
                    s.next_item()?;
                }
            }
            Incoming::Digest(slots, e0) => {
                if slots[pos] != *e0 {
                    messages.push(slots[pos]);
                }
            }
        }
        if !v.active && messages.is_empty() {
            pending_skip += v.degree;
            continue;
        }
        v.active = true;
        if pending_skip > 0 {
            se.skip(pending_skip);
            pending_skip = 0;
        }
        se.read_into(v.degree, &mut adjacency)?;
        let mut ctx =
            Context::new(env.step, env.num_vertices, env.num_workers, env.worker, aggregated, aggregator, &mut *outbox);
        ctx.original_id = original.map_or(v.id, |o| VertexId(o[pos]));
        ctx.position = pos;
        let vertex = ctx.original_id;
        program.compute(v, &adjacency, &messages, &mut ctx).map_err(|e| match e {
            e @ Error::Compute { .. } => e,
            e => Error::Compute { vertex, msg: e.to_string() },
        })?;
        if let Some(e) = ctx.error.take() {
            return Err(e);
        }
        if let Some(a) = aggregator {
            aggregate = (a.merge)(aggregate, ctx.take_local_aggregate());
        }
        report.messages += ctx.messages_sent;
        report.computed += 1;
        report.any_active |= v.active;
    }
    if let Incoming::Stream(s) = &mut incoming {
        if let Some(m) = s.peek()? {
            return Err(Error::UnknownVertex(m.target));
        }
        report.si = s.stats();
    }
    report.se = se.stats();
    report.aggregate = aggregate;
    Ok(report)
}
