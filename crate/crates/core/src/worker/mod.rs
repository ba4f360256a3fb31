//! The per-worker superstep engine.
//!
//! A worker runs three units. The compute unit streams the edge stream and
//! the incoming messages past the in-memory state array and appends the
//! messages it generates to one outgoing stream per destination. The send
//! unit ships closed files of those streams around a ring. The receive unit
//! sorts (or, in recoded mode, digests) what arrives, counts end tags and
//! runs the barrier that lets the senders move to the next superstep.

mod cluster;
mod compute;
mod ledger;
mod load;
mod receive;
mod send;
mod stats;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::thread;
use std::time::Instant;

pub use cluster::{run_job, JobOutput};
pub use load::{for_each_line_in_part, line_number_at, parse_line, ParsedVertex};
pub use receive::digest_incoming;
pub use send::CombineArray;
pub use stats::{StepStats, WorkerStats};

use crate::comm::{ControlPlane, ControlRecord, Transport};
use crate::error::{Error, Result};
use crate::memory::MemTracker;
use crate::model::codec::{from_bytes, to_bytes};
use crate::model::{AdjacencyItem, FixedCodec, JobConfig, MessageEnvelope, Mode, VertexId, VertexProgram, VertexState};
use crate::streams::{FileSignal, SplittableStream};

use compute::{compute_pass, OmsOutbox, PassEnv};
use ledger::{Ledger, StepInput};
use receive::Receiver;
use send::Sender;
use stats::StatsBook;

/// Where a job's graph comes from.
#[derive(Clone, Debug)]
pub enum GraphSource {
    /// A text graph in the shared store; every worker parses a part of it.
    Text(PathBuf),
    /// Recoded partitions already on each worker's local disk.
    Recoded { weighted: bool },
}

#[derive(Debug)]
pub struct WorkerOutput<V> {
    pub worker: usize,
    /// `(original id, value)` in state-array order.
    pub values: Vec<(VertexId, V)>,
    pub stats: WorkerStats,
}

fn aggregate_merge<P: VertexProgram>(program: &P) -> impl Fn(&[u8], &[u8]) -> Vec<u8> + Send + Sync + 'static {
    let agg = program.aggregator();
    move |a: &[u8], b: &[u8]| match agg {
        None => Vec::new(),
        Some(_) if a.is_empty() => b.to_vec(),
        Some(_) if b.is_empty() => a.to_vec(),
        Some(g) => {
            let x: P::Aggregate = P::Aggregate::decode(a);
            let y: P::Aggregate = P::Aggregate::decode(b);
            to_bytes(&(g.merge)(x, y))
        }
    }
}

/// Picks the most informative of several unit errors.
fn first_real_error(errors: impl IntoIterator<Item = Error>) -> Option<Error> {
    let mut fallback = None;
    for e in errors {
        if matches!(e, Error::Aborted(_)) {
            fallback.get_or_insert(e);
        } else {
            return Some(e);
        }
    }
    fallback
}

fn check_program<P: VertexProgram>(program: &P, cfg: &JobConfig) -> Result<()> {
    let largest = [VertexState::<P::Value>::SIZE, AdjacencyItem::<P::Edge>::SIZE, MessageEnvelope::<P::Message>::SIZE]
        .into_iter()
        .max()
        .unwrap();
    cfg.validate(largest)?;
    if cfg.mode == Mode::Recoded && program.combiner().and_then(|c| c.identity).is_none() {
        return Err(Error::Config(format!(
            "{} declares no combiner with an identity element; recoded mode needs one",
            program.name()
        )));
    }
    Ok(())
}

/// Runs worker `worker` of a job to completion. Every worker of the job must
/// be running this concurrently, connected through `transport`.
pub fn run_worker<P: VertexProgram>(
    program: &P,
    cfg: &JobConfig,
    worker: usize,
    transport: Arc<dyn Transport>,
    source: &GraphSource,
) -> Result<WorkerOutput<P::Value>> {
    let plane = ControlPlane::new(worker, cfg.num_workers, aggregate_merge(program));
    let result =
        check_program(program, cfg).and_then(|()| run_inner(program, cfg, worker, &*transport, &plane, source));
    match result {
        Ok(out) => {
            transport.close();
            Ok(out)
        }
        Err(e) => {
            let msg = e.to_string();
            plane.abort(&msg);
            transport.abort(&msg);
            Err(e)
        }
    }
}

fn run_inner<P: VertexProgram>(
    program: &P,
    cfg: &JobConfig,
    worker: usize,
    t: &dyn Transport,
    plane: &ControlPlane,
    source: &GraphSource,
) -> Result<WorkerOutput<P::Value>> {
    let n = cfg.num_workers;
    if t.num_workers() != n || t.worker() != worker {
        return Err(Error::Config(format!(
            "transport is worker {} of {}, job wants {worker} of {n}",
            t.worker(),
            t.num_workers()
        )));
    }
    let dir = cfg.worker_dir(worker);
    for sub in ["oms", "ims", "load", "load_runs", "send_runs"] {
        let _ = fs::remove_dir_all(dir.join(sub));
    }
    fs::create_dir_all(&dir).map_err(Error::at(&dir))?;
    let mem = MemTracker::new();
    let book = StatsBook::new();
    let load_start = Instant::now();

    let mut loaded = load::load_graph(program, cfg, worker, t, plane, source, &mem)?;
    let totals = loaded.totals.clone();
    if totals.vertices == 0 {
        return Err(Error::Precondition("the graph has no vertices".into()));
    }
    let load_ns = load_start.elapsed().as_nanos() as u64;
    let run_start = book.now();

    let signal = FileSignal::new();
    let ledger: Ledger<P::Message> = Ledger::new(signal.clone());
    let mut oms: Vec<SplittableStream> = (0..n)
        .map(|d| {
            SplittableStream::with_signal(
                dir.join("oms").join(d.to_string()),
                cfg.split_size,
                cfg.stream_buffer,
                &mem,
                Some(signal.clone()),
            )
        })
        .collect::<Result<_>>()?;
    let handles: Vec<_> = oms.iter().map(|s| s.handle()).collect();
    let combiner = program.combiner();
    let combine_array = match cfg.mode {
        Mode::Recoded => {
            Some(CombineArray::new(totals.max_vertices as usize, combiner.expect("checked in check_program"), &mem)?)
        }
        Mode::Normal => None,
    };
    let fail = |e: &Error| {
        let msg = e.to_string();
        ledger.fail(&msg);
        plane.abort(&msg);
        t.abort(&msg);
    };

    let mut sender = Sender {
        worker,
        n,
        mode: cfg.mode,
        transport: t,
        handles,
        ledger: &ledger,
        stats: &book,
        combiner,
        combine_array,
        run_dir: dir.join("send_runs"),
        fanin: cfg.merge_fanin,
        buffer: cfg.stream_buffer,
        max_batch: cfg.split_size,
        mem: mem.clone(),
    };
    let mut receiver = Receiver::new(
        worker,
        n,
        cfg.mode,
        t,
        plane,
        &ledger,
        &book,
        combiner,
        loaded.states.len(),
        dir.join("ims"),
        cfg.merge_fanin,
        cfg.stream_buffer,
        mem.clone(),
    );
    let stash = std::mem::take(&mut loaded.stash);

    let (compute_res, send_res, recv_res) = thread::scope(|sc| {
        let send_h = sc.spawn(|| {
            let r = sender.run();
            if let Err(e) = &r {
                fail(e);
            }
            r
        });
        let recv_h = sc.spawn(|| {
            let r = receiver.run(stash);
            if let Err(e) = &r {
                fail(e);
            }
            r
        });
        let c = compute_loop(program, cfg, worker, t, plane, &ledger, &book, &mut loaded, &totals, &mut oms, &mem);
        if let Err(e) = &c {
            fail(e);
        }
        (c, send_h.join().expect("send unit panicked"), recv_h.join().expect("receive unit panicked"))
    });
    let errors: Vec<Error> = [compute_res.err(), send_res.err(), recv_res.err()].into_iter().flatten().collect();
    if let Some(e) = first_real_error(errors) {
        return Err(e);
    }
    drop(oms);
    let violations = receiver.violations;
    drop(receiver);
    drop(sender);
    let finish_ns = book.now();
    let run_ns = finish_ns - run_start;

    let values: Vec<(VertexId, P::Value)> = loaded
        .states
        .iter()
        .enumerate()
        .map(|(pos, s)| (loaded.original.as_ref().map_or(s.id, |o| VertexId(o[pos])), s.value))
        .collect();
    if let Some(out) = &cfg.output_dir {
        dump_results(program, out, worker, &values)?;
    }
    let stats = WorkerStats {
        worker,
        vertices: loaded.states.len() as u64,
        edges: loaded.states.iter().map(|s| s.degree).sum(),
        total_vertices: totals.vertices,
        total_edges: totals.edges,
        max_vertices: totals.max_vertices,
        load_ns,
        run_ns,
        finish_ns,
        steps: book.into_steps(),
        peak_memory: mem.peak() as u64,
        state_bytes: loaded.states_mem.bytes() as u64,
        protocol_violations: violations,
        transport: t.stats(),
    };
    let _ = fs::remove_dir_all(dir.join("oms"));
    let _ = fs::remove_dir_all(dir.join("ims"));
    Ok(WorkerOutput { worker, values, stats })
}

#[allow(clippy::too_many_arguments)]
fn compute_loop<P: VertexProgram>(
    program: &P,
    cfg: &JobConfig,
    worker: usize,
    t: &dyn Transport,
    plane: &ControlPlane,
    ledger: &Ledger<P::Message>,
    book: &StatsBook,
    loaded: &mut load::Loaded<P::Value>,
    totals: &ControlRecord,
    oms: &mut [SplittableStream],
    mem: &MemTracker,
) -> Result<()> {
    let aggregator = program.aggregator();
    let mut aggregated = aggregator.map(|a| a.identity).unwrap_or_default();
    let mut step = 1;
    loop {
        let input = ledger.wait_compute(step)?;
        let si_path = match &input {
            StepInput::Ims(p) => Some(p.clone()),
            _ => None,
        };
        let start = book.now();
        let written_before: u64 = oms.iter().map(|s| s.stats().bytes_written).sum();
        let env = PassEnv {
            step,
            num_vertices: totals.vertices,
            num_workers: cfg.num_workers,
            worker,
            buffer: cfg.stream_buffer,
            mem,
        };
        let mut outbox = OmsOutbox { streams: &mut *oms, mode: cfg.mode };
        let report = compute_pass(
            program,
            &mut loaded.states,
            loaded.original.as_deref(),
            &loaded.se_path,
            input,
            aggregated,
            &mut outbox,
            &env,
        )?;
        let boundaries: Vec<u64> = oms.iter_mut().map(|s| s.seal()).collect::<Result<_>>()?;
        let end = book.now();
        let written: u64 = oms.iter().map(|s| s.stats().bytes_written).sum::<u64>() - written_before;
        book.update(step, |s| {
            s.computed = report.computed;
            s.messages_sent = report.messages;
            s.se_bytes = report.se_bytes;
            s.se_bytes_read = report.se.bytes_read;
            s.se_refills = report.se.refills;
            s.si_bytes = report.si_bytes;
            s.si_bytes_read = report.si.bytes_read;
            s.oms_bytes_written = written;
            s.compute_start_ns = start;
            s.compute_end_ns = end;
        });
        if let Some(p) = si_path {
            let _ = fs::remove_file(p);
        }
        ledger.finish_compute(step, boundaries);

        let local = ControlRecord {
            any_sent: report.messages > 0,
            any_active: report.any_active,
            messages: report.messages,
            aggregate: if aggregator.is_some() { to_bytes(&report.aggregate) } else { Vec::new() },
            ..Default::default()
        };
        let global = plane.allreduce(t, step, &local)?;
        if aggregator.is_some() {
            aggregated = from_bytes(&global.aggregate)?;
        }
        if global.terminates() {
            ledger.terminate_after(step);
            return Ok(());
        }
        if step >= cfg.max_supersteps {
            return Err(Error::Aborted(format!("no convergence within {} supersteps", cfg.max_supersteps)));
        }
        step += 1;
    }
}

/// Writes `id<TAB>value` lines to `out/part-<worker>`.
pub fn dump_results<P: VertexProgram>(
    program: &P,
    out: &std::path::Path,
    worker: usize,
    values: &[(VertexId, P::Value)],
) -> Result<()> {
    fs::create_dir_all(out).map_err(Error::at(out))?;
    let path = out.join(format!("part-{worker}"));
    let mut w = BufWriter::new(fs::File::create(&path).map_err(Error::at(&path))?);
    for (id, v) in values {
        writeln!(w, "{}\t{}", id, program.render_value(v)).map_err(Error::at(&path))?;
    }
    w.flush().map_err(Error::at(&path))?;
    Ok(())
}

/// Identity element of a program's combiner, if it has one.
pub fn identity_of<P: VertexProgram>(program: &P) -> Option<P::Message> {
    program.combiner().and_then(|c| c.identity)
}
