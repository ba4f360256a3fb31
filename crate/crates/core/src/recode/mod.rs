//! Rewrites vertex ids so that a vertex's id encodes its worker and its
//! position in that worker's state array: `new = n * pos + worker`.
//!
//! Recoding is itself a vertex program run in normal mode. For a directed
//! graph each vertex first asks its out-neighbors for their new ids (one
//! request per edge), every vertex answers each request, and each vertex
//! finally writes its recoded adjacency list. An undirected graph lists
//! every edge on both sides, so the requests are skipped and each vertex
//! announces its new id to its neighbors right away.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::memory::MemTracker;
use crate::model::{
    recoded_id, AdjacencyItem, Context, EdgeValue, FixedCodec, JobConfig, Mode, VertexId, VertexProgram, VertexState,
};
use crate::streams::{ReadStream, WriteStream};
use crate::worker::{run_job, GraphSource};

pub const STATE_FILE: &str = "A_rec.bin";
pub const EDGE_FILE: &str = "SE_rec.bin";

/// One entry of a recoded state file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RecodedVertex {
    pub new_id: u64,
    pub old_id: u64,
    pub degree: u64,
}

impl FixedCodec for RecodedVertex {
    const SIZE: usize = 24;

    fn encode(&self, out: &mut [u8]) {
        self.new_id.encode(&mut out[..8]);
        self.old_id.encode(&mut out[8..16]);
        self.degree.encode(&mut out[16..24]);
    }

    fn decode(bytes: &[u8]) -> Self {
        RecodedVertex {
            new_id: u64::decode(&bytes[..8]),
            old_id: u64::decode(&bytes[8..16]),
            degree: u64::decode(&bytes[16..24]),
        }
    }
}

struct Output<E> {
    states: WriteStream<RecodedVertex>,
    edges: WriteStream<AdjacencyItem<E>>,
}

/// The recoding job. Messages are `(old id, new id)` pairs; requests carry
/// the requester's old id and a zero.
struct Recode<E: EdgeValue> {
    directed: bool,
    dirs: Vec<PathBuf>,
    buffer: usize,
    outputs: Mutex<Vec<Option<Output<E>>>>,
}

impl<E: EdgeValue> Recode<E> {
    fn final_step(&self) -> u64 {
        if self.directed {
            3
        } else {
            2
        }
    }

    fn write(&self, worker: usize, v: RecodedVertex, items: &[AdjacencyItem<E>]) -> Result<()> {
        let mut outs = self.outputs.lock().unwrap();
        if outs[worker].is_none() {
            let mem = MemTracker::disabled();
            let dir = &self.dirs[worker];
            outs[worker] = Some(Output {
                states: WriteStream::create(dir.join(STATE_FILE), self.buffer, &mem)?,
                edges: WriteStream::create(dir.join(EDGE_FILE), self.buffer, &mem)?,
            });
        }
        let out = outs[worker].as_mut().unwrap();
        out.states.append(&v)?;
        for it in items {
            out.edges.append(it)?;
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        let mut outs = self.outputs.lock().unwrap();
        for (w, out) in outs.iter_mut().enumerate() {
            match out.take() {
                Some(o) => {
                    o.states.finish()?;
                    o.edges.finish()?;
                }
                None => {
                    // a worker that owns no vertex still gets (empty) files
                    let dir = &self.dirs[w];
                    fs::write(dir.join(STATE_FILE), []).map_err(Error::at(dir))?;
                    fs::write(dir.join(EDGE_FILE), []).map_err(Error::at(dir))?;
                }
            }
        }
        Ok(())
    }
}

impl<E: EdgeValue> VertexProgram for Recode<E> {
    type Value = ();
    type Edge = E;
    type Message = (u64, u64);
    type Aggregate = ();

    fn name(&self) -> &str {
        "recode"
    }

    fn compute(
        &self,
        v: &mut VertexState<()>,
        adj: &[AdjacencyItem<E>],
        msgs: &[(u64, u64)],
        ctx: &mut Context<'_, (u64, u64), ()>,
    ) -> Result<()> {
        let step = ctx.superstep();
        let me = v.id.0;
        let new = recoded_id(ctx.position, ctx.worker(), ctx.num_workers()).0;
        let first = if self.directed { 2 } else { 1 };
        if self.directed && step == 1 {
            for a in adj {
                ctx.send(a.neighbor, (me, 0));
            }
        } else if step == first {
            if self.directed {
                for &(requester, _) in msgs {
                    ctx.send(VertexId(requester), (me, new));
                }
            } else {
                for a in adj {
                    ctx.send(a.neighbor, (me, new));
                }
            }
        } else if step == self.final_step() {
            let mut replies: BTreeMap<u64, u64> = BTreeMap::new();
            for &(old, new) in msgs {
                replies.insert(old, new);
            }
            let items = adj
                .iter()
                .map(|a| {
                    let n = replies.get(&a.neighbor.0).ok_or(Error::DanglingNeighbor(a.neighbor))?;
                    Ok(AdjacencyItem { neighbor: VertexId(*n), weight: a.weight })
                })
                .collect::<Result<Vec<_>>>()?;
            self.write(ctx.worker(), RecodedVertex { new_id: new, old_id: me, degree: v.degree }, &items)?;
            v.vote_to_halt();
        }
        Ok(())
    }
}

#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct RecodeReport {
    pub vertices: u64,
    pub arcs: u64,
    /// Messages exchanged by the recoding job.
    pub messages: u64,
    pub supersteps: u64,
    pub wall: Duration,
    /// Slowest worker's graph loading time inside the job, for comparison.
    pub load: Duration,
}

/// Recodes the text graph at `input` onto the local disks of `cfg`'s
/// workers. The job always runs in normal mode.
pub fn recode_graph(cfg: &JobConfig, input: &Path, directed: bool, weighted: bool) -> Result<RecodeReport> {
    let mut cfg = cfg.clone().with_mode(Mode::Normal);
    cfg.output_dir = None;
    let start = Instant::now();
    let (stats, supersteps, load) =
        if weighted { recode_with::<f64>(&cfg, input, directed)? } else { recode_with::<()>(&cfg, input, directed)? };
    Ok(RecodeReport { vertices: stats.0, arcs: stats.1, messages: stats.2, supersteps, wall: start.elapsed(), load })
}

fn recode_with<E: EdgeValue>(
    cfg: &JobConfig,
    input: &Path,
    directed: bool,
) -> Result<((u64, u64, u64), u64, Duration)> {
    let n = cfg.num_workers;
    let dirs: Vec<PathBuf> = (0..n).map(|w| cfg.worker_dir(w)).collect();
    for d in &dirs {
        fs::create_dir_all(d).map_err(Error::at(d))?;
        let _ = fs::remove_file(d.join(STATE_FILE));
        let _ = fs::remove_file(d.join(EDGE_FILE));
    }
    let program = Arc::new(Recode::<E> {
        directed,
        dirs,
        buffer: cfg.stream_buffer,
        outputs: Mutex::new((0..n).map(|_| None).collect()),
    });
    let out = run_job(program.clone(), cfg, &GraphSource::Text(input.to_path_buf())).map_err(|e| match e {
        Error::UnknownVertex(v) => Error::DanglingNeighbor(v),
        e => e,
    })?;
    program.finish()?;
    let w0 = &out.workers[0];
    let messages = out.workers.iter().flat_map(|w| &w.steps).map(|s| s.messages_sent).sum();
    let load = Duration::from_nanos(out.workers.iter().map(|w| w.load_ns).max().unwrap_or(0));
    Ok(((w0.total_vertices, w0.total_edges, messages), out.supersteps() as u64, load))
}

/// Reads worker `worker`'s recoded state file.
pub fn read_states(cfg: &JobConfig, worker: usize) -> Result<Vec<RecodedVertex>> {
    let path = cfg.worker_dir(worker).join(STATE_FILE);
    let mut r = ReadStream::<RecodedVertex>::open(&path, cfg.stream_buffer, &MemTracker::disabled())?;
    r.read_items(r.len())
}

/// Old id to new id, across all workers.
pub fn read_mapping(cfg: &JobConfig) -> Result<BTreeMap<u64, u64>> {
    let mut map = BTreeMap::new();
    for w in 0..cfg.num_workers {
        for v in read_states(cfg, w)? {
            map.insert(v.old_id, v.new_id);
        }
    }
    Ok(map)
}

/// Recoded adjacency lists keyed by new id, for checking.
pub fn read_recoded<E: EdgeValue>(cfg: &JobConfig) -> Result<BTreeMap<u64, Vec<AdjacencyItem<E>>>> {
    let mut lists = BTreeMap::new();
    for w in 0..cfg.num_workers {
        let path = cfg.worker_dir(w).join(EDGE_FILE);
        let mut r = ReadStream::<AdjacencyItem<E>>::open(&path, cfg.stream_buffer, &MemTracker::disabled())?;
        for v in read_states(cfg, w)? {
            lists.insert(v.new_id, r.read_items(v.degree)?);
        }
        if r.remaining() != 0 {
            return Err(Error::Corruption(format!("{} has trailing items", path.display())));
        }
    }
    Ok(lists)
}
