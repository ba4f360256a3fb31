//! Graph loading: every worker parses a byte range of the text input and
//! routes each vertex, with its adjacency list, to its owner. The owner sorts
//! what it receives into runs, merges them, and splits the result into the
//! state array `A` and the edge stream `S^E`.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom};
use std::path::{Path, PathBuf};
use std::thread;

use crate::comm::{Batch, BatchKind, ControlPlane, ControlRecord, Transport};
use crate::error::{Error, Result};
use crate::memory::{MemTracker, Reservation};
use crate::model::{
    hash_partition, AdjacencyItem, EdgeValue, FixedCodec, JobConfig, Mode, VertexId, VertexProgram, VertexState,
};
use crate::recode::RecodedVertex;
use crate::streams::{
    merge_runs_with, ByteWriter, Grouping, ReadStream, RunFormat, RunReader, RunWriter, SplittableStream, WriteStream,
};

use super::GraphSource;

/// One parsed input line.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedVertex {
    pub id: u64,
    pub neighbors: Vec<(u64, Option<f64>)>,
}

/// Parses `id<TAB>degree nbr [w] nbr [w] ...`. A line carries weights iff
/// it has `2 * degree` tokens after the degree.
pub fn parse_line(line: &str) -> std::result::Result<ParsedVertex, String> {
    let (id, rest) = line.split_once('\t').ok_or("expected `id<TAB>degree ...`")?;
    let id: u64 = id.trim().parse().map_err(|_| format!("bad vertex id `{}`", id.trim()))?;
    let mut toks = rest.split_ascii_whitespace();
    let degree_tok = toks.next().ok_or("missing degree field")?;
    let degree: usize = degree_tok.parse().map_err(|_| format!("bad degree `{degree_tok}`"))?;
    let toks: Vec<&str> = toks.collect();
    let weighted = if toks.len() == degree {
        false
    } else if toks.len() == 2 * degree {
        true
    } else {
        return Err(format!("degree {degree} but {} neighbor tokens", toks.len()));
    };
    let nbr = |t: &str| t.parse::<u64>().map_err(|_| format!("bad neighbor id `{t}`"));
    let neighbors = if weighted {
        toks.chunks_exact(2)
            .map(|p| Ok((nbr(p[0])?, Some(p[1].parse::<f64>().map_err(|_| format!("bad weight `{}`", p[1]))?))))
            .collect::<std::result::Result<_, String>>()?
    } else {
        toks.iter().map(|t| Ok((nbr(t)?, None))).collect::<std::result::Result<_, String>>()?
    };
    Ok(ParsedVertex { id, neighbors })
}

/// 1-based number of the line starting at byte `offset`.
pub fn line_number_at(path: &Path, offset: u64) -> Result<u64> {
    let mut f = BufReader::new(File::open(path).map_err(Error::at(path))?).take(offset);
    let mut buf = [0u8; 64 * 1024];
    let mut lines = 1;
    loop {
        let k = f.read(&mut buf).map_err(Error::at(path))?;
        if k == 0 {
            return Ok(lines);
        }
        lines += buf[..k].iter().filter(|&&c| c == b'\n').count() as u64;
    }
}

/// Calls `f(offset, line)` for every line whose first byte lies in part
/// `part` of `parts` equal byte ranges of the file.
pub fn for_each_line_in_part(
    path: &Path,
    part: usize,
    parts: usize,
    mut f: impl FnMut(u64, &str) -> Result<()>,
) -> Result<()> {
    let file = File::open(path).map_err(Error::at(path))?;
    let len = file.metadata().map_err(Error::at(path))?.len();
    let start = len * part as u64 / parts as u64;
    let end = len * (part as u64 + 1) / parts as u64;
    let mut r = BufReader::with_capacity(64 * 1024, file);
    let mut buf = Vec::new();
    let mut pos = start;
    if start > 0 {
        // finish the line that straddles `start`; it belongs to the previous part
        r.seek(SeekFrom::Start(start - 1)).map_err(Error::at(path))?;
        pos = start - 1 + r.read_until(b'\n', &mut buf).map_err(Error::at(path))? as u64;
    }
    while pos < end {
        buf.clear();
        let k = r.read_until(b'\n', &mut buf).map_err(Error::at(path))?;
        if k == 0 {
            break;
        }
        let line = std::str::from_utf8(&buf).map_err(|_| Error::Parse {
            line: line_number_at(path, pos).unwrap_or(0),
            msg: "not valid UTF-8".into(),
        })?;
        let line = line.trim_end_matches(['\n', '\r']);
        if !line.trim().is_empty() {
            f(pos, line)?;
        }
        pos += k as u64;
    }
    Ok(())
}

/// Frame of one vertex in transit: `id | degree | items`.
pub(crate) fn frame_len(degree: u64, item_size: usize) -> usize {
    16 + degree as usize * item_size
}

fn frame_header(buf: &[u8]) -> (u64, u64) {
    (u64::from_le_bytes(buf[..8].try_into().unwrap()), u64::from_le_bytes(buf[8..16].try_into().unwrap()))
}

/// Sorted runs of vertex frames.
struct FrameRuns {
    item_size: usize,
    buffer: usize,
    mem: MemTracker,
}

struct FrameReader {
    r: BufReader<File>,
    item_size: usize,
    read: u64,
    _mem: Reservation,
}

impl RunReader<Vec<u8>> for FrameReader {
    fn next_item(&mut self) -> Result<Option<Vec<u8>>> {
        let mut head = [0u8; 16];
        match self.r.read_exact(&mut head) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
            Err(e) => return Err(e.into()),
        }
        let (_, degree) = frame_header(&head);
        let mut frame = vec![0u8; frame_len(degree, self.item_size)];
        frame[..16].copy_from_slice(&head);
        self.r.read_exact(&mut frame[16..]).map_err(|e| Error::Corruption(format!("truncated vertex frame: {e}")))?;
        self.read += frame.len() as u64;
        Ok(Some(frame))
    }

    fn bytes_read(&self) -> u64 {
        self.read
    }
}

impl RunWriter<Vec<u8>> for ByteWriter {
    fn write_item(&mut self, item: &Vec<u8>) -> Result<()> {
        self.write_bytes(item)
    }
    fn finish(self) -> Result<u64> {
        ByteWriter::finish(self)
    }
}

impl RunFormat for FrameRuns {
    type Item = Vec<u8>;
    type Reader = FrameReader;
    type Writer = ByteWriter;

    fn open(&self, path: &Path) -> Result<FrameReader> {
        let f = File::open(path).map_err(Error::at(path))?;
        Ok(FrameReader {
            r: BufReader::with_capacity(self.buffer, f),
            item_size: self.item_size,
            read: 0,
            _mem: self.mem.reserve(self.buffer),
        })
    }

    fn create(&self, path: &Path) -> Result<ByteWriter> {
        ByteWriter::create(path, self.buffer, &self.mem)
    }

    fn key(item: &Vec<u8>) -> u64 {
        frame_header(item).0
    }
}

/// Splits a DATA payload into frames, sorted by vertex id.
fn sorted_frames(payload: &[u8], item_size: usize) -> Result<Vec<&[u8]>> {
    let mut frames = Vec::new();
    let mut off = 0;
    while off < payload.len() {
        if payload.len() - off < 16 {
            return Err(Error::Framing { needed: 16, got: payload.len() - off });
        }
        let (_, degree) = frame_header(&payload[off..]);
        let len = frame_len(degree, item_size);
        if payload.len() - off < len {
            return Err(Error::Framing { needed: len, got: payload.len() - off });
        }
        frames.push(&payload[off..off + len]);
        off += len;
    }
    frames.sort_by_key(|f| frame_header(f).0);
    Ok(frames)
}

pub(crate) struct Loaded<V> {
    pub states: Vec<VertexState<V>>,
    pub states_mem: Reservation,
    /// Ids before recoding, parallel to `states`; `None` when ids are original.
    pub original: Option<Vec<u64>>,
    pub se_path: PathBuf,
    pub totals: ControlRecord,
    /// Batches of superstep 1 that arrived while loading finished.
    pub stash: Vec<(usize, Batch)>,
}

fn check_dense<V>(states: &[VertexState<V>], worker: usize, n: usize) -> Result<()> {
    for (pos, s) in states.iter().enumerate() {
        if s.id.0 != (n * pos + worker) as u64 {
            return Err(Error::Precondition(format!(
                "recoded mode needs id n*pos+worker at each position; worker {worker} has id {} at position {pos}",
                s.id
            )));
        }
    }
    Ok(())
}

/// Parses this worker's part of the input into per-destination splittable
/// streams, then ships every file and an end tag to each destination.
fn scatter_text<P: VertexProgram>(
    program: &P,
    cfg: &JobConfig,
    worker: usize,
    t: &dyn Transport,
    path: &Path,
    mem: &MemTracker,
) -> Result<()> {
    let n = cfg.num_workers;
    let item_size = AdjacencyItem::<P::Edge>::SIZE;
    let dir = cfg.worker_dir(worker).join("load");
    let mut out: Vec<SplittableStream> = (0..n)
        .map(|d| SplittableStream::create(dir.join(d.to_string()), cfg.split_size, cfg.stream_buffer, mem))
        .collect::<Result<_>>()?;
    let mut items = Vec::new();
    for_each_line_in_part(path, worker, n, |offset, line| {
        let line_err = |msg: String| Error::Parse { line: line_number_at(path, offset).unwrap_or(0), msg };
        let v = parse_line(line).map_err(line_err)?;
        items.clear();
        for &(nbr, w) in &v.neighbors {
            let edge = P::Edge::from_weight(w).map_err(|e| line_err(e.to_string()))?;
            program.validate_edge(&edge).map_err(|e| line_err(e.to_string()))?;
            items.push(AdjacencyItem { neighbor: VertexId(nbr), weight: edge });
        }
        let dest = hash_partition(VertexId(v.id), n, cfg.mode);
        let degree = items.len() as u64;
        out[dest].append_with(frame_len(degree, item_size), |buf| {
            buf[..8].copy_from_slice(&v.id.to_le_bytes());
            buf[8..16].copy_from_slice(&degree.to_le_bytes());
            for (it, chunk) in items.iter().zip(buf[16..].chunks_exact_mut(item_size)) {
                it.encode(chunk);
            }
        })
    })?;
    let handles: Vec<_> = out.iter().map(|s| s.handle()).collect();
    let limits: Vec<u64> = out.iter_mut().map(|s| s.seal()).collect::<Result<_>>()?;
    drop(out);
    // one file per destination in turn, starting after ourselves
    let mut pending = true;
    while pending {
        pending = false;
        for off in 1..=n {
            let d = (worker + off) % n;
            if let Some(f) = handles[d].fetch_next_upto(limits[d]) {
                let bytes = f.read()?;
                let _held = mem.reserve(bytes.len());
                f.remove()?;
                t.send(d, Batch::data(0, bytes))?;
                pending = true;
            }
        }
    }
    for off in 1..=n {
        t.send((worker + off) % n, Batch::end_tag(0))?;
    }
    let _ = fs::remove_dir_all(&dir);
    Ok(())
}

/// States, original ids and the edge stream of a recoded partition.
type RecodedPartition<V> = (Vec<VertexState<V>>, Vec<u64>, PathBuf);

/// Reads a recoded partition, converting edges to the program's layout.
fn load_recoded<P: VertexProgram>(
    cfg: &JobConfig,
    worker: usize,
    weighted: bool,
    mem: &MemTracker,
) -> Result<RecodedPartition<P::Value>> {
    let dir = cfg.worker_dir(worker);
    let a_path = dir.join("A_rec.bin");
    let mut r = ReadStream::<RecodedVertex>::open(&a_path, cfg.stream_buffer, mem)?;
    let count = r.len();
    let mut states = Vec::with_capacity(count as usize);
    let mut original = Vec::with_capacity(count as usize);
    while let Some(v) = r.next_item()? {
        states.push(VertexState::new(VertexId(v.new_id), v.degree));
        original.push(v.old_id);
    }
    check_dense(&states, worker, cfg.num_workers)?;
    let se_rec = dir.join("SE_rec.bin");
    if weighted == P::Edge::WEIGHTED {
        return Ok((states, original, se_rec));
    }
    let se = dir.join("SE.bin");
    let mut w = WriteStream::<AdjacencyItem<P::Edge>>::create(&se, cfg.stream_buffer, mem)?;
    let mut convert = |nbr: u64, weight: Option<f64>| -> Result<()> {
        w.append(&AdjacencyItem { neighbor: VertexId(nbr), weight: P::Edge::from_weight(weight)? })
    };
    if weighted {
        let mut r = ReadStream::<AdjacencyItem<f64>>::open(&se_rec, cfg.stream_buffer, mem)?;
        while let Some(it) = r.next_item()? {
            convert(it.neighbor.0, Some(it.weight))?;
        }
    } else {
        let mut r = ReadStream::<AdjacencyItem<()>>::open(&se_rec, cfg.stream_buffer, mem)?;
        while let Some(it) = r.next_item()? {
            convert(it.neighbor.0, None)?;
        }
    }
    w.finish()?;
    Ok((states, original, se))
}

/// Superstep 0: distributes the graph and agrees on `|V|` and `|E|`.
pub(crate) fn load_graph<P: VertexProgram>(
    program: &P,
    cfg: &JobConfig,
    worker: usize,
    t: &dyn Transport,
    plane: &ControlPlane,
    source: &GraphSource,
    mem: &MemTracker,
) -> Result<Loaded<P::Value>> {
    let n = cfg.num_workers;
    let dir = cfg.worker_dir(worker);
    let item_size = AdjacencyItem::<P::Edge>::SIZE;
    let runs_dir = dir.join("load_runs");
    fs::create_dir_all(&runs_dir).map_err(Error::at(&runs_dir))?;

    let mut runs = Vec::new();
    let mut stash = Vec::new();
    let mut tags = 0;
    let mut receive = || -> Result<()> {
        while tags < n {
            let (from, b) = t.recv()?.ok_or_else(|| Error::Transport("channels closed while loading".into()))?;
            match b.kind {
                BatchKind::Control => {
                    plane.handle(t, from, &b)?;
                }
                _ if b.superstep != 0 => {
                    return Err(Error::Protocol(format!("step {} batch from {from} during load", b.superstep)))
                }
                BatchKind::EndTag => tags += 1,
                BatchKind::Data => {
                    let _held = mem.reserve(b.payload.len());
                    let frames = sorted_frames(&b.payload, item_size)?;
                    let _index = mem.reserve(frames.len() * std::mem::size_of::<&[u8]>());
                    let path = runs_dir.join(format!("run-{}", runs.len()));
                    let mut w = ByteWriter::create(&path, cfg.stream_buffer, mem)?;
                    for f in frames {
                        w.write_bytes(f)?;
                    }
                    w.finish()?;
                    runs.push(path);
                }
            }
        }
        Ok(())
    };

    let (states, original, se_path) = match source {
        GraphSource::Text(path) => {
            let recv_result = thread::scope(|sc| {
                let sender = sc.spawn(|| {
                    let r = scatter_text(program, cfg, worker, t, path, mem);
                    if let Err(e) = &r {
                        t.abort(&e.to_string());
                    }
                    r
                });
                let r = receive();
                if r.is_err() {
                    t.abort("load failed");
                }
                let s = sender.join().expect("loader thread panicked");
                // the sender's own error explains a receive-side abort
                s.and(r)
            });
            recv_result?;
            let a_path = dir.join("A.bin");
            let se_path = dir.join("SE.bin");
            let mut a = WriteStream::<VertexState<P::Value>>::create(&a_path, cfg.stream_buffer, mem)?;
            let mut se = ByteWriter::create(&se_path, cfg.stream_buffer, mem)?;
            let format = FrameRuns { item_size, buffer: cfg.stream_buffer, mem: mem.clone() };
            merge_runs_with(&format, runs, cfg.merge_fanin, Grouping::Reject, &runs_dir, |frame| {
                let (id, degree) = frame_header(&frame);
                a.append(&VertexState::new(VertexId(id), degree))?;
                se.write_bytes(&frame[16..])
            })?;
            a.finish()?;
            se.finish()?;
            let mut r = ReadStream::<VertexState<P::Value>>::open(&a_path, cfg.stream_buffer, mem)?;
            let len = r.len();
            let states = r.read_items(len)?;
            if cfg.mode == Mode::Recoded {
                check_dense(&states, worker, n)?;
            }
            (states, None, se_path)
        }
        GraphSource::Recoded { weighted } => {
            let (states, original, se) = load_recoded::<P>(cfg, worker, *weighted, mem)?;
            for off in 1..=n {
                t.send((worker + off) % n, Batch::end_tag(0))?;
            }
            receive()?;
            (states, Some(original), se)
        }
    };
    let _ = fs::remove_dir_all(&runs_dir);

    let edges: u64 = states.iter().map(|s| s.degree).sum();
    let local =
        ControlRecord { vertices: states.len() as u64, max_vertices: states.len() as u64, edges, ..Default::default() };
    plane.contribute(t, 0, &local)?;
    while plane.result(0).is_none() {
        let (from, b) = t.recv()?.ok_or_else(|| Error::Transport("channels closed while loading".into()))?;
        if b.kind == BatchKind::Control {
            plane.handle(t, from, &b)?;
        } else {
            stash.push((from, b));
        }
    }
    let states_bytes = states.len() * VertexState::<P::Value>::SIZE + original.as_ref().map_or(0, |o| o.len() * 8);
    Ok(Loaded {
        states,
        states_mem: mem.reserve(states_bytes),
        original,
        se_path,
        totals: plane.result(0).unwrap(),
        stash,
    })
}
