//! k-way external merge of sorted runs, with optional grouped folding.
//!
//! At most `k` runs are merged at a time; with `r` input runs the data is
//! passed over `ceil(log_k r)` times. Each merge keeps `k` read buffers and
//! one write buffer resident. Ties on the key are broken by run index, so
//! merging without a fold is stable.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use super::read::ReadStream;
use super::write::WriteStream;
use crate::error::{Error, Result};
use crate::memory::MemTracker;
use crate::model::{Combiner, FixedCodec, MessageEnvelope, Payload};

/// Source of items from one sorted run.
pub trait RunReader<T> {
    fn next_item(&mut self) -> Result<Option<T>>;
    fn bytes_read(&self) -> u64;
}

/// Sink for a merged run.
pub trait RunWriter<T> {
    fn write_item(&mut self, item: &T) -> Result<()>;
    fn finish(self) -> Result<u64>;
}

/// How runs of a given item type live on disk.
pub trait RunFormat {
    type Item;
    type Reader: RunReader<Self::Item>;
    type Writer: RunWriter<Self::Item>;

    fn open(&self, path: &Path) -> Result<Self::Reader>;
    fn create(&self, path: &Path) -> Result<Self::Writer>;
    fn key(item: &Self::Item) -> u64;
}

/// What to do with consecutive items sharing a key.
pub enum Grouping<'a, T> {
    /// Keep all of them, in run order.
    Keep,
    /// Fold them into one item.
    Fold(&'a dyn Fn(&mut T, T)),
    /// Equal keys are an error.
    Reject,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MergeReport {
    pub runs: usize,
    pub passes: u32,
    pub items_out: u64,
    pub bytes_read: u64,
}

/// Number of merge passes needed for `runs` runs at fan-in `k`.
pub fn merge_passes(runs: usize, k: usize) -> u32 {
    let mut passes = 0;
    let mut r = runs;
    while r > 1 {
        r = r.div_ceil(k);
        passes += 1;
    }
    passes
}

struct Cursor<R, T> {
    reader: R,
    head: Option<T>,
    last_key: u64,
    run: usize,
}

impl<R: RunReader<T>, T> Cursor<R, T> {
    fn advance<F: RunFormat<Item = T>>(&mut self, path: &Path) -> Result<()> {
        self.head = self.reader.next_item()?;
        if let Some(h) = &self.head {
            let k = F::key(h);
            if k < self.last_key {
                return Err(Error::Precondition(format!(
                    "run {} is not sorted: key {} after {}",
                    path.display(),
                    k,
                    self.last_key
                )));
            }
            self.last_key = k;
        }
        Ok(())
    }
}

/// Merges `inputs` in one pass, feeding the output to `sink`.
fn merge_once<F, S>(
    format: &F,
    inputs: &[PathBuf],
    grouping: &Grouping<'_, F::Item>,
    mut sink: S,
) -> Result<MergeReport>
where
    F: RunFormat,
    S: FnMut(F::Item) -> Result<()>,
{
    let mut cursors = Vec::with_capacity(inputs.len());
    for (run, path) in inputs.iter().enumerate() {
        let mut c = Cursor { reader: format.open(path)?, head: None, last_key: 0, run };
        c.advance::<F>(path)?;
        cursors.push(c);
    }
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> =
        cursors.iter().filter_map(|c| c.head.as_ref().map(|h| Reverse((F::key(h), c.run)))).collect();

    let mut report = MergeReport { runs: inputs.len(), passes: 1, ..Default::default() };
    let mut pending: Option<F::Item> = None;
    while let Some(Reverse((key, run))) = heap.pop() {
        let c = &mut cursors[run];
        let item = c.head.take().unwrap();
        c.advance::<F>(&inputs[run])?;
        if let Some(h) = &c.head {
            heap.push(Reverse((F::key(h), run)));
        }
        match (&mut pending, grouping) {
            (Some(p), Grouping::Fold(f)) if F::key(p) == key => f(p, item),
            (Some(p), Grouping::Reject) if F::key(p) == key => {
                return Err(Error::DuplicateVertex(key.into()));
            }
            _ => {
                if let Some(done) = pending.replace(item) {
                    report.items_out += 1;
                    sink(done)?;
                }
            }
        }
    }
    if let Some(done) = pending {
        report.items_out += 1;
        sink(done)?;
    }
    report.bytes_read = cursors.iter().map(|c| c.reader.bytes_read()).sum();
    Ok(report)
}

/// Reduces `runs` to at most `k` by merging groups of `k` into files under
/// `tmp_dir`. Input runs are deleted. Returns the remaining runs.
fn reduce_runs<F: RunFormat>(
    format: &F,
    mut runs: Vec<PathBuf>,
    k: usize,
    grouping: &Grouping<'_, F::Item>,
    tmp_dir: &Path,
    report: &mut MergeReport,
) -> Result<Vec<PathBuf>> {
    let mut level = 0;
    while runs.len() > k {
        let mut next = Vec::with_capacity(runs.len().div_ceil(k));
        for (i, group) in runs.chunks(k).enumerate() {
            let out = tmp_dir.join(format!("merge-{level}-{i}"));
            let mut w = format.create(&out)?;
            let r = merge_once(format, group, grouping, |item| w.write_item(&item))?;
            w.finish()?;
            report.bytes_read += r.bytes_read;
            for p in group {
                fs::remove_file(p).map_err(Error::at(p))?;
            }
            next.push(out);
        }
        report.passes += 1;
        runs = next;
        level += 1;
    }
    Ok(runs)
}

/// Merges sorted runs (deleting them) and streams the result to `sink`.
pub fn merge_runs_with<F, S>(
    format: &F,
    runs: Vec<PathBuf>,
    k: usize,
    grouping: Grouping<'_, F::Item>,
    tmp_dir: &Path,
    sink: S,
) -> Result<MergeReport>
where
    F: RunFormat,
    S: FnMut(F::Item) -> Result<()>,
{
    if k < 2 {
        return Err(Error::Config("merge fan-in must be at least 2".into()));
    }
    let mut report = MergeReport { runs: runs.len(), ..Default::default() };
    if runs.is_empty() {
        return Ok(report);
    }
    let runs = reduce_runs(format, runs, k, &grouping, tmp_dir, &mut report)?;
    let last = merge_once(format, &runs, &grouping, sink)?;
    for p in &runs {
        fs::remove_file(p).map_err(Error::at(p))?;
    }
    report.passes += 1;
    report.items_out = last.items_out;
    report.bytes_read += last.bytes_read;
    Ok(report)
}

/// Merges sorted runs (deleting them) into the file `output`.
///
/// A single run with `Grouping::Keep` is renamed, costing no pass.
pub fn merge_runs_to_file<F: RunFormat>(
    format: &F,
    runs: Vec<PathBuf>,
    k: usize,
    grouping: Grouping<'_, F::Item>,
    tmp_dir: &Path,
    output: &Path,
) -> Result<MergeReport> {
    if runs.is_empty() {
        format.create(output)?.finish()?;
        return Ok(MergeReport::default());
    }
    if runs.len() == 1 && matches!(grouping, Grouping::Keep) {
        fs::rename(&runs[0], output).map_err(Error::at(output))?;
        return Ok(MergeReport { runs: 1, ..Default::default() });
    }
    if k < 2 {
        return Err(Error::Config("merge fan-in must be at least 2".into()));
    }
    let mut report = MergeReport { runs: runs.len(), ..Default::default() };
    // reduce first so the output buffer is not resident during early passes
    let runs = reduce_runs(format, runs, k, &grouping, tmp_dir, &mut report)?;
    let mut w = format.create(output)?;
    let last = merge_once(format, &runs, &grouping, |item| w.write_item(&item))?;
    w.finish()?;
    for p in &runs {
        fs::remove_file(p).map_err(Error::at(p))?;
    }
    report.passes += 1;
    report.items_out = last.items_out;
    report.bytes_read += last.bytes_read;
    Ok(report)
}

/// Items with a sort key.
pub trait Keyed {
    fn key(&self) -> u64;
}

impl<M> Keyed for MessageEnvelope<M> {
    #[inline]
    fn key(&self) -> u64 {
        self.target.0
    }
}

impl Keyed for u64 {
    fn key(&self) -> u64 {
        *self
    }
}

/// Runs of fixed-size records read and written through the buffered streams.
pub struct FixedRuns<T> {
    buffer_bytes: usize,
    mem: MemTracker,
    _item: PhantomData<T>,
}

impl<T> FixedRuns<T> {
    pub fn new(buffer_bytes: usize, mem: &MemTracker) -> Self {
        FixedRuns { buffer_bytes, mem: mem.clone(), _item: PhantomData }
    }
}

impl<T: FixedCodec> RunReader<T> for ReadStream<T> {
    fn next_item(&mut self) -> Result<Option<T>> {
        ReadStream::next_item(self)
    }
    fn bytes_read(&self) -> u64 {
        self.stats().bytes_read
    }
}

impl<T: FixedCodec> RunWriter<T> for WriteStream<T> {
    fn write_item(&mut self, item: &T) -> Result<()> {
        self.append(item)
    }
    fn finish(self) -> Result<u64> {
        WriteStream::finish(self)
    }
}

impl<T: FixedCodec + Keyed> RunFormat for FixedRuns<T> {
    type Item = T;
    type Reader = ReadStream<T>;
    type Writer = WriteStream<T>;

    fn open(&self, path: &Path) -> Result<Self::Reader> {
        ReadStream::open(path, self.buffer_bytes, &self.mem)
    }
    fn create(&self, path: &Path) -> Result<Self::Writer> {
        WriteStream::create(path, self.buffer_bytes, &self.mem)
    }
    fn key(item: &T) -> u64 {
        item.key()
    }
}

/// Merges message runs sorted by target into `output`. With a combiner,
/// every target appears once, carrying the fold of its group.
pub fn kway_merge<M: Payload>(
    runs: Vec<PathBuf>,
    k: usize,
    combiner: Option<Combiner<M>>,
    output: &Path,
    tmp_dir: &Path,
    buffer_bytes: usize,
    mem: &MemTracker,
) -> Result<MergeReport> {
    let format = FixedRuns::<MessageEnvelope<M>>::new(buffer_bytes, mem);
    match combiner {
        Some(c) => {
            let fold = move |acc: &mut MessageEnvelope<M>, next: MessageEnvelope<M>| {
                acc.payload = c.apply(acc.payload, next.payload)
            };
            merge_runs_to_file(&format, runs, k, Grouping::Fold(&fold), tmp_dir, output)
        }
        None => merge_runs_to_file(&format, runs, k, Grouping::Keep, tmp_dir, output),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VertexId;
    use rand::{Rng, SeedableRng};

    fn write_run(path: &Path, items: &[(u64, f64)]) -> PathBuf {
        let mut w = WriteStream::<MessageEnvelope<f64>>::create(path, 256, &MemTracker::disabled()).unwrap();
        for &(t, p) in items {
            w.append(&MessageEnvelope::new(t, p)).unwrap();
        }
        w.finish().unwrap();
        path.to_path_buf()
    }

    fn read_all(path: &Path) -> Vec<MessageEnvelope<f64>> {
        let mut r = ReadStream::<MessageEnvelope<f64>>::open(path, 256, &MemTracker::disabled()).unwrap();
        let n = r.len();
        r.read_items(n).unwrap()
    }

    #[test]
    fn pass_count() {
        assert_eq!(merge_passes(0, 1000), 0);
        assert_eq!(merge_passes(1, 1000), 0);
        assert_eq!(merge_passes(1000, 1000), 1);
        assert_eq!(merge_passes(2500, 1000), 2);
        assert_eq!(merge_passes(9, 3), 2);
        assert_eq!(merge_passes(10, 3), 3);
    }

    #[test]
    fn sum_combiner_hand_example() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let runs = vec![
            write_run(&d.join("a"), &[(1, 1.5)]),
            write_run(&d.join("b"), &[(1, 2.0)]),
            write_run(&d.join("c"), &[(2, 4.0)]),
        ];
        let out = d.join("out");
        let mem = MemTracker::disabled();
        let r = kway_merge(runs, 1000, Some(Combiner::sum_f64()), &out, d, 256, &mem).unwrap();
        assert_eq!(r.passes, 1);
        assert_eq!(read_all(&out), vec![MessageEnvelope::new(1, 3.5), MessageEnvelope::new(2, 4.0)]);
    }

    #[test]
    fn single_run_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let run = write_run(&d.join("a"), &[(1, 1.0), (1, 2.0), (5, 3.0)]);
        let before = fs::read(&run).unwrap();
        let out = d.join("out");
        let r = kway_merge::<f64>(vec![run], 4, None, &out, d, 256, &MemTracker::disabled()).unwrap();
        assert_eq!(r.passes, 0);
        assert_eq!(fs::read(&out).unwrap(), before);
    }

    #[test]
    fn stable_by_run_index() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let runs = vec![
            write_run(&d.join("a"), &[(2, 1.0), (5, 1.0)]),
            write_run(&d.join("b"), &[(5, 2.0)]),
            write_run(&d.join("c"), &[(2, 3.0), (5, 3.0)]),
        ];
        let out = d.join("out");
        kway_merge::<f64>(runs, 2, None, &out, d, 256, &MemTracker::disabled()).unwrap();
        let got: Vec<_> = read_all(&out).iter().map(|e| (e.target.0, e.payload)).collect();
        assert_eq!(got, vec![(2, 1.0), (2, 3.0), (5, 1.0), (5, 2.0), (5, 3.0)]);
    }

    #[test]
    fn unsorted_run_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let runs = vec![write_run(&d.join("a"), &[(3, 1.0), (1, 1.0)]), write_run(&d.join("b"), &[(2, 1.0)])];
        let err = kway_merge::<f64>(runs, 4, None, &d.join("out"), d, 256, &MemTracker::disabled()).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn many_runs_two_passes_match_in_memory_sort() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut all: Vec<(u64, u64)> = Vec::new();
        let mut runs = Vec::new();
        let mem = MemTracker::disabled();
        for i in 0..2500 {
            let mut items: Vec<(u64, u64)> =
                (0..rng.gen_range(0..6)).map(|_| (rng.gen_range(0..500), rng.gen_range(0..100))).collect();
            items.sort_by_key(|x| x.0);
            let path = d.join(format!("run-{i}"));
            let mut w = WriteStream::<MessageEnvelope<u64>>::create(&path, 64, &mem).unwrap();
            for &(t, p) in &items {
                w.append(&MessageEnvelope::new(t, p)).unwrap();
            }
            w.finish().unwrap();
            all.extend(items);
            runs.push(path);
        }
        let out = d.join("out");
        let r = kway_merge(runs, 1000, Some(Combiner::sum_u64()), &out, d, 64, &mem).unwrap();
        assert_eq!(r.passes, 2);

        let mut oracle: std::collections::BTreeMap<u64, u64> = Default::default();
        for (t, p) in all {
            *oracle.entry(t).or_default() += p;
        }
        let mut rd = ReadStream::<MessageEnvelope<u64>>::open(&out, 64, &mem).unwrap();
        let n = rd.len();
        let got: Vec<_> = rd.read_items(n).unwrap().into_iter().map(|e| (e.target.0, e.payload)).collect();
        assert_eq!(got, oracle.into_iter().collect::<Vec<_>>());
    }

    #[test]
    fn resident_buffers_are_k_plus_one() {
        let dir = tempfile::tempdir().unwrap();
        let d = dir.path();
        let runs: Vec<_> = (0..10).map(|i| write_run(&d.join(format!("r{i}")), &[(i, 1.0)])).collect();
        let mem = MemTracker::new();
        kway_merge(runs, 4, Some(Combiner::sum_f64()), &d.join("out"), d, 160, &mem).unwrap();
        assert_eq!(mem.current(), 0);
        assert_eq!(mem.peak(), 5 * 160);
        let _ = VertexId(0);
    }
}
