//! Splittable streams: a logical append-only stream cut into files of at most
//! `split_size` bytes, so the head can be fetched (and deleted) while the
//! tail is still being written.
//!
//! Files are `<dir>/part-%06d`, numbered from 1. `no_w` is the index of the
//! last fully-written file and `no_s` the last fetched one; one appender and
//! one fetcher may run concurrently and only share these two counters.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use super::write::{ByteWriter, WriteStats};
use crate::error::{Error, Result};
use crate::memory::MemTracker;

/// Generation counter used to wake a fetcher when any of several streams
/// closes a file.
#[derive(Debug, Default)]
pub struct FileSignal {
    generation: Mutex<u64>,
    cv: Condvar,
}

impl FileSignal {
    pub fn new() -> Arc<Self> {
        Arc::new(FileSignal::default())
    }

    pub fn generation(&self) -> u64 {
        *self.generation.lock().unwrap()
    }

    pub fn bump(&self) {
        *self.generation.lock().unwrap() += 1;
        self.cv.notify_all();
    }

    /// Blocks until the generation differs from `seen` or `timeout` passes.
    pub fn wait_past(&self, seen: u64, timeout: Duration) -> u64 {
        let guard = self.generation.lock().unwrap();
        let (guard, _) = self.cv.wait_timeout_while(guard, timeout, |g| *g == seen).unwrap();
        *guard
    }
}

pub fn part_path(dir: &Path, index: u64) -> PathBuf {
    dir.join(format!("part-{index:06}"))
}

/// A fully-written file handed to the fetcher.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitFile {
    pub index: u64,
    pub path: PathBuf,
}

impl SplitFile {
    pub fn read(&self) -> Result<Vec<u8>> {
        fs::read(&self.path).map_err(Error::at(&self.path))
    }

    /// Garbage-collects the file once its contents are sent.
    pub fn remove(&self) -> Result<()> {
        fs::remove_file(&self.path).map_err(Error::at(&self.path))
    }
}

#[derive(Debug, Default)]
struct Counters {
    no_w: u64,
    no_s: u64,
}

/// The fetch side of a splittable stream; shareable across threads.
#[derive(Debug)]
pub struct SplitHandle {
    dir: PathBuf,
    counters: Mutex<Counters>,
    signal: Option<Arc<FileSignal>>,
}

impl SplitHandle {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// `(no_s, no_w)`.
    pub fn counters(&self) -> (u64, u64) {
        let c = self.counters.lock().unwrap();
        (c.no_s, c.no_w)
    }

    pub fn has_sendable(&self, limit: u64) -> bool {
        let c = self.counters.lock().unwrap();
        c.no_s < c.no_w.min(limit)
    }

    /// Returns `F_{no_s+1}` if it is fully written, advancing `no_s`.
    pub fn fetch_next(&self) -> Option<SplitFile> {
        self.fetch_next_upto(u64::MAX)
    }

    /// Like `fetch_next`, but never past file `limit`.
    pub fn fetch_next_upto(&self, limit: u64) -> Option<SplitFile> {
        let mut c = self.counters.lock().unwrap();
        if c.no_s < c.no_w.min(limit) {
            c.no_s += 1;
            Some(SplitFile { index: c.no_s, path: part_path(&self.dir, c.no_s) })
        } else {
            None
        }
    }

    /// Every fully-written file up to `limit`, in order.
    pub fn fetch_all_upto(&self, limit: u64) -> Vec<SplitFile> {
        let mut c = self.counters.lock().unwrap();
        let end = c.no_w.min(limit);
        let files = (c.no_s + 1..=end).map(|i| SplitFile { index: i, path: part_path(&self.dir, i) }).collect();
        c.no_s = c.no_s.max(end);
        files
    }
}

/// The append side of a splittable stream.
pub struct SplittableStream {
    handle: Arc<SplitHandle>,
    tail: Option<ByteWriter>,
    split_size: u64,
    buffer_bytes: usize,
    mem: MemTracker,
    write_stats: WriteStats,
}

impl SplittableStream {
    /// Creates an empty stream in `dir`, removing leftovers of earlier runs.
    pub fn create(dir: impl Into<PathBuf>, split_size: usize, buffer_bytes: usize, mem: &MemTracker) -> Result<Self> {
        Self::with_signal(dir, split_size, buffer_bytes, mem, None)
    }

    pub fn with_signal(
        dir: impl Into<PathBuf>,
        split_size: usize,
        buffer_bytes: usize,
        mem: &MemTracker,
        signal: Option<Arc<FileSignal>>,
    ) -> Result<Self> {
        let dir = dir.into();
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(Error::at(&dir))?;
        }
        fs::create_dir_all(&dir).map_err(Error::at(&dir))?;
        Ok(SplittableStream {
            handle: Arc::new(SplitHandle { dir, counters: Mutex::new(Counters::default()), signal }),
            tail: None,
            split_size: split_size as u64,
            buffer_bytes,
            mem: mem.clone(),
            write_stats: WriteStats::default(),
        })
    }

    /// Reopens the fetch side of a stream left on disk: every `part-*` file
    /// present counts as fully written, nothing as fetched.
    pub fn recover(dir: impl Into<PathBuf>) -> Result<Arc<SplitHandle>> {
        let dir = dir.into();
        let mut no_w = 0;
        while part_path(&dir, no_w + 1).exists() {
            no_w += 1;
        }
        Ok(Arc::new(SplitHandle { dir, counters: Mutex::new(Counters { no_w, no_s: 0 }), signal: None }))
    }

    pub fn handle(&self) -> Arc<SplitHandle> {
        self.handle.clone()
    }

    pub fn counters(&self) -> (u64, u64) {
        self.handle.counters()
    }

    /// Bytes written to disk so far (closed files plus flushed tail data).
    pub fn stats(&self) -> WriteStats {
        let mut s = self.write_stats;
        if let Some(t) = &self.tail {
            s.flushes += t.stats().flushes;
            s.bytes_written += t.stats().bytes_written;
        }
        s
    }

    fn next_index(&self) -> u64 {
        self.handle.counters().1 + 1
    }

    fn close_tail(&mut self) -> Result<()> {
        if let Some(tail) = self.tail.take() {
            let (_, stats) = tail.finish_with_stats()?;
            self.write_stats.flushes += stats.flushes;
            self.write_stats.bytes_written += stats.bytes_written;
            self.handle.counters.lock().unwrap().no_w += 1;
            if let Some(sig) = &self.handle.signal {
                sig.bump();
            }
        }
        Ok(())
    }

    fn open_tail(&mut self) -> Result<()> {
        let path = part_path(&self.handle.dir, self.next_index());
        self.tail = Some(ByteWriter::create(path, self.buffer_bytes, &self.mem)?);
        Ok(())
    }

    /// Appends one item, encoded by `fill` into `len` bytes.
    pub fn append_with(&mut self, len: usize, fill: impl FnOnce(&mut [u8])) -> Result<()> {
        let len64 = len as u64;
        if let Some(tail) = &self.tail {
            if tail.len() + len64 > self.split_size && !tail.is_empty() {
                self.close_tail()?;
            }
        }
        if self.tail.is_none() {
            self.open_tail()?;
        }
        self.tail.as_mut().unwrap().write_with(len, fill)?;
        if len64 > self.split_size {
            // an oversized item lives alone in its file
            self.close_tail()?;
        }
        Ok(())
    }

    pub fn append(&mut self, item: &[u8]) -> Result<()> {
        self.append_with(item.len(), |out| out.copy_from_slice(item))
    }

    /// Closes the tail file so that everything appended so far is fetchable.
    /// Returns `no_w`. Later appends continue in a new file.
    pub fn seal(&mut self) -> Result<u64> {
        self.close_tail()?;
        Ok(self.handle.counters().1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(dir: &Path, split: usize) -> SplittableStream {
        SplittableStream::create(dir.join("oms"), split, 64, &MemTracker::disabled()).unwrap()
    }

    #[test]
    fn splits_at_boundary() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = stream(dir.path(), 100);
        for i in 0..3u8 {
            s.append(&[i; 40]).unwrap();
        }
        assert_eq!(s.counters(), (0, 1));
        assert_eq!(s.seal().unwrap(), 2);
        let h = s.handle();
        let f1 = h.fetch_next().unwrap();
        let f2 = h.fetch_next().unwrap();
        assert_eq!(f1.read().unwrap().len(), 80);
        assert_eq!(f2.read().unwrap(), vec![2u8; 40]);
        assert_eq!(h.fetch_next(), None);
    }

    #[test]
    fn oversized_item_gets_its_own_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = stream(dir.path(), 100);
        s.append(&[7; 150]).unwrap();
        assert_eq!(s.counters(), (0, 1));
        let f = s.handle().fetch_next().unwrap();
        assert_eq!(f.read().unwrap(), vec![7u8; 150]);

        s.append(&[1; 10]).unwrap();
        s.append(&[9; 150]).unwrap();
        assert_eq!(s.seal().unwrap(), 3);
        let h = s.handle();
        assert_eq!(h.fetch_next().unwrap().read().unwrap(), vec![1u8; 10]);
        assert_eq!(h.fetch_next().unwrap().read().unwrap(), vec![9u8; 150]);
    }

    #[test]
    fn empty_stream() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = stream(dir.path(), 100);
        assert_eq!(s.counters(), (0, 0));
        assert_eq!(s.seal().unwrap(), 0);
        assert_eq!(s.handle().fetch_next(), None);
    }

    #[test]
    fn one_append_then_seal() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = stream(dir.path(), 100);
        s.append(&[1; 8]).unwrap();
        assert_eq!(s.seal().unwrap(), 1);
    }

    #[test]
    fn fetch_respects_counters() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = stream(dir.path(), 16);
        for i in 0..5u8 {
            s.append(&[i; 16]).unwrap();
        }
        // F5 is still the open tail: no_w = 4
        let h = s.handle();
        h.fetch_next().unwrap();
        h.fetch_next().unwrap();
        assert_eq!(h.counters(), (2, 4));
        let f = h.fetch_next().unwrap();
        assert_eq!(f.index, 3);
        assert_eq!(h.counters(), (3, 4));
        assert_eq!(h.fetch_next_upto(3), None);
    }

    #[test]
    fn every_closed_file_within_bound_and_items_preserved() {
        use rand::{Rng, SeedableRng};
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut s = stream(dir.path(), 256);
        let h = s.handle();
        let mut appended = Vec::new();
        let mut fetched = Vec::new();
        for i in 0..2000u32 {
            let len = if rng.gen_ratio(1, 50) { 300 } else { rng.gen_range(1..64) };
            let mut item = vec![0u8; len];
            item[..4.min(len)].copy_from_slice(&i.to_le_bytes()[..4.min(len)]);
            s.append(&item).unwrap();
            appended.extend_from_slice(&item);
            if rng.gen_ratio(1, 10) {
                for f in h.fetch_all_upto(u64::MAX) {
                    let bytes = f.read().unwrap();
                    assert!(bytes.len() <= 256 || bytes.len() == 300);
                    fetched.extend_from_slice(&bytes);
                    f.remove().unwrap();
                }
            }
        }
        s.seal().unwrap();
        while let Some(f) = h.fetch_next() {
            fetched.extend_from_slice(&f.read().unwrap());
        }
        assert_eq!(fetched, appended);
    }

    #[test]
    fn recover_counts_parts() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = stream(dir.path(), 16);
        for i in 0..3u8 {
            s.append(&[i; 16]).unwrap();
        }
        s.seal().unwrap();
        let h = SplittableStream::recover(dir.path().join("oms")).unwrap();
        assert_eq!(h.counters(), (0, 3));
    }

    #[test]
    fn concurrent_append_and_fetch() {
        let dir = tempfile::tempdir().unwrap();
        let signal = FileSignal::new();
        let mut s =
            SplittableStream::with_signal(dir.path().join("c"), 64, 32, &MemTracker::disabled(), Some(signal.clone()))
                .unwrap();
        let h = s.handle();
        let fetcher = std::thread::spawn(move || {
            let mut got = Vec::new();
            loop {
                let seen = signal.generation();
                let mut progressed = false;
                while let Some(f) = h.fetch_next() {
                    got.extend(f.read().unwrap());
                    f.remove().unwrap();
                    progressed = true;
                }
                if !progressed {
                    if got.len() == 8 * 1000 {
                        break;
                    }
                    signal.wait_past(seen, Duration::from_millis(50));
                }
            }
            got
        });
        let mut expected = Vec::new();
        for i in 0..1000u64 {
            s.append(&i.to_le_bytes()).unwrap();
            expected.extend(i.to_le_bytes());
        }
        s.seal().unwrap();
        assert_eq!(fetcher.join().unwrap(), expected);
    }
}
