use std::fs::File;
use std::io::{Read, Seek, SeekFrom};
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::memory::{MemTracker, Reservation};
use crate::model::FixedCodec;

/// Counters of a read stream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ReadStats {
    /// Buffer refills, i.e. disk reads.
    pub refills: u64,
    /// Refills that required moving the file position (random accesses).
    pub seeks: u64,
    pub bytes_read: u64,
}

/// Buffered sequential reader of fixed-size records with cheap `skip`.
///
/// The buffer holds a whole number of records, so a record never straddles
/// two refills. Refills are lazy: skipping past the buffer only moves the
/// logical position, and the next read fetches the window starting there.
pub struct ReadStream<T> {
    file: File,
    path: PathBuf,
    buf: Vec<u8>,
    capacity: usize,
    buf_start: u64,
    buf_len: usize,
    pos: u64,
    file_pos: u64,
    file_len: u64,
    stats: ReadStats,
    _mem: Reservation,
    _item: PhantomData<T>,
}

impl<T: FixedCodec> ReadStream<T> {
    pub fn open(path: impl AsRef<Path>, buffer_bytes: usize, mem: &MemTracker) -> Result<Self> {
        assert!(T::SIZE > 0, "zero-sized records cannot be streamed");
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(Error::at(&path))?;
        let file_len = file.metadata().map_err(Error::at(&path))?.len();
        if file_len % T::SIZE as u64 != 0 {
            return Err(Error::Corruption(format!(
                "{} has {} bytes, not a multiple of the {}-byte record",
                path.display(),
                file_len,
                T::SIZE
            )));
        }
        let capacity = (buffer_bytes / T::SIZE).max(1) * T::SIZE;
        Ok(ReadStream {
            file,
            path,
            buf: vec![0; capacity],
            capacity,
            buf_start: 0,
            buf_len: 0,
            pos: 0,
            file_pos: 0,
            file_len,
            stats: ReadStats::default(),
            _mem: mem.reserve(capacity),
            _item: PhantomData,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Number of records in the file.
    pub fn len(&self) -> u64 {
        self.file_len / T::SIZE as u64
    }

    pub fn is_empty(&self) -> bool {
        self.file_len == 0
    }

    pub fn file_bytes(&self) -> u64 {
        self.file_len
    }

    /// Records not yet consumed or skipped.
    pub fn remaining(&self) -> u64 {
        (self.file_len - self.pos) / T::SIZE as u64
    }

    pub fn stats(&self) -> ReadStats {
        self.stats
    }

    #[inline]
    fn in_buffer(&self, pos: u64) -> bool {
        pos >= self.buf_start && pos < self.buf_start + self.buf_len as u64
    }

    fn refill(&mut self) -> Result<()> {
        if self.file_pos != self.pos {
            self.file.seek(SeekFrom::Start(self.pos)).map_err(Error::at(&self.path))?;
            self.stats.seeks += 1;
        }
        let want = (self.capacity as u64).min(self.file_len - self.pos) as usize;
        self.file.read_exact(&mut self.buf[..want]).map_err(Error::at(&self.path))?;
        self.buf_start = self.pos;
        self.buf_len = want;
        self.file_pos = self.pos + want as u64;
        self.stats.refills += 1;
        self.stats.bytes_read += want as u64;
        Ok(())
    }

    /// Next record, or `None` at end of stream.
    #[inline]
    pub fn next_item(&mut self) -> Result<Option<T>> {
        if self.pos >= self.file_len {
            return Ok(None);
        }
        if !self.in_buffer(self.pos) {
            self.refill()?;
        }
        let off = (self.pos - self.buf_start) as usize;
        let item = T::decode(&self.buf[off..off + T::SIZE]);
        self.pos += T::SIZE as u64;
        Ok(Some(item))
    }

    /// Decodes the next record without consuming it.
    pub fn peek(&mut self) -> Result<Option<T>> {
        if self.pos >= self.file_len {
            return Ok(None);
        }
        if !self.in_buffer(self.pos) {
            self.refill()?;
        }
        let off = (self.pos - self.buf_start) as usize;
        Ok(Some(T::decode(&self.buf[off..off + T::SIZE])))
    }

    /// Reads exactly `count` records into `out` (cleared first).
    pub fn read_into(&mut self, count: u64, out: &mut Vec<T>) -> Result<()> {
        out.clear();
        if count > self.remaining() {
            return Err(Error::Corruption(format!(
                "{}: wanted {} records, only {} left",
                self.path.display(),
                count,
                self.remaining()
            )));
        }
        out.reserve(count as usize);
        for _ in 0..count {
            // remaining() was checked above
            out.push(self.next_item()?.unwrap());
        }
        Ok(())
    }

    pub fn read_items(&mut self, count: u64) -> Result<Vec<T>> {
        let mut out = Vec::new();
        self.read_into(count, &mut out)?;
        Ok(out)
    }

    /// Advances past `num_items` records. Touches the disk only lazily, when
    /// a later read falls outside the current buffer. Skipping past the end
    /// parks the cursor at the end.
    pub fn skip(&mut self, num_items: u64) {
        let bytes = num_items.saturating_mul(T::SIZE as u64);
        self.pos = self.pos.saturating_add(bytes).min(self.file_len);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::WriteStream;
    use proptest::prelude::*;

    fn write_items(dir: &Path, n: u64) -> PathBuf {
        let path = dir.join("s.bin");
        let mut w = WriteStream::<u64>::create(&path, 4096, &MemTracker::disabled()).unwrap();
        for i in 0..n {
            w.append(&i).unwrap();
        }
        w.finish().unwrap();
        path
    }

    #[test]
    fn full_read_and_zero_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_items(dir.path(), 10);
        let mut r = ReadStream::<u64>::open(&path, 64 * 8, &MemTracker::disabled()).unwrap();
        assert!(r.read_items(0).unwrap().is_empty());
        assert_eq!(r.stats().refills, 0);
        assert_eq!(r.read_items(10).unwrap(), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn short_stream_is_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_items(dir.path(), 3);
        let mut r = ReadStream::<u64>::open(&path, 64, &MemTracker::disabled()).unwrap();
        assert!(matches!(r.read_items(4), Err(Error::Corruption(_))));
    }

    #[test]
    fn skip_inside_buffer_does_not_touch_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_items(dir.path(), 1000);
        // buffer holds 64 items
        let mut r = ReadStream::<u64>::open(&path, 64 * 8, &MemTracker::disabled()).unwrap();
        r.read_items(10).unwrap();
        let before = r.stats();
        r.skip(20);
        assert_eq!(r.next_item().unwrap(), Some(30));
        assert_eq!(r.stats(), before);
        assert_eq!(before.refills, 1);
    }

    #[test]
    fn skip_zero_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_items(dir.path(), 10);
        let mut r = ReadStream::<u64>::open(&path, 32, &MemTracker::disabled()).unwrap();
        r.next_item().unwrap();
        let before = (r.stats(), r.remaining());
        r.skip(0);
        assert_eq!((r.stats(), r.remaining()), before);
        assert_eq!(r.next_item().unwrap(), Some(1));
    }

    #[test]
    fn skip_past_end_parks() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_items(dir.path(), 10);
        let mut r = ReadStream::<u64>::open(&path, 32, &MemTracker::disabled()).unwrap();
        r.skip(50);
        assert_eq!(r.remaining(), 0);
        assert_eq!(r.next_item().unwrap(), None);
        assert!(r.read_items(1).is_err());
    }

    #[test]
    fn sparse_scan_refills_bounded_by_full_scan() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_items(dir.path(), 1_000_000);
        let mem = MemTracker::disabled();
        let mut full = ReadStream::<u64>::open(&path, 65536, &mem).unwrap();
        while full.next_item().unwrap().is_some() {}
        let baseline = full.stats();

        let mut sparse = ReadStream::<u64>::open(&path, 65536, &mem).unwrap();
        let mut expected = 0u64;
        while let Some(v) = sparse.next_item().unwrap() {
            assert_eq!(v, expected);
            sparse.skip(999);
            expected += 1000;
        }
        assert!(sparse.stats().refills <= baseline.refills);
        assert!(sparse.stats().bytes_read <= baseline.bytes_read);
        // 8 MB of records with one record every 8000 bytes: every window is touched
        assert_eq!(baseline.refills, (8_000_000u64).div_ceil(65536));
    }

    proptest! {
        #[test]
        fn skip_matches_reading(ops in proptest::collection::vec((0u64..200, 0u64..3), 1..60), buf in 1usize..40) {
            let dir = tempfile::tempdir().unwrap();
            let path = write_items(dir.path(), 2000);
            let mem = MemTracker::disabled();
            let mut a = ReadStream::<u64>::open(&path, buf * 8, &mem).unwrap();
            let mut b = ReadStream::<u64>::open(&path, buf * 8, &mem).unwrap();
            let mut full = ReadStream::<u64>::open(&path, buf * 8, &mem).unwrap();
            while full.next_item().unwrap().is_some() {}
            for (skip, read) in ops {
                a.skip(skip);
                for _ in 0..skip { if b.next_item().unwrap().is_none() { break; } }
                for _ in 0..read {
                    prop_assert_eq!(a.next_item().unwrap(), b.next_item().unwrap());
                }
            }
            prop_assert!(a.stats().refills <= full.stats().refills);
            prop_assert!(a.stats().bytes_read <= full.stats().bytes_read);
        }
    }
}
