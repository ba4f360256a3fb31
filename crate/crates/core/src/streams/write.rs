use std::fs::File;
use std::io::Write;
use std::marker::PhantomData;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::memory::{MemTracker, Reservation};
use crate::model::FixedCodec;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct WriteStats {
    pub flushes: u64,
    pub bytes_written: u64,
}

/// Append-only buffered file writer. The buffer is flushed only when full
/// or on `finish`.
pub struct ByteWriter {
    file: File,
    path: PathBuf,
    buf: Vec<u8>,
    capacity: usize,
    written: u64,
    stats: WriteStats,
    _mem: Reservation,
}

impl ByteWriter {
    pub fn create(path: impl AsRef<Path>, buffer_bytes: usize, mem: &MemTracker) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(Error::at(&path))?;
        let capacity = buffer_bytes.max(1);
        Ok(ByteWriter {
            file,
            path,
            buf: Vec::with_capacity(capacity),
            capacity,
            written: 0,
            stats: WriteStats::default(),
            _mem: mem.reserve(capacity),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Logical length: bytes flushed plus bytes buffered.
    pub fn len(&self) -> u64 {
        self.written + self.buf.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn stats(&self) -> WriteStats {
        self.stats
    }

    fn flush_buffer(&mut self) -> Result<()> {
        if self.buf.is_empty() {
            return Ok(());
        }
        self.file.write_all(&self.buf).map_err(Error::at(&self.path))?;
        self.written += self.buf.len() as u64;
        self.stats.flushes += 1;
        self.stats.bytes_written += self.buf.len() as u64;
        self.buf.clear();
        Ok(())
    }

    pub fn write_bytes(&mut self, mut bytes: &[u8]) -> Result<()> {
        while !bytes.is_empty() {
            let room = self.capacity - self.buf.len();
            let take = room.min(bytes.len());
            self.buf.extend_from_slice(&bytes[..take]);
            bytes = &bytes[take..];
            if self.buf.len() == self.capacity {
                self.flush_buffer()?;
            }
        }
        Ok(())
    }

    /// Gives `f` a slice of exactly `len` bytes inside the buffer to fill.
    /// Falls back to a temporary when `len` exceeds the buffer.
    #[inline]
    pub fn write_with(&mut self, len: usize, f: impl FnOnce(&mut [u8])) -> Result<()> {
        if len > self.capacity {
            let mut tmp = vec![0; len];
            f(&mut tmp);
            return self.write_bytes(&tmp);
        }
        if self.capacity - self.buf.len() < len {
            // keep records whole inside one flush
            self.flush_buffer()?;
        }
        let start = self.buf.len();
        self.buf.resize(start + len, 0);
        f(&mut self.buf[start..]);
        if self.buf.len() == self.capacity {
            self.flush_buffer()?;
        }
        Ok(())
    }

    /// Flushes and closes the file; returns its length in bytes.
    pub fn finish(mut self) -> Result<u64> {
        self.flush_buffer()?;
        self.file.flush().map_err(Error::at(&self.path))?;
        Ok(self.written)
    }

    /// Like `finish` but also hands back the counters.
    pub fn finish_with_stats(mut self) -> Result<(u64, WriteStats)> {
        self.flush_buffer()?;
        let stats = self.stats;
        Ok((self.finish()?, stats))
    }
}

/// Typed append-only stream of fixed-size records.
pub struct WriteStream<T> {
    inner: ByteWriter,
    count: u64,
    _item: PhantomData<T>,
}

impl<T: FixedCodec> WriteStream<T> {
    pub fn create(path: impl AsRef<Path>, buffer_bytes: usize, mem: &MemTracker) -> Result<Self> {
        let capacity = (buffer_bytes / T::SIZE.max(1)).max(1) * T::SIZE.max(1);
        Ok(WriteStream { inner: ByteWriter::create(path, capacity, mem)?, count: 0, _item: PhantomData })
    }

    #[inline]
    pub fn append(&mut self, item: &T) -> Result<()> {
        self.count += 1;
        self.inner.write_with(T::SIZE, |out| item.encode(out))
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn path(&self) -> &Path {
        self.inner.path()
    }

    pub fn stats(&self) -> WriteStats {
        self.inner.stats()
    }

    pub fn finish(self) -> Result<u64> {
        self.inner.finish()
    }

    pub fn finish_with_stats(self) -> Result<(u64, WriteStats)> {
        self.inner.finish_with_stats()
    }
}
