//! Wire framing: `kind: u8 | superstep: u64 | length: u64 | payload`, all
//! little-endian.

use std::io::{self, Read, Write};

use crate::error::{Error, Result};

pub const HEADER_LEN: usize = 17;

/// Kinds visible to the engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BatchKind {
    Data = 0,
    EndTag = 1,
    Control = 2,
}

/// Kinds used by the socket transport only.
pub(crate) const KIND_ACK: u8 = 3;
pub(crate) const KIND_HELLO: u8 = 4;
pub(crate) const KIND_BYE: u8 = 5;

/// Unit of transfer on a channel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub kind: BatchKind,
    pub superstep: u64,
    pub payload: Vec<u8>,
}

impl Batch {
    pub fn data(superstep: u64, payload: Vec<u8>) -> Self {
        Batch { kind: BatchKind::Data, superstep, payload }
    }

    pub fn end_tag(superstep: u64) -> Self {
        Batch { kind: BatchKind::EndTag, superstep, payload: Vec::new() }
    }

    pub fn control(superstep: u64, payload: Vec<u8>) -> Self {
        Batch { kind: BatchKind::Control, superstep, payload }
    }

    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }
}

pub(crate) fn kind_from_u8(k: u8) -> Result<BatchKind> {
    match k {
        0 => Ok(BatchKind::Data),
        1 => Ok(BatchKind::EndTag),
        2 => Ok(BatchKind::Control),
        other => Err(Error::Protocol(format!("unknown batch kind {other}"))),
    }
}

pub fn encode_header(kind: u8, superstep: u64, len: u64) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[0] = kind;
    h[1..9].copy_from_slice(&superstep.to_le_bytes());
    h[9..17].copy_from_slice(&len.to_le_bytes());
    h
}

/// Serializes a batch into one contiguous frame.
pub fn encode_frame(batch: &Batch) -> Vec<u8> {
    let mut out = Vec::with_capacity(batch.wire_len());
    out.extend_from_slice(&encode_header(batch.kind as u8, batch.superstep, batch.payload.len() as u64));
    out.extend_from_slice(&batch.payload);
    out
}

/// Parses one frame from the front of `buf`; returns it and the bytes used.
pub fn decode_frame(buf: &[u8]) -> Result<(Batch, usize)> {
    if buf.len() < HEADER_LEN {
        return Err(Error::Framing { needed: HEADER_LEN, got: buf.len() });
    }
    let kind = kind_from_u8(buf[0])?;
    let superstep = u64::from_le_bytes(buf[1..9].try_into().unwrap());
    let len = u64::from_le_bytes(buf[9..17].try_into().unwrap()) as usize;
    let end = HEADER_LEN + len;
    if buf.len() < end {
        return Err(Error::Framing { needed: end, got: buf.len() });
    }
    Ok((Batch { kind, superstep, payload: buf[HEADER_LEN..end].to_vec() }, end))
}

pub(crate) struct RawFrame {
    pub kind: u8,
    pub superstep: u64,
    pub payload: Vec<u8>,
}

/// Reads a frame from a byte stream. `Ok(None)` on a clean EOF before the
/// header.
pub(crate) fn read_frame(r: &mut impl Read) -> io::Result<Option<RawFrame>> {
    let mut h = [0u8; HEADER_LEN];
    let mut got = 0;
    while got < HEADER_LEN {
        match r.read(&mut h[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated frame header")),
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u64::from_le_bytes(h[9..17].try_into().unwrap()) as usize;
    let mut payload = vec![0u8; len];
    r.read_exact(&mut payload)?;
    Ok(Some(RawFrame { kind: h[0], superstep: u64::from_le_bytes(h[1..9].try_into().unwrap()), payload }))
}

pub(crate) fn write_frame(w: &mut impl Write, kind: u8, superstep: u64, payload: &[u8]) -> io::Result<()> {
    w.write_all(&encode_header(kind, superstep, payload.len() as u64))?;
    w.write_all(payload)?;
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let b = Batch::data(7, vec![1, 2, 3]);
        let bytes = encode_frame(&b);
        assert_eq!(bytes.len(), 20);
        assert_eq!(bytes[0], 0);
        assert_eq!(&bytes[1..9], &7u64.to_le_bytes());
        assert_eq!(&bytes[9..17], &3u64.to_le_bytes());
        assert_eq!(decode_frame(&bytes).unwrap(), (b, 20));
    }

    #[test]
    fn end_tag_is_empty() {
        let bytes = encode_frame(&Batch::end_tag(2));
        assert_eq!(bytes.len(), HEADER_LEN);
        let (b, _) = decode_frame(&bytes).unwrap();
        assert_eq!(b.kind, BatchKind::EndTag);
        assert!(b.payload.is_empty());
    }

    #[test]
    fn truncated_frames_fail() {
        assert!(matches!(decode_frame(&[]), Err(Error::Framing { .. })));
        let bytes = encode_frame(&Batch::control(1, vec![9; 10]));
        assert!(matches!(decode_frame(&bytes[..20]), Err(Error::Framing { .. })));
        assert!(matches!(decode_frame(&[9; 17]), Err(Error::Protocol(_))));
    }

    #[test]
    fn stream_reader_handles_eof() {
        let mut buf = Vec::new();
        write_frame(&mut buf, KIND_ACK, 0, &[]).unwrap();
        let mut r = &buf[..];
        assert_eq!(read_frame(&mut r).unwrap().unwrap().kind, KIND_ACK);
        assert!(read_frame(&mut r).unwrap().is_none());
        let mut short = &buf[..5];
        assert!(read_frame(&mut short).is_err());
    }
}
