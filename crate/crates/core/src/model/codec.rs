//! Fixed-width little-endian encoding for everything that touches disk or wire.

use std::fmt::Debug;

use crate::error::{Error, Result};

/// A value with a constant serialized size.
pub trait FixedCodec: Sized {
    const SIZE: usize;

    /// Writes exactly `SIZE` bytes into `out[..SIZE]`.
    fn encode(&self, out: &mut [u8]);

    /// Reads from `buf[..SIZE]`. Callers guarantee the length.
    fn decode(buf: &[u8]) -> Self;
}

/// Algorithm-defined vertex values, edge weights, messages and aggregates.
pub trait Payload: FixedCodec + Copy + Default + PartialEq + Debug + Send + Sync + 'static {
    /// Text form used in result dumps.
    fn render(&self) -> String;
}

pub fn to_bytes<T: FixedCodec>(value: &T) -> Vec<u8> {
    let mut out = vec![0u8; T::SIZE];
    value.encode(&mut out);
    out
}

pub fn from_bytes<T: FixedCodec>(buf: &[u8]) -> Result<T> {
    if buf.len() < T::SIZE {
        return Err(Error::Framing { needed: T::SIZE, got: buf.len() });
    }
    Ok(T::decode(&buf[..T::SIZE]))
}

/// Decodes a buffer that must hold a whole number of records.
pub fn decode_all<T: FixedCodec>(buf: &[u8]) -> Result<Vec<T>> {
    if T::SIZE == 0 {
        return Ok(Vec::new());
    }
    if !buf.len().is_multiple_of(T::SIZE) {
        return Err(Error::Framing { needed: (buf.len() / T::SIZE + 1) * T::SIZE, got: buf.len() });
    }
    Ok(buf.chunks_exact(T::SIZE).map(T::decode).collect())
}

fn check_records(len: usize, size: usize) -> Result<usize> {
    if size < 8 || !len.is_multiple_of(size) {
        return Err(Error::Framing { needed: (len / size.max(1) + 1) * size, got: len });
    }
    Ok(len / size)
}

/// Sorts a buffer of `size`-byte records in place by the little-endian
/// `u64` that starts each record. Not stable; uses no extra memory.
pub fn sort_records_by_key(buf: &mut [u8], size: usize) -> Result<()> {
    let n = check_records(buf.len(), size)?;
    let key = |buf: &[u8], i: usize| read_u64(&buf[i * size..]);
    let swap = |buf: &mut [u8], i: usize, j: usize| {
        let (lo, hi) = (i.min(j), i.max(j));
        if lo != hi {
            let (a, b) = buf.split_at_mut(hi * size);
            a[lo * size..(lo + 1) * size].swap_with_slice(&mut b[..size]);
        }
    };
    let sift = |buf: &mut [u8], mut root: usize, end: usize| loop {
        let mut child = 2 * root + 1;
        if child >= end {
            break;
        }
        if child + 1 < end && key(buf, child + 1) > key(buf, child) {
            child += 1;
        }
        if key(buf, root) >= key(buf, child) {
            break;
        }
        swap(buf, root, child);
        root = child;
    };
    for i in (0..n / 2).rev() {
        sift(buf, i, n);
    }
    for end in (1..n).rev() {
        swap(buf, 0, end);
        sift(buf, 0, end);
    }
    Ok(())
}

pub fn encode_all<T: FixedCodec>(items: &[T], out: &mut Vec<u8>) {
    let start = out.len();
    out.resize(start + items.len() * T::SIZE, 0);
    for (item, chunk) in items.iter().zip(out[start..].chunks_exact_mut(T::SIZE.max(1))) {
        item.encode(chunk);
    }
}

#[inline]
pub(crate) fn read_u64(buf: &[u8]) -> u64 {
    u64::from_le_bytes(buf[..8].try_into().unwrap())
}

#[inline]
pub(crate) fn write_u64(out: &mut [u8], v: u64) {
    out[..8].copy_from_slice(&v.to_le_bytes());
}

impl FixedCodec for () {
    const SIZE: usize = 0;
    fn encode(&self, _out: &mut [u8]) {}
    fn decode(_buf: &[u8]) -> Self {}
}

impl Payload for () {
    fn render(&self) -> String {
        String::new()
    }
}

impl FixedCodec for u64 {
    const SIZE: usize = 8;
    fn encode(&self, out: &mut [u8]) {
        write_u64(out, *self);
    }
    fn decode(buf: &[u8]) -> Self {
        read_u64(buf)
    }
}

impl Payload for u64 {
    fn render(&self) -> String {
        self.to_string()
    }
}

impl FixedCodec for f64 {
    const SIZE: usize = 8;
    fn encode(&self, out: &mut [u8]) {
        out[..8].copy_from_slice(&self.to_le_bytes());
    }
    fn decode(buf: &[u8]) -> Self {
        f64::from_le_bytes(buf[..8].try_into().unwrap())
    }
}

impl Payload for f64 {
    fn render(&self) -> String {
        // `{}` prints the shortest string that round-trips, and `inf` for infinity.
        format!("{}", self)
    }
}

impl<A: FixedCodec, B: FixedCodec> FixedCodec for (A, B) {
    const SIZE: usize = A::SIZE + B::SIZE;
    fn encode(&self, out: &mut [u8]) {
        self.0.encode(&mut out[..A::SIZE]);
        self.1.encode(&mut out[A::SIZE..A::SIZE + B::SIZE]);
    }
    fn decode(buf: &[u8]) -> Self {
        (A::decode(&buf[..A::SIZE]), B::decode(&buf[A::SIZE..A::SIZE + B::SIZE]))
    }
}

impl<A: Payload, B: Payload> Payload for (A, B) {
    fn render(&self) -> String {
        format!("{} {}", self.0.render(), self.1.render())
    }
}

impl FixedCodec for bool {
    const SIZE: usize = 1;
    fn encode(&self, out: &mut [u8]) {
        out[0] = *self as u8;
    }
    fn decode(buf: &[u8]) -> Self {
        buf[0] != 0
    }
}

impl Payload for bool {
    fn render(&self) -> String {
        self.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_is_a_framing_error() {
        assert!(matches!(from_bytes::<u64>(&[]), Err(Error::Framing { needed: 8, got: 0 })));
    }

    #[test]
    fn tuple_layout_is_concatenation() {
        let bytes = to_bytes(&(1u64, 2.5f64));
        assert_eq!(bytes.len(), 16);
        assert_eq!(&bytes[..8], &1u64.to_le_bytes());
        assert_eq!(&bytes[8..], &2.5f64.to_le_bytes());
    }

    #[test]
    fn records_sort_in_place() {
        let mut buf = Vec::new();
        encode_all(&[(5u64, 1u64), (2, 2), (9, 3), (2, 4), (0, 5)], &mut buf);
        sort_records_by_key(&mut buf, 16).unwrap();
        let keys: Vec<u64> = decode_all::<(u64, u64)>(&buf).unwrap().iter().map(|r| r.0).collect();
        assert_eq!(keys, vec![0, 2, 2, 5, 9]);
        assert!(sort_records_by_key(&mut buf[..20], 16).is_err());
    }

    proptest::proptest! {
        #[test]
        fn record_sort_is_a_sorted_permutation(recs in proptest::collection::vec((0u64..50, proptest::num::u64::ANY), 0..300)) {
            let mut buf = Vec::new();
            encode_all(&recs, &mut buf);
            sort_records_by_key(&mut buf, 16).unwrap();
            let got = decode_all::<(u64, u64)>(&buf).unwrap();
            proptest::prop_assert!(got.windows(2).all(|w| w[0].0 <= w[1].0));
            let (mut a, mut b) = (recs.clone(), got);
            a.sort();
            b.sort();
            proptest::prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn decode_all_rejects_partial_tail() {
        let mut buf = Vec::new();
        encode_all(&[1u64, 2, 3], &mut buf);
        assert_eq!(decode_all::<u64>(&buf).unwrap(), vec![1, 2, 3]);
        assert!(decode_all::<u64>(&buf[..20]).is_err());
    }
}
