use std::fmt;

use super::codec::{read_u64, write_u64, FixedCodec, Payload};
use crate::error::{Error, Result};

/// Vertex identifier. Unique within a graph; dense `0..|V|` in recoded mode.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u64);

impl VertexId {
    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for VertexId {
    fn from(v: u64) -> Self {
        VertexId(v)
    }
}

impl FixedCodec for VertexId {
    const SIZE: usize = 8;
    fn encode(&self, out: &mut [u8]) {
        write_u64(out, self.0);
    }
    fn decode(buf: &[u8]) -> Self {
        VertexId(read_u64(buf))
    }
}

/// In-memory per-vertex record: `(id, value, active, degree)`.
///
/// On disk: `id (8) | value (V::SIZE) | active (1) | degree (8)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexState<V> {
    pub id: VertexId,
    pub value: V,
    pub active: bool,
    pub degree: u64,
}

impl<V: Payload> VertexState<V> {
    pub fn new(id: VertexId, degree: u64) -> Self {
        VertexState { id, value: V::default(), active: true, degree }
    }

    pub fn vote_to_halt(&mut self) {
        self.active = false;
    }

    pub fn is_active(&self) -> bool {
        self.active
    }
}

impl<V: FixedCodec> FixedCodec for VertexState<V> {
    const SIZE: usize = 8 + V::SIZE + 1 + 8;

    fn encode(&self, out: &mut [u8]) {
        write_u64(out, self.id.0);
        self.value.encode(&mut out[8..8 + V::SIZE]);
        out[8 + V::SIZE] = self.active as u8;
        write_u64(&mut out[9 + V::SIZE..], self.degree);
    }

    fn decode(buf: &[u8]) -> Self {
        VertexState {
            id: VertexId(read_u64(buf)),
            value: V::decode(&buf[8..8 + V::SIZE]),
            active: buf[8 + V::SIZE] != 0,
            degree: read_u64(&buf[9 + V::SIZE..]),
        }
    }
}

/// One entry of an adjacency list. `E = ()` for unweighted graphs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AdjacencyItem<E> {
    pub neighbor: VertexId,
    pub weight: E,
}

impl<E: FixedCodec> FixedCodec for AdjacencyItem<E> {
    const SIZE: usize = 8 + E::SIZE;
    fn encode(&self, out: &mut [u8]) {
        write_u64(out, self.neighbor.0);
        self.weight.encode(&mut out[8..8 + E::SIZE]);
    }
    fn decode(buf: &[u8]) -> Self {
        AdjacencyItem { neighbor: VertexId(read_u64(buf)), weight: E::decode(&buf[8..8 + E::SIZE]) }
    }
}

/// A message addressed to a vertex.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MessageEnvelope<M> {
    pub target: VertexId,
    pub payload: M,
}

impl<M> MessageEnvelope<M> {
    pub fn new(target: impl Into<VertexId>, payload: M) -> Self {
        MessageEnvelope { target: target.into(), payload }
    }
}

impl<M: FixedCodec> FixedCodec for MessageEnvelope<M> {
    const SIZE: usize = 8 + M::SIZE;
    fn encode(&self, out: &mut [u8]) {
        write_u64(out, self.target.0);
        self.payload.encode(&mut out[8..8 + M::SIZE]);
    }
    fn decode(buf: &[u8]) -> Self {
        MessageEnvelope { target: VertexId(read_u64(buf)), payload: M::decode(&buf[8..8 + M::SIZE]) }
    }
}

/// Edge payloads that can be built from the optional weight column of the
/// text input format.
pub trait EdgeValue: Payload {
    /// Whether the on-disk item carries a weight.
    const WEIGHTED: bool;

    fn from_weight(weight: Option<f64>) -> Result<Self>;

    fn weight(&self) -> Option<f64>;
}

impl EdgeValue for () {
    const WEIGHTED: bool = false;
    fn from_weight(_weight: Option<f64>) -> Result<Self> {
        Ok(())
    }
    fn weight(&self) -> Option<f64> {
        None
    }
}

impl EdgeValue for f64 {
    const WEIGHTED: bool = true;
    /// Missing weights default to 1, which turns SSSP into BFS.
    fn from_weight(weight: Option<f64>) -> Result<Self> {
        let w = weight.unwrap_or(1.0);
        if !w.is_finite() {
            return Err(Error::Config(format!("edge weight {w} is not finite")));
        }
        Ok(w)
    }
    fn weight(&self) -> Option<f64> {
        Some(*self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::codec::{from_bytes, to_bytes};
    use proptest::prelude::*;

    #[test]
    fn vertex_state_size_is_id_payload_flag_degree() {
        assert_eq!(<VertexState<f64>>::SIZE, 8 + 8 + 1 + 8);
        assert_eq!(<VertexState<()>>::SIZE, 17);
        assert_eq!(<VertexState<(u64, u64)>>::SIZE, 8 + 16 + 1 + 8);
    }

    #[test]
    fn active_flag_is_one_byte() {
        let s = VertexState { id: VertexId(7), value: 0u64, active: true, degree: 3 };
        let bytes = to_bytes(&s);
        assert_eq!(bytes[16], 1);
    }

    #[test]
    fn empty_bytes_fail_to_decode() {
        assert!(from_bytes::<VertexState<f64>>(&[]).is_err());
        assert!(from_bytes::<AdjacencyItem<()>>(&[]).is_err());
        assert!(from_bytes::<MessageEnvelope<f64>>(&[1, 2, 3]).is_err());
    }

    proptest! {
        #[test]
        fn records_round_trip(id in any::<u64>(), v in any::<f64>(), active in any::<bool>(), d in any::<u64>(),
                              n in any::<u64>(), w in -1e9f64..1e9, t in any::<u64>(), m in any::<u64>()) {
            let s = VertexState { id: VertexId(id), value: v, active, degree: d };
            let back: VertexState<f64> = from_bytes(&to_bytes(&s)).unwrap();
            prop_assert_eq!(back.id, s.id);
            prop_assert_eq!(back.value.to_bits(), v.to_bits());
            prop_assert_eq!((back.active, back.degree), (active, d));

            let a = AdjacencyItem { neighbor: VertexId(n), weight: w };
            prop_assert_eq!(from_bytes::<AdjacencyItem<f64>>(&to_bytes(&a)).unwrap(), a);

            let e = MessageEnvelope::new(t, m);
            prop_assert_eq!(from_bytes::<MessageEnvelope<u64>>(&to_bytes(&e)).unwrap(), e);
        }
    }
}
