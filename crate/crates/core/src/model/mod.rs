//! Domain types shared by every part of the engine.

pub mod codec;
pub mod config;
pub mod partition;
pub mod program;
pub mod types;

pub use codec::{FixedCodec, Payload};
pub use config::{JobConfig, SimOptions, TransportKind};
pub use partition::{hash_partition, mix64, recoded_id, recoded_pos, Mode};
pub use program::{Aggregator, Combiner, Context, Outbox, VertexProgram};
pub use types::{AdjacencyItem, EdgeValue, MessageEnvelope, VertexId, VertexState};
