//! The user-facing vertex program contract.

use super::codec::Payload;
use super::types::{AdjacencyItem, EdgeValue, VertexId, VertexState};
use crate::error::{Error, Result};

/// Associative, commutative fold over messages addressed to one vertex.
///
/// `identity` is required for recoded mode, where it marks empty slots.
#[derive(Clone, Copy, Debug)]
pub struct Combiner<M> {
    pub combine: fn(M, M) -> M,
    pub identity: Option<M>,
}

impl<M: Payload> Combiner<M> {
    pub fn new(combine: fn(M, M) -> M, identity: Option<M>) -> Self {
        Combiner { combine, identity }
    }

    #[inline]
    pub fn apply(&self, a: M, b: M) -> M {
        (self.combine)(a, b)
    }

    pub fn fold<I: IntoIterator<Item = M>>(&self, items: I) -> Option<M> {
        items.into_iter().reduce(self.combine)
    }
}

impl Combiner<f64> {
    pub fn sum_f64() -> Self {
        Combiner::new(|a, b| a + b, Some(0.0))
    }

    pub fn min_f64() -> Self {
        Combiner::new(f64::min, Some(f64::INFINITY))
    }
}

impl Combiner<u64> {
    pub fn min_u64() -> Self {
        Combiner::new(std::cmp::min, Some(u64::MAX))
    }

    pub fn sum_u64() -> Self {
        Combiner::new(u64::wrapping_add, Some(0))
    }
}

/// Global aggregator: per-vertex contributions merged associatively; the
/// result of step `i` is visible to every vertex in step `i + 1`.
#[derive(Clone, Copy, Debug)]
pub struct Aggregator<A> {
    pub identity: A,
    pub merge: fn(A, A) -> A,
}

/// A vertex-centric program. `compute` is called once per superstep on every
/// vertex that is active or has incoming messages.
pub trait VertexProgram: Send + Sync + 'static {
    type Value: Payload;
    type Edge: EdgeValue;
    type Message: Payload;
    type Aggregate: Payload;

    fn name(&self) -> &str;

    fn compute(
        &self,
        vertex: &mut VertexState<Self::Value>,
        adjacency: &[AdjacencyItem<Self::Edge>],
        messages: &[Self::Message],
        ctx: &mut Context<'_, Self::Message, Self::Aggregate>,
    ) -> Result<()>;

    fn combiner(&self) -> Option<Combiner<Self::Message>> {
        None
    }

    fn aggregator(&self) -> Option<Aggregator<Self::Aggregate>> {
        None
    }

    /// Called for every parsed edge while loading.
    fn validate_edge(&self, _edge: &Self::Edge) -> Result<()> {
        Ok(())
    }

    fn render_value(&self, value: &Self::Value) -> String {
        value.render()
    }
}

/// Destination of messages emitted by `compute`.
pub trait Outbox<M> {
    fn push(&mut self, target: VertexId, message: M) -> Result<()>;
}

impl<M> Outbox<M> for Vec<(VertexId, M)> {
    fn push(&mut self, target: VertexId, message: M) -> Result<()> {
        self.push((target, message));
        Ok(())
    }
}

/// Per-call view of the superstep handed to `compute`.
pub struct Context<'a, M, A> {
    superstep: u64,
    num_vertices: u64,
    num_workers: usize,
    worker: usize,
    aggregated: A,
    aggregator: Option<Aggregator<A>>,
    local_aggregate: A,
    outbox: &'a mut dyn Outbox<M>,
    pub(crate) original_id: VertexId,
    pub(crate) position: usize,
    pub(crate) messages_sent: u64,
    pub(crate) error: Option<Error>,
}

impl<'a, M, A: Payload> Context<'a, M, A> {
    pub(crate) fn new(
        superstep: u64,
        num_vertices: u64,
        num_workers: usize,
        worker: usize,
        aggregated: A,
        aggregator: Option<Aggregator<A>>,
        outbox: &'a mut dyn Outbox<M>,
    ) -> Self {
        let local_aggregate = aggregator.map(|a| a.identity).unwrap_or_default();
        Context {
            superstep,
            num_vertices,
            num_workers,
            worker,
            aggregated,
            aggregator,
            local_aggregate,
            outbox,
            original_id: VertexId(0),
            position: 0,
            messages_sent: 0,
            error: None,
        }
    }

    /// Superstep number, starting at 1.
    pub fn superstep(&self) -> u64 {
        self.superstep
    }

    /// `|V|` of the whole graph.
    pub fn num_vertices(&self) -> u64 {
        self.num_vertices
    }

    pub fn num_workers(&self) -> usize {
        self.num_workers
    }

    pub fn worker(&self) -> usize {
        self.worker
    }

    /// Aggregated value from the previous superstep.
    pub fn aggregated(&self) -> A {
        self.aggregated
    }

    /// Id of the current vertex in the input graph. Equals `vertex.id` in
    /// normal mode; in recoded mode it is the id before recoding.
    pub fn original_id(&self) -> VertexId {
        self.original_id
    }

    pub fn send(&mut self, target: VertexId, message: M) {
        if self.error.is_some() {
            return;
        }
        match self.outbox.push(target, message) {
            Ok(()) => self.messages_sent += 1,
            Err(e) => self.error = Some(e),
        }
    }

    pub fn aggregate(&mut self, contribution: A) {
        if let Some(agg) = self.aggregator {
            self.local_aggregate = (agg.merge)(self.local_aggregate, contribution);
        }
    }

    pub(crate) fn take_local_aggregate(&self) -> A {
        self.local_aggregate
    }
}
