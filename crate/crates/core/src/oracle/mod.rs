//! Single-threaded, fully in-memory executor of the same vertex programs.
//! It shares no code with the streaming engine beyond the program contract
//! and is the ground truth for equivalence tests.

mod reference;

use std::collections::BTreeMap;

pub use reference::{bfs_levels, dijkstra, power_iteration, union_find_components};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{AdjacencyItem, Context, EdgeValue, VertexId, VertexProgram, VertexState};

#[derive(Debug)]
pub struct OracleResult<V> {
    pub values: BTreeMap<u64, V>,
    /// Supersteps executed.
    pub steps: u64,
    /// False when `max_steps` ran out before every vertex halted.
    pub converged: bool,
}

/// Runs `program` on `graph`. Messages reach each vertex in ascending
/// sender id order and are folded by the combiner, if any, in that order.
pub fn oracle_run<P: VertexProgram>(program: &P, graph: &Graph, max_steps: u64) -> Result<OracleResult<P::Value>> {
    let mut states: BTreeMap<u64, VertexState<P::Value>> = BTreeMap::new();
    let mut adjacency: BTreeMap<u64, Vec<AdjacencyItem<P::Edge>>> = BTreeMap::new();
    for (&u, list) in &graph.adj {
        let items = list
            .iter()
            .map(|&(v, w)| {
                let weight = P::Edge::from_weight(w)?;
                program.validate_edge(&weight)?;
                Ok(AdjacencyItem { neighbor: VertexId(v), weight })
            })
            .collect::<Result<Vec<_>>>()?;
        states.insert(u, VertexState::new(VertexId(u), items.len() as u64));
        adjacency.insert(u, items);
    }
    if let Some(v) = graph.dangling() {
        return Err(Error::DanglingNeighbor(v));
    }
    let combiner = program.combiner();
    let aggregator = program.aggregator();
    let mut aggregated = aggregator.map(|a| a.identity).unwrap_or_default();
    let mut inbox: BTreeMap<u64, Vec<P::Message>> = BTreeMap::new();
    let nv = states.len() as u64;
    let mut step = 0;
    loop {
        if step == max_steps {
            return Ok(finish(states, step, false));
        }
        step += 1;
        let mut outbox: Vec<(VertexId, P::Message)> = Vec::new();
        let mut next: BTreeMap<u64, Vec<P::Message>> = BTreeMap::new();
        let mut local = aggregator.map(|a| a.identity).unwrap_or_default();
        for (&id, state) in states.iter_mut() {
            let mut msgs = inbox.remove(&id).unwrap_or_default();
            if !state.active && msgs.is_empty() {
                continue;
            }
            state.active = true;
            if let (Some(c), true) = (combiner, msgs.len() > 1) {
                msgs = vec![c.fold(msgs).unwrap()];
            }
            let mut ctx = Context::new(step, nv, 1, 0, aggregated, aggregator, &mut outbox);
            ctx.original_id = VertexId(id);
            program
                .compute(state, &adjacency[&id], &msgs, &mut ctx)
                .map_err(|e| Error::Compute { vertex: VertexId(id), msg: e.to_string() })?;
            if let Some(a) = aggregator {
                local = (a.merge)(local, ctx.take_local_aggregate());
            }
            for (target, m) in outbox.drain(..) {
                if !adjacency.contains_key(&target.0) {
                    return Err(Error::UnknownVertex(target));
                }
                next.entry(target.0).or_default().push(m);
            }
        }
        aggregated = local;
        inbox = next;
        if inbox.is_empty() && states.values().all(|s| !s.active) {
            return Ok(finish(states, step, true));
        }
    }
}

fn finish<V>(states: BTreeMap<u64, VertexState<V>>, steps: u64, converged: bool) -> OracleResult<V> {
    OracleResult { values: states.into_iter().map(|(k, s)| (k, s.value)).collect(), steps, converged }
}

#[cfg(test)]
mod tests;
