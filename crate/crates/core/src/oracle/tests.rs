use super::*;
use crate::algorithms::{Echo, HashMin, PageRank, Sssp};
use crate::graph::{random_graph, IdSpace};

fn cycle(n: u64) -> Graph {
    let mut g = Graph::new(true);
    for i in 0..n {
        g.add_edge(i, (i + 1) % n, None);
    }
    g
}

#[test]
fn pagerank_symmetric_cycles() {
    for (n, want) in [(2, 0.5), (3, 1.0 / 3.0)] {
        let r = oracle_run(&PageRank { steps: 10 }, &cycle(n), 100).unwrap();
        assert!(r.converged);
        assert_eq!(r.steps, 10);
        for v in r.values.values() {
            assert!((v - want).abs() < 1e-15, "{v} vs {want}");
        }
    }
}

#[test]
fn pagerank_matches_power_iteration() {
    for seed in 0..5 {
        let g = random_graph(50, 300, true, false, IdSpace::Sparse, seed);
        let r = oracle_run(&PageRank { steps: 10 }, &g, 100).unwrap();
        let p = power_iteration(&g, 10);
        for (id, v) in &r.values {
            assert!((v - p[id]).abs() < 1e-12);
        }
    }
}

#[test]
fn hashmin_matches_union_find() {
    let mut path = Graph::new(false);
    path.add_edge(3, 1, None);
    path.add_edge(1, 2, None);
    let r = oracle_run(&HashMin, &path, 100).unwrap();
    assert!(r.values.values().all(|&c| c == 1));
    for seed in 0..5 {
        let g = random_graph(1000, 700, false, false, IdSpace::Sparse, seed);
        let r = oracle_run(&HashMin, &g, 10_000).unwrap();
        assert!(r.converged);
        assert_eq!(r.values, union_find_components(&g));
    }
}

#[test]
fn isolated_vertex_is_its_own_component() {
    let mut g = Graph::new(false);
    g.add_vertex(42);
    let r = oracle_run(&HashMin, &g, 10).unwrap();
    assert_eq!(r.values[&42], 42);
    assert_eq!(r.steps, 1);
}

#[test]
fn sssp_matches_bfs_and_dijkstra() {
    for seed in 0..5 {
        let g = random_graph(1000, 3000, true, false, IdSpace::Dense, seed);
        let r = oracle_run(&Sssp { source: VertexId(0) }, &g, 10_000).unwrap();
        assert_eq!(r.values, bfs_levels(&g, 0));
        let g = random_graph(1000, 3000, true, true, IdSpace::Dense, seed);
        let r = oracle_run(&Sssp { source: VertexId(0) }, &g, 10_000).unwrap();
        assert_eq!(r.values, dijkstra(&g, 0));
    }
}

#[test]
fn bfs_on_a_directed_path_takes_length_plus_one_steps() {
    for len in [0u64, 1, 5, 40] {
        let mut g = Graph::new(true);
        g.add_vertex(0);
        for i in 0..len {
            g.add_edge(i, i + 1, None);
        }
        let r = oracle_run(&Sssp { source: VertexId(0) }, &g, 1000).unwrap();
        assert_eq!(r.steps, len + 1);
        assert_eq!(r.values[&len], len as f64);
    }
}

#[test]
fn step_limit_flags_partial_result() {
    let g = cycle(4);
    let r = oracle_run(&Echo { steps: 50 }, &g, 3).unwrap();
    assert!(!r.converged);
    assert_eq!(r.steps, 3);
}

#[test]
fn unreachable_is_infinite() {
    let mut g = Graph::new(true);
    g.add_edge(0, 1, None);
    g.add_vertex(2);
    let r = oracle_run(&Sssp { source: VertexId(0) }, &g, 100).unwrap();
    assert!(r.values[&2].is_infinite());
    assert_eq!(Sssp { source: VertexId(0) }.render_value(&r.values[&2]), "inf");
}

#[test]
fn negative_weight_rejected() {
    let mut g = Graph::new(true);
    g.add_edge(0, 1, Some(-1.0));
    assert!(matches!(oracle_run(&Sssp { source: VertexId(0) }, &g, 10), Err(Error::Config(_))));
}
