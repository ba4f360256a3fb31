use std::path::Path;
use std::sync::Arc;

use semistream::algorithms::{Echo, HashMin, PageRank, Sssp};
use semistream::graph::{random_graph, Graph, IdSpace};
use semistream::model::{JobConfig, Mode, SimOptions, TransportKind, VertexId, VertexProgram};
use semistream::oracle::oracle_run;
use semistream::worker::{run_job, GraphSource, JobOutput};

fn run<P: VertexProgram>(p: P, g: &Graph, n: usize, transport: TransportKind, dir: &Path) -> JobOutput<P::Value> {
    let input = dir.join("g.txt");
    g.write_text(&input).unwrap();
    let cfg = JobConfig::new(n, dir.join("scratch"))
        .with_transport(transport)
        .with_buffers(4096, 16 * 1024, 8)
        .with_sim(SimOptions { seed: 7, max_delay: std::time::Duration::from_micros(200), ..Default::default() });
    run_job(Arc::new(p), &cfg, &GraphSource::Text(input)).unwrap()
}

#[test]
fn small_jobs_match_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let g = random_graph(300, 1500, true, true, IdSpace::Sparse, 1);
    let ug = random_graph(300, 250, false, false, IdSpace::Sparse, 2);
    for n in [1, 3] {
        for t in [TransportKind::Sim, TransportKind::Sockets] {
            let out = run(PageRank { steps: 10 }, &g, n, t, dir.path());
            let want = oracle_run(&PageRank { steps: 10 }, &g, 100).unwrap().values;
            assert_eq!(out.values.len(), want.len());
            for (id, v) in &out.values {
                assert!((v - want[&id.0]).abs() < 1e-12);
            }
            let out = run(HashMin, &ug, n, t, dir.path());
            let want = oracle_run(&HashMin, &ug, 1000).unwrap().values;
            assert!(out.values.iter().all(|(id, v)| want[&id.0] == *v));
            let src = *g.adj.keys().next().unwrap();
            let out = run(Sssp { source: VertexId(src) }, &g, n, t, dir.path());
            let want = oracle_run(&Sssp { source: VertexId(src) }, &g, 1000).unwrap().values;
            assert!(out.values.iter().all(|(id, v)| want[&id.0] == *v));
            let out = run(Echo { steps: 2 }, &g, n, t, dir.path());
            let want = oracle_run(&Echo { steps: 2 }, &g, 1000).unwrap().values;
            assert!(out.values.iter().all(|(id, v)| want[&id.0] == *v));
        }
    }
}

#[test]
fn recoded_mode_matches_normal_mode() {
    use semistream::recode::recode_graph;
    let dir = tempfile::tempdir().unwrap();
    let g = random_graph(400, 2000, true, true, IdSpace::Sparse, 5);
    let input = dir.path().join("g.txt");
    g.write_text(&input).unwrap();
    for n in [1, 4] {
        let cfg = JobConfig::new(n, dir.path().join("scratch")).with_buffers(4096, 16 * 1024, 8);
        recode_graph(&cfg, &input, true, true).unwrap();
        let rc = cfg.clone().with_mode(Mode::Recoded);
        let src = GraphSource::Recoded { weighted: true };
        let normal = run_job(Arc::new(PageRank { steps: 10 }), &cfg, &GraphSource::Text(input.clone())).unwrap();
        let rec = run_job(Arc::new(PageRank { steps: 10 }), &rc, &src).unwrap();
        assert_eq!(normal.values.len(), rec.values.len());
        for (a, b) in normal.values.iter().zip(&rec.values) {
            assert_eq!(a.0, b.0);
            assert!((a.1 - b.1).abs() < 1e-12);
        }
        let s = VertexId(*g.adj.keys().nth(3).unwrap());
        let normal = run_job(Arc::new(Sssp { source: s }), &cfg, &GraphSource::Text(input.clone())).unwrap();
        let rec = run_job(Arc::new(Sssp { source: s }), &rc, &src).unwrap();
        assert_eq!(normal.values, rec.values);
        assert!(rec.workers.iter().flat_map(|w| &w.steps).all(|s| s.merge_calls == 0));
    }
}
