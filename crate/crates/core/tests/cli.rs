use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use semistream::cli::JobReport;
use semistream::graph::{random_graph, recode_example, IdSpace};

fn semistream(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_semistream")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = semistream(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn put_run_verify_stats_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (input, store) = (dir.path().join("g.txt"), dir.path().join("store"));
    random_graph(500, 2000, false, false, IdSpace::Sparse, 3).write_text(&input).unwrap();
    ok(&["put", s(&input), "--store", s(&store), "--undirected"]);

    let (one, many) = (dir.path().join("one"), dir.path().join("many"));
    ok(&["run", "hashmin", "--store", s(&store), "-n", "1", "--out", s(&one)]);
    ok(&["run", "hashmin", "--store", s(&store), "-n", "3", "--transport", "sockets", "--out", s(&many), "--oracle"]);
    ok(&["verify", s(&one), s(&many)]);

    let table = ok(&["stats", s(&many)]);
    assert!(table.contains("pass bounds: ok"), "{table}");
    let report = JobReport::load(&many).unwrap();
    assert_eq!(report.workers, 3);
    assert_eq!(report.per_worker.len(), 3);
}

#[test]
fn verify_flags_a_changed_value() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
    fs::write(&a, "1\t0.5\n2\t0.25\n").unwrap();
    fs::write(&b, "1\t0.5\n2\t0.2500001\n").unwrap();
    assert_eq!(semistream(&["verify", s(&a), s(&b)]).status.code(), Some(1));
    assert_eq!(semistream(&["verify", s(&a), s(&b), "--tol", "1e-6"]).status.code(), Some(0));
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let (input, store) = (dir.path().join("g.txt"), dir.path().join("store"));
    let g = random_graph(2000, 12_000, true, true, IdSpace::Sparse, 8);
    g.write_text(&input).unwrap();
    ok(&["put", s(&input), "--store", s(&store)]);
    let source = g.adj.keys().next().unwrap().to_string();
    let (one, eight) = (dir.path().join("one"), dir.path().join("eight"));
    for alg in ["pagerank", "sssp"] {
        let base = ["run", alg, "--store", s(&store), "--source", &source];
        ok(&[&base[..], &["-n", "1", "--out", s(&one)]].concat());
        ok(&[&base[..], &["-n", "8", "--seed", "4", "--delay-us", "300", "--out", s(&eight)]].concat());
        ok(&["verify", s(&one), s(&eight), "--tol", "1e-12"]);
    }
}

#[test]
fn recode_needs_force_to_redo() {
    let dir = tempfile::tempdir().unwrap();
    let (input, store) = (dir.path().join("g.txt"), dir.path().join("store"));
    recode_example().write_text(&input).unwrap();
    ok(&["put", s(&input), "--store", s(&store)]);
    ok(&["recode", "--store", s(&store), "-n", "3"]);
    assert_eq!(semistream(&["recode", "--store", s(&store), "-n", "3"]).status.code(), Some(1));
    ok(&["recode", "--store", s(&store), "-n", "3", "--force"]);

    let (normal, recoded) = (dir.path().join("normal"), dir.path().join("recoded"));
    ok(&["run", "pagerank", "--store", s(&store), "-n", "3", "--out", s(&normal)]);
    ok(&["run", "pagerank", "--store", s(&store), "-n", "3", "--mode", "recoded", "--out", s(&recoded), "--oracle"]);
    ok(&["verify", s(&normal), s(&recoded), "--tol", "1e-12"]);
    // recoded runs must use the worker count the store was recoded for
    assert_ne!(
        semistream(&["run", "pagerank", "--store", s(&store), "-n", "2", "--mode", "recoded"]).status.code(),
        Some(0)
    );
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let (input, store) = (dir.path().join("g.txt"), dir.path().join("store"));
    random_graph(300, 900, true, false, IdSpace::Dense, 5).write_text(&input).unwrap();
    let conf = dir.path().join("job.conf");
    fs::write(&conf, format!("# job settings\nstore = {}\nn = 2\nb = 4096\nB = 65536\n", s(&store))).unwrap();
    ok(&["put", s(&input), "--config", s(&conf)]);
    let out = dir.path().join("out");
    ok(&["run", "pagerank", "--config", s(&conf), "--out", s(&out)]);
    assert_eq!(JobReport::load(&out).unwrap().workers, 2);
    ok(&["run", "pagerank", "--config", s(&conf), "-n", "5", "--out", s(&out)]);
    assert_eq!(JobReport::load(&out).unwrap().workers, 5);
}

#[test]
fn bad_invocations_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(semistream(&["run", "triangles", "--store", s(dir.path())]).status.code(), Some(2));
    let missing = semistream(&["run", "pagerank", "--store", s(&dir.path().join("nothing"))]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&missing.stderr).is_empty());
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "1\t2\t5\n").unwrap();
    assert_eq!(semistream(&["put", s(&bad), "--store", s(&dir.path().join("st"))]).status.code(), Some(1));
}
