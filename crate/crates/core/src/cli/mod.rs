//! Command-line driver: `put`, `recode`, `run`, `verify` and `stats`.

mod report;
mod settings;
mod store;
mod verify;

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener};
use std::path::{Path, PathBuf};
use std::process::{Child, Command as Process, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use clap::builder::PossibleValuesParser;
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

pub use report::{JobReport, STATS_FILE};
pub use settings::{pick, pick_opt, ConfigFile};
pub use store::{put, Manifest, RecodeRecord, GRAPH_FILE, MANIFEST_FILE};
pub use verify::{compare, read_results, VerifyReport};

use crate::algorithms::{Algorithm, ProgramJob, ALGORITHMS};
use crate::comm::SocketTransport;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{JobConfig, Mode, SimOptions, TransportKind, VertexProgram};
use crate::oracle::oracle_run;
use crate::recode::recode_graph;
use crate::worker::{dump_results, run_job, run_worker, GraphSource, WorkerStats};

#[derive(Debug, Parser)]
#[command(name = "semistream", version, about = "Out-of-core vertex-centric graph processing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a text graph and copy it into the shared store.
    Put(PutArgs),
    /// Renumber the stored graph for recoded-mode runs.
    Recode(RecodeArgs),
    /// Run an algorithm on the stored graph.
    Run(RunArgs),
    /// Compare two result dumps by vertex id.
    Verify(VerifyArgs),
    /// Summarize a stats file and check its pass bounds.
    Stats(StatsArgs),
    #[command(hide = true)]
    Worker(WorkerArgs),
}

/// Options shared by commands that start workers. Each flag may instead
/// come from the `--config` file under the same name.
#[derive(Debug, Args, Default)]
pub struct JobArgs {
    /// Flat key=value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of workers.
    #[arg(short = 'n')]
    pub n: Option<usize>,
    /// `normal`, or `recoded` after `recode` [default: normal].
    #[arg(long)]
    pub mode: Option<Mode>,
    /// `sim` (threads, simulated network) or `sockets` (one process per
    /// worker over TCP) [default: sim].
    #[arg(long)]
    pub transport: Option<TransportKind>,
    /// Seed of the simulated network's delays.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Upper bound of the simulated per-batch delay, in microseconds.
    #[arg(long = "delay-us")]
    pub delay_us: Option<u64>,
    /// Stream buffer size in bytes.
    #[arg(long = "b")]
    pub b: Option<usize>,
    /// Split file size of outgoing message streams in bytes.
    #[arg(long = "B")]
    pub big_b: Option<usize>,
    /// Merge fan-in.
    #[arg(long = "k")]
    pub k: Option<usize>,
    /// Shared store directory.
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// Root of the workers' local scratch directories [default: <store>/local].
    #[arg(long)]
    pub scratch: Option<PathBuf>,
    /// Output directory [default: <store>/out].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PutArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub store: Option<PathBuf>,
    /// The input lists each undirected edge in both adjacency lists.
    #[arg(long)]
    pub undirected: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecodeArgs {
    #[command(flatten)]
    pub job: JobArgs,
    /// Recode again even if the store is already recoded.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(value_parser = PossibleValuesParser::new(ALGORITHMS))]
    pub algorithm: String,
    #[command(flatten)]
    pub job: JobArgs,
    /// Supersteps for pagerank and echo.
    #[arg(long)]
    pub steps: Option<u64>,
    /// Source vertex (input id) for sssp.
    #[arg(long)]
    pub source: Option<u64>,
    /// Also run the in-memory reference executor and compare.
    #[arg(long)]
    pub oracle: bool,
    /// Tolerance of the oracle comparison [default: per algorithm].
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    pub output: PathBuf,
    pub expected: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// A stats file or the output directory holding one.
    pub path: PathBuf,
    /// Print the raw JSON instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct WorkerArgs {
    #[arg(long)]
    pub job: PathBuf,
    #[arg(long)]
    pub index: usize,
}

/// Everything a worker process needs to join a job.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct WorkerJob {
    algorithm: String,
    steps: u64,
    source: u64,
    cfg: JobConfig,
    text: Option<PathBuf>,
    recoded_weighted: Option<bool>,
}

impl WorkerJob {
    fn graph_source(&self) -> GraphSource {
        match (&self.text, self.recoded_weighted) {
            (Some(p), _) => GraphSource::Text(p.clone()),
            (None, w) => GraphSource::Recoded { weighted: w.unwrap_or(false) },
        }
    }
}

/// Parses arguments and runs the command. Returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

pub fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Put(a) => cmd_put(a),
        Command::Recode(a) => cmd_recode(a),
        Command::Run(a) => cmd_run(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Worker(a) => cmd_worker(a),
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    path.as_deref().map(ConfigFile::load).transpose().map(Option::unwrap_or_default)
}

fn store_dir(flag: Option<PathBuf>, file: &ConfigFile) -> Result<PathBuf> {
    pick_opt(flag, file, "store")?
        .ok_or_else(|| Error::Config("no store given (--store or store= in the config)".into()))
}

struct Resolved {
    cfg: JobConfig,
    store: PathBuf,
    file: ConfigFile,
}

fn resolve(a: JobArgs) -> Result<Resolved> {
    let file = load_config(&a.config)?;
    let store = store_dir(a.store, &file)?;
    let n = pick(a.n, &file, "n", 1)?;
    let scratch = pick(a.scratch, &file, "scratch", store.join("local"))?;
    let mut cfg = JobConfig::new(n, scratch)
        .with_mode(pick(a.mode, &file, "mode", Mode::Normal)?)
        .with_transport(pick(a.transport, &file, "transport", TransportKind::Sim)?)
        .with_buffers(
            pick(a.b, &file, "b", crate::model::config::DEFAULT_STREAM_BUFFER)?,
            pick(a.big_b, &file, "B", crate::model::config::DEFAULT_SPLIT_SIZE)?,
            pick(a.k, &file, "k", crate::model::config::DEFAULT_MERGE_FANIN)?,
        )
        .with_sim(SimOptions {
            seed: pick(a.seed, &file, "seed", 0)?,
            max_delay: Duration::from_micros(pick(a.delay_us, &file, "delay-us", 0)?),
            nanos_per_byte: pick(None, &file, "nanos-per-byte", 0)?,
            ..Default::default()
        })
        .with_output(pick(a.out, &file, "out", store.join("out"))?);
    cfg.in_flight = pick(None, &file, "in-flight", cfg.in_flight)?;
    cfg.max_supersteps = pick(None, &file, "max-supersteps", cfg.max_supersteps)?;
    Ok(Resolved { cfg, store, file })
}

fn cmd_put(a: PutArgs) -> Result<i32> {
    let file = load_config(&a.config)?;
    let store = store_dir(a.store, &file)?;
    let undirected = a.undirected || file.get::<bool>("undirected")?.unwrap_or(false);
    let m = put(&a.input, &store, !undirected)?;
    println!(
        "stored {} vertices, {} adjacency items ({}, {}) in {}",
        m.vertices,
        m.arcs,
        if m.directed { "directed" } else { "undirected" },
        if m.weighted { "weighted" } else { "unweighted" },
        store.display()
    );
    Ok(0)
}

fn cmd_recode(a: RecodeArgs) -> Result<i32> {
    let r = resolve(a.job)?;
    let mut m = Manifest::load(&r.store)?;
    if m.recode.is_some() && !a.force {
        return Err(Error::Precondition(format!(
            "{} is already recoded; pass --force to recode again",
            r.store.display()
        )));
    }
    let mut cfg = r.cfg;
    if cfg.transport == TransportKind::Sockets {
        // the recoding job runs in this process; threads stand in for workers
        cfg.transport = TransportKind::Sim;
    }
    let rep = recode_graph(&cfg, &r.store.join(GRAPH_FILE), m.directed, m.weighted)?;
    m.recode = Some(RecodeRecord {
        workers: cfg.num_workers,
        scratch: cfg.scratch_dir.clone(),
        wall_ms: rep.wall.as_secs_f64() * 1e3,
        load_ms: rep.load.as_secs_f64() * 1e3,
        messages: rep.messages,
        supersteps: rep.supersteps,
    });
    m.save(&r.store)?;
    println!(
        "recoded {} vertices for {} workers in {:.1} ms ({} supersteps, {} messages; loading took {:.1} ms)",
        rep.vertices,
        cfg.num_workers,
        rep.wall.as_secs_f64() * 1e3,
        rep.supersteps,
        rep.messages,
        rep.load.as_secs_f64() * 1e3
    );
    Ok(0)
}

struct ThreadRun<'a> {
    cfg: &'a JobConfig,
    source: &'a GraphSource,
}

impl ProgramJob for ThreadRun<'_> {
    type Output = Result<Vec<WorkerStats>>;
    fn run<P: VertexProgram>(self, program: P) -> Self::Output {
        Ok(run_job(Arc::new(program), self.cfg, self.source)?.workers)
    }
}

struct OracleRun<'a> {
    graph: &'a Graph,
    out: &'a Path,
    max_steps: u64,
}

impl ProgramJob for OracleRun<'_> {
    type Output = Result<()>;
    fn run<P: VertexProgram>(self, program: P) -> Self::Output {
        let r = oracle_run(&program, self.graph, self.max_steps)?;
        if !r.converged {
            return Err(Error::Aborted(format!("oracle did not converge within {} supersteps", self.max_steps)));
        }
        let values: Vec<_> = r.values.into_iter().map(|(k, v)| (crate::model::VertexId(k), v)).collect();
        dump_results(&program, self.out, 0, &values)
    }
}

struct ProcessRun {
    index: usize,
    transport: Arc<SocketTransport>,
    job: WorkerJob,
}

impl ProgramJob for ProcessRun {
    type Output = Result<WorkerStats>;
    fn run<P: VertexProgram>(self, program: P) -> Self::Output {
        let out = run_worker(&program, &self.job.cfg, self.index, self.transport, &self.job.graph_source())?;
        Ok(out.stats)
    }
}

fn clear_parts(out: &Path) -> Result<()> {
    if out.is_dir() {
        for e in fs::read_dir(out).map_err(Error::at(out))? {
            let p = e.map_err(Error::at(out))?.path();
            if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("part-")) {
                fs::remove_file(&p).map_err(Error::at(&p))?;
            }
        }
    }
    fs::create_dir_all(out).map_err(Error::at(out))
}

fn cmd_run(a: RunArgs) -> Result<i32> {
    let r = resolve(a.job)?;
    let mut cfg = r.cfg;
    let m = Manifest::load(&r.store)?;
    let default_steps = if a.algorithm == "echo" { 1 } else { 10 };
    let steps = pick(a.steps, &r.file, "steps", default_steps)?;
    let source = pick(a.source, &r.file, "source", 0)?;
    let alg = Algorithm::parse(&a.algorithm, steps, source)?;
    if alg.needs_undirected() && m.directed {
        return Err(Error::Config(format!("{} needs an undirected graph (put --undirected)", alg.name())));
    }
    let text = r.store.join(GRAPH_FILE);
    let mut job = WorkerJob {
        algorithm: a.algorithm.clone(),
        steps,
        source,
        cfg: cfg.clone(),
        text: Some(text.clone()),
        recoded_weighted: None,
    };
    if cfg.mode == Mode::Recoded {
        let rec = m
            .recode
            .as_ref()
            .ok_or_else(|| Error::Precondition("recoded mode needs a recoded store; run `recode` first".into()))?;
        if rec.workers != cfg.num_workers {
            return Err(Error::Precondition(format!(
                "the store was recoded for {} workers, not {}",
                rec.workers, cfg.num_workers
            )));
        }
        cfg.scratch_dir = rec.scratch.clone();
        job.cfg = cfg.clone();
        job.text = None;
        job.recoded_weighted = Some(m.weighted);
    }
    let out = cfg.output_dir.clone().expect("resolve sets an output directory");
    clear_parts(&out)?;
    let start = Instant::now();
    let per_worker = match cfg.transport {
        TransportKind::Sim => alg.dispatch(ThreadRun { cfg: &cfg, source: &job.graph_source() })?,
        TransportKind::Sockets => run_processes(&job)?,
    };
    let report = JobReport {
        algorithm: alg.name().to_string(),
        mode: cfg.mode,
        transport: cfg.transport,
        workers: cfg.num_workers,
        supersteps: per_worker.iter().map(|w| w.steps.len()).max().unwrap_or(0),
        wall_ns: start.elapsed().as_nanos() as u64,
        per_worker,
    };
    report.save(&out.join(STATS_FILE))?;
    println!(
        "{}: {} supersteps in {:.3} s; results in {}",
        alg.name(),
        report.supersteps,
        report.wall_ns as f64 / 1e9,
        out.display()
    );
    if a.oracle {
        let graph = Graph::read_text(&text, m.directed)?;
        let oracle_dir = out.join("oracle");
        let _ = fs::remove_dir_all(&oracle_dir);
        alg.dispatch(OracleRun { graph: &graph, out: &oracle_dir, max_steps: cfg.max_supersteps })?;
        let v = compare(&read_results(&out)?, &read_results(&oracle_dir)?, a.tol.unwrap_or(alg.default_tolerance()));
        print_verify(&v);
        if !v.ok() {
            return Ok(1);
        }
    }
    Ok(0)
}

fn kill_all(children: &mut [Child]) {
    for c in children.iter_mut() {
        let _ = c.kill();
        let _ = c.wait();
    }
}

/// Starts one process per worker, wires their sockets together and waits.
fn run_processes(job: &WorkerJob) -> Result<Vec<WorkerStats>> {
    let n = job.cfg.num_workers;
    fs::create_dir_all(&job.cfg.scratch_dir).map_err(Error::at(&job.cfg.scratch_dir))?;
    let job_path = job.cfg.scratch_dir.join("job.json");
    fs::write(&job_path, serde_json::to_string(job).expect("job serializes")).map_err(Error::at(&job_path))?;
    let exe = std::env::current_exe()?;
    let mut children = Vec::with_capacity(n);
    for i in 0..n {
        let _ = fs::remove_file(job.cfg.worker_dir(i).join(STATS_FILE));
        let child = Process::new(&exe)
            .arg("worker")
            .arg("--job")
            .arg(&job_path)
            .arg("--index")
            .arg(i.to_string())
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn();
        match child {
            Ok(c) => children.push(c),
            Err(e) => {
                kill_all(&mut children);
                return Err(e.into());
            }
        }
    }
    let mut ports = Vec::with_capacity(n);
    for (i, c) in children.iter_mut().enumerate() {
        let mut line = String::new();
        let read = BufReader::new(c.stdout.as_mut().expect("piped")).read_line(&mut line);
        match (read, line.trim().strip_prefix("PORT ").and_then(|p| p.parse::<u16>().ok())) {
            (Ok(_), Some(p)) => ports.push(p),
            _ => {
                kill_all(&mut children);
                return Err(Error::Transport(format!("worker {i} did not report a port")));
            }
        }
    }
    let peers = ports.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",");
    for c in children.iter_mut() {
        let mut stdin = c.stdin.take().expect("piped");
        let _ = writeln!(stdin, "{peers}");
    }
    let mut failed = None;
    for (i, c) in children.iter_mut().enumerate() {
        let status = c.wait()?;
        if !status.success() && failed.is_none() {
            failed = Some(format!("worker {i} exited with {status}"));
        }
    }
    if let Some(msg) = failed {
        return Err(Error::Aborted(msg));
    }
    (0..n)
        .map(|i| {
            let p = job.cfg.worker_dir(i).join(STATS_FILE);
            let text = fs::read_to_string(&p).map_err(Error::at(&p))?;
            serde_json::from_str(&text).map_err(|e| Error::Corruption(format!("{}: {e}", p.display())))
        })
        .collect()
}

fn cmd_worker(a: WorkerArgs) -> Result<i32> {
    let text = fs::read_to_string(&a.job).map_err(Error::at(&a.job))?;
    let job: WorkerJob = serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", a.job.display())))?;
    let listener = TcpListener::bind("127.0.0.1:0")?;
    let port = listener.local_addr()?.port();
    {
        let mut out = std::io::stdout().lock();
        writeln!(out, "PORT {port}")?;
        out.flush()?;
    }
    let mut line = String::new();
    std::io::stdin().lock().read_line(&mut line)?;
    let addrs = line
        .trim()
        .split(',')
        .map(|p| p.parse::<u16>().map(|p| SocketAddr::from(([127, 0, 0, 1], p))))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::Transport(format!("bad peer list: {e}")))?;
    let t = SocketTransport::establish(a.index, listener, &addrs, job.cfg.in_flight, Duration::from_secs(30))?;
    let alg = Algorithm::parse(&job.algorithm, job.steps, job.source)?;
    let stats = alg.dispatch(ProcessRun { index: a.index, transport: t, job: job.clone() })?;
    let p = job.cfg.worker_dir(a.index).join(STATS_FILE);
    fs::write(&p, serde_json::to_string(&stats).expect("stats serialize")).map_err(Error::at(&p))?;
    Ok(0)
}

fn print_verify(v: &VerifyReport) {
    println!(
        "compared {} vertices: {} mismatches, {} missing, max abs diff {:e}",
        v.compared, v.mismatches, v.missing, v.max_abs_diff
    );
    if let Some((id, got, want)) = &v.first {
        println!("first mismatch at vertex {id}: got {got}, expected {want}");
    }
}

fn cmd_verify(a: VerifyArgs) -> Result<i32> {
    let v = compare(&read_results(&a.output)?, &read_results(&a.expected)?, a.tol);
    print_verify(&v);
    Ok(if v.ok() { 0 } else { 1 })
}

fn cmd_stats(a: StatsArgs) -> Result<i32> {
    let r = JobReport::load(&a.path)?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
    } else {
        print!("{}", r.render());
    }
    Ok(if r.pass_violations().is_empty() { 0 } else { 1 })
}
