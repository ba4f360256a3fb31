//! The stream layer on its own: a splittable stream cuts messages into
//! bounded files, which are sorted into runs and merged with a combiner.

use semistream::memory::MemTracker;
use semistream::model::codec::decode_all;
use semistream::model::{Combiner, FixedCodec, MessageEnvelope};
use semistream::streams::{kway_merge, ReadStream, SplittableStream, WriteStream};

fn main() -> semistream::Result<()> {
    let dir = tempfile::tempdir()?;
    let mem = MemTracker::new();
    let size = MessageEnvelope::<f64>::SIZE;

    let mut oms = SplittableStream::create(dir.path().join("oms"), 64 * size, 8 * size, &mem)?;
    for i in 0..1000u64 {
        oms.append_with(size, |buf| MessageEnvelope::new(i * 7919 % 100, 1.0).encode(buf))?;
    }
    let limit = oms.seal()?;
    let files = oms.handle().fetch_all_upto(limit);
    println!("{} messages in {} files of at most {} bytes", 1000, files.len(), 64 * size);

    let mut runs = Vec::new();
    for (i, f) in files.iter().enumerate() {
        let mut envs = decode_all::<MessageEnvelope<f64>>(&f.read()?)?;
        envs.sort_by_key(|e| e.target);
        let path = dir.path().join(format!("run-{i}"));
        let mut w = WriteStream::create(&path, 8 * size, &mem)?;
        for e in &envs {
            w.append(e)?;
        }
        w.finish()?;
        runs.push(path);
    }

    let merged = dir.path().join("merged");
    let report = kway_merge(runs, 4, Some(Combiner::sum_f64()), &merged, dir.path(), 8 * size, &mem)?;
    let mut r = ReadStream::<MessageEnvelope<f64>>::open(&merged, 8 * size, &mem)?;
    let first = r.next_item()?.expect("merged output");
    println!(
        "{} passes with fan-in 4 -> {} targets; target {} received {}; peak tracked memory {} bytes",
        report.passes,
        r.len(),
        first.target,
        first.payload,
        mem.peak()
    );
    Ok(())
}
