//! Disk-resident streams: buffered sequential reads and writes, splittable
//! output streams and external k-way merging.

pub mod merge;
pub mod read;
pub mod split;
pub mod write;

pub use merge::{
    kway_merge, merge_passes, merge_runs_to_file, merge_runs_with, FixedRuns, Grouping, Keyed, MergeReport, RunFormat,
    RunReader, RunWriter,
};
pub use read::{ReadStats, ReadStream};
pub use split::{part_path, FileSignal, SplitFile, SplitHandle, SplittableStream};
pub use write::{ByteWriter, WriteStats, WriteStream};
