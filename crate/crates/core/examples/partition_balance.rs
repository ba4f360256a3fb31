//! Partition sizes under the vertex hash for sparse 64-bit ids.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use semistream::model::{hash_partition, Mode, VertexId};

fn main() {
    let (v, n) = (100_000, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut sizes = vec![0usize; n];
    for _ in 0..v {
        sizes[hash_partition(VertexId(rng.gen()), n, Mode::Normal)] += 1;
    }
    println!("sizes {sizes:?}; mean {}, twice the mean {}", v / n, 2 * v / n);
}
