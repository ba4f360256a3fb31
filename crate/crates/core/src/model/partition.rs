use serde::{Deserialize, Serialize};

use super::types::VertexId;

/// Execution mode. Recoded mode requires dense ids and a combiner.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Normal,
    Recoded,
}

impl std::str::FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "normal" => Ok(Mode::Normal),
            "recoded" => Ok(Mode::Recoded),
            other => Err(format!("unknown mode `{other}` (expected normal or recoded)")),
        }
    }
}

/// MurmurHash3 `fmix64` finalizer. Public constants, so any implementation
/// partitions a graph identically.
#[inline]
pub fn mix64(mut k: u64) -> u64 {
    k ^= k >> 33;
    k = k.wrapping_mul(0xff51_afd7_ed55_8ccd);
    k ^= k >> 33;
    k = k.wrapping_mul(0xc4ce_b9fe_1a85_ec53);
    k ^= k >> 33;
    k
}

/// Worker owning `id` among `n` workers.
#[inline]
pub fn hash_partition(id: VertexId, n: usize, mode: Mode) -> usize {
    debug_assert!(n >= 1);
    let n = n as u64;
    match mode {
        Mode::Recoded => (id.0 % n) as usize,
        Mode::Normal => (mix64(id.0) % n) as usize,
    }
}

/// Dense id of the vertex at `pos` in the state array of `worker`.
#[inline]
pub fn recoded_id(pos: usize, worker: usize, n: usize) -> VertexId {
    VertexId((n as u64) * (pos as u64) + worker as u64)
}

/// Position in the owning worker's state array of a dense id.
#[inline]
pub fn recoded_pos(id: VertexId, n: usize) -> usize {
    (id.0 / n as u64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn recoded_hash_is_modulo() {
        assert_eq!(hash_partition(VertexId(5), 3, Mode::Recoded), 2);
        for n in 1..10 {
            assert_eq!(hash_partition(VertexId(0), n, Mode::Recoded), 0);
        }
    }

    #[test]
    fn mixer_test_vectors() {
        // Frozen so that other implementations can check their partitioning.
        assert_eq!(mix64(0), 0);
        assert_eq!(mix64(1), 0xb456_bcfc_34c2_cb2c);
        assert_eq!(hash_partition(VertexId(102), 3, Mode::Normal), 2);
    }

    #[test]
    fn normal_hash_balances_a_million_ids() {
        let mut counts = [0u64; 10];
        for id in 0..1_000_000u64 {
            counts[hash_partition(VertexId(id), 10, Mode::Normal)] += 1;
        }
        assert_eq!(counts.iter().sum::<u64>(), 1_000_000);
        assert!(counts.iter().all(|&c| c < 200_000), "{counts:?}");
    }

    #[test]
    fn hash_is_stable_across_repeated_calls() {
        let first = hash_partition(VertexId(0xdead_beef), 7, Mode::Normal);
        for _ in 0..1_000_000 {
            assert_eq!(hash_partition(VertexId(0xdead_beef), 7, Mode::Normal), first);
        }
    }

    #[test]
    fn fig4_position_formulas() {
        assert_eq!(recoded_id(1, 2, 3), VertexId(5));
        assert_eq!(recoded_pos(VertexId(5), 3), 1);
    }

    proptest! {
        #[test]
        fn recoded_id_round_trips(pos in 0usize..1_000_000, n in 1usize..64, w in 0usize..64) {
            let w = w % n;
            let id = recoded_id(pos, w, n);
            prop_assert_eq!(recoded_pos(id, n), pos);
            prop_assert_eq!(hash_partition(id, n, Mode::Recoded), w);
        }
    }
}
