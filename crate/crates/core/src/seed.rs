//! Deterministic seed derivation for independent random substreams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0100_0000_01b3;

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Seed of the substream named by `label` and `indices` under `master`.
pub fn substream_seed(master: u64, label: &str, indices: &[u64]) -> u64 {
    let bytes = master
        .to_le_bytes()
        .into_iter()
        .chain(label.bytes())
        .chain([0xff])
        .chain(indices.iter().flat_map(|i| i.to_le_bytes()));
    fnv1a(bytes)
}

pub fn substream(master: u64, label: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master, label, indices))
}
