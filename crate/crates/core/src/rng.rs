//! Deterministic random stream splitting.
//!
//! Every random decision derives from one master seed. A component asks for
//! a stream by label plus integer indices (epoch, iteration, worker, trial).
//! The label and indices are hashed with 64-bit FNV-1a into a ChaCha stream
//! id, and the master seed is the ChaCha key, so streams are independent and
//! any single stream can be replayed without running the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut hash: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Stream id for `label` and `indices` under the FNV-1a rule above.
pub fn stream_id(label: &str, indices: &[u64]) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, label.as_bytes());
    // separator so ("ab", [..]) and ("a", ..) cannot collide through the label
    h = fnv1a(h, &[0xff]);
    for idx in indices {
        h = fnv1a(h, &idx.to_le_bytes());
    }
    h
}

pub fn stream_rng(master_seed: u64, label: &str, indices: &[u64]) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(label, indices));
    rng
}
