//! Reproducible per-(sample, operator) random streams.
//!
//! Every stochastic operator receives its own [`SeededRng`], keyed by the
//! pipeline's master seed, the sample's position in the dataset and the
//! operator's position in the pipeline. The 256-bit ChaCha key is produced
//! by SplitMix64 mixing of those three words with distinct domain constants,
//! so neighbouring keys land on unrelated streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Position of a stream in the (sample, operator) grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub sample_index: u64,
    pub operator_index: u64,
}

#[derive(Debug, Clone)]
pub struct SeededRng {
    master_seed: u64,
    key: StreamKey,
    inner: ChaCha12Rng,
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const DOMAIN: [u64; 4] = [
    0x6F63_7461_7567_0001,
    0xA076_1D64_78BD_642F,
    0xE703_7ED1_A0B4_28DB,
    0x8EBC_6AF0_9C88_C6E3,
];

fn mix_key(master_seed: u64, sample_index: u64, operator_index: u64) -> [u8; 32] {
    let a = splitmix64(master_seed ^ DOMAIN[0]);
    let b = splitmix64(a ^ splitmix64(sample_index ^ DOMAIN[1]));
    let c = splitmix64(b ^ splitmix64(operator_index ^ DOMAIN[2]));
    let words = [
        splitmix64(c ^ DOMAIN[3]),
        splitmix64(c.rotate_left(17) ^ a),
        splitmix64(c.rotate_left(31) ^ b),
        splitmix64(c.rotate_left(47) ^ DOMAIN[0]),
    ];
    let mut seed = [0u8; 32];
    for (chunk, w) in seed.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&w.to_le_bytes());
    }
    seed
}

/// Stream for one operator applied to one sample.
pub fn derive_rng(master_seed: u64, sample_index: u64, operator_index: u64) -> SeededRng {
    SeededRng {
        master_seed,
        key: StreamKey {
            sample_index,
            operator_index,
        },
        inner: ChaCha12Rng::from_seed(mix_key(master_seed, sample_index, operator_index)),
    }
}

impl SeededRng {
    /// Convenience stream for callers outside a pipeline (tests, previews).
    pub fn from_seed(seed: u64) -> Self {
        derive_rng(seed, 0, 0)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_key(&self) -> StreamKey {
        self.key
    }
}

impl RngCore for SeededRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    #[inline]
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
