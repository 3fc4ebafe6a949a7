//! Keyed seed derivation.
//!
//! Every random stream in the simulator is identified by a key built from
//! the master seed, chip id, design name and cell indices. Keys are mixed
//! with the SplitMix64 finalizer, so a stream's contents never depend on
//! the order in which other streams were consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Incrementally built 64-bit stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey(u64);

impl StreamKey {
    pub fn new(seed: u64) -> Self {
        StreamKey(finalize(seed.wrapping_add(GOLDEN)))
    }

    pub fn with(self, part: u64) -> Self {
        StreamKey(finalize(self.0 ^ finalize(part.wrapping_add(GOLDEN))))
    }

    /// Folds a label in with FNV-1a so that names participate in the key.
    pub fn with_label(self, label: &str) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in label.as_bytes() {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        self.with(h)
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Seed of one chip derived from the campaign master seed.
pub fn chip_seed(master_seed: u64, chip_id: u32) -> u64 {
    StreamKey::new(master_seed).with_label("chip").with(u64::from(chip_id)).value()
}

/// Seed of one power-up of one chip.
pub fn cycle_seed(master_seed: u64, chip_id: u32, cycle: u32) -> u64 {
    StreamKey::new(master_seed)
        .with_label("cycle")
        .with(u64::from(chip_id))
        .with(u64::from(cycle))
        .value()
}
