//! Deterministic seed derivation.
//!
//! Sub-seeds are produced by packing a cell coordinate into a 64-bit counter,
//! XOR-ing it with the mixed master seed and applying the SplitMix64
//! finalizer. The finalizer is a bijection on `u64`, so for a fixed master
//! seed distinct coordinates always yield distinct seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Coordinate of one unit of work in an experiment grid.
///
/// Field widths: stream 4 bits, dataset 16, imputer 12, level 12, repeat 20.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SeedCoord {
    pub stream: u8,
    pub dataset: u16,
    pub imputer: u16,
    pub level: u16,
    pub repeat: u32,
}

impl SeedCoord {
    fn pack(&self) -> u64 {
        assert!(self.stream < 1 << 4, "stream index out of range");
        assert!(self.imputer < 1 << 12, "imputer index out of range");
        assert!(self.level < 1 << 12, "level index out of range");
        assert!(self.repeat < 1 << 20, "repeat index out of range");
        (self.stream as u64) << 60
            | (self.dataset as u64) << 44
            | (self.imputer as u64) << 32
            | (self.level as u64) << 20
            | self.repeat as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn derive(&self, coord: SeedCoord) -> u64 {
        mix64(mix64(self.master) ^ coord.pack())
    }
}
