//! Reproducible, independently seekable random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by a 64-bit seed and selected by
//! a 64-bit stream id. Distinct stream ids address disjoint keystreams, so
//! replications and trees can be simulated in any order on any number of
//! threads and still produce bit-identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The concrete generator handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }

    /// Derives a child stream. The same `(self, tag)` always yields the same child.
    pub fn substream(&self, tag: u64) -> RngStream {
        let mixed = splitmix64(self.stream ^ splitmix64(tag.wrapping_add(0x9E37_79B9_7F4A_7C15)));
        RngStream { seed: self.seed, stream: mixed }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
