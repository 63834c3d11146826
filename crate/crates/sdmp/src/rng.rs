//! Deterministic keystream generator.
//!
//! One SplitMix64-style mixing recurrence drives every source of randomness
//! in the crate: the stream cipher, frame shuffling, MAC backoff draws,
//! adversary sampling and Monte Carlo trials. Identical `(seed, stream)`
//! inputs produce identical bytes on every platform.

/// Golden-ratio increment of the mixing recurrence.
const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Deterministic word generator seeded by `seed ^ stream`.
///
/// Distinct `stream` values carve independent substreams out of a single
/// seed, which is how one transfer seed feeds the shuffle, the adversary
/// sample and the MAC backoff without the draws interleaving.
#[derive(Debug, Clone)]
pub struct Keystream {
    state: u64,
}

impl Keystream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { state: seed ^ stream }
    }

    /// Next 64-bit word of the stream.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64) / DEN
    }

    /// Uniform draw in `[0, bound)`. `bound` must be non-zero.
    ///
    /// Plain modulo reduction; the bias is irrelevant for simulation-scale
    /// bounds and keeps the draw reproducible from a single word.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        self.next_u64() % bound
    }

    /// Emit `nbytes` of keystream, each word serialized big-endian.
    pub fn take_bytes(&mut self, nbytes: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(nbytes);
        while out.len() < nbytes {
            let word = self.next_u64().to_be_bytes();
            let need = nbytes - out.len();
            out.extend_from_slice(&word[..need.min(8)]);
        }
        out
    }
}

/// `nbytes` of deterministic keystream for `(key, stream)`.
pub fn keystream(key: u64, stream: u64, nbytes: usize) -> Vec<u8> {
    Keystream::new(key, stream).take_bytes(nbytes)
}
