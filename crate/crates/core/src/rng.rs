//! Seeded randomness. Every consumer draws from ChaCha8 keyed by the
//! scenario seed, on its own stream, so streams stay reproducible across
//! platforms and independent of each other.
//!
//! Stream layout: slot `t` of a horizon run uses stream `t`; the scenario
//! generator and the verifier's samplers use the reserved streams below.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StemRng = ChaCha8Rng;

pub const GENERATOR_STREAM: u64 = 1 << 63;
pub const SAMPLER_STREAM: u64 = (1 << 63) + 1;
/// Shape draws (sizes, k, horizon) for the verifier's random scenarios.
pub const SHAPE_STREAM: u64 = (1 << 63) + 2;

pub fn stream_rng(seed: u64, stream: u64) -> StemRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The clustering stream for one slot of a horizon run.
pub fn slot_rng(seed: u64, slot: u32) -> StemRng {
    stream_rng(seed, slot as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |stream| {
            let mut rng = stream_rng(7, stream);
            (0..4).map(|_| rng.random::<u32>()).collect::<Vec<_>>()
        };
        assert_eq!(draw(2), draw(2));
        assert_ne!(draw(2), draw(3));
    }
}
