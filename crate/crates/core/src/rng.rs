//! Counter-based random number generator with explicit stream splitting.
//!
//! The generator produces output word i as `mix(key + i * GOLDEN)` — the
//! SplitMix64 finalizer applied to an affine counter.  State is two words, a
//! draw never depends on earlier draws, and any (seed, stream) pair maps to an
//! independent key, so replicate i of a Monte-Carlo study can use stream i of
//! the study seed with no coordination between workers.

use rand_core::RngCore;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Counter-based generator; `Clone` gives an exact replay point.
#[derive(Debug, Clone)]
pub struct CounterRng {
    key: u64,
    ctr: u64,
}

impl CounterRng {
    /// Root stream for a seed.
    pub fn new(seed: u64) -> Self {
        Self::stream(seed, 0)
    }

    /// Independent stream `stream` of `seed`.  Distinct (seed, stream) pairs
    /// yield unrelated keys.
    pub fn stream(seed: u64, stream: u64) -> Self {
        let key = mix(mix(seed ^ 0xA076_1D64_78BD_642F) ^ mix(stream.wrapping_mul(GOLDEN) ^ 0xE703_7ED1_A0B4_28DB));
        CounterRng { key, ctr: 0 }
    }

    /// Uniform draw in [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in (0, 1].
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }
}

impl RngCore for CounterRng {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.ctr = self.ctr.wrapping_add(1);
        mix(self.key.wrapping_add(self.ctr.wrapping_mul(GOLDEN)))
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        let mut chunks = dest.chunks_exact_mut(8);
        for chunk in &mut chunks {
            chunk.copy_from_slice(&self.next_u64().to_le_bytes());
        }
        let rem = chunks.into_remainder();
        if !rem.is_empty() {
            let bytes = self.next_u64().to_le_bytes();
            rem.copy_from_slice(&bytes[..rem.len()]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_stream_split() {
        let mut a = CounterRng::stream(7, 3);
        let mut b = CounterRng::stream(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = CounterRng::stream(7, 4);
        let same = (0..100).filter(|_| a.next_u64() == c.next_u64()).count();
        assert!(same < 3);
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut rng = CounterRng::new(1);
        let mut sum = 0.0;
        for _ in 0..10_000 {
            let u = rng.uniform();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        assert!((sum / 10_000.0 - 0.5).abs() < 0.02);
    }
}
