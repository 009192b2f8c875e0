use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Samples per parallel work unit. Fixed, so the split of the work (and
/// hence every output) is independent of the thread count.
pub const BLOCK_SAMPLES: u64 = 2048;

/// Seeded random stream. Replicas draw from `split(i)`, which selects a
/// distinct ChaCha stream for the same key, so results do not depend on how
/// replicas are scheduled.
#[derive(Debug, Clone)]
pub struct RandomSource {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Stream for replica `i`. Splitting is a pure function of
    /// `(seed, stream, i)`, never of how much this source has been used.
    pub fn split(&self, i: u64) -> Self {
        // Nested splits mix the parent stream into the child index.
        let stream = if self.stream == 0 {
            i.wrapping_add(1)
        } else {
            self.stream
                .wrapping_mul(0x9E37_79B9_7F4A_7C15)
                .rotate_left(29)
                ^ i.wrapping_add(1)
        };
        Self::with_stream(self.seed, stream)
    }
}

/// Runs `samples` draws in blocks of [`BLOCK_SAMPLES`] on the rayon pool.
/// Block `i` gets stream `i` of a fresh source seeded from `rng`, and the
/// per-block results come back in block order.
pub fn par_blocks<T, F>(rng: &mut RandomSource, samples: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut RandomSource, u64) -> T + Sync,
{
    let base = RandomSource::new(rng.next_u64());
    let blocks = samples.div_ceil(BLOCK_SAMPLES);
    (0..blocks)
        .into_par_iter()
        .map(|i| {
            let n = BLOCK_SAMPLES.min(samples - i * BLOCK_SAMPLES);
            f(&mut base.split(i), n)
        })
        .collect()
}

impl RngCore for RandomSource {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RandomSource::new(7);
        let mut b = RandomSource::new(7);
        let xa: Vec<u64> = (0..16).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..16).map(|_| b.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, (0..16).map(|_| RandomSource::new(8).next_u64()).collect::<Vec<_>>());
    }

    #[test]
    fn blocks_cover_all_samples_in_order() {
        let mut a = RandomSource::new(11);
        let mut b = RandomSource::new(11);
        let sizes = par_blocks(&mut a, 5000, |_, n| n);
        assert_eq!(sizes, vec![2048, 2048, 904]);
        let x = par_blocks(&mut a, 10, |r, _| r.next_u64());
        let _ = par_blocks(&mut b, 5000, |_, n| n);
        assert_eq!(x, par_blocks(&mut b, 10, |r, _| r.next_u64()));
    }

    #[test]
    fn split_ignores_parent_position() {
        let a = RandomSource::new(3);
        let mut b = RandomSource::new(3);
        for _ in 0..100 {
            b.random::<u32>();
        }
        assert_eq!(a.split(5).next_u64(), b.split(5).next_u64());
        assert_ne!(a.split(5).next_u64(), a.split(6).next_u64());
        assert_ne!(a.split(0).next_u64(), RandomSource::new(3).next_u64());
        assert_ne!(a.split(1).split(2).next_u64(), a.split(2).split(1).next_u64());
    }
}
