//! Counter-based seeded random streams.
//!
//! Every sampling operation in this workspace takes an explicit seed and
//! draws from a [`SeedStream`]. The generator is a splitmix64 walk: pure
//! integer arithmetic, so identical seeds produce identical sequences on
//! every platform and at every thread count. Disjoint child streams are
//! derived with [`SeedStream::child`], which hashes the parent seed with a
//! stream tag instead of sharing state.

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic random stream seeded by a `u64`.
#[derive(Debug, Clone)]
pub struct SeedStream {
    state: u64,
    gauss_spare: Option<f64>,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream {
            state: seed,
            gauss_spare: None,
        }
    }

    /// Derive an independent stream for sub-task `tag`.
    ///
    /// Children of distinct tags never share state with each other or with
    /// the parent, which lets batch jobs (scenes, candidates, epochs) draw
    /// in parallel without ordering effects.
    pub fn child(&self, tag: u64) -> SeedStream {
        let mut s = self.state ^ tag.wrapping_mul(GOLDEN).rotate_left(17);
        let a = splitmix64(&mut s);
        let b = splitmix64(&mut s);
        SeedStream::new(a ^ b.rotate_left(32))
    }

    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform index in `[0, n)`. `n` must be nonzero.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Rejection-free multiply-shift; bias is negligible for n << 2^64.
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Standard normal via Marsaglia's polar method.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(v) = self.gauss_spare.take() {
            return v;
        }
        loop {
            let a = 2.0 * self.uniform() - 1.0;
            let b = 2.0 * self.uniform() - 1.0;
            let s = a * a + b * b;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.gauss_spare = Some(b * f);
                return a * f;
            }
        }
    }

    /// Uniform unit vector on the sphere in `dim` dimensions.
    pub fn unit_vector(&mut self, dim: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| self.gaussian()).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                return v.into_iter().map(|x| x / norm).collect();
            }
        }
    }
}
