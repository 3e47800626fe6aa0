//! Deterministic random streams.
//!
//! Every random draw in the workspace flows from a single user seed through
//! counter-based stream derivation: a stream is addressed by `(seed, label,
//! index)`, so adding or reordering consumers elsewhere cannot shift the
//! values another consumer sees. Output is identical across platforms and
//! library versions because the generator is self-contained.

/// SplitMix64 step: the core mixing function behind every stream.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Deterministic pseudo-random generator.
#[derive(Debug, Clone)]
pub struct DetRng {
    state: u64,
}

impl DetRng {
    pub fn new(seed: u64) -> Self {
        DetRng { state: seed }
    }

    /// Derive an independent stream for `(seed, label, index)`.
    pub fn stream(seed: u64, label: &str, index: u64) -> Self {
        let mut s = seed ^ fnv1a(label.as_bytes()).rotate_left(17) ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        // run the mixer a few times so nearby (seed, index) pairs decorrelate
        splitmix64(&mut s);
        splitmix64(&mut s);
        DetRng { state: s }
    }

    /// Derive a sub-stream from this generator's current state.
    pub fn substream(&mut self, label: &str) -> Self {
        let salt = self.next_u64();
        DetRng::stream(salt, label, 0)
    }

    pub fn next_u64(&mut self) -> u64 {
        splitmix64(&mut self.state)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1]; safe as a logarithm argument.
    pub fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in [0, n).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        // multiply-shift; bias is negligible for the ranges used here
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i + 1);
            items.swap(i, j);
        }
    }
}
