//! Counter-addressed deterministic random streams.
//!
//! A [`RngStream`] is identified by `(seed, purpose, ordinal)`. The address is
//! hashed into a 64-bit key which then seeds a SplitMix64 sequence, so two
//! streams with the same address always produce the same values no matter
//! which thread creates them or in which order.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream {
    state: u64,
}

impl RngStream {
    pub fn new(seed: u64, purpose: &str, ordinal: u64) -> Self {
        let mut key = mix64(seed ^ 0x6A09_E667_F3BC_C908);
        key = mix64(key ^ fnv1a64(purpose.as_bytes()));
        key = mix64(key ^ ordinal.wrapping_mul(GOLDEN_GAMMA).wrapping_add(0xBB67_AE85_84CA_A73B));
        Self { state: key }
    }

    /// Child stream addressed relative to this stream's current key.
    pub fn substream(&self, purpose: &str, ordinal: u64) -> Self {
        Self::new(self.state, purpose, ordinal)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `lo..=hi`, unbiased.
    pub fn uniform_int(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi, "empty integer range {lo}..={hi}");
        let span = hi - lo;
        if span == u64::MAX {
            return self.next_u64();
        }
        let range = span + 1;
        let zone = (u64::MAX / range) * range;
        loop {
            let x = self.next_u64();
            if x < zone {
                return lo + x % range;
            }
        }
    }

    pub fn uniform_index(&mut self, len: usize) -> usize {
        assert!(len > 0, "cannot pick from an empty range");
        self.uniform_int(0, len as u64 - 1) as usize
    }

    /// Uniform in `[lo, hi]`; returns `lo` exactly when `lo == hi`.
    pub fn uniform_f64(&mut self, lo: f64, hi: f64) -> f64 {
        if lo == hi {
            return lo;
        }
        lo + (hi - lo) * self.next_f64()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Standard normal via Box-Muller (cosine branch only).
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.uniform_int(0, i as u64) as usize;
            items.swap(i, j);
        }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
