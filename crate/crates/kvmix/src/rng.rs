//! Deterministic pseudo-randomness for trace synthesis, the toy decoder, and
//! the evolutionary search.
//!
//! Everything random in this crate flows through [`Rng`], a splitmix-style
//! counter generator: the output sequence is a pure function of the seed, so
//! any artifact built from it is reproducible byte for byte. Independent
//! streams for sub-tasks (one per tensor, one per prompt, ...) are derived
//! with [`derive_seed`] instead of consuming from a shared stream, which keeps
//! generated data independent of generation order.

/// Splitmix-style generator with a Box-Muller cache for Gaussian draws.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
    spare_gauss: Option<f64>,
}

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream seed from a base seed and a tag path.
///
/// Feeding the same `(seed, tags)` always yields the same value; distinct tag
/// paths give streams that are independent for all practical purposes.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    let mut acc = mix64(seed ^ GOLDEN_GAMMA);
    for &t in tags {
        acc = mix64(acc.wrapping_add(GOLDEN_GAMMA).wrapping_add(mix64(t)));
    }
    acc
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed, spare_gauss: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform draw in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform index in [0, n). `n` must be nonzero.
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Widening multiply avoids the modulo bias of `next_u64() % n`.
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }

    pub fn next_bool(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Standard normal draw via Box-Muller. The second value of each pair is
    /// cached, so draws come in deterministic order at half the trig cost.
    pub fn next_gauss(&mut self) -> f64 {
        if let Some(z) = self.spare_gauss.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite.
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_gauss = Some(r * theta.sin());
        r * theta.cos()
    }
}
