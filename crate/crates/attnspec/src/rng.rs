//! Deterministic counter-based random number generation.
//!
//! Every sampler in this crate draws from an [`RngStream`] keyed by a
//! `(seed, stream_id)` pair. The generator is splitmix64 run in counter
//! mode: draw `i` of a stream is `mix64(key + i * GOLDEN)` where `key` is a
//! hash of the pair. Identical pairs therefore produce identical sequences
//! on every platform and for every thread count, and distinct `stream_id`s
//! can be consumed concurrently without coordination.
//!
//! Not cryptographically secure; simulation use only.

/// Name of the generator, embedded in every output file for reproducibility.
pub const RNG_ALGORITHM: &str = "splitmix64-counter/box-muller";

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash two 64-bit words into a stream key.
#[inline]
pub fn mix2(a: u64, b: u64) -> u64 {
    mix64(mix64(a ^ 0x243F_6A88_85A3_08D3) ^ b.wrapping_mul(GOLDEN))
}

/// A deterministic random stream identified by `(seed, stream_id)`.
#[derive(Clone, Debug)]
pub struct RngStream {
    key: u64,
    counter: u64,
    spare_normal: Option<f64>,
    seed: u64,
    stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self {
            key: mix2(seed, stream_id),
            counter: 0,
            spare_normal: None,
            seed,
            stream_id,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix64(self.key.wrapping_add(self.counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `(0, 1]`; safe as a `ln` argument.
    #[inline]
    fn uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal draw via the Box-Muller transform. Draws come in
    /// pairs; the second of each pair is cached.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open();
        let u2 = self.uniform();
        let mag = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare_normal = Some(mag * theta.sin());
        mag * theta.cos()
    }

    /// Lognormal draw `exp(mu + sigma_log * N(0,1))`.
    #[inline]
    pub fn lognormal(&mut self, mu: f64, sigma_log: f64) -> f64 {
        (mu + sigma_log * self.normal()).exp()
    }
}
