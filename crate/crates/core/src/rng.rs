//! Counter-based random streams.
//!
//! The `k`-th 64-bit word of a stream is a pure function of
//! `(master_seed, stream_id, k)`: the stream key is derived from the seed and
//! id with the SplitMix64 finalizer, and each word is the finalizer applied
//! twice to the key-offset counter. Streams with different ids never share
//! state, so independent runs can be scheduled on any thread in any order.
//!
//! Counter cost per call:
//!
//! | call             | words consumed |
//! |------------------|----------------|
//! | `next_u64`       | 1              |
//! | `draw_unit`      | 1              |
//! | `draw_uniform`   | 1              |
//! | `draw_bernoulli` | 1              |
//! | `draw_index`     | 1              |
//! | `draw_gaussian`  | 2 (Box-Muller, cosine branch only) |

use crate::error::{Error, Result};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SEED_SALT: u64 = 0xD1B5_4A32_D192_ED03;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream id for one purpose (`tag`) of one run; keeps per-run streams apart.
pub fn stream_id(run_id: u64, tag: u64) -> u64 {
    mix64(run_id.wrapping_mul(GOLDEN_GAMMA) ^ mix64(tag.wrapping_add(SEED_SALT)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    counter: u64,
    key: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let key = mix64(mix64(master_seed ^ SEED_SALT) ^ stream_id.wrapping_mul(GOLDEN_GAMMA));
        Self {
            master_seed,
            stream_id,
            counter: 0,
            key,
        }
    }

    /// Stream positioned at an arbitrary counter value.
    pub fn at(master_seed: u64, stream_id: u64, counter: u64) -> Self {
        Self {
            counter,
            ..Self::new(master_seed, stream_id)
        }
    }

    /// Independent child stream, keyed on this stream's identity and `child`.
    pub fn split(&self, child: u64) -> Self {
        Self::new(self.master_seed, mix64(self.stream_id ^ mix64(child ^ GOLDEN_GAMMA)))
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    /// Word `counter` of this stream, without advancing.
    pub fn word_at(&self, counter: u64) -> u64 {
        mix64(mix64(self.key.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA))) ^ self.key)
    }

    pub fn next_u64(&mut self) -> u64 {
        let w = self.word_at(self.counter);
        self.counter = self.counter.wrapping_add(1);
        w
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn draw_unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn draw_uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "uniform bounds must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(lo + (hi - lo) * self.draw_unit())
    }

    /// Standard normal via Box-Muller: `sqrt(-2 ln(1 - u1)) * cos(2π u2)`.
    pub fn draw_gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.draw_unit();
        let u2 = self.draw_unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform integer in `[0, n)` by 128-bit multiply-high.
    pub fn draw_index(&mut self, n: usize) -> Result<usize> {
        if n == 0 {
            return Err(Error::InvalidArgument("draw_index requires n >= 1".into()));
        }
        Ok(((self.next_u64() as u128 * n as u128) >> 64) as usize)
    }

    /// `true` with probability `p`. Always consumes one word, even for `p` in {0, 1}.
    pub fn draw_bernoulli(&mut self, p: f64) -> bool {
        self.draw_unit() < p
    }
}
