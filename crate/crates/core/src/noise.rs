//! Counter-based Gaussian noise streams.
//!
//! Every random draw in a simulation is addressed by
//! `(master seed, stream id, channel, step)`. The address is mixed into a
//! ChaCha12 key/nonce pair, so draws are independent across addresses,
//! random-access (no sequential generator state), and bit-identical across
//! reruns and thread counts.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Noise channels. `W1` drives the additive term, `W2` the multiplicative
/// term, `W1Tilde` the independent motion mixed in by the asymptotic
/// reflection coupling, and `Init` the initial-condition samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    W1 = 0,
    W2 = 1,
    W1Tilde = 2,
    Init = 3,
}

/// splitmix64 finalizer; used only to key the cipher.
#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// A family of independent Gaussian increment streams derived from one
/// master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseStream {
    master_seed: u64,
}

impl NoiseStream {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    fn cell_rng(&self, stream_id: u64, channel: Channel, step: u64) -> ChaCha12Rng {
        let mut state = self.master_seed;
        let s0 = splitmix64(&mut state);
        state ^= stream_id.wrapping_mul(0xA24BAED4963EE407);
        let s1 = splitmix64(&mut state);
        state ^= (channel as u64).wrapping_mul(0x9FB21C651E98DF25);
        let s2 = splitmix64(&mut state);
        let s3 = splitmix64(&mut state);
        let mut key = [0u8; 32];
        for (chunk, word) in key.chunks_exact_mut(8).zip([s0, s1, s2, s3]) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_stream(step);
        rng
    }

    /// Fill `out` with i.i.d. standard normals for the addressed cell.
    pub fn fill_standard_normal(&self, stream_id: u64, channel: Channel, step: u64, out: &mut [f64]) {
        let mut rng = self.cell_rng(stream_id, channel, step);
        for v in out.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
    }

    /// Brownian increments over one step: standard normals scaled by `√h`.
    pub fn fill_increments(
        &self,
        stream_id: u64,
        channel: Channel,
        step: u64,
        sqrt_h: f64,
        out: &mut [f64],
    ) {
        self.fill_standard_normal(stream_id, channel, step, out);
        for v in out.iter_mut() {
            *v *= sqrt_h;
        }
    }
}
