//! Seeded, portable channel generator.
//!
//! Stream definition, so other implementations can reproduce it exactly:
//! - generator: ChaCha20 (RFC 8439 block function, 20 rounds) keyed with the
//!   32-byte seed whose first 8 bytes are the `u64` seed in little-endian
//!   order and whose remaining bytes are zero; stream position starts at 0.
//! - uniform: `(next_u64 >> 11) + 1` scaled by `2^-53`, a value in `(0, 1]`.
//! - complex Gaussian `CN(0, 1)`: Box-Muller from two consecutive uniforms
//!   `u1, u2`: `r = sqrt(-ln u1)`, real part `r cos(2π u2)`, imaginary part
//!   `r sin(2π u2)` (each component has variance 1/2).
//! - networks: channels are drawn for `(from, to)` in lexicographic order,
//!   antenna entries in index order.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::{CVector, NetworkInstance, Result, C64};

/// Identity string written into output metadata.
pub const GENERATOR_ID: &str = "chacha20(seed u64 LE in key bytes 0..8)+box-muller cn01";

#[derive(Debug, Clone)]
pub struct GaussianStream {
    rng: ChaCha20Rng,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        Self { rng: ChaCha20Rng::from_seed(key) }
    }

    /// Uniform draw in `(0, 1]`.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Circularly-symmetric complex Gaussian with unit variance.
    pub fn cn01(&mut self) -> C64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        C64::new(r * c, r * s)
    }

    pub fn cn01_vector(&mut self, len: usize) -> CVector {
        CVector::from_iterator(len, (0..len).map(|_| self.cn01()))
    }
}

/// Network with i.i.d. `CN(0, 1)` channel entries drawn from `seed`.
pub fn cn01_network(antennas: &[usize], power: &[f64], noise: &[f64], seed: u64) -> Result<NetworkInstance> {
    let mut stream = GaussianStream::new(seed);
    let k = antennas.len();
    let channels = (0..k).map(|from| (0..k).map(|_| stream.cn01_vector(antennas[from])).collect()).collect();
    NetworkInstance::new(antennas.to_vec(), power.to_vec(), noise.to_vec(), channels)
}
