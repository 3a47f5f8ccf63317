//! Seeded, counter-based randomness.
//!
//! Every trajectory draws from its own ChaCha8 stream: the 64-bit seed picks
//! the key and the stream id picks the nonce, so trajectory `i` of a batch sees
//! the same numbers no matter which thread runs it or in what order.
//!
//! Stream ids used across the crate:
//! - standalone `run`: stream 0
//! - escape experiment sample `i`: stream `i`
//! - stability probe: `(cell << 32) | sample`, cell = delta_index * |alpha grid| + alpha_index
//! - Lipschitz / local-min sampling: stream `u64::MAX` and `u64::MAX - 1`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::vector::Vector;

pub type StreamRng = ChaCha8Rng;

pub const LIPSCHITZ_STREAM: u64 = u64::MAX;
pub const LOCAL_MIN_STREAM: u64 = u64::MAX - 1;

pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn probe_stream(cell: usize, sample: usize) -> u64 {
    ((cell as u64) << 32) | sample as u64
}

/// Uniform sample from the closed ball B(center, radius): an isotropic
/// Gaussian direction scaled by `radius * u^(1/dim)`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, center: &Vector, radius: f64) -> Vector {
    let dim = center.dim();
    let dir: Vec<f64> = loop {
        let d: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = d.iter().map(|c: &f64| c * c).sum::<f64>().sqrt();
        if n > 0.0 {
            break d.into_iter().map(|c| c / n).collect();
        }
    };
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / dim as f64);
    let coords: Vec<f64> = center.iter().zip(&dir).map(|(c, d)| c + r * d).collect();
    Vector::from_slice(&coords)
}
