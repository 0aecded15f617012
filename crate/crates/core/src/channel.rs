//! Seeded i.i.d. Rayleigh channels.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{ChannelSet, SystemDims};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent seed from a master seed and a path of counters
/// (trial index, purpose tag, ...). The result depends only on its inputs,
/// never on evaluation order.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p.wrapping_add(GOLDEN))))
}

/// Seeded generator used for every random draw in the crate.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One circularly-symmetric `CN(0, 1)` sample.
pub fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Draws every channel entry independently from `CN(0, 1)` with unit noise
/// variance.
pub fn generate_channels(dims: &SystemDims, seed: u64) -> ChannelSet {
    generate_channels_with_noise(dims, seed, 1.0)
}

pub fn generate_channels_with_noise(dims: &SystemDims, seed: u64, noise_var: f64) -> ChannelSet {
    let mut rng = rng_from_seed(seed);
    ChannelSet::from_fn(
        dims.n_users,
        dims.n_subcarriers,
        dims.n_tx_antennas,
        noise_var,
        |_, _, _| complex_gaussian(&mut rng),
    )
}
