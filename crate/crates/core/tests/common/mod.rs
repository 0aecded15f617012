#![allow(dead_code)]

use num_complex::Complex64;
use rsmcast::channel::{complex_gaussian, rng_from_seed};
use rsmcast::model::{ChannelSet, PrecoderSet, SystemDims};

/// Exhaustive search for one antenna, two single-user groups and one
/// subcarrier with real gains `h1`, `h2` and unit noise.
///
/// Precoder magnitudes `p1`, `p2` run over a grid of step `res`. Given the
/// group streams, the broadcast rate only grows with `|p_bc|`, so the
/// broadcast magnitude is the largest grid value left in the budget. The
/// common rate credited to group 1 runs over the same grid and group 2 takes
/// the rest.
pub fn grid_oracle(h1: f64, h2: f64, power: f64, res: f64) -> f64 {
    let steps = (power.sqrt() / res).floor() as usize;
    let mut best = 0.0_f64;
    for i in 0..=steps {
        let p1 = i as f64 * res;
        for j in 0..=steps {
            let p2 = j as f64 * res;
            let left = power - p1 * p1 - p2 * p2;
            if left < -1e-12 {
                break;
            }
            let pbc = ((left.max(0.0)).sqrt() / res + 1e-9).floor() * res;
            let bc = |h: f64| (1.0 + h * h * pbc * pbc / (h * h * (p1 * p1 + p2 * p2) + 1.0)).log2();
            let r_bc = bc(h1).min(bc(h2));
            let r1 = (1.0 + h1 * h1 * p1 * p1 / (h1 * h1 * p2 * p2 + 1.0)).log2();
            let r2 = (1.0 + h2 * h2 * p2 * p2 / (h2 * h2 * p1 * p1 + 1.0)).log2();
            let c_steps = (r_bc / res + 1e-9).floor() as usize;
            for c in 0..=c_steps {
                let c1 = c as f64 * res;
                let c2 = r_bc - c1;
                best = best.max((c1 + r1).min(c2 + r2));
            }
        }
    }
    best
}

pub fn real_channels(gains: &[f64]) -> ChannelSet {
    ChannelSet::from_fn(gains.len(), 1, 1, 1.0, |k, _, _| Complex64::new(gains[k], 0.0))
}

/// Random system, channel, noise level and precoders for identity checks.
pub fn random_instance(seed: u64) -> (SystemDims, ChannelSet, PrecoderSet) {
    use rand::Rng;
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(1..=3);
    let nt = rng.random_range(1..=4);
    let m = rng.random_range(1..=3);
    let per = rng.random_range(1..=3);
    let dims = SystemDims::new(n, nt, m, m * per);
    let noise = 10f64.powf(rng.random_range(-1.0..1.0));
    let ch = ChannelSet::from_fn(dims.n_users, n, nt, noise, |_, _, _| complex_gaussian(&mut rng));
    let mut p = PrecoderSet::for_dims(&dims);
    let scale = 10f64.powf(rng.random_range(-1.0..1.5));
    for sc in 0..n {
        p.bc_mut(sc).iter_mut().for_each(|z| *z = complex_gaussian(&mut rng) * scale);
        for g in 0..m {
            p.group_mut(g, sc).iter_mut().for_each(|z| *z = complex_gaussian(&mut rng) * scale);
        }
    }
    (dims, ch, p)
}
