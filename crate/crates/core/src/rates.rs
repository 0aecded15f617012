//! Closed-form SINRs, rates, MMSE equalizers, MSEs and WMMSE weights for the
//! rate-splitting receiver (broadcast stream decoded first, then the group
//! stream after cancelling it).
//!
//! All rates are in bits; natural logarithms only enter through the weight
//! update and [`WMSE_RATE_CONSTANT`].

use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::model::{ChannelSet, CommonRateSplit, PrecoderSet, RateReport, RunStatus, SystemDims};

/// `G = 1/ln2 + log2(ln2)`: with optimal equalizers and weights the weighted
/// MSE equals `G − R`.
pub const WMSE_RATE_CONSTANT: f64 = 1.0 / LN_2 - 0.528_766_372_944_897_7;

/// Floor applied to MSEs before inverting them into weights.
pub const MSE_FLOOR: f64 = 1e-12;

/// Slack allowed on `Σ_m c[m][n] ≤ R_bc,n` before a split is flagged.
pub const COMMON_RATE_SLACK: f64 = 1e-6;

/// Received amplitude `hᵀp` (no conjugation).
#[inline]
pub fn inner(h: &[Complex64], p: &[Complex64]) -> Complex64 {
    h.iter().zip(p).map(|(a, b)| a * b).sum()
}

/// Received powers seen by one user on one subcarrier.
///
/// `t` is the total received power, `e` the interference-plus-noise while
/// decoding the broadcast stream and `q` the interference-plus-noise while
/// decoding the user's own group stream. Always `t ≥ e ≥ q ≥ σ²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerTerms {
    pub t: f64,
    pub e: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy)]
struct Received {
    bc: Complex64,
    own: Complex64,
    /// `Σ_m |hᵀp_m|²` over all groups.
    all_groups: f64,
}

fn received(dims: &SystemDims, ch: &ChannelSet, pset: &PrecoderSet, k: usize, n: usize) -> Received {
    let h = ch.vector(k, n);
    let own_group = dims.group_of[k];
    let mut own = Complex64::new(0.0, 0.0);
    let mut all_groups = 0.0;
    for m in 0..dims.n_groups {
        let a = inner(h, pset.group(m, n));
        all_groups += a.norm_sqr();
        if m == own_group {
            own = a;
        }
    }
    Received {
        bc: inner(h, pset.bc(n)),
        own,
        all_groups,
    }
}

pub fn power_terms(dims: &SystemDims, ch: &ChannelSet, pset: &PrecoderSet, k: usize, n: usize) -> PowerTerms {
    let r = received(dims, ch, pset, k, n);
    let e = r.all_groups + ch.noise_var;
    PowerTerms {
        t: e + r.bc.norm_sqr(),
        e,
        q: e - r.own.norm_sqr(),
    }
}

/// SINR of user `k`'s own group stream after the broadcast stream has been
/// removed: `|hᵀp_m|² / (Σ_{j≠m} |hᵀp_j|² + σ²)`.
pub fn sinr_multicast(dims: &SystemDims, ch: &ChannelSet, pset: &PrecoderSet, k: usize, n: usize) -> f64 {
    let r = received(dims, ch, pset, k, n);
    let own = r.own.norm_sqr();
    own / (r.all_groups - own + ch.noise_var).max(ch.noise_var)
}

/// SINR of the broadcast stream treating every group stream as noise.
pub fn sinr_broadcast(dims: &SystemDims, ch: &ChannelSet, pset: &PrecoderSet, k: usize, n: usize) -> f64 {
    let r = received(dims, ch, pset, k, n);
    r.bc.norm_sqr() / (r.all_groups + ch.noise_var)
}

/// Two per-(user, subcarrier) complex arrays indexed `[k * N + n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalizers {
    pub n_subcarriers: usize,
    pub g_bc: Vec<Complex64>,
    pub g: Vec<Complex64>,
}

/// MMSE equalizers `g_bc = (hᵀp_bc)* / T` and `g = (hᵀp_m)* / E`.
///
/// The conjugate makes `g·hᵀp` real and positive, which is what turns the MSE
/// expressions into `E/T` and `Q/E`.
pub fn update_equalizers(dims: &SystemDims, ch: &ChannelSet, pset: &PrecoderSet) -> Equalizers {
    let n_sc = dims.n_subcarriers;
    let mut g_bc = Vec::with_capacity(dims.n_users * n_sc);
    let mut g = Vec::with_capacity(dims.n_users * n_sc);
    for k in 0..dims.n_users {
        for n in 0..n_sc {
            let r = received(dims, ch, pset, k, n);
            let e = r.all_groups + ch.noise_var;
            let t = e + r.bc.norm_sqr();
            g_bc.push(r.bc.conj() / t);
            g.push(r.own.conj() / e);
        }
    }
    Equalizers {
        n_subcarriers: n_sc,
        g_bc,
        g,
    }
}

/// Per-(user, subcarrier) MSEs indexed `[k * N + n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mses {
    pub mse_bc: Vec<f64>,
    pub mse: Vec<f64>,
}

/// `MSE_bc = |g_bc|²T − 2Re{g_bc hᵀp_bc} + 1` and
/// `MSE = |g|²E − 2Re{g hᵀp_m} + 1` for arbitrary equalizers.
pub fn mses(dims: &SystemDims, ch: &ChannelSet, pset: &PrecoderSet, eq: &Equalizers) -> Mses {
    let n_sc = dims.n_subcarriers;
    let mut mse_bc = Vec::with_capacity(dims.n_users * n_sc);
    let mut mse = Vec::with_capacity(dims.n_users * n_sc);
    for k in 0..dims.n_users {
        for n in 0..n_sc {
            let i = k * n_sc + n;
            let r = received(dims, ch, pset, k, n);
            let e = r.all_groups + ch.noise_var;
            let t = e + r.bc.norm_sqr();
            mse_bc.push(eq.g_bc[i].norm_sqr() * t - 2.0 * (eq.g_bc[i] * r.bc).re + 1.0);
            mse.push(eq.g[i].norm_sqr() * e - 2.0 * (eq.g[i] * r.own).re + 1.0);
        }
    }
    Mses { mse_bc, mse }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub v_bc: Vec<f64>,
    pub v: Vec<f64>,
}

/// `v = 1 / (ln2 · MSE)` elementwise, with MSEs floored at [`MSE_FLOOR`].
pub fn update_weights(mse_bc: &[f64], mse: &[f64]) -> Weights {
    let inv = |m: &f64| 1.0 / (LN_2 * m.max(MSE_FLOOR));
    Weights {
        v_bc: mse_bc.iter().map(inv).collect(),
        v: mse.iter().map(inv).collect(),
    }
}

/// `v·MSE − log2(v)`.
#[inline]
pub fn weighted_mse(weight: f64, mse: f64) -> f64 {
    weight * mse - weight.log2()
}

/// Equalizers and weights held fixed while the precoders are re-optimized.
#[derive(Debug, Clone, PartialEq)]
pub struct AoState {
    pub n_subcarriers: usize,
    pub g_bc: Vec<Complex64>,
    pub g: Vec<Complex64>,
    pub v_bc: Vec<f64>,
    pub v: Vec<f64>,
}

impl AoState {
    /// Optimal equalizers for `pset`, then optimal weights for those.
    pub fn from_precoders(dims: &SystemDims, ch: &ChannelSet, pset: &PrecoderSet) -> Self {
        let eq = update_equalizers(dims, ch, pset);
        let m = mses(dims, ch, pset, &eq);
        let w = update_weights(&m.mse_bc, &m.mse);
        Self {
            n_subcarriers: eq.n_subcarriers,
            g_bc: eq.g_bc,
            g: eq.g,
            v_bc: w.v_bc,
            v: w.v,
        }
    }

    pub fn index(&self, k: usize, n: usize) -> usize {
        k * self.n_subcarriers + n
    }
}

/// Splits a broadcast rate `bc_rate` over groups with private rates
/// `private` so that `min_m (c_m + private_m)` is maximal: the lowest groups
/// are lifted to a common level.
pub fn optimal_common_split(bc_rate: f64, private: &[f64]) -> Vec<f64> {
    let budget = bc_rate.max(0.0);
    let mut sorted: Vec<f64> = private.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut level = sorted.first().copied().unwrap_or(0.0) + budget;
    let mut prefix = 0.0;
    for (j, &a) in sorted.iter().enumerate() {
        prefix += a;
        let candidate = (budget + prefix) / (j + 1) as f64;
        match sorted.get(j + 1) {
            Some(&next) if candidate > next => continue,
            _ => {
                level = candidate;
                break;
            }
        }
    }
    private.iter().map(|&a| (level - a).max(0.0)).collect()
}

/// Rates achieved by `pset` with the common-rate split `csplit`.
///
/// Classic beamforming is the special case of zero broadcast precoders and a
/// zero split. `r_tot` is set to `sum_mmf`; `iterations` is zero and
/// `status` is [`RunStatus::Converged`].
pub fn rates_from_precoders(
    dims: &SystemDims,
    ch: &ChannelSet,
    pset: &PrecoderSet,
    csplit: &CommonRateSplit,
) -> RateReport {
    let n_sc = dims.n_subcarriers;
    let mut user_rate = vec![0.0; dims.n_users * n_sc];
    let mut bc_user_rate = vec![0.0; dims.n_users * n_sc];
    for k in 0..dims.n_users {
        for n in 0..n_sc {
            let pt = power_terms(dims, ch, pset, k, n);
            bc_user_rate[k * n_sc + n] = (pt.t / pt.e).log2().max(0.0);
            user_rate[k * n_sc + n] = (pt.e / pt.q).log2().max(0.0);
        }
    }
    let bc_rate: Vec<f64> = (0..n_sc)
        .map(|n| {
            (0..dims.n_users)
                .map(|k| bc_user_rate[k * n_sc + n])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let groups = dims.groups();
    let mut group_rate = vec![0.0; dims.n_groups * n_sc];
    for (m, members) in groups.iter().enumerate() {
        for n in 0..n_sc {
            let weakest = members
                .iter()
                .map(|&k| user_rate[k * n_sc + n])
                .fold(f64::INFINITY, f64::min);
            group_rate[m * n_sc + n] = csplit.get(m, n) + weakest;
        }
    }
    let subcarrier_mmf: Vec<f64> = (0..n_sc)
        .map(|n| {
            (0..dims.n_groups)
                .map(|m| group_rate[m * n_sc + n])
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let common_rate_infeasible = !csplit.is_nonnegative()
        || (0..n_sc).any(|n| csplit.subcarrier_total(n) > bc_rate[n] + COMMON_RATE_SLACK);
    let sum_mmf = subcarrier_mmf.iter().sum();
    RateReport {
        n_subcarriers: n_sc,
        user_rate,
        bc_user_rate,
        bc_rate,
        group_rate,
        subcarrier_mmf,
        sum_mmf,
        r_tot: sum_mmf,
        iterations: 0,
        status: RunStatus::Converged,
        common_rate_infeasible,
    }
}

/// Best common-rate split for `pset` (see [`optimal_common_split`]) and the
/// resulting rates. With all-zero broadcast precoders this is the classic
/// evaluation.
pub fn evaluate_with_best_split(
    dims: &SystemDims,
    ch: &ChannelSet,
    pset: &PrecoderSet,
) -> (RateReport, CommonRateSplit) {
    let zero = CommonRateSplit::zeros(dims.n_groups, dims.n_subcarriers);
    let private = rates_from_precoders(dims, ch, pset, &zero);
    let mut split = zero;
    if !pset.is_non_rs() {
        for n in 0..dims.n_subcarriers {
            let own: Vec<f64> = (0..dims.n_groups).map(|m| private.group(m, n)).collect();
            for (m, c) in optimal_common_split(private.bc_rate[n], &own).into_iter().enumerate() {
                split.set(m, n, c);
            }
        }
    }
    let report = rates_from_precoders(dims, ch, pset, &split);
    (report, split)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{complex_gaussian, generate_channels, rng_from_seed};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// One user, one group, `h = [1, 0]`, `p_bc = [1, 0]`, `p_1 = [1, 0]`.
    fn single() -> (SystemDims, ChannelSet, PrecoderSet) {
        let dims = SystemDims::new(1, 2, 1, 1);
        let ch = ChannelSet::from_fn(1, 1, 2, 1.0, |_, _, a| if a == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let mut p = PrecoderSet::for_dims(&dims);
        p.bc_mut(0).copy_from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]);
        p.group_mut(0, 0).copy_from_slice(&[c(1.0, 0.0), c(0.0, 0.0)]);
        (dims, ch, p)
    }

    /// Two groups of one user; user 0 has `h = [1, i]`, own precoder `[1, 1]`,
    /// other group's precoder `[1, −1]`.
    fn two_group() -> (SystemDims, ChannelSet, PrecoderSet) {
        let dims = SystemDims::new(1, 2, 2, 2);
        let ch = ChannelSet::from_fn(2, 1, 2, 1.0, |k, _, a| match (k, a) {
            (0, 0) => c(1.0, 0.0),
            (0, 1) => c(0.0, 1.0),
            _ => c(1.0, 0.0),
        });
        let mut p = PrecoderSet::for_dims(&dims);
        p.group_mut(0, 0).copy_from_slice(&[c(1.0, 0.0), c(1.0, 0.0)]);
        p.group_mut(1, 0).copy_from_slice(&[c(1.0, 0.0), c(-1.0, 0.0)]);
        (dims, ch, p)
    }

    #[test]
    fn constant_value() {
        assert_abs_diff_eq!(WMSE_RATE_CONSTANT, 1.0 / LN_2 + LN_2.log2(), epsilon = 1e-15);
    }

    #[test]
    fn power_terms_examples() {
        let (dims, ch, p) = single();
        assert_eq!(power_terms(&dims, &ch, &p, 0, 0), PowerTerms { t: 3.0, e: 2.0, q: 1.0 });

        let zero = PrecoderSet::for_dims(&dims);
        assert_eq!(power_terms(&dims, &ch, &zero, 0, 0), PowerTerms { t: 1.0, e: 1.0, q: 1.0 });

        let (dims, ch, p) = two_group();
        let pt = power_terms(&dims, &ch, &p, 0, 0);
        assert_abs_diff_eq!(pt.t, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pt.e, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pt.q, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn sinr_examples() {
        let (dims, ch, p) = two_group();
        assert_abs_diff_eq!(sinr_multicast(&dims, &ch, &p, 0, 0), 2.0 / 3.0, epsilon = 1e-12);
        let pt = power_terms(&dims, &ch, &p, 0, 0);
        assert_abs_diff_eq!(sinr_multicast(&dims, &ch, &p, 0, 0), pt.e / pt.q - 1.0, epsilon = 1e-12);

        let dims = SystemDims::new(1, 2, 1, 1);
        let ch = ChannelSet::from_fn(1, 1, 2, 1.0, |_, _, a| if a == 0 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let mut p = PrecoderSet::for_dims(&dims);
        p.group_mut(0, 0)[0] = c(2.0, 0.0);
        assert_abs_diff_eq!(sinr_multicast(&dims, &ch, &p, 0, 0), 4.0, epsilon = 1e-12);
        assert_eq!(sinr_multicast(&dims, &ch, &PrecoderSet::for_dims(&dims), 0, 0), 0.0);

        let (dims, ch, p) = single();
        assert_abs_diff_eq!(sinr_broadcast(&dims, &ch, &p, 0, 0), 0.5, epsilon = 1e-12);
        let mut no_bc = p.clone();
        no_bc.clear_broadcast();
        assert_eq!(sinr_broadcast(&dims, &ch, &no_bc, 0, 0), 0.0);
        let mut bc_only = PrecoderSet::for_dims(&dims);
        bc_only.bc_mut(0)[0] = c(1.0, 0.0);
        assert_abs_diff_eq!(sinr_broadcast(&dims, &ch, &bc_only, 0, 0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rates_examples() {
        let (dims, ch, _) = single();
        let zero = PrecoderSet::for_dims(&dims);
        let r = rates_from_precoders(&dims, &ch, &zero, &CommonRateSplit::zeros(1, 1));
        assert_eq!(r.sum_mmf, 0.0);
        assert!(r.user_rate.iter().chain(&r.bc_user_rate).all(|&x| x == 0.0));

        let mut p = PrecoderSet::for_dims(&dims);
        p.group_mut(0, 0)[0] = c(2.0, 0.0);
        let r = rates_from_precoders(&dims, &ch, &p, &CommonRateSplit::zeros(1, 1));
        assert_abs_diff_eq!(r.sum_mmf, 5f64.log2(), epsilon = 1e-12);
        assert!(!r.common_rate_infeasible);
    }

    #[test]
    fn infeasible_split_flagged() {
        let (dims, ch, p) = single();
        let mut split = CommonRateSplit::zeros(1, 1);
        // R_bc = log2(3/2) ≈ 0.585
        split.set(0, 0, 0.7);
        let r = rates_from_precoders(&dims, &ch, &p, &split);
        assert!(r.common_rate_infeasible);
        split.set(0, 0, 0.5);
        assert!(!rates_from_precoders(&dims, &ch, &p, &split).common_rate_infeasible);
    }

    #[test]
    fn equalizer_examples() {
        let (dims, ch, p) = single();
        let eq = update_equalizers(&dims, &ch, &p);
        assert_abs_diff_eq!(eq.g_bc[0].re, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eq.g_bc[0].im, 0.0, epsilon = 1e-15);
        let m = mses(&dims, &ch, &p, &eq);
        assert_abs_diff_eq!(m.mse_bc[0], 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mse[0], 0.5, epsilon = 1e-12);

        let mut no_bc = p.clone();
        no_bc.clear_broadcast();
        assert_eq!(update_equalizers(&dims, &ch, &no_bc).g_bc[0], c(0.0, 0.0));
    }

    #[test]
    fn weight_examples() {
        let w = update_weights(&[2.0 / 3.0], &[1.0]);
        assert_abs_diff_eq!(w.v_bc[0], 3.0 / (2.0 * LN_2), epsilon = 1e-12);
        assert_abs_diff_eq!(w.v_bc[0], 2.164, epsilon = 1e-3);
        assert_abs_diff_eq!(w.v[0], 1.0 / LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(WMSE_RATE_CONSTANT - weighted_mse(w.v[0], 1.0), 0.0, epsilon = 1e-12);
        let rate = WMSE_RATE_CONSTANT - weighted_mse(w.v_bc[0], 2.0 / 3.0);
        assert_abs_diff_eq!(rate, 1.5f64.log2(), epsilon = 1e-12);
    }

    #[test]
    fn weight_floor_guards_zero_mse() {
        let w = update_weights(&[0.0], &[1e-20]);
        assert!(w.v_bc[0].is_finite() && w.v[0].is_finite());
        assert_abs_diff_eq!(w.v_bc[0], 1.0 / (LN_2 * MSE_FLOOR), epsilon = 1.0);
    }

    #[test]
    fn common_split_lifts_weakest() {
        let c = optimal_common_split(1.0, &[1.0, 3.0]);
        assert_eq!(c, vec![1.0, 0.0]);
        let c = optimal_common_split(3.0, &[1.0, 2.0]);
        assert_abs_diff_eq!(c[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1], 1.0, epsilon = 1e-12);
        let c = optimal_common_split(0.0, &[0.5, 0.2, 0.9]);
        assert!(c.iter().all(|&x| x == 0.0));
        let c = optimal_common_split(0.6, &[0.5, 0.2, 0.9]);
        assert_abs_diff_eq!(c.iter().sum::<f64>(), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(c[1] + 0.2, c[0] + 0.5, epsilon = 1e-12);
    }

    fn random_precoders(dims: &SystemDims, seed: u64, scale: f64) -> PrecoderSet {
        let mut rng = rng_from_seed(seed);
        let mut p = PrecoderSet::for_dims(dims);
        for n in 0..dims.n_subcarriers {
            for z in p.bc_mut(n) {
                *z = complex_gaussian(&mut rng) * scale;
            }
            for m in 0..dims.n_groups {
                for z in p.group_mut(m, n) {
                    *z = complex_gaussian(&mut rng) * scale;
                }
            }
        }
        p
    }

    fn arb_instance() -> impl Strategy<Value = (SystemDims, ChannelSet, PrecoderSet)> {
        (1usize..3, 1usize..4, 1usize..4, 1usize..3, any::<u64>(), 0.05f64..30.0).prop_map(
            |(n, nt, m, per, seed, scale)| {
                let dims = SystemDims::new(n, nt, m, m * per);
                let ch = generate_channels(&dims, seed);
                let p = random_precoders(&dims, seed ^ 0xABCD, scale);
                (dims, ch, p)
            },
        )
    }

    proptest! {
        #[test]
        fn rate_is_minus_log_mse((dims, ch, p) in arb_instance()) {
            let eq = update_equalizers(&dims, &ch, &p);
            let m = mses(&dims, &ch, &p, &eq);
            let r = rates_from_precoders(&dims, &ch, &p, &CommonRateSplit::zeros(dims.n_groups, dims.n_subcarriers));
            for k in 0..dims.n_users {
                for n in 0..dims.n_subcarriers {
                    let i = k * dims.n_subcarriers + n;
                    let pt = power_terms(&dims, &ch, &p, k, n);
                    prop_assert!((m.mse_bc[i] - pt.e / pt.t).abs() < 1e-10);
                    prop_assert!((m.mse[i] - pt.q / pt.e).abs() < 1e-10);
                    prop_assert!((r.user(k, n) + m.mse[i].log2()).abs() < 1e-10);
                    prop_assert!((r.bc_user(k, n) + m.mse_bc[i].log2()).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn wmse_plus_rate_is_constant((dims, ch, p) in arb_instance()) {
            let ao = AoState::from_precoders(&dims, &ch, &p);
            let eq = Equalizers { n_subcarriers: ao.n_subcarriers, g_bc: ao.g_bc.clone(), g: ao.g.clone() };
            let m = mses(&dims, &ch, &p, &eq);
            let r = rates_from_precoders(&dims, &ch, &p, &CommonRateSplit::zeros(dims.n_groups, dims.n_subcarriers));
            for i in 0..m.mse.len() {
                let (k, n) = (i / dims.n_subcarriers, i % dims.n_subcarriers);
                prop_assert!((weighted_mse(ao.v_bc[i], m.mse_bc[i]) + r.bc_user(k, n) - WMSE_RATE_CONSTANT).abs() < 1e-10);
                prop_assert!((weighted_mse(ao.v[i], m.mse[i]) + r.user(k, n) - WMSE_RATE_CONSTANT).abs() < 1e-10);
            }
        }

        #[test]
        fn power_terms_are_ordered((dims, ch, p) in arb_instance()) {
            for k in 0..dims.n_users {
                for n in 0..dims.n_subcarriers {
                    let pt = power_terms(&dims, &ch, &p, k, n);
                    prop_assert!(pt.t >= pt.e && pt.e >= pt.q - 1e-12 && pt.q >= ch.noise_var - 1e-12);
                }
            }
        }

        #[test]
        fn phase_rotation_leaves_rates_unchanged((dims, ch, p) in arb_instance(), theta in 0.0f64..std::f64::consts::TAU, which in 0usize..8) {
            let rot = Complex64::from_polar(1.0, theta);
            let mut q = p.clone();
            let m = which % (dims.n_groups + 1);
            let n = which % dims.n_subcarriers;
            let target = if m == dims.n_groups { q.bc_mut(n) } else { q.group_mut(m, n) };
            target.iter_mut().for_each(|z| *z *= rot);
            prop_assert!((crate::model::realized_total_power(&p) - crate::model::realized_total_power(&q)).abs() < 1e-9 * (1.0 + crate::model::realized_total_power(&p)));
            let (a, _) = evaluate_with_best_split(&dims, &ch, &p);
            let (b, _) = evaluate_with_best_split(&dims, &ch, &q);
            for (x, y) in a.user_rate.iter().zip(&b.user_rate).chain(a.bc_user_rate.iter().zip(&b.bc_user_rate)) {
                prop_assert!((x - y).abs() < 1e-10);
            }
            prop_assert!((a.sum_mmf - b.sum_mmf).abs() < 1e-10);
        }

        #[test]
        fn classic_mode_matches_direct_sinr((dims, ch, mut p) in arb_instance()) {
            p.clear_broadcast();
            let r = rates_from_precoders(&dims, &ch, &p, &CommonRateSplit::zeros(dims.n_groups, dims.n_subcarriers));
            for k in 0..dims.n_users {
                for n in 0..dims.n_subcarriers {
                    let h = ch.vector(k, n);
                    let own = dims.group_of[k];
                    let sig = inner(h, p.group(own, n)).norm_sqr();
                    let interf: f64 = (0..dims.n_groups).filter(|&j| j != own).map(|j| inner(h, p.group(j, n)).norm_sqr()).sum();
                    let direct = (1.0 + sig / (interf + ch.noise_var)).log2();
                    prop_assert!((r.user(k, n) - direct).abs() < 1e-10);
                    prop_assert!(r.bc_user(k, n).abs() < 1e-15);
                }
            }
            let groups = dims.groups();
            for n in 0..dims.n_subcarriers {
                let expect = groups.iter().map(|g| g.iter().map(|&k| r.user(k, n)).fold(f64::INFINITY, f64::min)).fold(f64::INFINITY, f64::min);
                prop_assert!((r.subcarrier_mmf[n] - expect).abs() < 1e-12);
            }
            prop_assert!((r.sum_mmf - r.subcarrier_mmf.iter().sum::<f64>()).abs() < 1e-12);
        }

        #[test]
        fn best_split_is_feasible_and_fair(bc in 0.0f64..5.0, a in proptest::collection::vec(0.0f64..5.0, 1..5)) {
            let c = optimal_common_split(bc, &a);
            prop_assert!(c.iter().all(|&x| x >= 0.0));
            prop_assert!(c.iter().sum::<f64>() <= bc + 1e-9);
            let got = a.iter().zip(&c).map(|(x, y)| x + y).fold(f64::INFINITY, f64::min);
            // Upper bound on the achievable min: average lift of everything.
            let lo = a.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert!(got >= lo - 1e-12);
            prop_assert!(got <= lo + bc + 1e-9);
            // Any other feasible split does no better (spot check: equal split).
            let eq = a.iter().map(|x| x + bc / a.len() as f64).fold(f64::INFINITY, f64::min);
            prop_assert!(got >= eq - 1e-9);
        }
    }
}
