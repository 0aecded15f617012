//! Degrees of freedom: analytic values for classic and rate-splitting
//! multigroup multicast, and empirical high-SNR slopes of rate curves.

use std::f64::consts::LOG2_10;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SystemDims;

/// Minimum number of points for a slope fit.
pub const MIN_FIT_POINTS: usize = 3;

/// Default width of the high-SNR fitting window.
pub const DEFAULT_WINDOW_DB: f64 = 10.0;

/// Per-subcarrier DoF of classic (non-RS) multigroup multicast: 1 when a
/// single group is served or when `N_t ≥ 1 + (M−1)·K/M` antennas can null
/// all inter-group interference, 0 otherwise.
pub fn dof_classic(dims: &SystemDims) -> u8 {
    let m = dims.n_groups;
    let needed = 1 + (m - 1) * dims.users_per_group();
    u8::from(m == 1 || dims.n_tx_antennas >= needed)
}

/// Power-split exponent `β = 1/(1+M_deg)`.
pub fn rs_beta(m_degraded: usize) -> f64 {
    1.0 / (1.0 + m_degraded as f64)
}

/// Per-subcarrier DoF of rate splitting with `m_degraded` degraded groups:
/// `min((1−β)/M_deg, β) = 1/(1+M_deg)`, and 1 without degraded groups.
pub fn dof_rs(m_degraded: usize) -> f64 {
    if m_degraded == 0 {
        return 1.0;
    }
    let beta = rs_beta(m_degraded);
    ((1.0 - beta) / m_degraded as f64).min(beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofScenario {
    pub dims: SystemDims,
    pub m_degraded: usize,
    pub beta: f64,
}

impl DofScenario {
    /// Scenario with the derived exponent. Requires `m_degraded ≤ M−1`.
    pub fn new(dims: SystemDims, m_degraded: usize) -> Result<Self> {
        if m_degraded >= dims.n_groups {
            return Err(Error::Config(format!(
                "m_degraded = {m_degraded} must be below the group count {}",
                dims.n_groups
            )));
        }
        Ok(Self {
            beta: rs_beta(m_degraded),
            dims,
            m_degraded,
        })
    }

    /// All groups but one degraded.
    pub fn fully_degraded(dims: SystemDims) -> Self {
        let m = dims.n_groups - 1;
        Self {
            beta: rs_beta(m),
            dims,
            m_degraded: m,
        }
    }

    pub fn dof_rs(&self) -> f64 {
        dof_rs(self.m_degraded)
    }

    pub fn dof_classic(&self) -> u8 {
        dof_classic(&self.dims)
    }
}

/// `log2(P/σ²)` for an SNR in dB.
pub fn log2_power(snr_db: f64) -> f64 {
    snr_db / 10.0 * LOG2_10
}

/// Least-squares slope of `(x, y)` points.
fn ls_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Least-squares slope of sum rate versus `log2 P` over every point of
/// `curve` (`(snr_db, rate)` pairs), divided by `n_subcarriers`.
pub fn empirical_dof(curve: &[(f64, f64)], n_subcarriers: usize) -> Result<f64> {
    let mut xs: Vec<f64> = curve.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientPoints {
            needed: MIN_FIT_POINTS,
            got: xs.len(),
        });
    }
    let pts: Vec<(f64, f64)> = curve.iter().map(|&(s, r)| (log2_power(s), r)).collect();
    Ok(ls_slope(&pts) / n_subcarriers as f64)
}

/// Points of `curve` whose SNR is within `width_db` of the largest SNR.
pub fn top_window(curve: &[(f64, f64)], width_db: f64) -> Vec<(f64, f64)> {
    let top = curve.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    curve.iter().copied().filter(|p| p.0 >= top - width_db - 1e-9).collect()
}

/// [`empirical_dof`] over the top `width_db` of the sweep.
pub fn empirical_dof_high_snr(curve: &[(f64, f64)], n_subcarriers: usize, width_db: f64) -> Result<f64> {
    empirical_dof(&top_window(curve, width_db), n_subcarriers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn classic_threshold_cases() {
        assert_eq!(dof_classic(&SystemDims::new(2, 2, 2, 4)), 0);
        assert_eq!(dof_classic(&SystemDims::new(1, 7, 3, 9)), 1);
        for nt in 1..6 {
            assert_eq!(dof_classic(&SystemDims::new(1, nt, 1, 4)), 1);
        }
    }

    #[test]
    fn rs_values() {
        assert_eq!(dof_rs(0), 1.0);
        assert_eq!(dof_rs(1), 0.5);
        assert_eq!(dof_rs(2), 1.0 / 3.0);
    }

    #[test]
    fn beta_is_the_fixed_point() {
        for md in 1..10usize {
            // Bisection on (1−β)/M_deg − β, which is decreasing in β.
            let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (1.0 - mid) / md as f64 - mid > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            assert_abs_diff_eq!(0.5 * (lo + hi), rs_beta(md), epsilon = 1e-12);
        }
    }

    #[test]
    fn scenario_bounds() {
        let dims = SystemDims::new(2, 4, 3, 9);
        assert!(DofScenario::new(dims.clone(), 3).is_err());
        let s = DofScenario::new(dims.clone(), 2).unwrap();
        assert_eq!(s.dof_rs(), 1.0 / 3.0);
        assert_eq!(DofScenario::fully_degraded(dims), s);
    }

    #[test]
    fn synthetic_slopes() {
        let line: Vec<(f64, f64)> = (0..8).map(|i| 5.0 * i as f64).map(|s| (s, 0.5 * log2_power(s) + 1.0)).collect();
        assert_abs_diff_eq!(empirical_dof(&line, 1).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(empirical_dof(&line, 2).unwrap(), 0.25, epsilon = 1e-12);
        let flat: Vec<(f64, f64)> = line.iter().map(|p| (p.0, 3.0)).collect();
        assert_abs_diff_eq!(empirical_dof(&flat, 1).unwrap(), 0.0, epsilon = 1e-12);
        assert_eq!(top_window(&line, 10.0).len(), 3);
    }

    #[test]
    fn too_few_points() {
        let err = empirical_dof(&[(0.0, 1.0), (5.0, 2.0)], 1).unwrap_err();
        assert!(matches!(err, Error::InsufficientPoints { needed: 3, got: 2 }));
        assert!(empirical_dof(&[(0.0, 1.0), (0.0, 2.0), (5.0, 2.0)], 1).is_err());
    }

    proptest! {
        #[test]
        fn rs_decreasing_and_above_one_over_m(m in 2usize..12) {
            for md in 0..m - 1 {
                prop_assert!(dof_rs(md + 1) < dof_rs(md));
            }
            for md in 0..m {
                prop_assert!(dof_rs(md) >= 1.0 / m as f64 - 1e-15);
            }
        }

        #[test]
        fn classic_monotone(nt in 1usize..8, m in 1usize..5, per in 1usize..5) {
            let k = m * per;
            let base = dof_classic(&SystemDims::new(1, nt, m, k));
            prop_assert!(dof_classic(&SystemDims::new(1, nt + 1, m, k)) >= base);
            prop_assert!(dof_classic(&SystemDims::new(1, nt, m, k + m)) <= base);
        }

        #[test]
        fn slope_recovered(a in -2.0f64..2.0, b in -5.0f64..5.0, n in 1usize..4) {
            let pts: Vec<(f64, f64)> = (0..5).map(|i| 3.0 * i as f64).map(|s| (s, a * log2_power(s) + b)).collect();
            prop_assert!((empirical_dof(&pts, n).unwrap() - a / n as f64).abs() < 1e-9);
        }
    }
}
