//! Classic max-min-fair multicast beamforming by semidefinite relaxation,
//! and time-division multiplexing (one group per slot).
//!
//! Each subcarrier is solved independently under a power cap. The largest
//! feasible common SINR target of the relaxation is found by bisection on
//! the rate scale; rank-one precoders are then recovered by Gaussian
//! randomization from the covariances of the last feasible target.

use std::time::Duration;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_gaussian, derive_seed, rng_from_seed};
use crate::conic::{build_sdr_feasibility_for_groups, solve, solve_with, SolveStatus, SolverOptions};
use crate::error::Result;
use crate::model::{
    realized_total_power, validate, ChannelSet, PowerBudget, PrecoderSet, RateReport, RunStatus, SystemDims,
};
use crate::rates::{evaluate_with_best_split, inner};

/// Second attempt after a numerical failure. Large lifted problems often
/// stall just short of the default accuracy.
const RETRY_SOLVER: SolverOptions = SolverOptions {
    tol: 1e-7,
    max_iter: 200,
    max_violation: 1e-6,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerSplit {
    /// `P/N` on every subcarrier.
    Equal,
    /// Two subcarriers only: best of 11 fractions `f·P`, `(1−f)·P`.
    GridRefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SdrConfig {
    /// Bisection stops once the rate interval is narrower than this (bits/s/Hz).
    pub bisection_tol: f64,
    pub n_randomizations: usize,
    pub power_split: PowerSplit,
    pub seed: u64,
}

impl Default for SdrConfig {
    fn default() -> Self {
        Self {
            bisection_tol: 1e-3,
            n_randomizations: 1000,
            power_split: PowerSplit::Equal,
            seed: 0,
        }
    }
}

impl SdrConfig {
    pub fn validate(&self, dims: &SystemDims) -> std::result::Result<(), String> {
        if self.bisection_tol.is_nan() || self.bisection_tol <= 0.0 {
            return Err("bisection_tol must be positive".into());
        }
        if self.n_randomizations == 0 {
            return Err("n_randomizations must be at least 1".into());
        }
        if self.power_split == PowerSplit::GridRefined && dims.n_subcarriers != 2 {
            return Err("grid_refined power split needs exactly 2 subcarriers".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionStep {
    pub gamma: f64,
    pub feasible: bool,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BisectionTrace {
    pub steps: Vec<BisectionStep>,
}

impl BisectionTrace {
    /// True when every feasible target lies below every infeasible one.
    pub fn is_monotone(&self) -> bool {
        let max_feasible = self.steps.iter().filter(|s| s.feasible).map(|s| s.gamma).fold(f64::NEG_INFINITY, f64::max);
        let min_infeasible = self.steps.iter().filter(|s| !s.feasible).map(|s| s.gamma).fold(f64::INFINITY, f64::min);
        max_feasible < min_infeasible
    }

    pub fn numerical_failures(&self) -> usize {
        self.steps.iter().filter(|s| s.status == SolveStatus::NumericalFailure).count()
    }

    /// Numerical failures below every target proven infeasible. Only these
    /// can have cut the search short; a failure above a proven-infeasible
    /// target is infeasible anyway.
    pub fn unresolved_failures(&self) -> usize {
        let proven = self
            .steps
            .iter()
            .filter(|s| s.status == SolveStatus::Optimal && !s.feasible)
            .map(|s| s.gamma)
            .fold(f64::INFINITY, f64::min);
        self.steps.iter().filter(|s| s.status == SolveStatus::NumericalFailure && s.gamma < proven).count()
    }
}

/// Result of one subcarrier (or one TDM slot on one subcarrier).
#[derive(Debug, Clone)]
pub struct SubcarrierSdr {
    pub power_cap: f64,
    /// Largest target proven feasible.
    pub gamma_lo: f64,
    /// Smallest target proven infeasible, or the single-user bound. Targets
    /// where the solver failed count as infeasible for the search but not
    /// here.
    pub gamma_hi: f64,
    /// One precoder per served group, scaled to the cap.
    pub precoders: Vec<Vec<Complex64>>,
    /// Minimum SINR achieved by `precoders` over all served users.
    pub min_sinr: f64,
    pub trace: BisectionTrace,
    pub solve_time: Duration,
}

impl SubcarrierSdr {
    pub fn relaxation_rate(&self) -> f64 {
        (1.0 + self.gamma_hi).log2()
    }

    pub fn feasible_rate(&self) -> f64 {
        (1.0 + self.min_sinr).log2()
    }
}

fn min_sinr(ch: &ChannelSet, n: usize, groups: &[Vec<usize>], p: &[Vec<Complex64>]) -> f64 {
    let mut worst = f64::INFINITY;
    for (m, members) in groups.iter().enumerate() {
        for &k in members {
            let h = ch.vector(k, n);
            let own = inner(h, &p[m]).norm_sqr();
            let interference: f64 = (0..p.len()).filter(|&j| j != m).map(|j| inner(h, &p[j]).norm_sqr()).sum();
            worst = worst.min(own / (interference + ch.noise_var));
        }
    }
    worst
}

fn scale_to_cap(p: &mut [Vec<Complex64>], cap: f64) {
    let used: f64 = p.iter().flatten().map(|z| z.norm_sqr()).sum();
    if used > 0.0 {
        let s = (cap / used).sqrt();
        p.iter_mut().flatten().for_each(|z| *z *= s);
    }
}

/// Gaussian randomization. Candidate 0 uses principal eigenvectors; the rest
/// draw `U Λ^{1/2} z` with `z ~ CN(0, I)`. Every candidate is scaled to the
/// cap and the best minimum SINR is kept.
fn randomize(
    ch: &ChannelSet,
    n: usize,
    groups: &[Vec<usize>],
    cov: &[DMatrix<Complex64>],
    cap: f64,
    draws: usize,
    seed: u64,
) -> (Vec<Vec<Complex64>>, f64) {
    let nt = ch.n_tx();
    let factors: Vec<(DMatrix<Complex64>, Vec<f64>)> = cov
        .iter()
        .map(|x| {
            let eig = x.clone().symmetric_eigen();
            let lam = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
            (eig.eigenvectors, lam)
        })
        .collect();
    let principal: Vec<Vec<Complex64>> = factors
        .iter()
        .map(|(u, lam)| {
            let (i, l) = lam.iter().enumerate().fold((0, 0.0), |b, (i, &l)| if l > b.1 { (i, l) } else { b });
            (0..nt).map(|a| u[(a, i)] * l.sqrt()).collect()
        })
        .collect();
    let mut best = principal;
    scale_to_cap(&mut best, cap);
    let mut best_sinr = min_sinr(ch, n, groups, &best);
    let mut rng = rng_from_seed(seed);
    for _ in 1..draws {
        let mut cand: Vec<Vec<Complex64>> = factors
            .iter()
            .map(|(u, lam)| {
                let z: Vec<Complex64> = lam.iter().map(|&l| complex_gaussian(&mut rng) * l.sqrt()).collect();
                (0..nt).map(|a| (0..nt).map(|i| u[(a, i)] * z[i]).sum()).collect()
            })
            .collect();
        scale_to_cap(&mut cand, cap);
        let s = min_sinr(ch, n, groups, &cand);
        if s > best_sinr {
            best_sinr = s;
            best = cand;
        }
    }
    if !best_sinr.is_finite() || best_sinr < 0.0 {
        best_sinr = 0.0;
    }
    (best, best_sinr)
}

/// Max-min-fair beamforming on subcarrier `n` for `groups` (user indices into
/// `ch`) under power cap `cap`.
pub fn sdr_subcarrier(
    ch: &ChannelSet,
    n: usize,
    groups: &[Vec<usize>],
    cap: f64,
    cfg: &SdrConfig,
    seed: u64,
) -> SubcarrierSdr {
    let nt = ch.n_tx();
    let zero = || vec![vec![Complex64::new(0.0, 0.0); nt]; groups.len()];
    let mut out = SubcarrierSdr {
        power_cap: cap,
        gamma_lo: 0.0,
        gamma_hi: 0.0,
        precoders: zero(),
        min_sinr: 0.0,
        trace: BisectionTrace::default(),
        solve_time: Duration::ZERO,
    };
    if cap <= 0.0 {
        return out;
    }
    let max_gain = groups
        .iter()
        .flatten()
        .map(|&k| ch.vector(k, n).iter().map(|z| z.norm_sqr()).sum::<f64>())
        .fold(0.0, f64::max);
    let gamma_max = cap * max_gain / ch.noise_var;
    let (mut lo, mut hi) = (0.0_f64, (1.0 + gamma_max).log2());
    // Targets that merely failed numerically do not tighten the bound.
    let mut proven_hi = hi;
    let mut cov: Option<Vec<DMatrix<Complex64>>> = None;
    while hi - lo >= cfg.bisection_tol {
        let mid = 0.5 * (lo + hi);
        let gamma = mid.exp2() - 1.0;
        let sub = build_sdr_feasibility_for_groups(ch, n, groups, gamma, cap);
        let mut sol = solve(&sub.problem);
        out.solve_time += sol.solve_time;
        if sol.status == SolveStatus::NumericalFailure {
            sol = solve_with(&sub.problem, &RETRY_SOLVER);
            out.solve_time += sol.solve_time;
        }
        let feasible = sol.is_optimal() && sub.is_feasible(&sol.values);
        out.trace.steps.push(BisectionStep {
            gamma,
            feasible,
            status: sol.status,
        });
        if feasible {
            lo = mid;
            cov = Some(sub.layout.covariances(&sol.values));
        } else {
            hi = mid;
            if sol.is_optimal() {
                proven_hi = mid;
            }
        }
    }
    out.gamma_lo = lo.exp2() - 1.0;
    out.gamma_hi = proven_hi.exp2() - 1.0;
    if let Some(cov) = cov {
        let (p, s) = randomize(ch, n, groups, &cov, cap, cfg.n_randomizations, seed);
        out.precoders = p;
        out.min_sinr = s;
    }
    out
}

#[derive(Debug, Clone)]
pub struct SdrOutcome {
    /// Group precoders; broadcast precoders are zero.
    pub precoders: PrecoderSet,
    pub report: RateReport,
    /// `Σ_n log2(1 + γ_hi,n)`.
    pub relaxation_bound: f64,
    pub subcarriers: Vec<SubcarrierSdr>,
    /// Power fraction of each subcarrier.
    pub power_fractions: Vec<f64>,
    pub solve_time: Duration,
}

impl SdrOutcome {
    pub fn bisections_monotone(&self) -> bool {
        self.subcarriers.iter().all(|s| s.trace.is_monotone())
    }

    pub fn numerical_failures(&self) -> usize {
        self.subcarriers.iter().map(|s| s.trace.numerical_failures()).sum()
    }
}

fn split_candidates(dims: &SystemDims, split: PowerSplit) -> Vec<Vec<f64>> {
    let n = dims.n_subcarriers;
    match split {
        PowerSplit::Equal => vec![vec![1.0 / n as f64; n]],
        PowerSplit::GridRefined => (0..=10).map(|i| i as f64 / 10.0).map(|f| vec![f, 1.0 - f]).collect(),
    }
}

fn sdr_with_fractions(
    dims: &SystemDims,
    ch: &ChannelSet,
    budget: &PowerBudget,
    cfg: &SdrConfig,
    fractions: &[f64],
    cache: &mut Vec<(usize, u64, SubcarrierSdr)>,
) -> Vec<SubcarrierSdr> {
    let groups = dims.groups();
    (0..dims.n_subcarriers)
        .map(|n| {
            let cap = fractions[n] * budget.total_power;
            let key = cap.to_bits();
            if let Some((_, _, s)) = cache.iter().find(|(cn, ck, _)| *cn == n && *ck == key) {
                return s.clone();
            }
            let s = sdr_subcarrier(ch, n, &groups, cap, cfg, derive_seed(cfg.seed, &[n as u64, key]));
            cache.push((n, key, s.clone()));
            s
        })
        .collect()
}

/// Classic max-min-fair beamforming on every subcarrier by semidefinite
/// relaxation. The randomized (feasible) value is `report.sum_mmf`.
pub fn sdr_mmf(dims: &SystemDims, ch: &ChannelSet, budget: &PowerBudget, cfg: &SdrConfig) -> Result<SdrOutcome> {
    validate(dims, ch, budget)?;
    cfg.validate(dims).map_err(crate::Error::Config)?;
    let mut cache = Vec::new();
    let mut best: Option<(f64, f64, Vec<f64>, Vec<SubcarrierSdr>)> = None;
    for fractions in split_candidates(dims, cfg.power_split) {
        let subs = sdr_with_fractions(dims, ch, budget, cfg, &fractions, &mut cache);
        let value: f64 = subs.iter().map(SubcarrierSdr::feasible_rate).sum();
        let bound: f64 = subs.iter().map(SubcarrierSdr::relaxation_rate).sum();
        let bound = best.as_ref().map_or(bound, |b| b.1.max(bound));
        match &mut best {
            Some(b) if value <= b.0 => b.1 = bound,
            _ => best = Some((value, bound, fractions, subs)),
        }
    }
    let (_, relaxation_bound, power_fractions, subcarriers) = best.expect("at least one power split");

    let mut precoders = PrecoderSet::for_dims(dims);
    for (n, s) in subcarriers.iter().enumerate() {
        for (m, p) in s.precoders.iter().enumerate() {
            precoders.group_mut(m, n).copy_from_slice(p);
        }
    }
    let (mut report, _) = evaluate_with_best_split(dims, ch, &precoders);
    let failures: usize = subcarriers.iter().map(|s| s.trace.unresolved_failures()).sum();
    report.iterations = cache.iter().map(|(_, _, s)| s.trace.steps.len()).sum();
    report.status = if failures > 0 { RunStatus::SolverFailure } else { RunStatus::Converged };
    let solve_time = cache.iter().map(|(_, _, s)| s.solve_time).sum();
    debug_assert!(realized_total_power(&precoders) <= budget.total_power * (1.0 + 1e-6));
    Ok(SdrOutcome {
        precoders,
        report,
        relaxation_bound,
        subcarriers,
        power_fractions,
        solve_time,
    })
}

#[derive(Debug, Clone)]
pub struct TdmOutcome {
    /// Per-slot rates already scaled by `1/M`. Broadcast fields are zero.
    pub report: RateReport,
    /// `slots[m][n]`: group `m` served alone on subcarrier `n`.
    pub slots: Vec<Vec<SubcarrierSdr>>,
    pub solve_time: Duration,
}

/// Time-division baseline: `M` equal slots, group `m` alone in slot `m` with
/// the full budget (`P/N` per subcarrier).
pub fn tdm_mmf(dims: &SystemDims, ch: &ChannelSet, budget: &PowerBudget, cfg: &SdrConfig) -> Result<TdmOutcome> {
    validate(dims, ch, budget)?;
    cfg.validate(dims).map_err(crate::Error::Config)?;
    let n_sc = dims.n_subcarriers;
    let share = 1.0 / dims.n_groups as f64;
    let cap = budget.total_power / n_sc as f64;
    let groups = dims.groups();
    let slots: Vec<Vec<SubcarrierSdr>> = groups
        .iter()
        .enumerate()
        .map(|(m, members)| {
            let single = [members.clone()];
            (0..n_sc)
                .map(|n| {
                    // A single slot is the multicast baseline itself, so it
                    // reuses that baseline's randomization stream.
                    let seed = if groups.len() == 1 {
                        derive_seed(cfg.seed, &[n as u64, cap.to_bits()])
                    } else {
                        derive_seed(cfg.seed, &[u64::MAX, m as u64, n as u64])
                    };
                    sdr_subcarrier(ch, n, &single, cap, cfg, seed)
                })
                .collect()
        })
        .collect();

    let mut user_rate = vec![0.0; dims.n_users * n_sc];
    let mut group_rate = vec![0.0; dims.n_groups * n_sc];
    for (m, members) in groups.iter().enumerate() {
        for n in 0..n_sc {
            let p = &slots[m][n].precoders[0];
            let mut weakest = f64::INFINITY;
            for &k in members {
                let snr = inner(ch.vector(k, n), p).norm_sqr() / ch.noise_var;
                let r = share * (1.0 + snr).log2();
                user_rate[k * n_sc + n] = r;
                weakest = weakest.min(r);
            }
            group_rate[m * n_sc + n] = weakest;
        }
    }
    let subcarrier_mmf: Vec<f64> = (0..n_sc)
        .map(|n| (0..dims.n_groups).map(|m| group_rate[m * n_sc + n]).fold(f64::INFINITY, f64::min))
        .collect();
    let sum_mmf = subcarrier_mmf.iter().sum();
    let all = slots.iter().flatten();
    let failures: usize = all.clone().map(|s| s.trace.unresolved_failures()).sum();
    let report = RateReport {
        n_subcarriers: n_sc,
        user_rate,
        bc_user_rate: vec![0.0; dims.n_users * n_sc],
        bc_rate: vec![0.0; n_sc],
        group_rate,
        subcarrier_mmf,
        sum_mmf,
        r_tot: sum_mmf,
        iterations: all.clone().map(|s| s.trace.steps.len()).sum(),
        status: if failures > 0 { RunStatus::SolverFailure } else { RunStatus::Converged },
        common_rate_infeasible: false,
    };
    let solve_time = all.map(|s| s.solve_time).sum();
    Ok(TdmOutcome {
        report,
        slots,
        solve_time,
    })
}
