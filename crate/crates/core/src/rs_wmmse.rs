//! Joint rate-splitting precoder / equalizer optimization maximizing the sum
//! of per-subcarrier max-min-fair rates under one total power budget.
//!
//! Each inner iteration refreshes the MMSE equalizers, then the WMMSE
//! weights, then solves the convex precoder step. The inner loop stops once
//! every per-subcarrier MMF rate moves by at most `eps_inner`; the outer loop
//! stops once the total moves by at most `eps_outer`.

use serde::{Deserialize, Serialize};

use crate::channel::{complex_gaussian, derive_seed, rng_from_seed};
use crate::conic::{build_rs_subproblem, solve_with, RsSubproblemMode, SolveStatus, SolverOptions};
use crate::error::Result;
use crate::model::{
    realized_total_power, validate, ChannelSet, CommonRateSplit, PowerBudget, PrecoderSet, RateReport, RunStatus,
    SystemDims,
};
use crate::rates::evaluate_with_best_split;

/// The step only supplies precoders: rates are recomputed from them and the
/// power is rescaled to the budget, so small constraint slack is harmless.
const STEP_SOLVER: SolverOptions = SolverOptions {
    tol: 1e-8,
    max_iter: 200,
    max_violation: 1e-6,
};

/// A step the backend did not certify is still taken when its point is this
/// close to feasible and the recomputed objective does not decrease.
const INEXACT_STEP_VIOLATION: f64 = 1e-5;

/// Fraction of the budget used by initial precoders.
pub const INIT_POWER_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    MatchedFilter,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Rs,
    NoRs,
}

impl Mode {
    fn subproblem(self) -> RsSubproblemMode {
        match self {
            Mode::Rs => RsSubproblemMode::RateSplitting,
            Mode::NoRs => RsSubproblemMode::NoRateSplitting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RsConfig {
    pub eps_inner: f64,
    pub eps_outer: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    /// Scheme of the first start; later starts are random.
    pub init_scheme: InitScheme,
    pub restarts: usize,
    /// Seed for random starts.
    pub seed: u64,
}

impl Default for RsConfig {
    fn default() -> Self {
        Self {
            eps_inner: 1e-4,
            eps_outer: 1e-4,
            max_inner: 100,
            max_outer: 20,
            init_scheme: InitScheme::MatchedFilter,
            restarts: 2,
            seed: 0,
        }
    }
}

impl RsConfig {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.eps_inner > 0.0 && self.eps_outer > 0.0) {
            return Err("tolerances must be positive".into());
        }
        if self.restarts == 0 {
            return Err("restarts must be at least 1".into());
        }
        if self.max_inner == 0 || self.max_outer == 0 {
            return Err("iteration limits must be at least 1".into());
        }
        Ok(())
    }
}

/// Where a run started from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Start {
    Init(InitScheme, usize),
    /// Converged no-rate-splitting solution.
    NoRsSolution,
    /// Supplied by the caller.
    Given,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RsTrace {
    pub start: Start,
    pub r_tot_per_outer: Vec<f64>,
    /// Per-subcarrier MMF rates, starting with the initial point.
    pub r_n_per_inner: Vec<Vec<f64>>,
    /// Sum MMF rate after each inner iteration, starting with the initial point.
    pub objective_per_inner: Vec<f64>,
    pub solver_statuses: Vec<SolveStatus>,
}

impl RsTrace {
    /// Largest decrease between consecutive inner iterations (0 if none).
    pub fn max_ascent_drop(&self) -> f64 {
        self.objective_per_inner
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(0.0, f64::max)
    }

    pub fn inner_iterations(&self) -> usize {
        self.objective_per_inner.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone)]
pub struct RsOutcome {
    pub mode: Mode,
    pub precoders: PrecoderSet,
    pub split: CommonRateSplit,
    pub report: RateReport,
    /// Every run, in start order.
    pub runs: Vec<RsTrace>,
    pub best_run: usize,
}

impl RsOutcome {
    pub fn trace(&self) -> &RsTrace {
        &self.runs[self.best_run]
    }

    pub fn max_ascent_drop(&self) -> f64 {
        self.runs.iter().map(RsTrace::max_ascent_drop).fold(0.0, f64::max)
    }

    pub fn total_iterations(&self) -> usize {
        self.runs.iter().map(RsTrace::inner_iterations).sum()
    }
}

/// Initial precoders at `0.9·P` split equally over the `N·(M+1)` precoders.
///
/// `MatchedFilter` points each group precoder along `Σ_{k∈g_m} h_k*` and the
/// broadcast precoder along `Σ_k h_k*`; `Random` uses seeded complex Gaussian
/// directions.
pub fn initialize_precoders(
    dims: &SystemDims,
    ch: &ChannelSet,
    budget: &PowerBudget,
    scheme: InitScheme,
    seed: u64,
) -> PrecoderSet {
    let mut p = PrecoderSet::for_dims(dims);
    let n_streams = dims.n_subcarriers * (dims.n_groups + 1);
    let per = INIT_POWER_FRACTION * budget.total_power / n_streams as f64;
    let mut rng = rng_from_seed(seed);
    let groups = dims.groups();
    for n in 0..dims.n_subcarriers {
        for s in 0..=dims.n_groups {
            let users: Vec<usize> = if s == 0 { (0..dims.n_users).collect() } else { groups[s - 1].clone() };
            let target = if s == 0 { p.bc_mut(n) } else { p.group_mut(s - 1, n) };
            match scheme {
                InitScheme::MatchedFilter => {
                    for &k in &users {
                        for (z, h) in target.iter_mut().zip(ch.vector(k, n)) {
                            *z += h.conj();
                        }
                    }
                }
                InitScheme::Random => target.iter_mut().for_each(|z| *z = complex_gaussian(&mut rng)),
            }
            let norm = target.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 1e-12 {
                target.iter_mut().for_each(|z| *z *= per.sqrt() / norm);
            } else {
                target[0] = per.sqrt().into();
            }
        }
    }
    p
}

fn start_precoders(dims: &SystemDims, ch: &ChannelSet, budget: &PowerBudget, cfg: &RsConfig, i: usize) -> PrecoderSet {
    let scheme = if i == 0 { cfg.init_scheme } else { InitScheme::Random };
    initialize_precoders(dims, ch, budget, scheme, derive_seed(cfg.seed, &[i as u64]))
}

struct Run {
    precoders: PrecoderSet,
    report: RateReport,
    split: CommonRateSplit,
    trace: RsTrace,
}

fn run_single(
    dims: &SystemDims,
    ch: &ChannelSet,
    budget: &PowerBudget,
    cfg: &RsConfig,
    mode: Mode,
    start: Start,
    mut p: PrecoderSet,
) -> Result<Run> {
    if mode == Mode::NoRs && !p.is_non_rs() {
        p.clear_broadcast();
        let used = realized_total_power(&p);
        if used > 0.0 {
            p.scale((INIT_POWER_FRACTION * budget.total_power / used).sqrt());
        }
    }
    let (mut report, mut split) = evaluate_with_best_split(dims, ch, &p);
    let mut trace = RsTrace {
        start,
        r_tot_per_outer: Vec::new(),
        r_n_per_inner: vec![report.subcarrier_mmf.clone()],
        objective_per_inner: vec![report.sum_mmf],
        solver_statuses: Vec::new(),
    };
    let mut prev_rn = vec![0.0; dims.n_subcarriers];
    let mut prev_rtot = 0.0;
    let mut status = RunStatus::MaxIters;

    'outer: for _ in 0..cfg.max_outer {
        for _ in 0..cfg.max_inner {
            let ao = crate::rates::AoState::from_precoders(dims, ch, &p);
            let sub = build_rs_subproblem(dims, ch, &ao, budget, mode.subproblem())?;
            let sol = solve_with(&sub.problem, &STEP_SOLVER);
            trace.solver_statuses.push(sol.status);
            let inexact = sol.status == SolveStatus::NumericalFailure
                && sol.max_violation <= INEXACT_STEP_VIOLATION
                && sol.values.iter().all(|x| x.is_finite());
            if !sol.is_optimal() && !inexact {
                status = RunStatus::SolverFailure;
                break 'outer;
            }
            let mut q = sub.layout.precoders(&sol.values);
            if mode == Mode::NoRs {
                q.clear_broadcast();
            }
            let used = realized_total_power(&q);
            if used > budget.total_power {
                q.scale((budget.total_power / used).sqrt());
            }
            let (next, next_split) = evaluate_with_best_split(dims, ch, &q);
            if next.sum_mmf < report.sum_mmf {
                // The exact step cannot lower the objective, so a drop is solver
                // noise at the current point: stop there instead of taking it.
                status = if inexact { RunStatus::SolverFailure } else { RunStatus::Converged };
                break 'outer;
            }
            p = q;
            (report, split) = (next, next_split);
            trace.r_n_per_inner.push(report.subcarrier_mmf.clone());
            trace.objective_per_inner.push(report.sum_mmf);
            let settled = report
                .subcarrier_mmf
                .iter()
                .zip(&prev_rn)
                .all(|(a, b)| (a - b).abs() <= cfg.eps_inner);
            prev_rn.clone_from(&report.subcarrier_mmf);
            if settled {
                break;
            }
        }
        let r_tot = report.sum_mmf;
        trace.r_tot_per_outer.push(r_tot);
        if (r_tot - prev_rtot).abs() <= cfg.eps_outer {
            status = RunStatus::Converged;
            break;
        }
        prev_rtot = r_tot;
    }

    report.iterations = trace.inner_iterations();
    report.status = status;
    report.r_tot = report.sum_mmf;
    Ok(Run {
        precoders: p,
        report,
        split,
        trace,
    })
}

fn pick_best(mode: Mode, runs: Vec<Run>) -> RsOutcome {
    // A start that hit a solver failure only competes when every start did.
    let all_failed = runs.iter().all(|r| r.report.status == RunStatus::SolverFailure);
    let eligible = |r: &Run| all_failed || r.report.status != RunStatus::SolverFailure;
    let mut best = runs.iter().position(eligible).expect("at least one run");
    for (i, r) in runs.iter().enumerate().skip(best + 1).filter(|(_, r)| eligible(r)) {
        let b = &runs[best];
        let gain = r.report.sum_mmf - b.report.sum_mmf;
        if gain > 1e-12 || (gain.abs() <= 1e-12 && r.trace.inner_iterations() < b.trace.inner_iterations()) {
            best = i;
        }
    }
    let traces: Vec<RsTrace> = runs.iter().map(|r| r.trace.clone()).collect();
    let total_iters: usize = traces.iter().map(RsTrace::inner_iterations).sum();
    let chosen = runs.into_iter().nth(best).expect("at least one run");
    let mut report = chosen.report;
    report.iterations = total_iters;
    RsOutcome {
        mode,
        precoders: chosen.precoders,
        split: chosen.split,
        report,
        runs: traces,
        best_run: best,
    }
}

fn optimize_no_rs(dims: &SystemDims, ch: &ChannelSet, budget: &PowerBudget, cfg: &RsConfig) -> Result<RsOutcome> {
    let runs = (0..cfg.restarts)
        .map(|i| {
            let start = start_precoders(dims, ch, budget, cfg, i);
            let scheme = if i == 0 { cfg.init_scheme } else { InitScheme::Random };
            run_single(dims, ch, budget, cfg, Mode::NoRs, Start::Init(scheme, i), start)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pick_best(Mode::NoRs, runs))
}

/// Rate-splitting optimization given an already converged classic result,
/// which is used as one of the starts.
pub fn optimize_rs_from_classic(
    dims: &SystemDims,
    ch: &ChannelSet,
    budget: &PowerBudget,
    cfg: &RsConfig,
    no_rs: &RsOutcome,
) -> Result<RsOutcome> {
    validate(dims, ch, budget)?;
    let mut runs = (0..cfg.restarts)
        .map(|i| {
            let start = start_precoders(dims, ch, budget, cfg, i);
            let scheme = if i == 0 { cfg.init_scheme } else { InitScheme::Random };
            run_single(dims, ch, budget, cfg, Mode::Rs, Start::Init(scheme, i), start)
        })
        .collect::<Result<Vec<_>>>()?;
    runs.push(run_single(
        dims,
        ch,
        budget,
        cfg,
        Mode::Rs,
        Start::NoRsSolution,
        no_rs.precoders.clone(),
    )?);
    Ok(pick_best(Mode::Rs, runs))
}

/// Runs the alternating optimization from `cfg.restarts` starts and keeps the
/// best result (ties go to fewer iterations).
///
/// In [`Mode::Rs`] the converged no-rate-splitting solution is added as one
/// more start. Since every iteration is an ascent step, the rate-splitting
/// result can never fall below the classic one.
pub fn optimize(
    dims: &SystemDims,
    ch: &ChannelSet,
    budget: &PowerBudget,
    cfg: &RsConfig,
    mode: Mode,
) -> Result<RsOutcome> {
    validate(dims, ch, budget)?;
    let no_rs = optimize_no_rs(dims, ch, budget, cfg)?;
    match mode {
        Mode::NoRs => Ok(no_rs),
        Mode::Rs => optimize_rs_from_classic(dims, ch, budget, cfg, &no_rs),
    }
}

/// A single run of the alternating optimization from the given precoders.
pub fn optimize_from(
    dims: &SystemDims,
    ch: &ChannelSet,
    budget: &PowerBudget,
    cfg: &RsConfig,
    mode: Mode,
    start: PrecoderSet,
) -> Result<RsOutcome> {
    validate(dims, ch, budget)?;
    if (start.n_subcarriers(), start.n_groups(), start.n_tx())
        != (dims.n_subcarriers, dims.n_groups, dims.n_tx_antennas)
    {
        return Err(crate::Error::Dimension("start precoders do not match dims".into()));
    }
    let run = run_single(dims, ch, budget, cfg, mode, Start::Given, start)?;
    Ok(pick_best(mode, vec![run]))
}

/// Both modes at once, sharing the no-rate-splitting computation.
/// Returns `(rs, no_rs)`.
pub fn optimize_both(
    dims: &SystemDims,
    ch: &ChannelSet,
    budget: &PowerBudget,
    cfg: &RsConfig,
) -> Result<(RsOutcome, RsOutcome)> {
    validate(dims, ch, budget)?;
    let no_rs = optimize_no_rs(dims, ch, budget, cfg)?;
    let rs = optimize_rs_from_classic(dims, ch, budget, cfg, &no_rs)?;
    Ok((rs, no_rs))
}
