use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use super::config::{Algo, ExperimentConfig};
use super::results::{channel_hash, read_results_file, sort_rows, write_results_file, CellKey, Diagnostics, ResultRow};
use crate::baselines::{sdr_mmf, tdm_mmf, SdrConfig};
use crate::channel::{derive_seed, generate_channels_with_noise};
use crate::conic::{build_rs_subproblem, ConicProblem, RsSubproblemMode};
use crate::error::{Error, Result};
use crate::model::{realized_total_power, ChannelSet, PowerBudget, RateReport, RunStatus};
use crate::rates::AoState;
use crate::rs_wmmse::{initialize_precoders, optimize, optimize_rs_from_classic, Mode, RsConfig, RsOutcome};

const CHANNEL_STREAM: u64 = 1;
const RS_STREAM: u64 = 2;
const SDR_STREAM: u64 = 3;

const CHECKPOINT_INTERVAL: Duration = Duration::from_secs(2);

/// The channel realization shared by every algorithm and SNR of `trial`.
pub fn trial_channels(cfg: &ExperimentConfig, trial: usize) -> ChannelSet {
    generate_channels_with_noise(&cfg.dims, derive_seed(cfg.master_seed, &[CHANNEL_STREAM, trial as u64]), cfg.noise_var)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Wmmse,
    Sdr,
    Tdm,
}

impl Family {
    fn algos(self) -> &'static [Algo] {
        match self {
            Family::Wmmse => &[Algo::Rs, Algo::NoRs],
            Family::Sdr => &[Algo::Sdr, Algo::SdrBound],
            Family::Tdm => &[Algo::Tdm],
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Unit {
    trial: usize,
    snr_idx: usize,
    family: Family,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Results file; `None` keeps everything in memory.
    pub output: Option<PathBuf>,
    /// Keep rows already present in `output` and compute only missing cells.
    pub resume: bool,
}

impl RunOptions {
    pub fn for_config(cfg: &ExperimentConfig) -> Self {
        Self {
            output: Some(cfg.output_path.clone()),
            resume: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// Sorted by algorithm name, SNR, trial.
    pub rows: Vec<ResultRow>,
    pub resumed: usize,
    pub computed: usize,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.status == RunStatus::SolverFailure).count()
    }
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    tag: String,
}

impl Ctx<'_> {
    #[allow(clippy::too_many_arguments)]
    fn row(
        &self,
        algo: Algo,
        unit: &Unit,
        hash: &str,
        report: &RateReport,
        elapsed: Duration,
        power_used: f64,
        diagnostics: Diagnostics,
    ) -> ResultRow {
        ResultRow {
            algo,
            snr_db: self.cfg.snr_grid_db[unit.snr_idx],
            trial: unit.trial,
            sum_mmf_rate: report.sum_mmf,
            per_subcarrier_rates: report.subcarrier_mmf.clone(),
            iterations: report.iterations,
            solve_time_ms: self.cfg.record_timing.then_some(elapsed.as_secs_f64() * 1e3),
            status: report.status,
            power_used,
            channel_hash: hash.to_string(),
            convention_tag: self.tag.clone(),
            diagnostics: Some(diagnostics),
        }
    }

    fn failure_row(&self, algo: Algo, unit: &Unit, hash: &str, err: &Error) -> ResultRow {
        ResultRow {
            algo,
            snr_db: self.cfg.snr_grid_db[unit.snr_idx],
            trial: unit.trial,
            sum_mmf_rate: f64::NAN,
            per_subcarrier_rates: Vec::new(),
            iterations: 0,
            solve_time_ms: None,
            status: RunStatus::SolverFailure,
            power_used: f64::NAN,
            channel_hash: hash.to_string(),
            convention_tag: self.tag.clone(),
            diagnostics: Some(Diagnostics {
                error: Some(err.to_string()),
                ..Default::default()
            }),
        }
    }

    fn wmmse_row(&self, algo: Algo, unit: &Unit, hash: &str, out: &RsOutcome, elapsed: Duration) -> ResultRow {
        let diag = Diagnostics {
            max_ascent_drop: Some(out.max_ascent_drop()),
            ..Default::default()
        };
        self.row(algo, unit, hash, &out.report, elapsed, realized_total_power(&out.precoders), diag)
    }

    fn run_unit(&self, unit: Unit) -> Vec<ResultRow> {
        let cfg = self.cfg;
        let ch = trial_channels(cfg, unit.trial);
        let hash = channel_hash(&ch);
        let snr = cfg.snr_grid_db[unit.snr_idx];
        let budget = PowerBudget::from_snr_db(snr, cfg.noise_var);
        let cell = [unit.trial as u64, unit.snr_idx as u64];
        let mut rows = Vec::new();
        match unit.family {
            Family::Wmmse => {
                let rs_cfg = RsConfig {
                    seed: derive_seed(cfg.master_seed, &[RS_STREAM, cell[0], cell[1]]),
                    ..cfg.rs_config
                };
                let t0 = Instant::now();
                let no_rs = optimize(&cfg.dims, &ch, &budget, &rs_cfg, Mode::NoRs);
                let t_no_rs = t0.elapsed();
                match &no_rs {
                    Ok(o) if cfg.wants(Algo::NoRs) => rows.push(self.wmmse_row(Algo::NoRs, &unit, &hash, o, t_no_rs)),
                    Err(e) if cfg.wants(Algo::NoRs) => rows.push(self.failure_row(Algo::NoRs, &unit, &hash, e)),
                    _ => {}
                }
                if cfg.wants(Algo::Rs) {
                    let t1 = Instant::now();
                    let rs = no_rs.and_then(|o| optimize_rs_from_classic(&cfg.dims, &ch, &budget, &rs_cfg, &o));
                    match rs {
                        Ok(o) => rows.push(self.wmmse_row(Algo::Rs, &unit, &hash, &o, t1.elapsed())),
                        Err(e) => rows.push(self.failure_row(Algo::Rs, &unit, &hash, &e)),
                    }
                }
            }
            Family::Sdr => {
                let sdr_cfg = SdrConfig {
                    seed: derive_seed(cfg.master_seed, &[SDR_STREAM, cell[0], cell[1]]),
                    ..cfg.sdr_config
                };
                let t0 = Instant::now();
                match sdr_mmf(&cfg.dims, &ch, &budget, &sdr_cfg) {
                    Ok(o) => {
                        let elapsed = t0.elapsed();
                        let ordering = o.report.sum_mmf <= o.relaxation_bound + 1e-6
                            && o.subcarriers.iter().all(|s| s.feasible_rate() <= s.relaxation_rate() + 1e-6);
                        let diag = Diagnostics {
                            bisection_monotone: Some(o.bisections_monotone()),
                            relaxation_ordering_ok: Some(ordering),
                            ..Default::default()
                        };
                        if cfg.wants(Algo::Sdr) {
                            let used = realized_total_power(&o.precoders);
                            rows.push(self.row(Algo::Sdr, &unit, &hash, &o.report, elapsed, used, diag.clone()));
                        }
                        if cfg.wants(Algo::SdrBound) {
                            let mut bound = o.report.clone();
                            bound.subcarrier_mmf = o.subcarriers.iter().map(|s| s.relaxation_rate()).collect();
                            bound.sum_mmf = o.relaxation_bound;
                            bound.r_tot = o.relaxation_bound;
                            let caps = o.subcarriers.iter().map(|s| s.power_cap).sum();
                            rows.push(self.row(Algo::SdrBound, &unit, &hash, &bound, elapsed, caps, diag));
                        }
                    }
                    Err(e) => {
                        for &a in Family::Sdr.algos().iter().filter(|a| cfg.wants(**a)) {
                            rows.push(self.failure_row(a, &unit, &hash, &e));
                        }
                    }
                }
            }
            Family::Tdm => {
                let sdr_cfg = SdrConfig {
                    seed: derive_seed(cfg.master_seed, &[SDR_STREAM, cell[0], cell[1]]),
                    ..cfg.sdr_config
                };
                let t0 = Instant::now();
                match tdm_mmf(&cfg.dims, &ch, &budget, &sdr_cfg) {
                    Ok(o) => {
                        let per_slot: f64 = o
                            .slots
                            .iter()
                            .map(|slot| slot.iter().flat_map(|s| &s.precoders).flatten().map(|z| z.norm_sqr()).sum::<f64>())
                            .sum::<f64>()
                            / o.slots.len() as f64;
                        let diag = Diagnostics {
                            bisection_monotone: Some(o.slots.iter().flatten().all(|s| s.trace.is_monotone())),
                            ..Default::default()
                        };
                        rows.push(self.row(Algo::Tdm, &unit, &hash, &o.report, t0.elapsed(), per_slot, diag));
                    }
                    Err(e) => rows.push(self.failure_row(Algo::Tdm, &unit, &hash, &e)),
                }
            }
        }
        rows
    }
}

struct Shared {
    rows: BTreeMap<CellKey, ResultRow>,
    last_write: Instant,
    error: Option<Error>,
}

fn snapshot(rows: &BTreeMap<CellKey, ResultRow>) -> Vec<ResultRow> {
    let mut v: Vec<ResultRow> = rows.values().cloned().collect();
    sort_rows(&mut v);
    v
}

/// Runs every missing `(algo, snr, trial)` cell of `cfg`.
///
/// Work is split into `(trial, snr, family)` units run in parallel; rows are
/// merged under a lock and checkpointed to `opts.output` at most every two
/// seconds and once at the end. Failed runs produce rows with status
/// `solver_failure` instead of aborting the experiment.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentReport> {
    cfg.validate()?;
    let mut existing = BTreeMap::new();
    if let (true, Some(path)) = (opts.resume, &opts.output) {
        if path.exists() {
            for row in read_results_file(path)? {
                existing.insert(row.key(), row);
            }
        }
    }
    let tag = cfg.convention_tag();
    let grid_bits: Vec<u64> = cfg.snr_grid_db.iter().map(|s| s.to_bits()).collect();
    existing.retain(|k, _| cfg.wants(k.0) && grid_bits.contains(&k.1) && k.2 < cfg.n_trials);
    for row in existing.values() {
        if row.convention_tag != tag || row.channel_hash != channel_hash(&trial_channels(cfg, row.trial)) {
            return Err(Error::Config(format!(
                "existing results in {} were produced with a different configuration",
                opts.output.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
            )));
        }
    }
    let resumed = existing.len();

    let mut units = Vec::new();
    for trial in 0..cfg.n_trials {
        for (snr_idx, bits) in grid_bits.iter().enumerate() {
            for family in [Family::Wmmse, Family::Sdr, Family::Tdm] {
                let missing = family
                    .algos()
                    .iter()
                    .any(|&a| cfg.wants(a) && !existing.contains_key(&(a, *bits, trial)));
                if missing {
                    units.push(Unit { trial, snr_idx, family });
                }
            }
        }
    }

    let ctx = Ctx { cfg, tag };
    let shared = Mutex::new(Shared {
        rows: existing,
        last_write: Instant::now(),
        error: None,
    });
    units.par_iter().for_each(|&unit| {
        let rows = ctx.run_unit(unit);
        let mut s = shared.lock().expect("results lock");
        for r in rows {
            s.rows.entry(r.key()).or_insert(r);
        }
        if let Some(path) = &opts.output {
            if s.error.is_none() && s.last_write.elapsed() >= CHECKPOINT_INTERVAL {
                if let Err(e) = write_results_file(&snapshot(&s.rows), path) {
                    s.error = Some(e);
                }
                s.last_write = Instant::now();
            }
        }
    });
    let s = shared.into_inner().expect("results lock");
    if let Some(e) = s.error {
        return Err(e);
    }
    let rows = snapshot(&s.rows);
    if let Some(path) = &opts.output {
        write_results_file(&rows, path)?;
    }
    Ok(ExperimentReport {
        computed: rows.len() - resumed,
        resumed,
        rows,
    })
}

/// The first rate-splitting precoder subproblem of trial 0 at the lowest SNR,
/// built from the matched-filter start. Meant for inspection via
/// [`ConicProblem::dump`].
pub fn first_rs_subproblem(cfg: &ExperimentConfig) -> Result<ConicProblem> {
    cfg.validate()?;
    let ch = trial_channels(cfg, 0);
    let budget = PowerBudget::from_snr_db(cfg.snr_grid_db[0], cfg.noise_var);
    let p = initialize_precoders(&cfg.dims, &ch, &budget, cfg.rs_config.init_scheme, 0);
    let ao = AoState::from_precoders(&cfg.dims, &ch, &p);
    Ok(build_rs_subproblem(&cfg.dims, &ch, &ao, &budget, RsSubproblemMode::RateSplitting)?.problem)
}
