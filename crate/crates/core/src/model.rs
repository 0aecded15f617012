//! Problem instances: system dimensions, channels, power budgets, precoders
//! and the rate report shared by every optimizer.
//!
//! Complex vectors are held in flat row-major buffers. On disk they are
//! written as interleaved `(re, im)` pairs so that a dump/load round trip is
//! bit-exact.

use std::fmt;
use std::io::{BufRead, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Subcarrier, antenna, group and user counts together with the user to
/// group assignment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemDims {
    pub n_subcarriers: usize,
    pub n_tx_antennas: usize,
    pub n_groups: usize,
    pub n_users: usize,
    pub group_of: Vec<usize>,
}

impl SystemDims {
    /// Dimensions with contiguous grouping: users `0..K/M` form group 0 and
    /// so on. When `K` is not a multiple of `M` the remainder spills into the
    /// last group, which [`validate`] then reports.
    pub fn new(n_subcarriers: usize, n_tx_antennas: usize, n_groups: usize, n_users: usize) -> Self {
        let per = n_users.checked_div(n_groups).unwrap_or(0);
        let group_of = (0..n_users)
            .map(|k| k.checked_div(per).map_or(0, |g| g.min(n_groups.saturating_sub(1))))
            .collect();
        Self {
            n_subcarriers,
            n_tx_antennas,
            n_groups,
            n_users,
            group_of,
        }
    }

    /// Parses the `N-Nt-M-G` label used for the reference scenarios, where
    /// `G` is the number of users per group (so `K = M·G`).
    pub fn from_label(label: &str) -> Result<Self> {
        let parts: Vec<usize> = label
            .split(['-', ','])
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("dims label {label:?}: {e}")))?;
        match parts.as_slice() {
            [n, nt, m, g] => Ok(Self::new(*n, *nt, *m, m * g)),
            _ => Err(Error::Parse(format!(
                "dims label {label:?}: expected N-Nt-M-usersPerGroup"
            ))),
        }
    }

    pub fn label(&self) -> String {
        let per = self.n_users.checked_div(self.n_groups).unwrap_or(0);
        format!("{}-{}-{}-{}", self.n_subcarriers, self.n_tx_antennas, self.n_groups, per)
    }

    pub fn users_per_group(&self) -> usize {
        self.n_users / self.n_groups
    }

    pub fn members(&self, group: usize) -> impl Iterator<Item = usize> + '_ {
        self.group_of
            .iter()
            .enumerate()
            .filter(move |(_, &g)| g == group)
            .map(|(k, _)| k)
    }

    pub fn groups(&self) -> Vec<Vec<usize>> {
        (0..self.n_groups).map(|m| self.members(m).collect()).collect()
    }

    fn issues(&self) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        for (name, v) in [
            ("n_subcarriers", self.n_subcarriers),
            ("n_tx_antennas", self.n_tx_antennas),
            ("n_groups", self.n_groups),
            ("n_users", self.n_users),
        ] {
            if v == 0 {
                out.push(ValidationIssue::ZeroCount(name));
            }
        }
        if self.n_groups == 0 {
            return out;
        }
        if !self.n_users.is_multiple_of(self.n_groups) {
            out.push(ValidationIssue::UnequalGrouping {
                users: self.n_users,
                groups: self.n_groups,
            });
        }
        if self.group_of.len() != self.n_users {
            out.push(ValidationIssue::GroupMapLength {
                expected: self.n_users,
                got: self.group_of.len(),
            });
            return out;
        }
        if let Some((user, &group)) = self.group_of.iter().enumerate().find(|(_, &g)| g >= self.n_groups) {
            out.push(ValidationIssue::GroupOutOfRange { user, group });
            return out;
        }
        if self.n_users.is_multiple_of(self.n_groups) {
            let want = self.n_users / self.n_groups;
            for m in 0..self.n_groups {
                let size = self.members(m).count();
                if size != want {
                    out.push(ValidationIssue::GroupSize { group: m, size, expected: want });
                }
            }
        }
        out
    }
}

/// Per-user, per-subcarrier channel vectors `h[k][n] ∈ C^Nt` and the common
/// noise variance.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    n_users: usize,
    n_subcarriers: usize,
    n_tx: usize,
    h: Vec<Complex64>,
    pub noise_var: f64,
}

impl ChannelSet {
    pub fn zeros(n_users: usize, n_subcarriers: usize, n_tx: usize, noise_var: f64) -> Self {
        Self {
            n_users,
            n_subcarriers,
            n_tx,
            h: vec![Complex64::new(0.0, 0.0); n_users * n_subcarriers * n_tx],
            noise_var,
        }
    }

    /// Builds a channel set from a closure evaluated at `(user, subcarrier, antenna)`.
    pub fn from_fn(
        n_users: usize,
        n_subcarriers: usize,
        n_tx: usize,
        noise_var: f64,
        mut f: impl FnMut(usize, usize, usize) -> Complex64,
    ) -> Self {
        let mut ch = Self::zeros(n_users, n_subcarriers, n_tx, noise_var);
        for k in 0..n_users {
            for n in 0..n_subcarriers {
                for a in 0..n_tx {
                    ch.h[(k * n_subcarriers + n) * n_tx + a] = f(k, n, a);
                }
            }
        }
        ch
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn vector(&self, user: usize, subcarrier: usize) -> &[Complex64] {
        let start = (user * self.n_subcarriers + subcarrier) * self.n_tx;
        &self.h[start..start + self.n_tx]
    }

    pub fn vector_mut(&mut self, user: usize, subcarrier: usize) -> &mut [Complex64] {
        let start = (user * self.n_subcarriers + subcarrier) * self.n_tx;
        &mut self.h[start..start + self.n_tx]
    }

    /// All entries in `(user, subcarrier, antenna)` order.
    pub fn entries(&self) -> &[Complex64] {
        &self.h
    }

    /// Restriction to a subset of users (in the given order).
    pub fn select_users(&self, users: &[usize]) -> Self {
        Self::from_fn(users.len(), self.n_subcarriers, self.n_tx, self.noise_var, |k, n, a| {
            self.vector(users[k], n)[a]
        })
    }

    fn issues(&self, dims: &SystemDims) -> Vec<ValidationIssue> {
        let mut out = Vec::new();
        if self.n_users != dims.n_users
            || self.n_subcarriers != dims.n_subcarriers
            || self.n_tx != dims.n_tx_antennas
        {
            out.push(ValidationIssue::ChannelShape {
                expected: (dims.n_users, dims.n_subcarriers, dims.n_tx_antennas),
                got: (self.n_users, self.n_subcarriers, self.n_tx),
            });
        }
        let n_bad = self.h.iter().filter(|z| !(z.re.is_finite() && z.im.is_finite())).count();
        if n_bad > 0 {
            out.push(ValidationIssue::NonFiniteChannel { count: n_bad });
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            out.push(ValidationIssue::NonPositiveNoise(self.noise_var));
        }
        out
    }
}

/// Total transmit power shared by all subcarriers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBudget {
    pub total_power: f64,
    pub snr_db: f64,
}

impl PowerBudget {
    /// `P = σ²·10^(snr_db/10)`.
    pub fn from_snr_db(snr_db: f64, noise_var: f64) -> Self {
        Self {
            total_power: noise_var * 10f64.powf(snr_db / 10.0),
            snr_db,
        }
    }

    pub fn from_power(total_power: f64, noise_var: f64) -> Self {
        Self {
            total_power,
            snr_db: 10.0 * (total_power / noise_var).log10(),
        }
    }
}

/// Broadcast precoders `p_bc[n]` and group precoders `p[m][n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    n_subcarriers: usize,
    n_groups: usize,
    n_tx: usize,
    bc: Vec<Complex64>,
    groups: Vec<Complex64>,
}

impl PrecoderSet {
    pub fn zeros(n_subcarriers: usize, n_groups: usize, n_tx: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            n_subcarriers,
            n_groups,
            n_tx,
            bc: vec![zero; n_subcarriers * n_tx],
            groups: vec![zero; n_groups * n_subcarriers * n_tx],
        }
    }

    pub fn for_dims(dims: &SystemDims) -> Self {
        Self::zeros(dims.n_subcarriers, dims.n_groups, dims.n_tx_antennas)
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn bc(&self, n: usize) -> &[Complex64] {
        &self.bc[n * self.n_tx..(n + 1) * self.n_tx]
    }

    pub fn bc_mut(&mut self, n: usize) -> &mut [Complex64] {
        &mut self.bc[n * self.n_tx..(n + 1) * self.n_tx]
    }

    pub fn group(&self, m: usize, n: usize) -> &[Complex64] {
        let start = (m * self.n_subcarriers + n) * self.n_tx;
        &self.groups[start..start + self.n_tx]
    }

    pub fn group_mut(&mut self, m: usize, n: usize) -> &mut [Complex64] {
        let start = (m * self.n_subcarriers + n) * self.n_tx;
        &mut self.groups[start..start + self.n_tx]
    }

    /// True when every broadcast precoder is exactly zero (classic mode).
    pub fn is_non_rs(&self) -> bool {
        self.bc.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn subcarrier_power(&self, n: usize) -> f64 {
        let bc: f64 = self.bc(n).iter().map(|z| z.norm_sqr()).sum();
        let grp: f64 = (0..self.n_groups)
            .map(|m| self.group(m, n).iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        bc + grp
    }

    /// Multiplies every precoder by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for z in self.bc.iter_mut().chain(self.groups.iter_mut()) {
            *z *= factor;
        }
    }

    pub fn clear_broadcast(&mut self) {
        self.bc.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
    }

    fn issues(&self, dims: &SystemDims) -> Vec<ValidationIssue> {
        if self.n_subcarriers != dims.n_subcarriers || self.n_groups != dims.n_groups || self.n_tx != dims.n_tx_antennas {
            vec![ValidationIssue::PrecoderShape]
        } else {
            Vec::new()
        }
    }
}

/// `Σ_n (‖p_bc[n]‖² + Σ_m ‖p[m][n]‖²)`.
pub fn realized_total_power(pset: &PrecoderSet) -> f64 {
    (0..pset.n_subcarriers).map(|n| pset.subcarrier_power(n)).sum()
}

/// Shares `c[m][n]` of the broadcast stream credited to each group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommonRateSplit {
    n_groups: usize,
    n_subcarriers: usize,
    c: Vec<f64>,
}

impl CommonRateSplit {
    pub fn zeros(n_groups: usize, n_subcarriers: usize) -> Self {
        Self {
            n_groups,
            n_subcarriers,
            c: vec![0.0; n_groups * n_subcarriers],
        }
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.c[m * self.n_subcarriers + n]
    }

    pub fn set(&mut self, m: usize, n: usize, value: f64) {
        self.c[m * self.n_subcarriers + n] = value;
    }

    pub fn subcarrier_total(&self, n: usize) -> f64 {
        (0..self.n_groups).map(|m| self.get(m, n)).sum()
    }

    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn is_nonnegative(&self) -> bool {
        self.c.iter().all(|&c| c >= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIters,
    SolverFailure,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIters => "max_iters",
            RunStatus::SolverFailure => "solver_failure",
        }
    }
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RunStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "converged" => Ok(RunStatus::Converged),
            "max_iters" => Ok(RunStatus::MaxIters),
            "solver_failure" => Ok(RunStatus::SolverFailure),
            other => Err(Error::Parse(format!("unknown status {other:?}"))),
        }
    }
}

/// Rates (bits/s/Hz) evaluated from a set of precoders.
///
/// Per-user arrays are indexed `[k * N + n]`, per-group arrays `[m * N + n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub n_subcarriers: usize,
    pub user_rate: Vec<f64>,
    pub bc_user_rate: Vec<f64>,
    /// `min_k bc_user_rate` per subcarrier.
    pub bc_rate: Vec<f64>,
    pub group_rate: Vec<f64>,
    pub subcarrier_mmf: Vec<f64>,
    pub sum_mmf: f64,
    pub r_tot: f64,
    pub iterations: usize,
    pub status: RunStatus,
    /// Set when some subcarrier's common-rate split exceeds its broadcast rate.
    pub common_rate_infeasible: bool,
}

impl RateReport {
    pub fn user(&self, k: usize, n: usize) -> f64 {
        self.user_rate[k * self.n_subcarriers + n]
    }

    pub fn bc_user(&self, k: usize, n: usize) -> f64 {
        self.bc_user_rate[k * self.n_subcarriers + n]
    }

    pub fn group(&self, m: usize, n: usize) -> f64 {
        self.group_rate[m * self.n_subcarriers + n]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ValidationIssue {
    ZeroCount(&'static str),
    UnequalGrouping { users: usize, groups: usize },
    GroupMapLength { expected: usize, got: usize },
    GroupOutOfRange { user: usize, group: usize },
    GroupSize { group: usize, size: usize, expected: usize },
    ChannelShape { expected: (usize, usize, usize), got: (usize, usize, usize) },
    NonFiniteChannel { count: usize },
    NonPositiveNoise(f64),
    NonPositivePower(f64),
    PrecoderShape,
    PowerExceeded { used: f64, budget: f64 },
}

impl fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValidationIssue::ZeroCount(name) => write!(f, "{name} must be at least 1"),
            ValidationIssue::UnequalGrouping { users, groups } => {
                write!(f, "K mod M ≠ 0 (K={users}, M={groups})")
            }
            ValidationIssue::GroupMapLength { expected, got } => {
                write!(f, "group map has {got} entries, expected {expected}")
            }
            ValidationIssue::GroupOutOfRange { user, group } => {
                write!(f, "user {user} assigned to nonexistent group {group}")
            }
            ValidationIssue::GroupSize { group, size, expected } => {
                write!(f, "group {group} has {size} users, expected {expected}")
            }
            ValidationIssue::ChannelShape { expected, got } => {
                write!(f, "channel shape {got:?} does not match dims {expected:?}")
            }
            ValidationIssue::NonFiniteChannel { count } => {
                write!(f, "non-finite channel ({count} entries)")
            }
            ValidationIssue::NonPositiveNoise(v) => write!(f, "noise variance must be positive, got {v}"),
            ValidationIssue::NonPositivePower(p) => write!(f, "total power must be positive, got {p}"),
            ValidationIssue::PrecoderShape => write!(f, "precoder shape does not match dims"),
            ValidationIssue::PowerExceeded { used, budget } => {
                write!(f, "precoders use {used} of a {budget} power budget")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationErrors(pub Vec<ValidationIssue>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

/// Checks every structural invariant of an instance and lists all violations.
pub fn validate(dims: &SystemDims, ch: &ChannelSet, budget: &PowerBudget) -> std::result::Result<(), ValidationErrors> {
    let mut issues = dims.issues();
    issues.extend(ch.issues(dims));
    if !(budget.total_power > 0.0 && budget.total_power.is_finite()) {
        issues.push(ValidationIssue::NonPositivePower(budget.total_power));
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(ValidationErrors(issues))
    }
}

/// Like [`validate`], additionally checking precoder shape and the power budget
/// (with a relative slack of `1e-6`).
pub fn validate_precoders(
    dims: &SystemDims,
    pset: &PrecoderSet,
    budget: &PowerBudget,
) -> std::result::Result<(), ValidationErrors> {
    let mut issues = pset.issues(dims);
    let used = realized_total_power(pset);
    if used > budget.total_power * (1.0 + 1e-6) {
        issues.push(ValidationIssue::PowerExceeded {
            used,
            budget: budget.total_power,
        });
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(ValidationErrors(issues))
    }
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------

pub const CHANNEL_CSV_HEADER: &str = "user,subcarrier,antenna,re,im";

/// Sibling record of a channel CSV dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMeta {
    pub dims: SystemDims,
    pub noise_var: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Writes one row per complex scalar. Floats use the shortest representation
/// that parses back to the same bits.
pub fn write_channel_csv<W: Write>(ch: &ChannelSet, mut w: W) -> Result<()> {
    writeln!(w, "{CHANNEL_CSV_HEADER}")?;
    for k in 0..ch.n_users {
        for n in 0..ch.n_subcarriers {
            for (a, z) in ch.vector(k, n).iter().enumerate() {
                writeln!(w, "{k},{n},{a},{:?},{:?}", z.re, z.im)?;
            }
        }
    }
    Ok(())
}

pub fn read_channel_csv<R: BufRead>(meta: &ChannelMeta, r: R) -> Result<ChannelSet> {
    let dims = &meta.dims;
    let mut ch = ChannelSet::zeros(dims.n_users, dims.n_subcarriers, dims.n_tx_antennas, meta.noise_var);
    let mut seen = vec![false; ch.h.len()];
    let mut lines = r.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    if header.trim() != CHANNEL_CSV_HEADER {
        return Err(Error::Parse(format!("channel dump must start with {CHANNEL_CSV_HEADER:?}")));
    }
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("channel dump line {}: {what}", lineno + 2));
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|_| bad("bad index"));
        let (k, n, a) = (idx(fields[0])?, idx(fields[1])?, idx(fields[2])?);
        if k >= dims.n_users || n >= dims.n_subcarriers || a >= dims.n_tx_antennas {
            return Err(bad("index out of range"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad("bad number"));
        let pos = (k * dims.n_subcarriers + n) * dims.n_tx_antennas + a;
        ch.h[pos] = Complex64::new(num(fields[3])?, num(fields[4])?);
        seen[pos] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::Parse(format!("channel dump is missing entry #{missing}")));
    }
    Ok(ch)
}

/// A complete problem instance with optional precoders, persisted as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub dims: SystemDims,
    pub noise_var: f64,
    /// Interleaved `(re, im)` in `(user, subcarrier, antenna)` order.
    pub channels: Vec<f64>,
    pub budget: PowerBudget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precoders: Option<PrecoderRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecoderRecord {
    /// Interleaved `(re, im)`, `[n][antenna]`.
    pub p_bc: Vec<f64>,
    /// Interleaved `(re, im)`, `[m][n][antenna]`.
    pub p: Vec<f64>,
}

fn interleave(v: &[Complex64]) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn deinterleave(v: &[f64], expected: usize, what: &str) -> Result<Vec<Complex64>> {
    if v.len() != 2 * expected {
        return Err(Error::Parse(format!(
            "{what}: expected {} reals, got {}",
            2 * expected,
            v.len()
        )));
    }
    Ok(v.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

impl Instance {
    pub fn new(dims: &SystemDims, ch: &ChannelSet, budget: &PowerBudget, pset: Option<&PrecoderSet>) -> Self {
        Self {
            dims: dims.clone(),
            noise_var: ch.noise_var,
            channels: interleave(&ch.h),
            budget: *budget,
            precoders: pset.map(|p| PrecoderRecord {
                p_bc: interleave(&p.bc),
                p: interleave(&p.groups),
            }),
        }
    }

    pub fn channel_set(&self) -> Result<ChannelSet> {
        let d = &self.dims;
        let h = deinterleave(&self.channels, d.n_users * d.n_subcarriers * d.n_tx_antennas, "channels")?;
        Ok(ChannelSet {
            n_users: d.n_users,
            n_subcarriers: d.n_subcarriers,
            n_tx: d.n_tx_antennas,
            h,
            noise_var: self.noise_var,
        })
    }

    pub fn precoder_set(&self) -> Result<Option<PrecoderSet>> {
        let d = &self.dims;
        self.precoders
            .as_ref()
            .map(|rec| {
                Ok(PrecoderSet {
                    n_subcarriers: d.n_subcarriers,
                    n_groups: d.n_groups,
                    n_tx: d.n_tx_antennas,
                    bc: deinterleave(&rec.p_bc, d.n_subcarriers * d.n_tx_antennas, "p_bc")?,
                    groups: deinterleave(&rec.p, d.n_groups * d.n_subcarriers * d.n_tx_antennas, "p")?,
                })
            })
            .transpose()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
