//! Conic subproblems: a small problem representation with tagged
//! constraints, the builders for the rate-splitting precoder step and the
//! SDR feasibility test, and an interior-point backend.

use std::fmt::{self, Write as _};
use std::time::Duration;

mod rs_step;
mod sdr;
mod solve;

pub use rs_step::{build_rs_subproblem, RsLayout, RsSubproblem, RsSubproblemMode};
pub use sdr::{build_sdr_feasibility, build_sdr_feasibility_for_groups, SdrLayout, SdrSubproblem, SDR_SLACK_TOL};
pub use solve::{solve, solve_with, SolverOptions};

/// Affine function `Σ coef·x[var] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: usize) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: usize, coef: f64) -> Self {
        Self {
            terms: vec![(v, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: usize, coef: f64) -> &mut Self {
        if coef != 0.0 {
            self.terms.push((v, coef));
        }
        self
    }

    pub fn with_term(mut self, v: usize, coef: f64) -> Self {
        self.add_term(v, coef);
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.terms.iter_mut().for_each(|t| t.1 *= s);
        self.constant *= s;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.1 == 0.0)
    }

    fn magnitude(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.1.abs())
            .fold(self.constant.abs(), f64::max)
    }
}

/// What a constraint encodes, so a dumped problem can be audited against the
/// model it came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Provenance {
    /// `x_n ≤ C_{m,n} + r_{m,n}`: per-subcarrier min over groups.
    SubcarrierEpigraph,
    /// `Σ_n x_n ≥ r_tot`.
    SumEpigraph,
    /// `C_{m,n} ≥ 0`.
    CommonRateNonneg,
    /// `G − W_MSE_bc ≥ Σ_m C_{m,n}`: broadcast stream decodable by user k.
    BroadcastRate,
    /// `G − W_MSE ≥ r_{m,n}`: group stream decodable by user k.
    MulticastRate,
    /// Total transmit power over all subcarriers.
    TotalPower,
    /// Variables forced to zero when rate splitting is disabled.
    NoRsPin,
    /// Lifted SINR target of one user.
    SdrSinr,
    /// Lifted power cap of one subcarrier.
    SdrPowerCap,
    /// Lifted transmit covariance is positive semidefinite.
    SdrPsd,
    /// Anything built by hand (tests, toys).
    User,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::SubcarrierEpigraph => "rs.subcarrier-epigraph",
            Provenance::SumEpigraph => "rs.sum-epigraph",
            Provenance::CommonRateNonneg => "rs.common-rate-nonneg",
            Provenance::BroadcastRate => "rs.broadcast-rate",
            Provenance::MulticastRate => "rs.multicast-rate",
            Provenance::TotalPower => "rs.total-power",
            Provenance::NoRsPin => "rs.no-rs-pin",
            Provenance::SdrSinr => "sdr.sinr",
            Provenance::SdrPowerCap => "sdr.power-cap",
            Provenance::SdrPsd => "sdr.psd",
            Provenance::User => "user",
        }
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintBody {
    /// `expr = 0`
    Eq(LinExpr),
    /// `expr ≥ 0`
    Geq(LinExpr),
    /// `‖rows‖₂ ≤ bound`
    Soc { bound: LinExpr, rows: Vec<LinExpr> },
    /// `‖rows‖₂² ≤ bound`, emitted as a rotated cone.
    QuadLe { rows: Vec<LinExpr>, bound: LinExpr },
    /// Symmetric `dim × dim` matrix ⪰ 0, given by its upper triangle in
    /// column-major order: `(0,0), (0,1), (1,1), (0,2), ...`.
    Psd { dim: usize, upper: Vec<LinExpr> },
}

impl ConstraintBody {
    /// Amount by which `x` violates the constraint, relative to the
    /// magnitude of its data (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            ConstraintBody::Eq(e) => e.eval(x).abs() / (1.0 + e.magnitude()),
            ConstraintBody::Geq(e) => (-e.eval(x)).max(0.0) / (1.0 + e.magnitude()),
            ConstraintBody::Soc { bound, rows } => {
                let norm = rows.iter().map(|r| r.eval(x).powi(2)).sum::<f64>().sqrt();
                let scale = 1.0 + bound.magnitude() + rows.iter().map(LinExpr::magnitude).fold(0.0, f64::max);
                (norm - bound.eval(x)).max(0.0) / scale
            }
            ConstraintBody::QuadLe { rows, bound } => {
                let sq = rows.iter().map(|r| r.eval(x).powi(2)).sum::<f64>();
                let scale = 1.0 + bound.magnitude() + rows.iter().map(LinExpr::magnitude).fold(0.0, f64::max).powi(2);
                (sq - bound.eval(x)).max(0.0) / scale
            }
            ConstraintBody::Psd { dim, upper } => {
                let mut m = nalgebra::DMatrix::<f64>::zeros(*dim, *dim);
                let mut idx = 0;
                for j in 0..*dim {
                    for i in 0..=j {
                        let v = upper[idx].eval(x);
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                        idx += 1;
                    }
                }
                let scale = 1.0 + upper.iter().map(LinExpr::magnitude).fold(0.0, f64::max);
                let min_eig = m.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min);
                (-min_eig).max(0.0) / scale
            }
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            ConstraintBody::Eq(_) => "eq",
            ConstraintBody::Geq(_) => "geq",
            ConstraintBody::Soc { .. } => "soc",
            ConstraintBody::QuadLe { .. } => "quad",
            ConstraintBody::Psd { .. } => "psd",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub tag: Provenance,
    pub label: String,
    pub body: ConstraintBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// A linear objective over named real variables with conic constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProblem {
    pub var_names: Vec<String>,
    pub sense: Sense,
    pub objective: LinExpr,
    pub constraints: Vec<Constraint>,
}

impl ConicProblem {
    pub fn new(sense: Sense) -> Self {
        Self {
            var_names: Vec::new(),
            sense,
            objective: LinExpr::default(),
            constraints: Vec::new(),
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>) -> usize {
        self.var_names.push(name.into());
        self.var_names.len() - 1
    }

    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|n| n == name)
    }

    pub fn push(&mut self, tag: Provenance, label: impl Into<String>, body: ConstraintBody) {
        self.constraints.push(Constraint {
            tag,
            label: label.into(),
            body,
        });
    }

    pub fn count_tagged(&self, tag: Provenance) -> usize {
        self.constraints.iter().filter(|c| c.tag == tag).count()
    }

    /// Largest relative violation over all constraints.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.body.violation(x))
            .fold(0.0, f64::max)
    }

    /// Text dump, one constraint per line:
    ///
    /// ```text
    /// vars <count>
    /// var <index> <name>
    /// objective max|min <expr>
    /// <tag> <label> <kind> <payload>
    /// ```
    ///
    /// where an expression prints as `<constant> +<coef>*x<index> ...` and
    /// multi-row payloads are `[expr | expr | ...]`. For `soc` and `quad`
    /// the bound comes first.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "vars {}", self.var_names.len());
        for (i, n) in self.var_names.iter().enumerate() {
            let _ = writeln!(out, "var {i} {n}");
        }
        let sense = match self.sense {
            Sense::Minimize => "min",
            Sense::Maximize => "max",
        };
        let _ = writeln!(out, "objective {sense} {}", self.objective);
        for c in &self.constraints {
            let payload = match &c.body {
                ConstraintBody::Eq(e) | ConstraintBody::Geq(e) => e.to_string(),
                ConstraintBody::Soc { bound, rows } | ConstraintBody::QuadLe { rows, bound } => {
                    format!("{bound} ; {}", join_rows(rows))
                }
                ConstraintBody::Psd { dim, upper } => format!("dim={dim} ; {}", join_rows(upper)),
            };
            let _ = writeln!(out, "{} {} {} {}", c.tag, c.label, c.body.kind(), payload);
        }
        out
    }
}

fn join_rows(rows: &[LinExpr]) -> String {
    let parts: Vec<String> = rows.iter().map(LinExpr::to_string).collect();
    format!("[{}]", parts.join(" | "))
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.constant)?;
        for &(v, c) in &self.terms {
            write!(f, " {c:+e}*x{v}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: SolveStatus,
    /// Variable values, indexed like [`ConicProblem::var_names`].
    pub values: Vec<f64>,
    /// Objective in the problem's own sense (a maximum for `Maximize`).
    pub objective_value: f64,
    pub solve_time: Duration,
    pub iterations: u32,
    pub max_violation: f64,
    /// Termination status reported by the backend, for diagnostics.
    pub backend_status: String,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn value(&self, problem: &ConicProblem, name: &str) -> Option<f64> {
        problem.var_index(name).map(|i| self.values[i])
    }
}
