//! Semidefinite relaxation of per-subcarrier max-min-fair multicast
//! beamforming at a fixed SINR target.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{ConicProblem, ConstraintBody, LinExpr, Provenance, Sense};
use crate::model::{ChannelSet, SystemDims};

/// Variable indices of the lifted covariances. Each Hermitian `X_m` uses
/// `Nt²` reals: the diagonal, then `(re, im)` of each strictly upper entry.
/// The variables hold `X_m / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdrLayout {
    pub n_groups: usize,
    pub n_tx: usize,
    pub scale: f64,
}

impl SdrLayout {
    fn per_group(&self) -> usize {
        self.n_tx * self.n_tx
    }

    fn diag(&self, m: usize, i: usize) -> usize {
        m * self.per_group() + i
    }

    fn off(&self, m: usize, i: usize, j: usize) -> (usize, usize) {
        debug_assert!(i < j);
        // Position of (i, j) among strictly upper entries, row-major.
        let nt = self.n_tx;
        let pos = i * nt - i * (i + 1) / 2 + (j - i - 1);
        let base = m * self.per_group() + nt + 2 * pos;
        (base, base + 1)
    }

    pub fn n_vars(&self) -> usize {
        self.n_groups * self.per_group()
    }

    /// `(re, im)` of entry `X_m[i][j]` as affine expressions.
    fn entry(&self, m: usize, i: usize, j: usize) -> (LinExpr, LinExpr) {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Equal => (LinExpr::var(self.diag(m, i)), LinExpr::default()),
            Less => {
                let (re, im) = self.off(m, i, j);
                (LinExpr::var(re), LinExpr::var(im))
            }
            Greater => {
                let (re, im) = self.off(m, j, i);
                (LinExpr::var(re), LinExpr::term(im, -1.0))
            }
        }
    }

    /// `hᵀ X_m h* / scale` (the received power `|hᵀp|²` when `X_m = p pᴴ`
    /// and `scale = 1`).
    pub fn received_power(&self, h: &[Complex64], m: usize) -> LinExpr {
        let mut e = LinExpr::default();
        for i in 0..self.n_tx {
            e.add_term(self.diag(m, i), h[i].norm_sqr());
            for j in i + 1..self.n_tx {
                let w = h[i] * h[j].conj();
                let (re, im) = self.off(m, i, j);
                e.add_term(re, 2.0 * w.re).add_term(im, -2.0 * w.im);
            }
        }
        e
    }

    fn trace(&self, m: usize) -> LinExpr {
        let mut e = LinExpr::default();
        for i in 0..self.n_tx {
            e.add_term(self.diag(m, i), 1.0);
        }
        e
    }

    /// Upper triangle (column-major) of the real embedding
    /// `[[Re X, −Im X], [Im X, Re X]]`.
    fn embedding_upper(&self, m: usize) -> Vec<LinExpr> {
        let nt = self.n_tx;
        let mut out = Vec::new();
        for col in 0..2 * nt {
            for row in 0..=col {
                let (i, j) = (row % nt, col % nt);
                let (re, im) = self.entry(m, i, j);
                let e = match (row < nt, col < nt) {
                    (true, true) | (false, false) => re,
                    (true, false) => im.scaled(-1.0),
                    (false, true) => im,
                };
                out.push(e);
            }
        }
        out
    }

    pub fn covariances(&self, values: &[f64]) -> Vec<DMatrix<Complex64>> {
        (0..self.n_groups)
            .map(|m| {
                DMatrix::from_fn(self.n_tx, self.n_tx, |i, j| {
                    let (re, im) = self.entry(m, i, j);
                    Complex64::new(re.eval(values), im.eval(values)) * self.scale
                })
            })
            .collect()
    }
}

/// Feasibility margin below which a target counts as feasible.
pub const SDR_SLACK_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct SdrSubproblem {
    pub problem: ConicProblem,
    pub layout: SdrLayout,
    /// Index of the slack variable; the target is feasible iff its optimum
    /// is at most [`SDR_SLACK_TOL`].
    pub slack: usize,
}

impl SdrSubproblem {
    pub fn is_feasible(&self, values: &[f64]) -> bool {
        values[self.slack] <= SDR_SLACK_TOL
    }
}

/// Lifted feasibility test on subcarrier `n` for SINR target `gamma` with
/// every group of `dims` served.
pub fn build_sdr_feasibility(dims: &SystemDims, ch: &ChannelSet, n: usize, gamma: f64, power_cap: f64) -> SdrSubproblem {
    build_sdr_feasibility_for_groups(ch, n, &dims.groups(), gamma, power_cap)
}

/// Lifted feasibility test for an explicit group structure (user indices
/// into `ch`), in phase-one form: a free slack `s` is added to every SINR
/// row and minimized, so the problem is always solvable and the target is
/// feasible iff `s* ≤ 0`.
///
/// Covariances are normalized by `power_cap` and each SINR row by the user's
/// channel gain and by `max(1, γ)`.
pub fn build_sdr_feasibility_for_groups(
    ch: &ChannelSet,
    n: usize,
    groups: &[Vec<usize>],
    gamma: f64,
    power_cap: f64,
) -> SdrSubproblem {
    let lay = SdrLayout {
        n_groups: groups.len(),
        n_tx: ch.n_tx(),
        scale: power_cap,
    };
    let nt = lay.n_tx;
    let mut prob = ConicProblem::new(Sense::Minimize);
    for m in 0..lay.n_groups {
        for i in 0..nt {
            prob.add_var(format!("X[{m}].d[{i}]"));
        }
        for i in 0..nt {
            for j in i + 1..nt {
                prob.add_var(format!("X[{m}].re[{i},{j}]"));
                prob.add_var(format!("X[{m}].im[{i},{j}]"));
            }
        }
    }
    debug_assert_eq!(prob.n_vars(), lay.n_vars());
    let slack = prob.add_var("slack");
    prob.objective = LinExpr::var(slack);

    let row_scale = 1.0 / gamma.max(1.0);
    for (m, members) in groups.iter().enumerate() {
        for &k in members {
            let h = ch.vector(k, n);
            let mut e = lay.received_power(h, m);
            for j in (0..lay.n_groups).filter(|&j| j != m) {
                for (v, c) in lay.received_power(h, j).terms {
                    e.add_term(v, -gamma * c);
                }
            }
            let gain: f64 = h.iter().map(|z| z.norm_sqr()).sum::<f64>().max(f64::MIN_POSITIVE);
            let e = e
                .plus(-gamma * ch.noise_var / power_cap)
                .scaled(row_scale / gain)
                .with_term(slack, 1.0);
            prob.push(Provenance::SdrSinr, format!("sinr k={k} group={m}"), ConstraintBody::Geq(e));
        }
    }
    let mut total_trace = LinExpr::constant(1.0);
    for m in 0..lay.n_groups {
        for (v, c) in lay.trace(m).terms {
            total_trace.add_term(v, -c);
        }
    }
    prob.push(Provenance::SdrPowerCap, "sum tr(X) <= cap", ConstraintBody::Geq(total_trace));
    for m in 0..lay.n_groups {
        prob.push(
            Provenance::SdrPsd,
            format!("X[{m}] psd"),
            ConstraintBody::Psd {
                dim: 2 * nt,
                upper: lay.embedding_upper(m),
            },
        );
    }
    SdrSubproblem {
        problem: prob,
        layout: lay,
        slack,
    }
}
