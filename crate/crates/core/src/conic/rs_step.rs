//! The precoder step of the rate-splitting WMMSE iteration: with equalizers
//! and weights fixed, every weighted MSE is a convex quadratic in the real
//! embedding of the precoders, so the step is a second-order-cone program.

use num_complex::Complex64;

use super::{ConicProblem, ConstraintBody, LinExpr, Provenance, Sense};
use crate::error::{Error, Result};
use crate::model::{ChannelSet, CommonRateSplit, PowerBudget, PrecoderSet, SystemDims};
use crate::rates::{AoState, WMSE_RATE_CONSTANT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RsSubproblemMode {
    /// Broadcast precoders and common-rate shares are free.
    RateSplitting,
    /// Broadcast precoders and common-rate shares are pinned to zero.
    NoRateSplitting,
}

/// Variable indices of the precoder step.
///
/// Order: for each subcarrier, the broadcast precoder then each group
/// precoder, every one stored as `(re[0..Nt], im[0..Nt])`; then `C[m][n]`,
/// `r[m][n]`, `x[n]` and finally `r_tot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RsLayout {
    pub n_subcarriers: usize,
    pub n_groups: usize,
    pub n_tx: usize,
}

impl RsLayout {
    pub fn new(dims: &SystemDims) -> Self {
        Self {
            n_subcarriers: dims.n_subcarriers,
            n_groups: dims.n_groups,
            n_tx: dims.n_tx_antennas,
        }
    }

    fn streams(&self) -> usize {
        self.n_groups + 1
    }

    fn n_precoder_vars(&self) -> usize {
        2 * self.n_subcarriers * self.streams() * self.n_tx
    }

    /// Stream 0 is the broadcast stream, stream `1 + m` is group `m`.
    pub fn precoder(&self, n: usize, stream: usize) -> (usize, usize) {
        let base = (n * self.streams() + stream) * 2 * self.n_tx;
        (base, base + self.n_tx)
    }

    pub fn common(&self, m: usize, n: usize) -> usize {
        self.n_precoder_vars() + m * self.n_subcarriers + n
    }

    pub fn private(&self, m: usize, n: usize) -> usize {
        self.n_precoder_vars() + (self.n_groups + m) * self.n_subcarriers + n
    }

    pub fn epigraph(&self, n: usize) -> usize {
        self.n_precoder_vars() + 2 * self.n_groups * self.n_subcarriers + n
    }

    pub fn r_tot(&self) -> usize {
        self.n_precoder_vars() + 2 * self.n_groups * self.n_subcarriers + self.n_subcarriers
    }

    /// `2·N·(M+1)·Nt + 2·N·M + N + 1`.
    pub fn n_vars(&self) -> usize {
        self.r_tot() + 1
    }

    pub fn precoders(&self, values: &[f64]) -> PrecoderSet {
        let mut p = PrecoderSet::zeros(self.n_subcarriers, self.n_groups, self.n_tx);
        for n in 0..self.n_subcarriers {
            for s in 0..self.streams() {
                let (re, im) = self.precoder(n, s);
                let target = if s == 0 { p.bc_mut(n) } else { p.group_mut(s - 1, n) };
                for (a, z) in target.iter_mut().enumerate() {
                    *z = Complex64::new(values[re + a], values[im + a]);
                }
            }
        }
        p
    }

    pub fn common_split(&self, values: &[f64]) -> CommonRateSplit {
        let mut c = CommonRateSplit::zeros(self.n_groups, self.n_subcarriers);
        for m in 0..self.n_groups {
            for n in 0..self.n_subcarriers {
                c.set(m, n, values[self.common(m, n)]);
            }
        }
        c
    }

    /// Variable vector holding `pset`, zero everywhere else.
    pub fn embed(&self, pset: &PrecoderSet) -> Vec<f64> {
        let mut x = vec![0.0; self.n_vars()];
        for n in 0..self.n_subcarriers {
            for s in 0..self.streams() {
                let (re, im) = self.precoder(n, s);
                let src = if s == 0 { pset.bc(n) } else { pset.group(s - 1, n) };
                for (a, z) in src.iter().enumerate() {
                    x[re + a] = z.re;
                    x[im + a] = z.im;
                }
            }
        }
        x
    }

    /// Real and imaginary parts of `factor·hᵀp_stream` as affine rows.
    pub fn received_rows(&self, h: &[Complex64], n: usize, stream: usize, factor: f64) -> [LinExpr; 2] {
        let (re, im) = self.precoder(n, stream);
        let mut real = LinExpr::default();
        let mut imag = LinExpr::default();
        for (a, hz) in h.iter().enumerate() {
            real.add_term(re + a, factor * hz.re).add_term(im + a, -factor * hz.im);
            imag.add_term(im + a, factor * hz.re).add_term(re + a, factor * hz.im);
        }
        [real, imag]
    }

    /// `Re{g·hᵀp_stream}` as an affine expression.
    fn real_gain(&self, h: &[Complex64], g: Complex64, n: usize, stream: usize) -> LinExpr {
        let (re, im) = self.precoder(n, stream);
        let mut e = LinExpr::default();
        for (a, hz) in h.iter().enumerate() {
            e.add_term(re + a, g.re * hz.re - g.im * hz.im);
            e.add_term(im + a, -g.re * hz.im - g.im * hz.re);
        }
        e
    }
}

#[derive(Debug, Clone)]
pub struct RsSubproblem {
    pub problem: ConicProblem,
    pub layout: RsLayout,
}

/// Builds the precoder step for fixed equalizers and weights in `ao`.
///
/// Maximizes `r_tot` subject to the per-subcarrier and sum epigraphs,
/// nonnegative common shares, one broadcast and one multicast decodability
/// constraint per `(k, n)` and a single total-power cone.
pub fn build_rs_subproblem(
    dims: &SystemDims,
    ch: &ChannelSet,
    ao: &AoState,
    budget: &PowerBudget,
    mode: RsSubproblemMode,
) -> Result<RsSubproblem> {
    if ch.n_users() != dims.n_users || ch.n_subcarriers() != dims.n_subcarriers || ch.n_tx() != dims.n_tx_antennas {
        return Err(Error::Dimension("channel set does not match dims".into()));
    }
    let per_user = dims.n_users * dims.n_subcarriers;
    if ao.g_bc.len() != per_user || ao.g.len() != per_user || ao.v_bc.len() != per_user || ao.v.len() != per_user {
        return Err(Error::Dimension("equalizer/weight state does not match dims".into()));
    }
    if dims.group_of.len() != dims.n_users {
        return Err(Error::Dimension("group map does not match user count".into()));
    }

    let lay = RsLayout::new(dims);
    let (n_sc, n_grp, nt) = (dims.n_subcarriers, dims.n_groups, dims.n_tx_antennas);
    let mut prob = ConicProblem::new(Sense::Maximize);
    for n in 0..n_sc {
        for s in 0..=n_grp {
            let name = if s == 0 { format!("p_bc[{n}]") } else { format!("p[{}][{n}]", s - 1) };
            for part in ["re", "im"] {
                for a in 0..nt {
                    prob.add_var(format!("{name}.{part}[{a}]"));
                }
            }
        }
    }
    for m in 0..n_grp {
        for n in 0..n_sc {
            prob.add_var(format!("C[{m}][{n}]"));
        }
    }
    for m in 0..n_grp {
        for n in 0..n_sc {
            prob.add_var(format!("r[{m}][{n}]"));
        }
    }
    for n in 0..n_sc {
        prob.add_var(format!("x[{n}]"));
    }
    prob.add_var("r_tot");
    debug_assert_eq!(prob.n_vars(), lay.n_vars());
    prob.objective = LinExpr::var(lay.r_tot());

    let rs = mode == RsSubproblemMode::RateSplitting;

    for n in 0..n_sc {
        for m in 0..n_grp {
            prob.push(
                Provenance::SubcarrierEpigraph,
                format!("x[{n}]<=C[{m}][{n}]+r[{m}][{n}]"),
                ConstraintBody::Geq(
                    LinExpr::var(lay.common(m, n))
                        .with_term(lay.private(m, n), 1.0)
                        .with_term(lay.epigraph(n), -1.0),
                ),
            );
        }
    }
    let mut sum = LinExpr::term(lay.r_tot(), -1.0);
    for n in 0..n_sc {
        sum.add_term(lay.epigraph(n), 1.0);
    }
    prob.push(Provenance::SumEpigraph, "sum_n x[n]>=r_tot", ConstraintBody::Geq(sum));

    if rs {
        for m in 0..n_grp {
            for n in 0..n_sc {
                prob.push(
                    Provenance::CommonRateNonneg,
                    format!("C[{m}][{n}]>=0"),
                    ConstraintBody::Geq(LinExpr::var(lay.common(m, n))),
                );
            }
        }
    }

    let noise = ch.noise_var;
    for k in 0..dims.n_users {
        let own = dims.group_of[k];
        for n in 0..n_sc {
            let h = ch.vector(k, n);
            let i = ao.index(k, n);

            if rs {
                let (g, v) = (ao.g_bc[i], ao.v_bc[i]);
                let mut bound = lay
                    .real_gain(h, g, n, 0)
                    .scaled(2.0 * v)
                    .plus(WMSE_RATE_CONSTANT + v.log2() - v * (g.norm_sqr() * noise + 1.0));
                for m in 0..n_grp {
                    bound.add_term(lay.common(m, n), -1.0);
                }
                let factor = v.sqrt() * g.norm();
                let label = format!("bc k={k} n={n}");
                if factor == 0.0 {
                    prob.push(Provenance::BroadcastRate, label, ConstraintBody::Geq(bound));
                } else {
                    let rows = (0..=n_grp).flat_map(|s| lay.received_rows(h, n, s, factor)).collect();
                    prob.push(Provenance::BroadcastRate, label, ConstraintBody::QuadLe { rows, bound });
                }
            }

            let (g, v) = (ao.g[i], ao.v[i]);
            let bound = lay
                .real_gain(h, g, n, 1 + own)
                .scaled(2.0 * v)
                .plus(WMSE_RATE_CONSTANT + v.log2() - v * (g.norm_sqr() * noise + 1.0))
                .with_term(lay.private(own, n), -1.0);
            let factor = v.sqrt() * g.norm();
            let label = format!("mc k={k} n={n}");
            if factor == 0.0 {
                prob.push(Provenance::MulticastRate, label, ConstraintBody::Geq(bound));
            } else {
                let rows = (1..=n_grp).flat_map(|s| lay.received_rows(h, n, s, factor)).collect();
                prob.push(Provenance::MulticastRate, label, ConstraintBody::QuadLe { rows, bound });
            }
        }
    }

    let power_rows: Vec<LinExpr> = (0..lay.n_precoder_vars())
        .filter(|&v| rs || !is_broadcast_var(&lay, v))
        .map(LinExpr::var)
        .collect();
    prob.push(
        Provenance::TotalPower,
        "sum ||p||^2 <= P",
        ConstraintBody::Soc {
            bound: LinExpr::constant(budget.total_power.sqrt()),
            rows: power_rows,
        },
    );

    if !rs {
        for n in 0..n_sc {
            let (re, _) = lay.precoder(n, 0);
            for v in re..re + 2 * nt {
                prob.push(Provenance::NoRsPin, format!("{}=0", prob.var_names[v]), ConstraintBody::Eq(LinExpr::var(v)));
            }
            for m in 0..n_grp {
                prob.push(
                    Provenance::NoRsPin,
                    format!("C[{m}][{n}]=0"),
                    ConstraintBody::Eq(LinExpr::var(lay.common(m, n))),
                );
            }
        }
    }

    Ok(RsSubproblem { problem: prob, layout: lay })
}

fn is_broadcast_var(lay: &RsLayout, v: usize) -> bool {
    (v / (2 * lay.n_tx)).is_multiple_of(lay.streams())
}
