use std::collections::BTreeMap;
use std::fmt;

use super::config::Algo;
use super::results::ResultRow;
use crate::dof::empirical_dof_high_snr;

#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub algo: Algo,
    pub snr_db: f64,
    /// Rows with a finite rate.
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub per_subcarrier_mean: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoDof {
    pub algo: Algo,
    pub window_db: f64,
    /// Per-subcarrier slope, or why it could not be fitted.
    pub slope: Result<f64, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    /// Sorted by algorithm name, then SNR.
    pub cells: Vec<CellStats>,
    pub dof: Vec<AlgoDof>,
    /// `(snr_db, mean rs − mean tdm)` where both are present.
    pub rs_tdm_gap: Vec<(f64, f64)>,
    /// Mean over SNR points of `(max_n − min_n) / mean_n` of the
    /// per-subcarrier mean rates.
    pub subcarrier_imbalance: Vec<(Algo, f64)>,
}

impl Summary {
    pub fn cell(&self, algo: Algo, snr_db: f64) -> Option<&CellStats> {
        self.cells.iter().find(|c| c.algo == algo && c.snr_db == snr_db)
    }

    pub fn mean(&self, algo: Algo, snr_db: f64) -> Option<f64> {
        self.cell(algo, snr_db).map(|c| c.mean)
    }

    pub fn dof(&self, algo: Algo) -> Option<&Result<f64, String>> {
        self.dof.iter().find(|d| d.algo == algo).map(|d| &d.slope)
    }

    pub fn curve(&self, algo: Algo) -> Vec<(f64, f64)> {
        self.cells.iter().filter(|c| c.algo == algo && c.n > 0).map(|c| (c.snr_db, c.mean)).collect()
    }
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Per-`(algo, snr)` means and standard errors, per-algorithm high-SNR DoF
/// over the top `window_db` of the sweep, the RS−TDM gap, and the
/// subcarrier imbalance.
pub fn summarize(rows: &[ResultRow], window_db: f64) -> Summary {
    let mut groups: BTreeMap<(&str, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.algo.as_str(), r.snr_db.to_bits())).or_default().push(r);
    }
    let mut cells: Vec<CellStats> = groups
        .into_values()
        .map(|rs| {
            let ok: Vec<&ResultRow> = rs.iter().copied().filter(|r| r.sum_mmf_rate.is_finite()).collect();
            let vals: Vec<f64> = ok.iter().map(|r| r.sum_mmf_rate).collect();
            let (mean, stderr) = mean_stderr(&vals);
            let n_sc = ok.iter().map(|r| r.per_subcarrier_rates.len()).max().unwrap_or(0);
            let per_subcarrier_mean = (0..n_sc)
                .map(|i| mean_stderr(&ok.iter().filter_map(|r| r.per_subcarrier_rates.get(i).copied()).collect::<Vec<_>>()).0)
                .collect();
            CellStats {
                algo: rs[0].algo,
                snr_db: rs[0].snr_db,
                n: ok.len(),
                mean,
                stderr,
                per_subcarrier_mean,
            }
        })
        .collect();
    cells.sort_by(|a, b| a.algo.as_str().cmp(b.algo.as_str()).then(a.snr_db.total_cmp(&b.snr_db)));

    let mut algos: Vec<Algo> = cells.iter().map(|c| c.algo).collect();
    algos.dedup();
    let n_sc_of = |a: Algo| cells.iter().filter(|c| c.algo == a).map(|c| c.per_subcarrier_mean.len()).max().unwrap_or(1).max(1);
    let mut summary = Summary {
        cells: Vec::new(),
        dof: Vec::new(),
        rs_tdm_gap: Vec::new(),
        subcarrier_imbalance: Vec::new(),
    };
    for &a in &algos {
        let curve: Vec<(f64, f64)> = cells.iter().filter(|c| c.algo == a && c.n > 0).map(|c| (c.snr_db, c.mean)).collect();
        summary.dof.push(AlgoDof {
            algo: a,
            window_db,
            slope: empirical_dof_high_snr(&curve, n_sc_of(a), window_db).map_err(|e| e.to_string()),
        });
        let ratios: Vec<f64> = cells
            .iter()
            .filter(|c| c.algo == a && c.per_subcarrier_mean.len() > 1)
            .filter_map(|c| {
                let m = c.per_subcarrier_mean.iter().sum::<f64>() / c.per_subcarrier_mean.len() as f64;
                let hi = c.per_subcarrier_mean.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = c.per_subcarrier_mean.iter().copied().fold(f64::INFINITY, f64::min);
                (m > 1e-12).then(|| (hi - lo) / m)
            })
            .collect();
        if !ratios.is_empty() {
            summary.subcarrier_imbalance.push((a, ratios.iter().sum::<f64>() / ratios.len() as f64));
        }
    }
    for c in cells.iter().filter(|c| c.algo == Algo::Rs) {
        if let Some(t) = cells.iter().find(|t| t.algo == Algo::Tdm && t.snr_db == c.snr_db) {
            summary.rs_tdm_gap.push((c.snr_db, c.mean - t.mean));
        }
    }
    summary.cells = cells;
    summary
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<10} {:>7} {:>5} {:>10} {:>9}  per-subcarrier", "algo", "snr_db", "n", "mean", "stderr")?;
        for c in &self.cells {
            let per: Vec<String> = c.per_subcarrier_mean.iter().map(|x| format!("{x:.3}")).collect();
            writeln!(
                f,
                "{:<10} {:>7} {:>5} {:>10.4} {:>9.4}  {}",
                c.algo.as_str(),
                c.snr_db,
                c.n,
                c.mean,
                c.stderr,
                per.join(" ")
            )?;
        }
        writeln!(f)?;
        for d in &self.dof {
            match &d.slope {
                Ok(s) => writeln!(f, "empirical DoF {:<10} {s:.4} per subcarrier (top {} dB)", d.algo.as_str(), d.window_db)?,
                Err(e) => writeln!(f, "empirical DoF {:<10} n/a ({e})", d.algo.as_str())?,
            }
        }
        if !self.rs_tdm_gap.is_empty() {
            writeln!(f)?;
            for (snr, gap) in &self.rs_tdm_gap {
                writeln!(f, "rs - tdm at {snr:>5} dB: {gap:+.4}")?;
            }
        }
        if !self.subcarrier_imbalance.is_empty() {
            writeln!(f)?;
            for (a, r) in &self.subcarrier_imbalance {
                writeln!(f, "subcarrier imbalance {:<10} {:.2}%", a.as_str(), 100.0 * r)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RunStatus;

    fn row(algo: Algo, snr: f64, trial: usize, rate: f64) -> ResultRow {
        ResultRow {
            algo,
            snr_db: snr,
            trial,
            sum_mmf_rate: rate,
            per_subcarrier_rates: vec![rate / 2.0, rate / 2.0],
            iterations: 0,
            solve_time_ms: None,
            status: RunStatus::Converged,
            power_used: 1.0,
            channel_hash: String::new(),
            convention_tag: String::new(),
            diagnostics: None,
        }
    }

    #[test]
    fn single_row_cells() {
        let s = summarize(&[row(Algo::Rs, 0.0, 0, 2.5)], 10.0);
        let c = s.cell(Algo::Rs, 0.0).unwrap();
        assert_eq!((c.n, c.mean, c.stderr), (1, 2.5, 0.0));
        assert!(s.dof(Algo::Rs).unwrap().is_err());
    }

    #[test]
    fn stats_gap_and_slope() {
        let mut rows = Vec::new();
        for (i, snr) in [20.0, 25.0, 30.0].into_iter().enumerate() {
            rows.push(row(Algo::Rs, snr, 0, 4.0 + i as f64));
            rows.push(row(Algo::Rs, snr, 1, 6.0 + i as f64));
            rows.push(row(Algo::Tdm, snr, 0, 3.0));
        }
        let mut failed = row(Algo::Tdm, 30.0, 1, f64::NAN);
        failed.status = RunStatus::SolverFailure;
        rows.push(failed);
        let s = summarize(&rows, 10.0);
        let c = s.cell(Algo::Rs, 25.0).unwrap();
        assert_eq!(c.mean, 6.0);
        assert!((c.stderr - 1.0).abs() < 1e-12);
        assert_eq!(s.cell(Algo::Tdm, 30.0).unwrap().n, 1);
        assert_eq!(s.rs_tdm_gap, vec![(20.0, 2.0), (25.0, 3.0), (30.0, 4.0)]);
        let slope = *s.dof(Algo::Rs).unwrap().as_ref().unwrap();
        let per_log2p = 1.0 / (5.0 / 10.0 * std::f64::consts::LOG2_10);
        assert!((slope - per_log2p / 2.0).abs() < 1e-12);
        assert_eq!(*s.dof(Algo::Tdm).unwrap(), Ok(0.0));
        assert_eq!(s.subcarrier_imbalance[0], (Algo::Rs, 0.0));
        assert!(s.to_string().contains("rs - tdm"));
    }
}
