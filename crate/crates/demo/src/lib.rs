//! WebAssembly front end for the browser demo in `www/`.
//!
//! Every export takes plain numbers or a dims label and returns JSON. The
//! native functions behind them are public so they can be tested without a
//! browser.

use num_complex::Complex64;
use rsmcast::channel::generate_channels;
use rsmcast::dof::{dof_classic, dof_rs};
use rsmcast::model::{PowerBudget, SystemDims};
use rsmcast::rs_wmmse::{optimize_both, RsConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// Upper bound on users and antennas so a click cannot freeze the tab.
const MAX_SIZE: usize = 12;

/// Lighter than the experiment defaults; one start is enough interactively.
fn demo_config(seed: u64) -> RsConfig {
    RsConfig {
        max_outer: 10,
        restarts: 1,
        seed,
        ..RsConfig::default()
    }
}

fn parse_dims(label: &str) -> Result<SystemDims, String> {
    let dims = SystemDims::from_label(label).map_err(|e| e.to_string())?;
    if dims.n_users > MAX_SIZE || dims.n_tx_antennas > MAX_SIZE || dims.n_subcarriers > 4 {
        return Err(format!("{label} is too large for the demo (at most {MAX_SIZE} users/antennas, 4 subcarriers)"));
    }
    Ok(dims)
}

#[derive(Debug, Serialize)]
pub struct RateCurve {
    pub dims: String,
    pub snr_db: Vec<f64>,
    pub rs: Vec<f64>,
    pub no_rs: Vec<f64>,
    /// Analytic DoF per subcarrier of classic beamforming and of RS with all
    /// but one group degraded.
    pub dof_classic: u8,
    pub dof_rs: f64,
}

/// Sum max-min rate with and without rate splitting on one channel draw.
pub fn rate_curve(label: &str, seed: u64, snr_lo: f64, snr_hi: f64, step: f64) -> Result<RateCurve, String> {
    let dims = parse_dims(label)?;
    if step.is_nan() || step <= 0.0 || snr_hi.is_nan() || snr_lo.is_nan() || snr_hi < snr_lo || (snr_hi - snr_lo) / step > 20.0 {
        return Err("need step > 0, hi >= lo and at most 20 points".into());
    }
    let ch = generate_channels(&dims, seed);
    let cfg = demo_config(seed);
    let mut curve = RateCurve {
        dims: dims.label(),
        snr_db: Vec::new(),
        rs: Vec::new(),
        no_rs: Vec::new(),
        dof_classic: dof_classic(&dims),
        dof_rs: dof_rs(dims.n_groups - 1),
    };
    let mut snr = snr_lo;
    while snr <= snr_hi + 1e-9 {
        let (rs, no_rs) = optimize_both(&dims, &ch, &PowerBudget::from_snr_db(snr, 1.0), &cfg).map_err(|e| e.to_string())?;
        curve.snr_db.push(snr);
        curve.rs.push(rs.report.sum_mmf);
        curve.no_rs.push(no_rs.report.sum_mmf);
        snr += step;
    }
    Ok(curve)
}

#[derive(Debug, Serialize, PartialEq)]
pub struct DofRow {
    pub n_tx: usize,
    pub classic: u8,
    pub rs: f64,
}

/// Analytic DoF per subcarrier for `M` groups of `per_group` users as the
/// antenna count grows from 1 to `max_tx`.
pub fn dof_table(n_groups: usize, per_group: usize, max_tx: usize) -> Result<Vec<DofRow>, String> {
    if n_groups == 0 || per_group == 0 || max_tx == 0 || max_tx > 64 {
        return Err("groups, users per group and antennas must be positive (antennas at most 64)".into());
    }
    Ok((1..=max_tx)
        .map(|nt| {
            let dims = SystemDims::new(1, nt, n_groups, n_groups * per_group);
            let classic = dof_classic(&dims);
            DofRow {
                n_tx: nt,
                classic,
                // RS never does worse than classic beamforming.
                rs: dof_rs(n_groups - 1).max(f64::from(classic)),
            }
        })
        .collect())
}

#[derive(Debug, Serialize)]
pub struct SubcarrierSplit {
    pub broadcast_power: f64,
    pub group_power: Vec<f64>,
    pub common_share: Vec<f64>,
    pub group_rate: Vec<f64>,
    pub mmf_rate: f64,
}

#[derive(Debug, Serialize)]
pub struct PowerSplit {
    pub dims: String,
    pub snr_db: f64,
    pub total_power: f64,
    pub subcarriers: Vec<SubcarrierSplit>,
    pub sum_mmf: f64,
}

/// How the optimized RS precoders spend power on each subcarrier.
pub fn power_split(label: &str, seed: u64, snr_db: f64) -> Result<PowerSplit, String> {
    let dims = parse_dims(label)?;
    if !(-10.0..=50.0).contains(&snr_db) {
        return Err("SNR must lie in [-10, 50] dB".into());
    }
    let ch = generate_channels(&dims, seed);
    let budget = PowerBudget::from_snr_db(snr_db, 1.0);
    let (rs, _) = optimize_both(&dims, &ch, &budget, &demo_config(seed)).map_err(|e| e.to_string())?;
    let energy = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let subcarriers = (0..dims.n_subcarriers)
        .map(|n| SubcarrierSplit {
            broadcast_power: energy(rs.precoders.bc(n)),
            group_power: (0..dims.n_groups).map(|m| energy(rs.precoders.group(m, n))).collect(),
            common_share: (0..dims.n_groups).map(|m| rs.split.get(m, n)).collect(),
            group_rate: (0..dims.n_groups).map(|m| rs.report.group(m, n)).collect(),
            mmf_rate: rs.report.subcarrier_mmf[n],
        })
        .collect();
    Ok(PowerSplit {
        dims: dims.label(),
        snr_db,
        total_power: budget.total_power,
        subcarriers,
        sum_mmf: rs.report.sum_mmf,
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = rateCurve)]
pub fn rate_curve_js(label: &str, seed: u32, snr_lo: f64, snr_hi: f64, step: f64) -> Result<String, JsValue> {
    to_js(rate_curve(label, u64::from(seed), snr_lo, snr_hi, step))
}

#[wasm_bindgen(js_name = dofTable)]
pub fn dof_table_js(n_groups: u32, per_group: u32, max_tx: u32) -> Result<String, JsValue> {
    to_js(dof_table(n_groups as usize, per_group as usize, max_tx as usize))
}

#[wasm_bindgen(js_name = powerSplit)]
pub fn power_split_js(label: &str, seed: u32, snr_db: f64) -> Result<String, JsValue> {
    to_js(power_split(label, u64::from(seed), snr_db))
}
