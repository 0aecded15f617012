use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use super::config::Algo;
use crate::error::{Error, Result};
use crate::model::{ChannelSet, RunStatus};

pub const RESULTS_HEADER: [&str; 11] = [
    "algo",
    "snr_db",
    "trial",
    "sum_mmf_rate",
    "per_subcarrier_rates",
    "iterations",
    "solve_time_ms",
    "status",
    "power_used",
    "channel_hash",
    "convention_tag",
];

/// Checks that are not persisted in the CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// Largest decrease of the alternating-optimization objective over all runs.
    pub max_ascent_drop: Option<f64>,
    pub bisection_monotone: Option<bool>,
    /// Randomized value does not exceed the relaxation bound (+1e−6).
    pub relaxation_ordering_ok: Option<bool>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub algo: Algo,
    pub snr_db: f64,
    pub trial: usize,
    pub sum_mmf_rate: f64,
    pub per_subcarrier_rates: Vec<f64>,
    pub iterations: usize,
    pub solve_time_ms: Option<f64>,
    pub status: RunStatus,
    pub power_used: f64,
    pub channel_hash: String,
    pub convention_tag: String,
    pub diagnostics: Option<Diagnostics>,
}

/// Cell identity: one row per `(algo, snr, trial)`.
pub type CellKey = (Algo, u64, usize);

impl ResultRow {
    pub fn key(&self) -> CellKey {
        (self.algo, self.snr_db.to_bits(), self.trial)
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.algo.to_string(),
            self.snr_db.to_string(),
            self.trial.to_string(),
            self.sum_mmf_rate.to_string(),
            self.per_subcarrier_rates.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            self.iterations.to_string(),
            self.solve_time_ms.map(|t| t.to_string()).unwrap_or_default(),
            self.status.to_string(),
            self.power_used.to_string(),
            self.channel_hash.clone(),
            self.convention_tag.clone(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        if rec.len() != RESULTS_HEADER.len() {
            return Err(Error::Parse(format!("expected {} fields, got {}", RESULTS_HEADER.len(), rec.len())));
        }
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Parse(format!("{}: not a number: {:?}", RESULTS_HEADER[i], &rec[i])))
        };
        let u = |i: usize| -> Result<usize> {
            rec[i]
                .parse()
                .map_err(|_| Error::Parse(format!("{}: not a count: {:?}", RESULTS_HEADER[i], &rec[i])))
        };
        let per = if rec[4].is_empty() {
            Vec::new()
        } else {
            rec[4]
                .split(';')
                .map(|s| s.parse().map_err(|_| Error::Parse(format!("per_subcarrier_rates: {s:?}"))))
                .collect::<Result<_>>()?
        };
        Ok(Self {
            algo: rec[0].parse()?,
            snr_db: f(1)?,
            trial: u(2)?,
            sum_mmf_rate: f(3)?,
            per_subcarrier_rates: per,
            iterations: u(5)?,
            solve_time_ms: if rec[6].is_empty() { None } else { Some(f(6)?) },
            status: rec[7].parse()?,
            power_used: f(8)?,
            channel_hash: rec[9].to_string(),
            convention_tag: rec[10].to_string(),
            diagnostics: None,
        })
    }
}

/// Canonical row order: algorithm name, then SNR, then trial.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.algo
            .as_str()
            .cmp(b.algo.as_str())
            .then(a.snr_db.total_cmp(&b.snr_db))
            .then(a.trial.cmp(&b.trial))
    });
}

pub fn write_results<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(RESULTS_HEADER)?;
    for r in rows {
        wr.write_record(r.record())?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_results<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(RESULTS_HEADER) {
        return Err(Error::Parse(format!("unexpected results header {:?}", header.iter().collect::<Vec<_>>())));
    }
    rd.records().map(|rec| ResultRow::from_record(&rec?)).collect()
}

pub fn read_results_file(path: &Path) -> Result<Vec<ResultRow>> {
    read_results(std::fs::File::open(path)?)
}

/// Writes through a temporary sibling and renames, so an interrupted run
/// never leaves a truncated file.
pub fn write_results_file(rows: &[ResultRow], path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("csv.partial");
    {
        let file = std::fs::File::create(&tmp)?;
        write_results(rows, std::io::BufWriter::new(file))?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// First 16 hex digits of the SHA-256 of the channel entries and noise
/// variance (little-endian `f64`s).
pub fn channel_hash(ch: &ChannelSet) -> String {
    let mut h = Sha256::new();
    for z in ch.entries() {
        h.update(z.re.to_le_bytes());
        h.update(z.im.to_le_bytes());
    }
    h.update(ch.noise_var.to_le_bytes());
    h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
}
