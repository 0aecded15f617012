use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baselines::SdrConfig;
use crate::dof::DEFAULT_WINDOW_DB;
use crate::error::{Error, Result};
use crate::model::SystemDims;
use crate::rs_wmmse::RsConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    NoRs,
    Rs,
    Sdr,
    SdrBound,
    Tdm,
}

impl Algo {
    pub const ALL: [Algo; 5] = [Algo::Rs, Algo::NoRs, Algo::Sdr, Algo::SdrBound, Algo::Tdm];

    pub fn as_str(self) -> &'static str {
        match self {
            Algo::Rs => "rs",
            Algo::NoRs => "no_rs",
            Algo::Sdr => "sdr",
            Algo::SdrBound => "sdr_bound",
            Algo::Tdm => "tdm",
        }
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown algorithm {s:?}")))
    }
}

/// Dimensions as written in a config file. `group_of` defaults to
/// contiguous equal groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimsFile {
    n_subcarriers: usize,
    n_tx_antennas: usize,
    n_groups: usize,
    n_users: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    group_of: Option<Vec<usize>>,
}

impl From<DimsFile> for SystemDims {
    fn from(d: DimsFile) -> Self {
        let mut dims = SystemDims::new(d.n_subcarriers, d.n_tx_antennas, d.n_groups, d.n_users);
        if let Some(g) = d.group_of {
            dims.group_of = g;
        }
        dims
    }
}

impl From<SystemDims> for DimsFile {
    fn from(d: SystemDims) -> Self {
        let contiguous = SystemDims::new(d.n_subcarriers, d.n_tx_antennas, d.n_groups, d.n_users);
        Self {
            group_of: (contiguous.group_of != d.group_of).then_some(d.group_of),
            n_subcarriers: d.n_subcarriers,
            n_tx_antennas: d.n_tx_antennas,
            n_groups: d.n_groups,
            n_users: d.n_users,
        }
    }
}

fn default_noise_var() -> f64 {
    1.0
}

fn default_window() -> f64 {
    DEFAULT_WINDOW_DB
}

/// One Monte-Carlo experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(with = "dims_serde")]
    pub dims: SystemDims,
    pub snr_grid_db: Vec<f64>,
    pub n_trials: usize,
    pub master_seed: u64,
    pub algorithms: Vec<Algo>,
    #[serde(default)]
    pub rs_config: RsConfig,
    #[serde(default)]
    pub sdr_config: SdrConfig,
    pub output_path: PathBuf,
    #[serde(default = "default_noise_var")]
    pub noise_var: f64,
    /// Width of the high-SNR window used for empirical DoF.
    #[serde(default = "default_window")]
    pub dof_window_db: f64,
    /// Fill `solve_time_ms`. Off by default so results are byte-reproducible.
    #[serde(default)]
    pub record_timing: bool,
}

mod dims_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &SystemDims, s: S) -> std::result::Result<S::Ok, S::Error> {
        DimsFile::from(d.clone()).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<SystemDims, D::Error> {
        DimsFile::deserialize(d).map(Into::into)
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let probe = crate::model::ChannelSet::zeros(self.dims.n_users, self.dims.n_subcarriers, self.dims.n_tx_antennas, self.noise_var);
        let budget = crate::model::PowerBudget::from_power(1.0, self.noise_var);
        if let Err(e) = crate::model::validate(&self.dims, &probe, &budget) {
            return bad(format!("dims: {e}"));
        }
        if self.snr_grid_db.is_empty() {
            return bad("snr_grid_db is empty".into());
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) || self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return bad("snr_grid_db must be finite and strictly increasing".into());
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        if self.algorithms.is_empty() {
            return bad("algorithms is empty".into());
        }
        let mut seen = self.algorithms.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.algorithms.len() {
            return bad("algorithms has duplicates".into());
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return bad("noise_var must be positive".into());
        }
        if self.dof_window_db.is_nan() || self.dof_window_db <= 0.0 {
            return bad("dof_window_db must be positive".into());
        }
        self.rs_config.validate().map_err(|e| Error::Config(format!("rs_config: {e}")))?;
        self.sdr_config.validate(&self.dims).map_err(|e| Error::Config(format!("sdr_config: {e}")))?;
        Ok(())
    }

    pub fn wants(&self, algo: Algo) -> bool {
        self.algorithms.contains(&algo)
    }

    /// SNR-to-power mapping and baseline conventions, recorded on every row.
    pub fn convention_tag(&self) -> String {
        let split = match self.sdr_config.power_split {
            crate::baselines::PowerSplit::Equal => "equal",
            crate::baselines::PowerSplit::GridRefined => "grid_refined",
        };
        format!(
            "P=noise*10^(snr/10);noise={};baseline_split={split};dof_window_db={}",
            self.noise_var, self.dof_window_db
        )
    }
}
