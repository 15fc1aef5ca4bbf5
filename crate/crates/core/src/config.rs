//! TOML experiment files.
//!
//! ```toml
//! [array]
//! fd_antennas = 128          # M_FD
//! spacing = 0.5              # d, same unit as wavelength
//! wavelength = 1.0
//! subarrays = [16, 16, 16]   # K_h per group
//! antennas = [7, 11, 13]     # M_h per group, pairwise distinct
//!
//! [experiment]
//! theta0_deg = 41.0
//! snr_db = 0.0               # base SNR when not swept
//! snapshots = 100            # base L when not swept
//! trials = 500               # U
//! seed = 1
//! methods = ["md-rootmusic", "comd-rootmusic"]
//! sweep = "snr"              # snr | snapshots | subarrays | fd-ratio
//! values = [0, 5, 10, 15, 20]
//! # estimator_cmd = "fd-rootmusic-stub"
//! # estimator_timeout_s = 30
//! # noiseless = false
//! ```
//!
//! Every key in `[experiment]` except `theta0_deg`, `sweep` and `values` has a
//! default; `[array]` defaults to the Table I geometry when omitted.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::array::{ArrayConfig, GroupGeometry};
use crate::experiment::{ExperimentSpec, Method, SweepVar};
use crate::interchange::DEFAULT_TIMEOUT;
use crate::{Error, Result};

pub const DEFAULT_TRIALS: usize = 500;
pub const DEFAULT_SNAPSHOTS: usize = 100;
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySection {
    pub fd_antennas: usize,
    #[serde(default = "half")]
    pub spacing: f64,
    #[serde(default = "one")]
    pub wavelength: f64,
    pub subarrays: Vec<usize>,
    pub antennas: Vec<usize>,
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

impl ArraySection {
    pub fn to_config(&self) -> Result<ArrayConfig> {
        if self.subarrays.len() != self.antennas.len() {
            return Err(Error::InvalidConfig(format!(
                "{} subarray counts for {} antenna counts",
                self.subarrays.len(),
                self.antennas.len()
            )));
        }
        let config = ArrayConfig {
            groups: self
                .subarrays
                .iter()
                .zip(&self.antennas)
                .map(|(&subarrays, &antennas)| GroupGeometry { subarrays, antennas })
                .collect(),
            fd_antennas: self.fd_antennas,
            spacing: self.spacing,
            wavelength: self.wavelength,
        };
        config.validate()?;
        Ok(config)
    }
}

impl From<&ArrayConfig> for ArraySection {
    fn from(c: &ArrayConfig) -> Self {
        ArraySection {
            fd_antennas: c.fd_antennas,
            spacing: c.spacing,
            wavelength: c.wavelength,
            subarrays: c.groups.iter().map(|g| g.subarrays).collect(),
            antennas: c.groups.iter().map(|g| g.antennas).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub theta0_deg: f64,
    #[serde(default)]
    pub snr_db: f64,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub sweep: SweepVar,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator_cmd: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator_timeout_s: Option<f64>,
    #[serde(default)]
    pub noiseless: bool,
}

fn default_snapshots() -> usize {
    DEFAULT_SNAPSHOTS
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

fn default_methods() -> Vec<Method> {
    vec![Method::MdRootMusic, Method::ComdRootMusic]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array: Option<ArraySection>,
    pub experiment: ExperimentSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_spec(&self) -> Result<ExperimentSpec> {
        let config = match &self.array {
            Some(a) => a.to_config()?,
            None => ArrayConfig::table_one(),
        };
        let e = &self.experiment;
        let timeout = match e.estimator_timeout_s {
            None => DEFAULT_TIMEOUT,
            Some(s) if s.is_finite() && s > 0.0 => Duration::from_secs_f64(s),
            Some(s) => return Err(Error::InvalidConfig(format!("estimator_timeout_s must be positive, got {s}"))),
        };
        let spec = ExperimentSpec {
            config,
            theta0_deg: e.theta0_deg,
            methods: e.methods.clone(),
            sweep: e.sweep,
            values: e.values.clone(),
            trials: e.trials,
            snr_db: e.snr_db,
            snapshots: e.snapshots,
            master_seed: e.seed,
            estimator_command: e.estimator_cmd.clone(),
            estimator_timeout: timeout,
            noiseless: e.noiseless,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        ConfigFile {
            array: Some(ArraySection::from(&spec.config)),
            experiment: ExperimentSection {
                theta0_deg: spec.theta0_deg,
                snr_db: spec.snr_db,
                snapshots: spec.snapshots,
                trials: spec.trials,
                seed: spec.master_seed,
                methods: spec.methods.clone(),
                sweep: spec.sweep,
                values: spec.values.clone(),
                estimator_cmd: spec.estimator_command.clone(),
                estimator_timeout_s: Some(spec.estimator_timeout.as_secs_f64()),
                noiseless: spec.noiseless,
            },
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))
    }
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec> {
    ConfigFile::load(path)?.to_spec()
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_ONE: &str = r#"
[array]
fd_antennas = 128
subarrays = [16, 16, 16]
antennas = [7, 11, 13]

[experiment]
theta0_deg = 41.0
sweep = "snr"
values = [0, 5, 10]
"#;

    #[test]
    fn minimal_file_uses_defaults() {
        let spec = ConfigFile::parse(TABLE_ONE).unwrap().to_spec().unwrap();
        assert_eq!(spec.config, ArrayConfig::table_one());
        assert_eq!(spec.trials, DEFAULT_TRIALS);
        assert_eq!(spec.snapshots, DEFAULT_SNAPSHOTS);
        assert_eq!(spec.methods, vec![Method::MdRootMusic, Method::ComdRootMusic]);
        assert_eq!(spec.values, vec![0.0, 5.0, 10.0]);
        assert_eq!(spec.estimator_timeout, DEFAULT_TIMEOUT);
        assert!(!spec.noiseless);
    }

    #[test]
    fn array_defaults_to_table_one() {
        let text = "[experiment]\ntheta0_deg = 10.0\nsweep = \"snapshots\"\nvalues = [50, 100]\n";
        let spec = ConfigFile::parse(text).unwrap().to_spec().unwrap();
        assert_eq!(spec.config, ArrayConfig::table_one());
        assert_eq!(spec.sweep, SweepVar::Snapshots);
    }

    #[test]
    fn round_trips_through_toml() {
        let spec = ConfigFile::parse(TABLE_ONE).unwrap().to_spec().unwrap();
        let text = ConfigFile::from_spec(&spec).to_toml().unwrap();
        let back = ConfigFile::parse(&text).unwrap().to_spec().unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(ConfigFile::parse("[experiment]\ntheta0_deg = 1.0\n").is_err());
        let typo = TABLE_ONE.replace("trials", "trails").replace("values = [0, 5, 10]", "values = [0]\ntrails = 3");
        assert!(ConfigFile::parse(&typo).is_err());
        let mismatch = TABLE_ONE.replace("[16, 16, 16]", "[16, 16]");
        assert!(ConfigFile::parse(&mismatch).unwrap().to_spec().is_err());
        let dl = TABLE_ONE.replace("sweep", "methods = [\"mddl\"]\nsweep");
        assert!(ConfigFile::parse(&dl).unwrap().to_spec().is_err());
    }

    #[test]
    fn fd_ratio_spelling() {
        let text = TABLE_ONE.replace("\"snr\"", "\"fd-ratio\"").replace("[0, 5, 10]", "[0.1, 0.2]");
        assert_eq!(ConfigFile::parse(&text).unwrap().experiment.sweep, SweepVar::FdRatio);
    }
}
