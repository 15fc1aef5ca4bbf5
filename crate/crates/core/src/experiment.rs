//! Monte Carlo experiments: per-trial pipelines of the four estimators and RMSE
//! sweeps over SNR, snapshot count, subarray count or FD antenna share.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ambiguity::{candidate_angles, candidate_union, CandidateUnion};
use crate::array::{synthesize, synthesize_noise_free, ArrayConfig, BeamformerSetting};
use crate::cluster::improved_hs;
use crate::colearn::select_nearest;
use crate::crlb::{crlb_report, fuse, fusion_weights, FimMethod, FusionWeights};
use crate::interchange::{EstimatorClient, DEFAULT_TIMEOUT};
use crate::rng::derive_seed;
use crate::subspace::{estimate_ula, noise_subspace, root_music, sample_covariance};
use crate::{Error, Result};

/// Written in place of a number when a cell has no successful trial.
pub const MISSING: &str = "NA";

pub const CSV_HEADER: &str = "sweep_var,sweep_value,method,rmse_deg,crlb_deg,trials_ok,trials_failed";

/// Per-trial CRLBs are evaluated at the FD estimate, kept this far from endfire.
const WEIGHT_ANGLE_LIMIT_DEG: f64 = 89.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "md-rootmusic")]
    MdRootMusic,
    #[serde(rename = "comd-rootmusic")]
    ComdRootMusic,
    #[serde(rename = "mddl")]
    Mddl,
    #[serde(rename = "comddl")]
    Comddl,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::MdRootMusic, Method::ComdRootMusic, Method::Mddl, Method::Comddl];

    pub fn name(self) -> &'static str {
        match self {
            Method::MdRootMusic => "md-rootmusic",
            Method::ComdRootMusic => "comd-rootmusic",
            Method::Mddl => "mddl",
            Method::Comddl => "comddl",
        }
    }

    /// Takes the FD estimate from the external estimator.
    pub fn needs_estimator(self) -> bool {
        matches!(self, Method::Mddl | Method::Comddl)
    }

    /// Resolves ambiguity with the FD prior instead of clustering.
    pub fn co_learning(self) -> bool {
        matches!(self, Method::ComdRootMusic | Method::Comddl)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "snr")]
    Snr,
    #[serde(rename = "snapshots")]
    Snapshots,
    /// Common `K_h` of every group.
    #[serde(rename = "subarrays")]
    Subarrays,
    /// FD share `M_FD/(M_FD + N_H²AD)` of all antennas.
    #[serde(rename = "fd-ratio", alias = "fd_ratio")]
    FdRatio,
}

impl SweepVar {
    pub fn name(self) -> &'static str {
        match self {
            SweepVar::Snr => "snr",
            SweepVar::Snapshots => "snapshots",
            SweepVar::Subarrays => "subarrays",
            SweepVar::FdRatio => "fd-ratio",
        }
    }
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "snr" => Ok(SweepVar::Snr),
            "snapshots" => Ok(SweepVar::Snapshots),
            "subarrays" => Ok(SweepVar::Subarrays),
            "fd-ratio" | "fd_ratio" => Ok(SweepVar::FdRatio),
            other => Err(Error::InvalidConfig(format!("unknown sweep variable `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub config: ArrayConfig,
    pub theta0_deg: f64,
    pub methods: Vec<Method>,
    pub sweep: SweepVar,
    pub values: Vec<f64>,
    /// `U`.
    pub trials: usize,
    pub snr_db: f64,
    pub snapshots: usize,
    pub master_seed: u64,
    pub estimator_command: Option<String>,
    pub estimator_timeout: Duration,
    /// Synthesize without receiver noise.
    pub noiseless: bool,
}

/// Geometry and operating point of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub config: ArrayConfig,
    pub snr_db: f64,
    pub snapshots: usize,
}

impl ExperimentSpec {
    /// Table I geometry, θ0 = 41°, L = 100, U = 500, both Root-MUSIC methods.
    pub fn table_one(sweep: SweepVar, values: Vec<f64>) -> Self {
        ExperimentSpec {
            config: ArrayConfig::table_one(),
            theta0_deg: 41.0,
            methods: vec![Method::MdRootMusic, Method::ComdRootMusic],
            sweep,
            values,
            trials: 500,
            snr_db: 0.0,
            snapshots: 100,
            master_seed: 1,
            estimator_command: None,
            estimator_timeout: DEFAULT_TIMEOUT,
            noiseless: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if !(self.theta0_deg.is_finite() && self.theta0_deg.abs() < 90.0) {
            return Err(Error::AngleOutOfRange(self.theta0_deg));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep values must be nonempty".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("at least one method is required".into()));
        }
        if self.snapshots == 0 {
            return Err(Error::InvalidConfig("snapshots must be at least 1".into()));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::InvalidConfig("snr_db must be finite".into()));
        }
        let needs = self.methods.iter().any(|m| m.needs_estimator());
        if needs && self.estimator_command.as_deref().map_or(true, |c| c.trim().is_empty()) {
            return Err(Error::InvalidConfig("mddl and comddl require an estimator command".into()));
        }
        for &v in &self.values {
            self.cell(v)?;
        }
        Ok(())
    }

    /// Applies one sweep value to the base setup.
    pub fn cell(&self, value: f64) -> Result<Cell> {
        let mut cell = Cell {
            config: self.config.clone(),
            snr_db: self.snr_db,
            snapshots: self.snapshots,
        };
        let bad = |what: &str| Error::InvalidConfig(format!("{} sweep value {value} {what}", self.sweep));
        match self.sweep {
            SweepVar::Snr => {
                if !value.is_finite() {
                    return Err(bad("is not finite"));
                }
                cell.snr_db = value;
            }
            SweepVar::Snapshots => cell.snapshots = positive_integer(value).ok_or_else(|| bad("is not a positive integer"))?,
            SweepVar::Subarrays => {
                let k = positive_integer(value).ok_or_else(|| bad("is not a positive integer"))?;
                for g in &mut cell.config.groups {
                    g.subarrays = k;
                }
            }
            SweepVar::FdRatio => {
                if !(value > 0.0 && value < 1.0) {
                    return Err(bad("must lie in (0, 1)"));
                }
                let n = cell.config.h2ad_antennas() as f64;
                cell.config.fd_antennas = ((value * n / (1.0 - value)).round() as usize).max(2);
            }
        }
        cell.config.validate()?;
        Ok(cell)
    }

    pub fn trial_seed(&self, value: f64, trial_index: usize) -> u64 {
        derive_seed(self.master_seed, &[value.to_bits(), trial_index as u64])
    }

    fn estimator(&self) -> Result<Option<EstimatorClient>> {
        if !self.methods.iter().any(|m| m.needs_estimator()) {
            return Ok(None);
        }
        let cmd = self
            .estimator_command
            .as_deref()
            .ok_or_else(|| Error::InvalidConfig("mddl and comddl require an estimator command".into()))?;
        EstimatorClient::new(cmd, self.estimator_timeout).map(Some)
    }
}

fn positive_integer(v: f64) -> Option<usize> {
    (v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64).then_some(v as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimationResult {
    pub method: Method,
    pub sweep_value: f64,
    pub trial_index: usize,
    pub trial_seed: u64,
    pub theta_hat_deg: f64,
    pub theta_fd_deg: f64,
    /// One resolved angle per group.
    pub per_group_true: Vec<f64>,
    pub weights: FusionWeights,
    /// Clustering spread exceeded its gate (md methods only).
    pub low_confidence: bool,
    /// The FD arcsine argument was clamped.
    pub fd_clamped: bool,
}

impl EstimationResult {
    /// Fuses the recorded parts again.
    pub fn recompute(&self) -> Result<f64> {
        fuse(self.theta_fd_deg, &self.per_group_true, &self.weights)
    }
}

/// Everything a trial shares between methods: the FD estimates and the
/// per-group candidate sets.
struct Frontend {
    seed: u64,
    root_fd: FdEstimate,
    external_fd: Option<Result<FdEstimate>>,
    union: CandidateUnion,
}

#[derive(Debug, Clone, Copy)]
struct FdEstimate {
    theta_deg: f64,
    clamped: bool,
}

fn frontend(spec: &ExperimentSpec, cell: &Cell, value: f64, trial_index: usize, client: Option<&EstimatorClient>) -> Result<Frontend> {
    let seed = spec.trial_seed(value, trial_index);
    let cfg = &cell.config;
    let bf = BeamformerSetting::broadside(cfg);
    let batch = if spec.noiseless {
        synthesize_noise_free(cfg, &bf, spec.theta0_deg, cell.snr_db, cell.snapshots, seed)?
    } else {
        synthesize(cfg, &bf, spec.theta0_deg, cell.snr_db, cell.snapshots, seed)?
    };

    let (fd, _) = estimate_ula(&batch.fd, cfg.spacing, cfg.wavelength)?;
    let root_fd = FdEstimate {
        theta_deg: fd.theta_deg,
        clamped: fd.clamped,
    };
    let external_fd = client.map(|c| {
        let r = sample_covariance(&batch.fd)?.matrix;
        let est = c.estimate(&r, &format!("t{trial_index}"))?;
        Ok(FdEstimate {
            theta_deg: est.theta_deg,
            clamped: false,
        })
    });

    let sets = batch
        .groups
        .iter()
        .zip(&cfg.groups)
        .enumerate()
        .map(|(h, (y, g))| {
            let cov = sample_covariance(y)?;
            let rm = root_music(&noise_subspace(&cov.matrix, 1)?)?;
            Ok(candidate_angles(h, rm.phase, g.antennas, cfg.spacing, cfg.wavelength))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(Frontend {
        seed,
        root_fd,
        external_fd,
        union: candidate_union(sets),
    })
}

fn finish(cell: &Cell, front: &Frontend, method: Method, value: f64, trial_index: usize) -> Result<EstimationResult> {
    let fd = if method.needs_estimator() {
        match &front.external_fd {
            Some(Ok(e)) => *e,
            Some(Err(e)) => return Err(Error::Estimator(e.to_string())),
            None => return Err(Error::InvalidConfig(format!("{method} requires an estimator command"))),
        }
    } else {
        front.root_fd
    };
    let (per_group, low_confidence) = if method.co_learning() {
        (select_nearest(fd.theta_deg, &front.union)?.angles_deg(), false)
    } else {
        let t = improved_hs(&front.union)?;
        (t.angles_deg, t.low_confidence)
    };
    let at = fd.theta_deg.clamp(-WEIGHT_ANGLE_LIMIT_DEG, WEIGHT_ANGLE_LIMIT_DEG);
    let report = crlb_report(&cell.config, at, cell.snr_db, cell.snapshots, FimMethod::Exact)?;
    let weights = fusion_weights(report.crlb_fd, &report.crlb_group)?;
    let theta_hat = fuse(fd.theta_deg, &per_group, &weights)?;
    Ok(EstimationResult {
        method,
        sweep_value: value,
        trial_index,
        trial_seed: front.seed,
        theta_hat_deg: theta_hat,
        theta_fd_deg: fd.theta_deg,
        per_group_true: per_group,
        weights,
        low_confidence,
        fd_clamped: fd.clamped,
    })
}

/// Runs one seeded trial of `method` at one sweep value.
pub fn run_trial(spec: &ExperimentSpec, method: Method, value: f64, trial_index: usize) -> Result<EstimationResult> {
    let cell = spec.cell(value)?;
    let client = if method.needs_estimator() { spec.estimator()? } else { None };
    let front = frontend(spec, &cell, value, trial_index, client.as_ref())?;
    finish(&cell, &front, method, value, trial_index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Serial,
    #[default]
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub method: Method,
    /// `None` when no trial succeeded.
    pub rmse_deg: Option<f64>,
    /// Root of the numeric total CRLB at θ0, in degrees.
    pub crlb_deg: Option<f64>,
    pub trials_ok: usize,
    pub trials_failed: usize,
}

/// Per-trial squared errors, one slot per method of the spec.
type TrialOutcome = Vec<Option<f64>>;

pub fn rmse_sweep(spec: &ExperimentSpec, execution: Execution) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let client = spec.estimator()?;
    let cells = spec.values.iter().map(|&v| spec.cell(v)).collect::<Result<Vec<_>>>()?;
    let work: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..spec.trials).map(move |t| (c, t))).collect();

    let one = |&(c, t): &(usize, usize)| -> TrialOutcome {
        let value = spec.values[c];
        let front = frontend(spec, &cells[c], value, t, client.as_ref());
        spec.methods
            .iter()
            .map(|&m| {
                front
                    .as_ref()
                    .ok()
                    .and_then(|f| finish(&cells[c], f, m, value, t).ok())
                    .map(|r| (r.theta_hat_deg - spec.theta0_deg).powi(2))
            })
            .collect()
    };
    let outcomes: Vec<TrialOutcome> = match execution {
        Execution::Serial => work.iter().map(one).collect(),
        Execution::Parallel => work.par_iter().map(one).collect(),
    };

    let mut rows = Vec::with_capacity(cells.len() * spec.methods.len());
    for (c, cell) in cells.iter().enumerate() {
        let crlb = crlb_report(&cell.config, spec.theta0_deg, cell.snr_db, cell.snapshots, FimMethod::Numeric)
            .ok()
            .map(|r| r.total_std_deg())
            .filter(|x| x.is_finite());
        let trials = &outcomes[c * spec.trials..(c + 1) * spec.trials];
        for (k, &method) in spec.methods.iter().enumerate() {
            let errs: Vec<f64> = trials.iter().filter_map(|o| o[k]).collect();
            let ok = errs.len();
            rows.push(SweepRow {
                sweep_var: spec.sweep,
                sweep_value: spec.values[c],
                method,
                rmse_deg: (ok > 0).then(|| (errs.iter().sum::<f64>() / ok as f64).sqrt()),
                crlb_deg: crlb,
                trials_ok: ok,
                trials_failed: spec.trials - ok,
            });
        }
    }
    rows.sort_by(|a, b| a.method.cmp(&b.method).then(a.sweep_value.total_cmp(&b.sweep_value)));
    Ok(rows)
}

fn number(x: Option<f64>) -> String {
    x.map_or_else(|| MISSING.to_string(), |v| v.to_string())
}

pub fn write_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Experiment(format!("writing CSV: {e}"));
    w.write_record(CSV_HEADER.split(',')).map_err(io)?;
    for r in rows {
        w.write_record([
            r.sweep_var.name().to_string(),
            r.sweep_value.to_string(),
            r.method.name().to_string(),
            number(r.rmse_deg),
            number(r.crlb_deg),
            r.trials_ok.to_string(),
            r.trials_failed.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Experiment(format!("writing CSV: {e}")))
}

pub fn csv_string(rows: &[SweepRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Experiment(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(sweep: SweepVar, values: Vec<f64>) -> ExperimentSpec {
        ExperimentSpec {
            trials: 4,
            ..ExperimentSpec::table_one(sweep, values)
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("music".parse::<Method>().is_err());
        assert_eq!("fd_ratio".parse::<SweepVar>().unwrap(), SweepVar::FdRatio);
    }

    #[test]
    fn noiseless_trial_is_exact() {
        let spec = ExperimentSpec {
            noiseless: true,
            ..small(SweepVar::Snr, vec![10.0])
        };
        for m in [Method::MdRootMusic, Method::ComdRootMusic] {
            let r = run_trial(&spec, m, 10.0, 0).unwrap();
            assert!((r.theta_hat_deg - 41.0).abs() < 1e-6, "{m}: {}", r.theta_hat_deg);
            assert!((r.recompute().unwrap() - r.theta_hat_deg).abs() < 1e-12);
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let spec = small(SweepVar::Snr, vec![0.0]);
        let a = run_trial(&spec, Method::MdRootMusic, 0.0, 3).unwrap();
        let b = run_trial(&spec, Method::MdRootMusic, 0.0, 3).unwrap();
        assert_eq!(a, b);
        let c = run_trial(&spec, Method::MdRootMusic, 0.0, 4).unwrap();
        assert_ne!(a.trial_seed, c.trial_seed);
    }

    #[test]
    fn methods_share_the_trial_draw() {
        let spec = small(SweepVar::Snr, vec![10.0]);
        let md = run_trial(&spec, Method::MdRootMusic, 10.0, 0).unwrap();
        let co = run_trial(&spec, Method::ComdRootMusic, 10.0, 0).unwrap();
        assert_eq!(md.trial_seed, co.trial_seed);
        assert_eq!(md.theta_fd_deg, co.theta_fd_deg);
        assert_eq!(md.weights, co.weights);
    }

    #[test]
    fn cell_mapping() {
        let spec = small(SweepVar::Subarrays, vec![24.0]);
        assert!(spec.cell(24.0).unwrap().config.groups.iter().all(|g| g.subarrays == 24));
        assert!(spec.cell(24.5).is_err());
        let spec = small(SweepVar::FdRatio, vec![0.2]);
        // 496 H²AD antennas: 0.2·496/0.8 = 124.
        assert_eq!(spec.cell(0.2).unwrap().config.fd_antennas, 124);
        assert!(spec.cell(1.0).is_err());
        let spec = small(SweepVar::Snapshots, vec![50.0]);
        assert_eq!(spec.cell(50.0).unwrap().snapshots, 50);
    }

    #[test]
    fn spec_validation() {
        let mut spec = small(SweepVar::Snr, vec![0.0]);
        spec.methods.push(Method::Comddl);
        assert!(spec.validate().is_err());
        spec.estimator_command = Some("stub".into());
        assert!(spec.validate().is_ok());
        spec.trials = 0;
        assert!(spec.validate().is_err());
        spec.trials = 1;
        spec.values.clear();
        assert!(spec.validate().is_err());
    }

    #[test]
    fn single_noiseless_trial_has_zero_rmse() {
        let spec = ExperimentSpec {
            trials: 1,
            noiseless: true,
            ..small(SweepVar::Snr, vec![0.0, 10.0])
        };
        let rows = rmse_sweep(&spec, Execution::Serial).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.rmse_deg.unwrap() < 1e-6);
            assert_eq!((r.trials_ok, r.trials_failed), (1, 0));
        }
        assert_eq!(rows[0].method, Method::MdRootMusic);
        assert_eq!(rows[0].sweep_value, 0.0);
        assert_eq!(rows[1].sweep_value, 10.0);
    }

    #[test]
    fn failing_estimator_fills_missing_markers() {
        let spec = ExperimentSpec {
            trials: 2,
            methods: vec![Method::Mddl, Method::ComdRootMusic],
            estimator_command: Some("/nonexistent/estimator".into()),
            ..small(SweepVar::Snr, vec![10.0])
        };
        let rows = rmse_sweep(&spec, Execution::Serial).unwrap();
        let csv = csv_string(&rows).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("snr,10,comd-rootmusic,"));
        assert!(lines[2].starts_with("snr,10,mddl,NA,"));
        assert!(lines[2].ends_with(",0,2"));
    }

    #[test]
    fn serial_and_parallel_agree() {
        let spec = small(SweepVar::Snr, vec![0.0, 20.0]);
        let a = csv_string(&rmse_sweep(&spec, Execution::Serial).unwrap()).unwrap();
        let b = csv_string(&rmse_sweep(&spec, Execution::Parallel).unwrap()).unwrap();
        assert_eq!(a, b);
    }
}
