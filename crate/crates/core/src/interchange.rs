//! File protocol between the core and an external FD estimator.
//!
//! The core writes a [`FeatureFile`] holding the FD sample covariance as three
//! real channels, launches `<command> <feature_path> <estimate_path>`, and reads
//! back an [`EstimateFile`]. Both files are JSON documents; floats are written
//! with shortest round-trip formatting, so values survive a write/read cycle
//! bit-for-bit.
//!
//! ```json
//! { "m": 2,
//!   "re":    [[1.0, 0.5], [0.5, 1.0]],
//!   "im":    [[0.0, 0.25], [-0.25, 0.0]],
//!   "angle": [[0.0, 0.4636476090008061], [-0.4636476090008061, 0.0]] }
//! ```
//!
//! ```json
//! { "theta_deg": 41.0, "grid_deg": [40.0, 41.0, 42.0], "probs": [0.1, 0.8, 0.1] }
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use wait_timeout::ChildExt;

use crate::subspace::hermitian_defect;
use crate::{Error, Result, C64};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// Tolerance on `Σ probs = 1`.
pub const PROB_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureFile {
    pub m: usize,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
    pub angle: Vec<Vec<f64>>,
}

/// `∠z` in `(−π, π]`, with `∠0 = 0`.
fn phase_of(z: C64) -> f64 {
    if z.re == 0.0 && z.im == 0.0 {
        return 0.0;
    }
    let a = z.im.atan2(z.re);
    if a == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        a
    }
}

fn square_rows(rows: &[Vec<f64>], m: usize) -> bool {
    rows.len() == m && rows.iter().all(|r| r.len() == m)
}

impl FeatureFile {
    pub fn from_covariance(r: &DMatrix<C64>) -> Result<Self> {
        let m = r.nrows();
        if r.ncols() != m || m == 0 {
            return Err(Error::Precondition("feature covariance must be square and nonempty".into()));
        }
        let scale = r.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let defect = hermitian_defect(r);
        if defect > 1e-9 * scale {
            return Err(Error::NotHermitian(defect));
        }
        let channel = |f: &dyn Fn(C64) -> f64| (0..m).map(|i| (0..m).map(|j| f(r[(i, j)])).collect()).collect();
        Ok(FeatureFile {
            m,
            re: channel(&|z| z.re),
            im: channel(&|z| z.im),
            angle: channel(&phase_of),
        })
    }

    pub fn to_covariance(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.m, self.m, |i, j| C64::new(self.re[i][j], self.im[i][j]))
    }

    /// Shape and channel invariants: `re` symmetric, `im` antisymmetric,
    /// `angle ∈ (−π, π]`.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let m = self.m;
        if m == 0 || !square_rows(&self.re, m) || !square_rows(&self.im, m) || !square_rows(&self.angle, m) {
            return Err(format!("channels must be {m}×{m}"));
        }
        let pi = std::f64::consts::PI;
        for i in 0..m {
            for j in 0..m {
                let tol = 1e-9 * (1.0 + self.re[i][j].abs().max(self.im[i][j].abs()));
                if (self.re[i][j] - self.re[j][i]).abs() > tol {
                    return Err(format!("re is not symmetric at ({i}, {j})"));
                }
                if (self.im[i][j] + self.im[j][i]).abs() > tol {
                    return Err(format!("im is not antisymmetric at ({i}, {j})"));
                }
                let a = self.angle[i][j];
                if !(a > -pi && a <= pi) {
                    return Err(format!("angle out of range at ({i}, {j})"));
                }
            }
        }
        Ok(())
    }
}

pub fn write_features(r: &DMatrix<C64>, path: &Path) -> Result<()> {
    let doc = FeatureFile::from_covariance(r)?;
    write_json(&doc, path)
}

pub fn read_features(path: &Path) -> Result<FeatureFile> {
    let doc: FeatureFile = read_json(path)?;
    doc.validate().map_err(|m| Error::format(path, m))?;
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateFile {
    pub theta_deg: f64,
    pub grid_deg: Vec<f64>,
    pub probs: Vec<f64>,
}

impl EstimateFile {
    /// Single-point estimate carrying all probability mass at `theta_deg`.
    pub fn point(theta_deg: f64) -> Self {
        EstimateFile {
            theta_deg,
            grid_deg: vec![theta_deg],
            probs: vec![1.0],
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.grid_deg.is_empty() || self.grid_deg.len() != self.probs.len() {
            return Err(format!(
                "grid ({}) and probs ({}) must be nonempty and of equal length",
                self.grid_deg.len(),
                self.probs.len()
            ));
        }
        if self.probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err("probabilities must be finite and nonnegative".into());
        }
        let sum: f64 = self.probs.iter().sum();
        if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            return Err(format!("probabilities sum to {sum}, expected 1"));
        }
        let argmax = self
            .probs
            .iter()
            .enumerate()
            .fold(0, |best, (i, &p)| if p > self.probs[best] { i } else { best });
        let expected = self.grid_deg[argmax];
        if (self.theta_deg - expected).abs() > 1e-9 * (1.0 + expected.abs()) {
            return Err(format!(
                "theta_deg {} does not match the argmax grid angle {expected}",
                self.theta_deg
            ));
        }
        Ok(())
    }
}

pub fn write_estimate(estimate: &EstimateFile, path: &Path) -> Result<()> {
    estimate.validate().map_err(|m| Error::format(path, m))?;
    write_json(estimate, path)
}

pub fn read_estimate(path: &Path) -> Result<EstimateFile> {
    let doc: EstimateFile = read_json(path)?;
    doc.validate().map_err(|m| Error::format(path, m))?;
    Ok(doc)
}

fn write_json<T: Serialize>(doc: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string(doc).map_err(|e| Error::format(path, e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

/// Runs `command feature_path estimate_path` and parses the estimate it writes.
///
/// `command` is split on whitespace; the first word is the program.
pub fn invoke_estimator(command: &str, feature_path: &Path, estimate_path: &Path, timeout: Duration) -> Result<EstimateFile> {
    let mut words = command.split_whitespace();
    let program = words
        .next()
        .ok_or_else(|| Error::Estimator("estimator command is empty".into()))?;
    let mut child = Command::new(program)
        .args(words)
        .arg(feature_path)
        .arg(estimate_path)
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::Estimator(format!("cannot launch `{program}`: {e}")))?;
    let status = match child
        .wait_timeout(timeout)
        .map_err(|e| Error::Estimator(format!("waiting on `{program}`: {e}")))?
    {
        Some(status) => status,
        None => {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::Estimator(format!("`{program}` timed out after {timeout:?}")));
        }
    };
    if !status.success() {
        let mut stderr = String::new();
        if let Some(mut pipe) = child.stderr.take() {
            use std::io::Read;
            let _ = pipe.read_to_string(&mut stderr);
        }
        return Err(Error::Estimator(format!("`{program}` exited with {status}: {}", stderr.trim())));
    }
    read_estimate(estimate_path).map_err(|e| Error::Estimator(e.to_string()))
}

/// An external FD estimator with a private scratch directory.
///
/// Each call uses freshly named files, so one client may be shared by workers.
#[derive(Debug)]
pub struct EstimatorClient {
    command: String,
    timeout: Duration,
    scratch: tempfile::TempDir,
    counter: AtomicU64,
}

impl EstimatorClient {
    pub fn new(command: impl Into<String>, timeout: Duration) -> Result<Self> {
        let command = command.into();
        if command.trim().is_empty() {
            return Err(Error::Estimator("estimator command is empty".into()));
        }
        let scratch = tempfile::Builder::new()
            .prefix("hetero-doa-")
            .tempdir()
            .map_err(|e| Error::io(std::env::temp_dir(), e))?;
        Ok(EstimatorClient {
            command,
            timeout,
            scratch,
            counter: AtomicU64::new(0),
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// Estimates the FD direction from a sample covariance; `tag` names the files.
    pub fn estimate(&self, r_fd: &DMatrix<C64>, tag: &str) -> Result<EstimateFile> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let base: PathBuf = self.scratch.path().join(format!("{tag}-{n}"));
        let features = base.with_extension("features.json");
        let estimate = base.with_extension("estimate.json");
        write_features(r_fd, &features)?;
        let out = invoke_estimator(&self.command, &features, &estimate, self.timeout);
        let _ = fs::remove_file(&features);
        let _ = fs::remove_file(&estimate);
        out
    }
}
