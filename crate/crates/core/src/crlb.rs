//! Fisher information, Cramér–Rao bounds, inverse-CRLB fusion weights and fusion.
//!
//! All bounds are per-parameter variances in rad². The trace formula
//! `F = Tr{R⁻¹ ∂R/∂θ R⁻¹ ∂R/∂θ}` (per snapshot) is the reference; it is
//! evaluated either by finite differences of `R(θ)` ([`fim_numeric`]) or with the
//! exact derivative of the rank-one signal term ([`SignalModel::fim_exact`]).
//! The printed closed forms are kept as cross-checks and reported alongside.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Serialize;

use crate::array::{self, ArrayConfig};
use crate::{Error, Result, C64};

/// Finite-difference step for `∂R/∂θ` (radians).
pub const FD_STEP_RAD: f64 = 1e-4;

/// Closed-form bounds within this relative deviation of the numeric bound are
/// marked consistent.
pub const CLOSED_FORM_TOLERANCE: f64 = 0.10;

/// A covariance family `R(θ)` of fixed dimension.
pub trait CovarianceModel {
    fn dim(&self) -> usize;
    fn covariance(&self, theta_rad: f64) -> DMatrix<C64>;
}

/// Wraps a closure as a [`CovarianceModel`].
pub struct FnModel<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(f64) -> DMatrix<C64>> CovarianceModel for FnModel<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn covariance(&self, theta_rad: f64) -> DMatrix<C64> {
        (self.f)(theta_rad)
    }
}

/// `R(θ) = I + v(θ)v(θ)ᴴ` for the FD subarray or one H²AD group (unit noise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SignalModel {
    Fd {
        antennas: usize,
        spacing: f64,
        wavelength: f64,
        snr: f64,
    },
    /// Virtual array of one group: `v = √(snr/M_h)·b_h(θ)·a_{M_h}(θ)`.
    Group {
        subarrays: usize,
        antennas: usize,
        spacing: f64,
        wavelength: f64,
        snr: f64,
    },
}

impl SignalModel {
    pub fn fd(config: &ArrayConfig, snr: f64) -> Self {
        SignalModel::Fd {
            antennas: config.fd_antennas,
            spacing: config.spacing,
            wavelength: config.wavelength,
            snr,
        }
    }

    pub fn group(config: &ArrayConfig, h: usize, snr: f64) -> Self {
        let g = config.groups[h];
        SignalModel::Group {
            subarrays: g.subarrays,
            antennas: g.antennas,
            spacing: config.spacing,
            wavelength: config.wavelength,
            snr,
        }
    }

    /// Signal vector and its exact `θ`-derivative.
    pub fn signal(&self, theta_rad: f64) -> (DVector<C64>, DVector<C64>) {
        match *self {
            SignalModel::Fd {
                antennas,
                spacing,
                wavelength,
                snr,
            } => {
                let (a, da) = ula(theta_rad, antennas, spacing, wavelength);
                let amp = C64::new(snr.sqrt(), 0.0);
                (a * amp, da * amp)
            }
            SignalModel::Group {
                subarrays,
                antennas,
                spacing,
                wavelength,
                snr,
            } => {
                let (a, da) = ula(theta_rad, subarrays, antennas as f64 * spacing, wavelength);
                let b = array::b_gain_rad(theta_rad, antennas, spacing, wavelength);
                let db = array::b_gain_derivative(theta_rad, antennas, spacing, wavelength);
                let amp = C64::new((snr / antennas as f64).sqrt(), 0.0);
                let v = &a * (b * amp);
                let dv = (a * db + da * b) * amp;
                (v, dv)
            }
        }
    }

    /// Trace-formula FIM with the exact derivative, in `O(N)` via Sherman–Morrison.
    pub fn fim_exact(&self, theta_rad: f64) -> f64 {
        let (v, dv) = self.signal(theta_rad);
        rank_one_fim(&v, &dv)
    }
}

impl CovarianceModel for SignalModel {
    fn dim(&self) -> usize {
        match *self {
            SignalModel::Fd { antennas, .. } => antennas,
            SignalModel::Group { subarrays, .. } => subarrays,
        }
    }

    fn covariance(&self, theta_rad: f64) -> DMatrix<C64> {
        let (v, _) = self.signal(theta_rad);
        let n = v.len();
        &v * v.adjoint() + DMatrix::identity(n, n)
    }
}

/// Block-diagonal joint covariance of several independent modalities.
pub struct BlockDiagonal<M> {
    pub blocks: Vec<M>,
}

impl<M: CovarianceModel> CovarianceModel for BlockDiagonal<M> {
    fn dim(&self) -> usize {
        self.blocks.iter().map(CovarianceModel::dim).sum()
    }

    fn covariance(&self, theta_rad: f64) -> DMatrix<C64> {
        let n = self.dim();
        let mut r = DMatrix::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            let d = b.dim();
            r.view_mut((off, off), (d, d)).copy_from(&b.covariance(theta_rad));
            off += d;
        }
        r
    }
}

/// FD subarray followed by every group, as one block-diagonal model.
pub fn joint_model(config: &ArrayConfig, snr: f64) -> BlockDiagonal<SignalModel> {
    let mut blocks = vec![SignalModel::fd(config, snr)];
    blocks.extend((0..config.num_groups()).map(|h| SignalModel::group(config, h, snr)));
    BlockDiagonal { blocks }
}

fn ula(theta_rad: f64, n: usize, spacing: f64, wavelength: f64) -> (DVector<C64>, DVector<C64>) {
    let step = array::phase_step(theta_rad, spacing, wavelength);
    let dstep = 2.0 * PI * spacing * theta_rad.cos() / wavelength;
    let a = DVector::from_iterator(n, (0..n).map(|m| C64::from_polar(1.0, step * m as f64)));
    let da = DVector::from_iterator(n, (0..n).map(|m| C64::new(0.0, dstep * m as f64) * a[m]));
    (a, da)
}

/// `Tr{R⁻¹R′R⁻¹R′}` for `R = I + vvᴴ`, `R′ = v′vᴴ + vv′ᴴ`.
pub fn rank_one_fim(v: &DVector<C64>, dv: &DVector<C64>) -> f64 {
    let alpha = v.norm_squared();
    let beta = v.dotc(dv);
    let gamma = dv.norm_squared();
    let k = 1.0 + alpha;
    2.0 * (beta / k).powu(2).re + 2.0 * (alpha / k) * (gamma - beta.norm_sqr() / k)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericFim {
    /// Per-snapshot Fisher information.
    pub value: f64,
    /// Relative change when the step is doubled; a finite-difference health check.
    pub richardson_gap: f64,
}

/// Per-snapshot FIM from the trace formula with a 5-point central difference.
pub fn fim_numeric<M: CovarianceModel + ?Sized>(model: &M, theta_rad: f64) -> Result<NumericFim> {
    let r = model.covariance(theta_rad);
    let chol = Cholesky::new(r).ok_or(Error::SingularCovariance { theta_rad })?;
    let p = chol.inverse();
    let value = trace_term(&p, &derivative(model, theta_rad, FD_STEP_RAD));
    let coarse = trace_term(&p, &derivative(model, theta_rad, 2.0 * FD_STEP_RAD));
    let richardson_gap = if value.abs() > 0.0 {
        (value - coarse).abs() / value.abs()
    } else {
        coarse.abs()
    };
    Ok(NumericFim {
        value,
        richardson_gap,
    })
}

fn derivative<M: CovarianceModel + ?Sized>(model: &M, theta: f64, h: f64) -> DMatrix<C64> {
    let f = |t: f64| model.covariance(t);
    (f(theta - 2.0 * h) - f(theta + 2.0 * h) + (f(theta + h) - f(theta - h)) * C64::new(8.0, 0.0))
        / C64::new(12.0 * h, 0.0)
}

/// `Re Tr{P D P D}`.
pub(crate) fn trace_term(p: &DMatrix<C64>, d: &DMatrix<C64>) -> f64 {
    let pd = p * d;
    let n = pd.nrows();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += pd[(i, j)] * pd[(j, i)];
        }
    }
    acc.re
}

fn check_bound_angle(theta_deg: f64) -> Result<f64> {
    let theta = array::check_angle(theta_deg)?;
    if theta_deg.abs() >= 90.0 {
        return Err(Error::UnboundedCrlb(theta_deg));
    }
    Ok(theta)
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Closed-form FD information `8π²·SNR·cos²θ·d̄²/λ²`, with `d̄²` the sum of squared
/// element positions about the array centroid, `d²·M(M²−1)/12`.
pub fn fim_fd_closed(config: &ArrayConfig, theta0_deg: f64, snr_db: f64) -> Result<f64> {
    let theta = check_bound_angle(theta0_deg)?;
    let m = config.fd_antennas as f64;
    let d = config.spacing;
    let centered = d * d * m * (m * m - 1.0) / 12.0;
    Ok(8.0 * PI * PI * db_to_linear(snr_db) * theta.cos().powi(2) * centered / config.wavelength.powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedFormCheck {
    pub closed: f64,
    pub numeric: f64,
    pub relative_deviation: f64,
    pub consistent: bool,
}

impl ClosedFormCheck {
    fn new(closed: f64, numeric: f64) -> Self {
        let relative_deviation = (closed - numeric) / numeric;
        ClosedFormCheck {
            closed,
            numeric,
            relative_deviation,
            consistent: relative_deviation.abs() <= CLOSED_FORM_TOLERANCE,
        }
    }
}

/// FD bound `λ²/(8Lπ²·SNR·cos²θ·d̄²)` checked against the numeric trace FIM.
pub fn crlb_fd_closed(config: &ArrayConfig, theta0_deg: f64, snr_db: f64, snapshots: usize) -> Result<ClosedFormCheck> {
    let theta = check_bound_angle(theta0_deg)?;
    let l = snapshots as f64;
    let closed = 1.0 / (l * fim_fd_closed(config, theta0_deg, snr_db)?);
    let numeric = fim_numeric(&SignalModel::fd(config, db_to_linear(snr_db)), theta)?;
    Ok(ClosedFormCheck::new(closed, 1.0 / (l * numeric.value)))
}

struct GroupTerms {
    snr: f64,
    cos2: f64,
    m: f64,
    k: f64,
    d: f64,
    lambda: f64,
    b_abs2: f64,
    mu_abs2: f64,
    re_b2_mu: f64,
    xi: f64,
}

fn group_terms(config: &ArrayConfig, h: usize, theta0_deg: f64, snr_db: f64) -> Result<GroupTerms> {
    let theta = check_bound_angle(theta0_deg)?;
    let g = config
        .groups
        .get(h)
        .ok_or_else(|| Error::Precondition(format!("no group {h}")))?;
    let snr = db_to_linear(snr_db);
    let d = config.spacing;
    let lambda = config.wavelength;
    let b = array::b_gain_rad(theta, g.antennas, d, lambda);
    let step = array::phase_step(theta, d, lambda);
    let mu: C64 = (0..g.antennas)
        .map(|m| C64::from_polar(m as f64 * d, -step * m as f64))
        .sum();
    let m = g.antennas as f64;
    let k = g.subarrays as f64;
    Ok(GroupTerms {
        snr,
        cos2: theta.cos().powi(2),
        m,
        k,
        d,
        lambda,
        b_abs2: b.norm_sqr(),
        mu_abs2: mu.norm_sqr(),
        re_b2_mu: (b * b * mu).re,
        xi: m + k * snr * b.norm_sqr(),
    })
}

/// Group information as printed for the hybrid subarray structure:
/// `8π²SNR²cos²θ/(λ²M_hΞ)·[|b|⁴M_h²K_h²(K_h²−1)d²/12 + (M_hK_h/Ξ)(|b|²|μ|² + K_h·Re{b²μ})]`.
pub fn fim_group_closed(config: &ArrayConfig, h: usize, theta0_deg: f64, snr_db: f64) -> Result<f64> {
    let t = group_terms(config, h, theta0_deg, snr_db)?;
    let bracket = t.b_abs2.powi(2) * t.m.powi(2) * t.k.powi(2) * (t.k.powi(2) - 1.0) * t.d.powi(2) / 12.0
        + (t.m * t.k / t.xi) * (t.b_abs2 * t.mu_abs2 + t.k * t.re_b2_mu);
    Ok(8.0 * PI * PI * t.snr.powi(2) * t.cos2 / (t.lambda.powi(2) * t.m * t.xi) * bracket)
}

/// Group bound as printed in its explicit form (not the inverse of
/// [`fim_group_closed`]; the two printed expressions differ).
pub fn crlb_group_closed(config: &ArrayConfig, h: usize, theta0_deg: f64, snr_db: f64, snapshots: usize) -> Result<f64> {
    let t = group_terms(config, h, theta0_deg, snr_db)?;
    let l = snapshots as f64;
    let bracket = t.b_abs2.powi(2) * t.m.powi(2) * t.k.powi(2) * (t.k.powi(2) - 1.0) * t.d.powi(2) / (12.0 * t.xi)
        + (t.m * t.k / t.xi) * (t.b_abs2 * t.mu_abs2 + t.k * t.re_b2_mu);
    Ok(t.lambda.powi(2) * t.m * t.xi / (8.0 * l * PI * PI * t.snr * t.cos2 * bracket))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FimMethod {
    /// Finite-difference trace formula.
    Numeric,
    /// Trace formula with the exact derivative.
    Exact,
    /// Printed closed forms.
    ClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrlbReport {
    pub method: FimMethod,
    pub snapshots: usize,
    pub fim_fd: f64,
    pub fim_group: Vec<f64>,
    /// rad².
    pub crlb_fd: f64,
    pub crlb_group: Vec<f64>,
    pub crlb_total: f64,
}

impl CrlbReport {
    /// Root of the total bound, in degrees.
    pub fn total_std_deg(&self) -> f64 {
        self.crlb_total.sqrt().to_degrees()
    }
}

pub fn crlb_report(
    config: &ArrayConfig,
    theta0_deg: f64,
    snr_db: f64,
    snapshots: usize,
    method: FimMethod,
) -> Result<CrlbReport> {
    config.validate()?;
    let theta = check_bound_angle(theta0_deg)?;
    if snapshots == 0 {
        return Err(Error::EmptyInput("snapshot count must be at least 1"));
    }
    let snr = db_to_linear(snr_db);
    let h = config.num_groups();
    let (fim_fd, fim_group) = match method {
        FimMethod::Numeric => (
            fim_numeric(&SignalModel::fd(config, snr), theta)?.value,
            (0..h)
                .map(|g| fim_numeric(&SignalModel::group(config, g, snr), theta).map(|f| f.value))
                .collect::<Result<Vec<_>>>()?,
        ),
        FimMethod::Exact => (
            SignalModel::fd(config, snr).fim_exact(theta),
            (0..h).map(|g| SignalModel::group(config, g, snr).fim_exact(theta)).collect(),
        ),
        FimMethod::ClosedForm => (
            fim_fd_closed(config, theta0_deg, snr_db)?,
            (0..h)
                .map(|g| fim_group_closed(config, g, theta0_deg, snr_db))
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let l = snapshots as f64;
    let bound = |f: f64| if f > 0.0 { 1.0 / (l * f) } else { f64::INFINITY };
    let total = fim_fd + fim_group.iter().sum::<f64>();
    Ok(CrlbReport {
        method,
        snapshots,
        crlb_fd: bound(fim_fd),
        crlb_group: fim_group.iter().map(|&f| bound(f)).collect(),
        crlb_total: bound(total),
        fim_fd,
        fim_group,
    })
}

/// Closed-form vs numeric deviations for every modality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormDeviations {
    pub fd: ClosedFormCheck,
    /// Group information as printed vs numeric information.
    pub group_fim: Vec<ClosedFormCheck>,
    /// Group bound as printed vs numeric bound.
    pub group_crlb: Vec<ClosedFormCheck>,
}

pub fn closed_form_deviations(
    config: &ArrayConfig,
    theta0_deg: f64,
    snr_db: f64,
    snapshots: usize,
) -> Result<ClosedFormDeviations> {
    let numeric = crlb_report(config, theta0_deg, snr_db, snapshots, FimMethod::Numeric)?;
    let h = config.num_groups();
    Ok(ClosedFormDeviations {
        fd: crlb_fd_closed(config, theta0_deg, snr_db, snapshots)?,
        group_fim: (0..h)
            .map(|g| Ok(ClosedFormCheck::new(fim_group_closed(config, g, theta0_deg, snr_db)?, numeric.fim_group[g])))
            .collect::<Result<_>>()?,
        group_crlb: (0..h)
            .map(|g| {
                Ok(ClosedFormCheck::new(
                    crlb_group_closed(config, g, theta0_deg, snr_db, snapshots)?,
                    numeric.crlb_group[g],
                ))
            })
            .collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionWeights {
    pub fd: f64,
    pub group: Vec<f64>,
}

impl FusionWeights {
    pub fn sum(&self) -> f64 {
        self.fd + self.group.iter().sum::<f64>()
    }
}

fn inverse_bounds(crlb_fd: f64, crlb_group: &[f64]) -> Result<Vec<f64>> {
    let all = std::iter::once(crlb_fd).chain(crlb_group.iter().copied());
    let inv: Vec<f64> = all
        .map(|b| if b > 0.0 && !b.is_nan() { Ok(1.0 / b) } else { Err(Error::NonPositiveBound(b)) })
        .collect::<Result<_>>()?;
    if inv.iter().all(|&x| x == 0.0) {
        return Err(Error::NonPositiveBound(f64::INFINITY));
    }
    Ok(inv)
}

/// Inverse-CRLB weights, the minimizer of `Σ w²·CRLB` on the simplex.
/// An infinite bound receives zero weight.
pub fn fusion_weights(crlb_fd: f64, crlb_group: &[f64]) -> Result<FusionWeights> {
    let inv = inverse_bounds(crlb_fd, crlb_group)?;
    let total: f64 = inv.iter().sum();
    Ok(FusionWeights {
        fd: inv[0] / total,
        group: inv[1..].iter().map(|x| x / total).collect(),
    })
}

/// `w_FD·θ_FD + Σ_h w_h·θ_h`.
pub fn fuse(theta_fd: f64, group_angles: &[f64], weights: &FusionWeights) -> Result<f64> {
    if group_angles.len() != weights.group.len() {
        return Err(Error::Precondition(format!(
            "{} group angles for {} group weights",
            group_angles.len(),
            weights.group.len()
        )));
    }
    if weights.fd < 0.0 || weights.group.iter().any(|&w| w < 0.0) || (weights.sum() - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition("weights must be nonnegative and sum to one".into()));
    }
    Ok(weights.fd * theta_fd + group_angles.iter().zip(&weights.group).map(|(t, w)| t * w).sum::<f64>())
}

/// MSE of the inverse-CRLB fusion when every modality attains its bound:
/// `1/Σ CRLB⁻¹`.
pub fn fused_mse_theory(crlb_fd: f64, crlb_group: &[f64]) -> Result<f64> {
    let inv = inverse_bounds(crlb_fd, crlb_group)?;
    Ok(1.0 / inv.iter().sum::<f64>())
}
