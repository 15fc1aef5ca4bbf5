//! Array geometry and snapshot synthesis for the FD subarray and the H²AD groups.
//!
//! Angles cross this module's API in degrees; phases are computed in radians.
//! Noise power is fixed at one, so the signal power equals the linear SNR.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::rng;
use crate::{Error, Result, C64};

/// One homogeneous group of the H²AD array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupGeometry {
    /// Number of subarrays (virtual antennas), `K_h`.
    pub subarrays: usize,
    /// Antennas combined per subarray, `M_h`.
    pub antennas: usize,
}

impl GroupGeometry {
    pub fn total_antennas(&self) -> usize {
        self.subarrays * self.antennas
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub groups: Vec<GroupGeometry>,
    pub fd_antennas: usize,
    /// Inter-element spacing in the same unit as `wavelength`.
    pub spacing: f64,
    pub wavelength: f64,
}

impl ArrayConfig {
    /// Receiver geometry of the reference experiments: FD subarray of 128
    /// antennas and three groups of 16 subarrays with 7, 11 and 13 antennas.
    pub fn table_one() -> Self {
        Self::new(128, &[(16, 7), (16, 11), (16, 13)])
    }

    /// Half-wavelength geometry from `(K_h, M_h)` pairs.
    pub fn new(fd_antennas: usize, groups: &[(usize, usize)]) -> Self {
        ArrayConfig {
            groups: groups
                .iter()
                .map(|&(subarrays, antennas)| GroupGeometry {
                    subarrays,
                    antennas,
                })
                .collect(),
            fd_antennas,
            spacing: 0.5,
            wavelength: 1.0,
        }
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// `Σ_h K_h·M_h`.
    pub fn h2ad_antennas(&self) -> usize {
        self.groups.iter().map(GroupGeometry::total_antennas).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::InvalidConfig("at least one H²AD group is required".into()));
        }
        if self.fd_antennas < 2 {
            return Err(Error::InvalidConfig(format!(
                "FD subarray needs at least 2 antennas, got {}",
                self.fd_antennas
            )));
        }
        if !(self.spacing > 0.0 && self.wavelength > 0.0)
            || !self.spacing.is_finite()
            || !self.wavelength.is_finite()
        {
            return Err(Error::InvalidConfig(
                "spacing and wavelength must be positive and finite".into(),
            ));
        }
        for (h, g) in self.groups.iter().enumerate() {
            if g.subarrays < 2 {
                return Err(Error::InvalidConfig(format!(
                    "group {h}: Root-MUSIC needs at least 2 subarrays, got {}",
                    g.subarrays
                )));
            }
            if g.antennas < 1 {
                return Err(Error::InvalidConfig(format!("group {h}: zero antennas per subarray")));
            }
        }
        for (i, a) in self.groups.iter().enumerate() {
            for b in &self.groups[i + 1..] {
                if a.antennas == b.antennas {
                    return Err(Error::InvalidConfig(format!(
                        "antennas per subarray must differ between groups ({} repeated)",
                        a.antennas
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Analog phases `ψ[h][k][m]` applied before each subarray combiner.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSetting {
    pub phases: Vec<Vec<Vec<f64>>>,
}

impl BeamformerSetting {
    /// All-zero phases, i.e. every combiner is `(1/√M_h)·[1, …, 1]ᵀ`.
    pub fn broadside(config: &ArrayConfig) -> Self {
        BeamformerSetting {
            phases: config
                .groups
                .iter()
                .map(|g| vec![vec![0.0; g.antennas]; g.subarrays])
                .collect(),
        }
    }

    fn matches(&self, config: &ArrayConfig) -> bool {
        self.phases.len() == config.groups.len()
            && self.phases.iter().zip(&config.groups).all(|(p, g)| {
                p.len() == g.subarrays && p.iter().all(|row| row.len() == g.antennas)
            })
    }
}

/// Complex baseband samples of every receive chain over `L` snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBatch {
    /// `M_FD × L`.
    pub fd: DMatrix<C64>,
    /// One `K_h × L` matrix per group.
    pub groups: Vec<DMatrix<C64>>,
    pub snapshots: usize,
    pub theta_deg: f64,
    pub snr_db: f64,
    pub seed: u64,
}

pub(crate) fn check_angle(theta_deg: f64) -> Result<f64> {
    if theta_deg.is_finite() && theta_deg.abs() <= 90.0 {
        Ok(theta_deg.to_radians())
    } else {
        Err(Error::AngleOutOfRange(theta_deg))
    }
}

/// Electrical phase per unit of element index for spacing `spacing`.
pub(crate) fn phase_step(theta_rad: f64, spacing: f64, wavelength: f64) -> f64 {
    2.0 * PI * spacing * theta_rad.sin() / wavelength
}

/// ULA manifold `[1, e^{jκ}, …, e^{j(M−1)κ}]` with `κ = 2π·d·sinθ/λ`.
pub fn steering_fd(theta_deg: f64, antennas: usize, spacing: f64, wavelength: f64) -> Result<DVector<C64>> {
    let theta = check_angle(theta_deg)?;
    if antennas == 0 {
        return Err(Error::Precondition("steering vector needs at least one element".into()));
    }
    let step = phase_step(theta, spacing, wavelength);
    Ok(DVector::from_iterator(
        antennas,
        (0..antennas).map(|m| C64::from_polar(1.0, step * m as f64)),
    ))
}

/// Virtual-array manifold of one group: a `K_h`-element ULA at spacing `M_h·d`.
pub fn steering_virtual(
    theta_deg: f64,
    subarrays: usize,
    antennas: usize,
    spacing: f64,
    wavelength: f64,
) -> Result<DVector<C64>> {
    if subarrays < 2 {
        return Err(Error::Precondition(format!(
            "virtual array needs at least 2 subarrays, got {subarrays}"
        )));
    }
    steering_fd(theta_deg, subarrays, antennas as f64 * spacing, wavelength)
}

/// Subarray combining gain `b_h(θ) = Σ_{m<M_h} e^{j·2π·m·d·sinθ/λ}`.
///
/// Evaluated as a direct sum, which has no removable singularity at `sinθ = 0`.
pub fn b_gain(theta_deg: f64, antennas: usize, spacing: f64, wavelength: f64) -> C64 {
    b_gain_rad(theta_deg.to_radians(), antennas, spacing, wavelength)
}

pub(crate) fn b_gain_rad(theta_rad: f64, antennas: usize, spacing: f64, wavelength: f64) -> C64 {
    let step = phase_step(theta_rad, spacing, wavelength);
    (0..antennas).map(|m| C64::from_polar(1.0, step * m as f64)).sum()
}

/// `db_h/dθ` at `theta_rad`.
pub(crate) fn b_gain_derivative(theta_rad: f64, antennas: usize, spacing: f64, wavelength: f64) -> C64 {
    let step = phase_step(theta_rad, spacing, wavelength);
    let dstep = 2.0 * PI * spacing * theta_rad.cos() / wavelength;
    (0..antennas)
        .map(|m| C64::new(0.0, dstep * m as f64) * C64::from_polar(1.0, step * m as f64))
        .sum()
}

fn circular_gaussian<R: Rng + ?Sized>(rng: &mut R, power: f64) -> C64 {
    let scale = (power / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * scale, im * scale)
}

/// Draws `L` snapshots of one emitter at `theta_deg` with unit-power AWGN.
///
/// The emitted symbols are i.i.d. circular complex Gaussian with power
/// `10^(snr_db/10)` and are shared by the FD subarray and every group.
pub fn synthesize(
    config: &ArrayConfig,
    beamformer: &BeamformerSetting,
    theta_deg: f64,
    snr_db: f64,
    snapshots: usize,
    seed: u64,
) -> Result<SnapshotBatch> {
    synthesize_inner(config, beamformer, theta_deg, snr_db, snapshots, seed, 1.0)
}

/// As [`synthesize`] with the noise switched off (`σ_w = 0`).
pub fn synthesize_noise_free(
    config: &ArrayConfig,
    beamformer: &BeamformerSetting,
    theta_deg: f64,
    snr_db: f64,
    snapshots: usize,
    seed: u64,
) -> Result<SnapshotBatch> {
    synthesize_inner(config, beamformer, theta_deg, snr_db, snapshots, seed, 0.0)
}

fn synthesize_inner(
    config: &ArrayConfig,
    beamformer: &BeamformerSetting,
    theta_deg: f64,
    snr_db: f64,
    snapshots: usize,
    seed: u64,
    noise_power: f64,
) -> Result<SnapshotBatch> {
    config.validate()?;
    let theta = check_angle(theta_deg)?;
    if snapshots == 0 {
        return Err(Error::EmptyInput("snapshot count must be at least 1"));
    }
    if !beamformer.matches(config) {
        return Err(Error::InvalidConfig("beamformer shape does not match the array".into()));
    }
    let signal_power = 10f64.powf(snr_db / 10.0);
    let mut rng = rng::stream(seed);
    let x: Vec<C64> = (0..snapshots)
        .map(|_| circular_gaussian(&mut rng, signal_power))
        .collect();

    let a_fd = steering_fd(theta_deg, config.fd_antennas, config.spacing, config.wavelength)?;
    let mut fd = DMatrix::from_fn(config.fd_antennas, snapshots, |m, n| a_fd[m] * x[n]);
    add_noise(&mut fd, &mut rng, noise_power);

    let step = phase_step(theta, config.spacing, config.wavelength);
    let mut groups = Vec::with_capacity(config.groups.len());
    for (g, phases) in config.groups.iter().zip(&beamformer.phases) {
        let norm = 1.0 / (g.antennas as f64).sqrt();
        // γ_{h,k}ᴴ applied to the subarray's slice of the physical manifold.
        let gains: Vec<C64> = phases
            .iter()
            .enumerate()
            .map(|(k, psi)| {
                psi.iter()
                    .enumerate()
                    .map(|(m, &p)| C64::from_polar(norm, step * (k * g.antennas + m) as f64 - p))
                    .sum()
            })
            .collect();
        let mut y = DMatrix::from_fn(g.subarrays, snapshots, |k, n| gains[k] * x[n]);
        add_noise(&mut y, &mut rng, noise_power);
        groups.push(y);
    }

    Ok(SnapshotBatch {
        fd,
        groups,
        snapshots,
        theta_deg,
        snr_db,
        seed,
    })
}

fn add_noise<R: Rng + ?Sized>(y: &mut DMatrix<C64>, rng: &mut R, power: f64) {
    if power == 0.0 {
        return;
    }
    // Column-major fill keeps the draw order independent of matrix shape quirks.
    for v in y.iter_mut() {
        *v += circular_gaussian(rng, power);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn phase_close(z: C64, phase: f64) -> bool {
        (z - C64::from_polar(1.0, phase)).norm() < 1e-12
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let a = steering_fd(0.0, 4, 0.5, 1.0).unwrap();
        assert!(a.iter().all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn endfire_half_wavelength_alternates() {
        let a = steering_fd(90.0, 2, 0.5, 1.0).unwrap();
        assert!((a[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_matches_direct_exponentials() {
        let a = steering_fd(41.0, 128, 0.5, 1.0).unwrap();
        let s = 41f64.to_radians().sin();
        for m in 0..128 {
            let direct = C64::new(0.0, PI * m as f64 * s).exp();
            assert!((a[m] - direct).norm() < 1e-12, "entry {m}");
        }
    }

    #[test]
    fn virtual_steering_examples() {
        let ones = steering_virtual(0.0, 16, 7, 0.5, 1.0).unwrap();
        assert!(ones.iter().all(|z| (z - 1.0).norm() < 1e-15));

        let theta = 23.0f64;
        let two = steering_virtual(theta, 2, 5, 0.5, 1.0).unwrap();
        assert!(phase_close(two[0], 0.0));
        assert!(phase_close(two[1], 2.0 * PI * 5.0 * 0.5 * theta.to_radians().sin()));

        let v = steering_virtual(41.0, 16, 7, 0.5, 1.0).unwrap();
        let s = 41f64.to_radians().sin();
        for k in 0..16 {
            assert!(phase_close(v[k], 7.0 * PI * k as f64 * s), "entry {k}");
        }
        assert!(steering_virtual(10.0, 1, 7, 0.5, 1.0).is_err());
    }

    #[test]
    fn angle_domain_is_enforced() {
        assert!(matches!(steering_fd(90.5, 4, 0.5, 1.0), Err(Error::AngleOutOfRange(_))));
        assert!(steering_fd(f64::NAN, 4, 0.5, 1.0).is_err());
        assert!(steering_fd(-90.0, 4, 0.5, 1.0).is_ok());
    }

    #[test]
    fn b_gain_examples() {
        assert_eq!(b_gain(0.0, 7, 0.5, 1.0), C64::new(7.0, 0.0));
        assert!(b_gain(90.0, 2, 0.5, 1.0).norm() < 1e-15);

        // Geometric-ratio form vs. the summation used in the implementation.
        let t = 41f64.to_radians();
        let q = C64::new(0.0, PI * t.sin()).exp();
        let ratio = (C64::new(1.0, 0.0) - q.powu(7)) / (C64::new(1.0, 0.0) - q);
        assert!((b_gain(41.0, 7, 0.5, 1.0) - ratio).norm() < 1e-12);
    }

    #[test]
    fn b_gain_derivative_matches_central_difference() {
        let t = 0.7;
        let h = 1e-6;
        let fd = (b_gain_rad(t + h, 11, 0.5, 1.0) - b_gain_rad(t - h, 11, 0.5, 1.0)) / (2.0 * h);
        assert!((fd - b_gain_derivative(t, 11, 0.5, 1.0)).norm() < 1e-6);
    }

    #[test]
    fn config_validation() {
        assert!(ArrayConfig::table_one().validate().is_ok());
        assert_eq!(ArrayConfig::table_one().h2ad_antennas(), 496);
        assert!(ArrayConfig::new(128, &[(16, 7), (16, 7)]).validate().is_err());
        assert!(ArrayConfig::new(128, &[(1, 7)]).validate().is_err());
        assert!(ArrayConfig::new(1, &[(16, 7)]).validate().is_err());
        assert!(ArrayConfig::new(8, &[]).validate().is_err());
        assert!(ArrayConfig::new(8, &[(4, 0)]).validate().is_err());
    }

    #[test]
    fn noise_free_batch_is_rank_one_model() {
        let cfg = ArrayConfig::table_one();
        let bf = BeamformerSetting::broadside(&cfg);
        let batch = synthesize_noise_free(&cfg, &bf, 41.0, 0.0, 3, 9).unwrap();
        let a = steering_fd(41.0, 128, 0.5, 1.0).unwrap();
        // x(n) recovered from element 0, which has unit steering.
        for n in 0..3 {
            let x = batch.fd[(0, n)];
            for m in 0..128 {
                assert!((batch.fd[(m, n)] - a[m] * x).norm() < 1e-12);
            }
        }
        // Compact group model: y_h = (1/√M_h)·a_{M_h}·b_h·x.
        for (g, y) in cfg.groups.iter().zip(&batch.groups) {
            let av = steering_virtual(41.0, g.subarrays, g.antennas, 0.5, 1.0).unwrap();
            let b = b_gain(41.0, g.antennas, 0.5, 1.0) / (g.antennas as f64).sqrt();
            for n in 0..3 {
                let x = batch.fd[(0, n)];
                for k in 0..g.subarrays {
                    assert!((y[(k, n)] - av[k] * b * x).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn synthesis_is_deterministic() {
        let cfg = ArrayConfig::table_one();
        let bf = BeamformerSetting::broadside(&cfg);
        let a = synthesize(&cfg, &bf, 41.0, 3.0, 20, 77).unwrap();
        let b = synthesize(&cfg, &bf, 41.0, 3.0, 20, 77).unwrap();
        assert_eq!(a, b);
        let c = synthesize(&cfg, &bf, 41.0, 3.0, 20, 78).unwrap();
        assert_ne!(a.fd, c.fd);
    }

    #[test]
    fn empirical_noise_power_is_unit() {
        let cfg = ArrayConfig::new(128, &[(16, 7)]);
        let bf = BeamformerSetting::broadside(&cfg);
        let noisy = synthesize(&cfg, &bf, 12.0, 0.0, 100, 5).unwrap();
        let clean = synthesize_noise_free(&cfg, &bf, 12.0, 0.0, 100, 5).unwrap();
        let w = &noisy.fd - &clean.fd;
        let power = w.iter().map(|z| z.norm_sqr()).sum::<f64>() / (128.0 * 100.0);
        assert!((0.9..=1.1).contains(&power), "noise power {power}");
    }

    #[test]
    fn synthesis_rejects_bad_inputs() {
        let cfg = ArrayConfig::table_one();
        let bf = BeamformerSetting::broadside(&cfg);
        assert!(synthesize(&cfg, &bf, 41.0, 0.0, 0, 1).is_err());
        assert!(synthesize(&cfg, &bf, 95.0, 0.0, 10, 1).is_err());
        let other = BeamformerSetting::broadside(&ArrayConfig::new(8, &[(4, 3)]));
        assert!(synthesize(&cfg, &other, 41.0, 0.0, 10, 1).is_err());
    }

    proptest! {
        #[test]
        fn steering_entries_have_unit_modulus(theta in -90.0f64..=90.0, m in 1usize..200) {
            let a = steering_fd(theta, m, 0.5, 1.0).unwrap();
            for z in a.iter() {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn virtual_is_fd_with_scaled_spacing(theta in -90.0f64..=90.0, k in 2usize..40, m in 1usize..20) {
            let v = steering_virtual(theta, k, m, 0.5, 1.0).unwrap();
            let f = steering_fd(theta, k, 0.5 * m as f64, 1.0).unwrap();
            prop_assert_eq!(v, f);
        }

        #[test]
        fn b_gain_is_bounded(theta in -90.0f64..=90.0, m in 1usize..30) {
            prop_assert!(b_gain(theta, m, 0.5, 1.0).norm() <= m as f64 + 1e-9);
        }
    }
}
