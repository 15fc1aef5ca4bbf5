//! Stand-in external FD estimator: Root-MUSIC over the feature file's covariance.
//!
//! Usage: `fd-rootmusic-stub [--spacing D] FEATURES ESTIMATE`

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Parser;
use hetero_doa::interchange::{read_features, write_estimate, EstimateFile};
use hetero_doa::subspace::{fd_angle, noise_subspace, root_music};

#[derive(Parser)]
#[command(version, about = "Root-MUSIC FD estimator speaking the feature/estimate file protocol")]
struct Args {
    /// Element spacing in wavelengths.
    #[arg(long, default_value_t = 0.5)]
    spacing: f64,
    features: PathBuf,
    estimate: PathBuf,
}

fn main() -> Result<()> {
    let args = Args::parse();
    let features = read_features(&args.features)?;
    let r = features.to_covariance();
    let rm = root_music(&noise_subspace(&r, 1)?).context("root-MUSIC failed")?;
    let theta = fd_angle(rm.phase, args.spacing, 1.0).theta_deg;
    write_estimate(&EstimateFile::point(theta), &args.estimate)?;
    Ok(())
}
