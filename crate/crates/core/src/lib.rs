//! Direction-of-arrival estimation for a receiver that pairs a fully-digital (FD)
//! uniform linear subarray with a heterogeneous hybrid analog-digital (H²AD) array.
//!
//! The H²AD part is split into groups; every subarray in group `h` analog-combines
//! `M_h` antennas into one receive chain, so each group sees a virtual ULA with
//! spacing `M_h·d` and an `M_h`-fold phase ambiguity. With pairwise distinct `M_h`
//! only the true direction is shared by every group's candidate set.
//!
//! Pipeline per snapshot batch:
//!
//! 1. [`array::synthesize`] draws the FD and per-group snapshots.
//! 2. [`subspace`] runs Root-MUSIC on the FD covariance and on each group.
//! 3. [`ambiguity`] unwraps each group's principal phase into its candidates.
//! 4. [`cluster::improved_hs`] (no prior) or [`colearn::select_nearest`] (FD prior)
//!    picks one true candidate per group.
//! 5. [`crlb`] supplies inverse-CRLB fusion weights and [`crlb::fuse`] combines.
//!
//! [`experiment`] drives Monte Carlo RMSE sweeps over these pipelines and
//! [`interchange`] is the file protocol for external FD estimators.

pub mod ambiguity;
pub mod array;
pub mod cluster;
pub mod colearn;
pub mod config;
pub mod crlb;
mod error;
pub mod experiment;
pub mod interchange;
pub mod poly;
pub mod rng;
pub mod subspace;

pub use error::{Error, Result};

/// Complex sample type used throughout.
pub type C64 = num_complex::Complex64;
