//! Phase-ambiguity expansion of a group's principal electrical phase.
//!
//! A virtual ULA at spacing `M_h·d` only observes `φ_h` modulo `2π`. Every
//! `s_j = λ(φ̂ + 2πj)/(2π·M_h·d)` inside the half-open window `[−1, 1)` is a
//! feasible `sin θ`; at `d = λ/2` the window holds exactly `M_h` of them.

use std::f64::consts::PI;

use crate::subspace::principal_phase;

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub group_index: usize,
    /// Ascending.
    pub angles_deg: Vec<f64>,
    pub sin_values: Vec<f64>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles_deg.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateUnion {
    pub per_group: Vec<CandidateSet>,
}

impl CandidateUnion {
    pub fn total(&self) -> usize {
        self.per_group.iter().map(CandidateSet::len).sum()
    }

    pub fn num_groups(&self) -> usize {
        self.per_group.len()
    }
}

/// All feasible directions consistent with the folded phase `phase`.
pub fn candidate_angles(group_index: usize, phase: f64, antennas: usize, spacing: f64, wavelength: f64) -> CandidateSet {
    let phase = principal_phase(phase);
    // s_j = (phase/2π + j)·period, with period the sin-lattice spacing λ/(M_h·d).
    let period = wavelength / (antennas as f64 * spacing);
    let offset = phase / (2.0 * PI);
    let first = (-1.0 / period - offset).ceil() as i64;
    let mut sin_values = Vec::new();
    let mut j = first;
    loop {
        let s = (offset + j as f64) * period;
        if s >= 1.0 {
            break;
        }
        if s >= -1.0 {
            sin_values.push(s);
        }
        j += 1;
    }
    let angles_deg = sin_values.iter().map(|s| s.asin().to_degrees()).collect();
    CandidateSet {
        group_index,
        angles_deg,
        sin_values,
    }
}

/// Ordered aggregation of per-group candidate sets; no cross-group deduplication.
pub fn candidate_union(groups: Vec<CandidateSet>) -> CandidateUnion {
    CandidateUnion { per_group: groups }
}
