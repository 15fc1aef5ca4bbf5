//! Improved-HS: agglomerative centroid-linkage clustering over the pooled
//! candidates of all groups, stopped as soon as one cluster spans every group.

use crate::ambiguity::CandidateUnion;
use crate::{Error, Result};

pub const DEFAULT_SPREAD_GATE_DEG: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterOptions {
    /// Selections wider than this are flagged low-confidence.
    pub spread_gate_deg: f64,
    /// With a single group, return its candidate nearest 0° instead of failing.
    pub allow_single_group: bool,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            spread_gate_deg: DEFAULT_SPREAD_GATE_DEG,
            allow_single_group: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub angles_deg: Vec<f64>,
    pub groups: Vec<usize>,
    pub centroid_deg: f64,
}

impl Cluster {
    fn singleton(angle: f64, group: usize) -> Self {
        Cluster {
            angles_deg: vec![angle],
            groups: vec![group],
            centroid_deg: angle,
        }
    }

    fn absorb(&mut self, other: Cluster) {
        self.angles_deg.extend(other.angles_deg);
        self.groups.extend(other.groups);
        self.centroid_deg = self.angles_deg.iter().sum::<f64>() / self.angles_deg.len() as f64;
    }

    fn distinct_groups(&self) -> usize {
        let mut g = self.groups.clone();
        g.sort_unstable();
        g.dedup();
        g.len()
    }
}

/// Agglomeration state after termination.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterState {
    pub clusters: Vec<Cluster>,
    pub merges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrueSolutionSet {
    /// One angle per group, indexed by group.
    pub angles_deg: Vec<f64>,
    /// Group of each entry of `angles_deg` (identity for a full selection).
    pub source_group: Vec<usize>,
    pub spread_deg: f64,
    pub low_confidence: bool,
}

pub fn improved_hs(union: &CandidateUnion) -> Result<TrueSolutionSet> {
    improved_hs_with(union, ClusterOptions::default()).map(|(set, _)| set)
}

pub fn improved_hs_with(union: &CandidateUnion, options: ClusterOptions) -> Result<(TrueSolutionSet, ClusterState)> {
    let h = union.num_groups();
    if union.per_group.iter().any(|c| c.is_empty()) {
        return Err(Error::EmptyInput("every group needs at least one candidate"));
    }
    if h == 0 {
        return Err(Error::EmptyInput("no candidate groups"));
    }
    if h == 1 {
        if !options.allow_single_group {
            return Err(Error::Precondition("clustering needs at least two groups".into()));
        }
        let best = nearest(&union.per_group[0].angles_deg, 0.0);
        let state = ClusterState {
            clusters: vec![Cluster::singleton(best, 0)],
            merges: 0,
        };
        return Ok((finish(vec![best], options), state));
    }

    let mut clusters: Vec<Cluster> = union
        .per_group
        .iter()
        .enumerate()
        .flat_map(|(g, set)| set.angles_deg.iter().map(move |&a| Cluster::singleton(a, g)))
        .collect();
    let mut merges = 0;

    loop {
        assert!(clusters.len() >= 2, "full agglomeration always spans every group");
        let (a, b) = closest_pair(&clusters);
        let absorbed = clusters.remove(b);
        clusters[a].absorb(absorbed);
        merges += 1;
        if clusters[a].distinct_groups() == h {
            let winner = &clusters[a];
            let picks = (0..h)
                .map(|g| {
                    let members: Vec<f64> = winner
                        .angles_deg
                        .iter()
                        .zip(&winner.groups)
                        .filter(|(_, &mg)| mg == g)
                        .map(|(&x, _)| x)
                        .collect();
                    nearest(&members, winner.centroid_deg)
                })
                .collect();
            return Ok((finish(picks, options), ClusterState { clusters, merges }));
        }
    }
}

/// Pair `(a, b)`, `a < b`, with the smallest centroid gap; ties go to the
/// smaller `a`, then the smaller `b`.
fn closest_pair(clusters: &[Cluster]) -> (usize, usize) {
    let mut best = (0, 1);
    let mut best_d = f64::INFINITY;
    for a in 0..clusters.len() {
        for b in a + 1..clusters.len() {
            let d = (clusters[a].centroid_deg - clusters[b].centroid_deg).abs();
            if d < best_d {
                best_d = d;
                best = (a, b);
            }
        }
    }
    best
}

/// Member closest to `target`; ties go to the smaller angle.
pub(crate) fn nearest(values: &[f64], target: f64) -> f64 {
    values
        .iter()
        .copied()
        .min_by(|x, y| {
            (x - target)
                .abs()
                .total_cmp(&(y - target).abs())
                .then(x.total_cmp(y))
        })
        .expect("nonempty candidate list")
}

fn finish(angles_deg: Vec<f64>, options: ClusterOptions) -> TrueSolutionSet {
    let lo = angles_deg.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = angles_deg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let spread = hi - lo;
    TrueSolutionSet {
        source_group: (0..angles_deg.len()).collect(),
        angles_deg,
        spread_deg: spread,
        low_confidence: spread >= options.spread_gate_deg,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::{candidate_union, CandidateSet};

    fn union(groups: &[&[f64]]) -> CandidateUnion {
        candidate_union(
            groups
                .iter()
                .enumerate()
                .map(|(h, a)| {
                    let mut v = a.to_vec();
                    v.sort_by(f64::total_cmp);
                    CandidateSet {
                        group_index: h,
                        sin_values: v.iter().map(|x| x.to_radians().sin()).collect(),
                        angles_deg: v,
                    }
                })
                .collect(),
        )
    }

    #[test]
    fn constructed_separation() {
        let u = union(&[&[41.0, -10.0, 70.0], &[41.1, 0.0, -50.0], &[40.9, 20.0, -70.0]]);
        let t = improved_hs(&u).unwrap();
        assert_eq!(t.angles_deg, vec![41.0, 41.1, 40.9]);
        assert!(!t.low_confidence);
        assert!((t.spread_deg - 0.2).abs() < 1e-12);
    }

    #[test]
    fn identical_groups_are_deterministic() {
        let u = union(&[&[-30.0, 10.0, 50.0], &[-30.0, 10.0, 50.0], &[-30.0, 10.0, 50.0]]);
        let a = improved_hs(&u).unwrap();
        let b = improved_hs(&u).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.angles_deg.len(), 3);
        assert!(a.angles_deg.iter().all(|&x| x == a.angles_deg[0]));
        assert_eq!(a.angles_deg[0], -30.0);
    }

    #[test]
    fn resolves_duplicate_group_members_by_centroid() {
        // Group 0 contributes two members to the winning cluster.
        let u = union(&[&[10.0, 10.1], &[10.4, -60.0]]);
        let (t, state) = improved_hs_with(&u, ClusterOptions::default()).unwrap();
        // {10.0, 10.1} merge first, then absorb 10.4; centroid 10.1667.
        assert_eq!(t.angles_deg, vec![10.1, 10.4]);
        assert_eq!(state.merges, 2);
    }

    #[test]
    fn wide_selection_is_flagged() {
        let u = union(&[&[0.0], &[30.0]]);
        let t = improved_hs(&u).unwrap();
        assert!(t.low_confidence);
    }

    #[test]
    fn single_group_requires_opt_in() {
        let u = union(&[&[-20.0, 3.0, 40.0]]);
        assert!(matches!(improved_hs(&u), Err(Error::Precondition(_))));
        let opts = ClusterOptions {
            allow_single_group: true,
            ..ClusterOptions::default()
        };
        let (t, _) = improved_hs_with(&u, opts).unwrap();
        assert_eq!(t.angles_deg, vec![3.0]);
    }

    #[test]
    fn empty_group_is_rejected() {
        let u = union(&[&[1.0], &[]]);
        assert!(improved_hs(&u).is_err());
    }

    #[test]
    fn nearest_tie_goes_to_smaller() {
        assert_eq!(nearest(&[2.0, 0.0], 1.0), 0.0);
    }
}
