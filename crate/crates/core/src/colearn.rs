//! Co-learning selection: the FD coarse estimate picks each group's true
//! candidate directly, with no clustering.

use crate::ambiguity::CandidateUnion;
use crate::cluster::nearest;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupChoice {
    pub angle_deg: f64,
    /// `|θ_FD − θ|` in degrees.
    pub residual_deg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoSelection {
    pub theta_fd_deg: f64,
    pub per_group: Vec<GroupChoice>,
}

impl CoSelection {
    pub fn angles_deg(&self) -> Vec<f64> {
        self.per_group.iter().map(|c| c.angle_deg).collect()
    }
}

/// Per group, the candidate with the smallest squared angular distance to
/// `theta_fd_deg`; exact ties go to the smaller angle.
pub fn select_nearest(theta_fd_deg: f64, union: &CandidateUnion) -> Result<CoSelection> {
    if union.per_group.is_empty() {
        return Err(Error::EmptyInput("no candidate groups"));
    }
    let per_group = union
        .per_group
        .iter()
        .map(|set| {
            if set.is_empty() {
                return Err(Error::EmptyInput("every group needs at least one candidate"));
            }
            let angle = nearest(&set.angles_deg, theta_fd_deg);
            Ok(GroupChoice {
                angle_deg: angle,
                residual_deg: (theta_fd_deg - angle).abs(),
            })
        })
        .collect::<Result<_>>()?;
    Ok(CoSelection {
        theta_fd_deg,
        per_group,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::{candidate_union, CandidateSet};
    use proptest::prelude::*;

    fn set(h: usize, angles: &[f64]) -> CandidateSet {
        CandidateSet {
            group_index: h,
            angles_deg: angles.to_vec(),
            sin_values: angles.iter().map(|a| a.to_radians().sin()).collect(),
        }
    }

    #[test]
    fn picks_nearest_candidate() {
        let u = candidate_union(vec![set(0, &[-67.7, -0.6, 41.0])]);
        let s = select_nearest(41.2, &u).unwrap();
        assert_eq!(s.angles_deg(), vec![41.0]);
        assert!((s.per_group[0].residual_deg - 0.2).abs() < 1e-12);
    }

    #[test]
    fn midpoint_tie_goes_to_smaller_angle() {
        let u = candidate_union(vec![set(0, &[10.0, 20.0]), set(1, &[20.0, 10.0])]);
        let s = select_nearest(15.0, &u).unwrap();
        assert_eq!(s.angles_deg(), vec![10.0, 10.0]);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        assert!(select_nearest(0.0, &candidate_union(vec![])).is_err());
        assert!(select_nearest(0.0, &candidate_union(vec![set(0, &[])])).is_err());
    }

    proptest! {
        #[test]
        fn invariant_to_candidate_permutation(
            mut angles in proptest::collection::vec(-90.0f64..90.0, 1..12),
            theta in -90.0f64..90.0,
            seed in any::<u64>(),
        ) {
            let a = select_nearest(theta, &candidate_union(vec![set(0, &angles)])).unwrap();
            let n = angles.len();
            angles.rotate_left((seed % n as u64) as usize);
            angles.reverse();
            let b = select_nearest(theta, &candidate_union(vec![set(0, &angles)])).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
