use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{level_radius, Level, NetHierarchy};
use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Candidate radius in units of `2^i`.
pub const CANDIDATE_RADIUS_FACTOR: f64 = 4.5;

/// `⌈log₂ 4c⌉`: how many levels below `S_{i-1}` the candidate descendants live.
pub fn descent_depth(c: f64) -> Level {
    (4.0 * c).log2().ceil() as Level
}

/// The point set `N(t, i)` consulted when the descent sits at node `t` on
/// level `i`, together with the affine map that puts it in the c-ball.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet<T> {
    /// Owner node `t` (a point id).
    pub node: usize,
    pub level: Level,
    /// Ascending point ids.
    pub members: Vec<usize>,
    /// `c / (4.5·2^i)`, in normalized units.
    pub scale: T,
}

impl<T: Scalar> CandidateSet<T> {
    /// `4.5·2^i` in normalized units.
    pub fn radius(&self) -> T {
        T::lit(CANDIDATE_RADIUS_FACTOR) * level_radius(self.level)
    }

    /// Level the descendants are taken from.
    pub fn descendant_level(&self, c: f64) -> Level {
        (self.level - descent_depth(c)).max(0)
    }

    /// Member `x` after translating by `−t` and scaling, as seen by the oracle.
    pub fn scaled_member(&self, h: &NetHierarchy<T>, x: usize) -> Vec<T> {
        let pts = h.points();
        pts.point(x).iter().zip(pts.point(self.node)).map(|(&a, &b)| (a - b) * self.scale).collect()
    }
}

/// Candidate sets for every node `t ∈ S_i`, `i ≥ 1`: the points of `S_{i-1}`
/// within `4.5·2^i` of `t`, plus their descendants on level
/// `k = max(0, i − ⌈log₂ 4c⌉)` that are also within `4.5·2^i`.
pub fn build_candidate_sets<T: Scalar>(
    h: &NetHierarchy<T>,
    c: f64,
) -> Result<BTreeMap<(usize, Level), CandidateSet<T>>> {
    if !(c > 1.0) || !c.is_finite() {
        return Err(invalid(format!("candidate sets need finite c > 1, got {c}")));
    }
    let depth = descent_depth(c);
    let mut out = BTreeMap::new();
    for level in 1..=h.top_level() {
        let below = h.level_members(level - 1);
        let k = (level - depth).max(0);
        let radius = T::lit(CANDIDATE_RADIUS_FACTOR) * level_radius(level);
        let scale = T::lit(c) / radius;
        let sets: Vec<CandidateSet<T>> = h
            .level_members(level)
            .par_iter()
            .map(|&t| {
                let mut members = Vec::new();
                for &y in &below {
                    if h.dist(y, t) <= radius {
                        members
                            .extend(h.descendants_at(y, level - 1, k).into_iter().filter(|&x| h.dist(x, t) <= radius));
                    }
                }
                members.sort_unstable();
                members.dedup();
                CandidateSet { node: t, level, members, scale }
            })
            .collect();
        for set in sets {
            out.insert((set.node, level), set);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::tests::line;
    use super::*;

    #[test]
    fn depth_and_scale() {
        assert_eq!(descent_depth(1296.0), 13);
        assert_eq!(descent_depth(2.0), 3);
        let h = NetHierarchy::build(&line(&(0..40).map(|x| x as f64).collect::<Vec<_>>()));
        let sets = build_candidate_sets(&h, 1296.0).unwrap();
        let s = &sets[&(0, 3)];
        assert_eq!(s.scale, 36.0);
        assert_eq!(s.radius(), 36.0);
    }

    #[test]
    fn isolated_node_keeps_itself_and_descendants() {
        // Two far clusters: the cluster at 1000 sees nothing of the other one
        // until the top levels.
        let h = NetHierarchy::build(&line(&[0.0, 1.0, 1000.0, 1001.0]));
        let sets = build_candidate_sets(&h, 4.0).unwrap();
        let s = &sets[&(2, 1)];
        assert_eq!(s.members, vec![2, 3]);
    }

    #[test]
    fn rejects_small_c() {
        let h = NetHierarchy::build(&line(&[0.0, 1.0]));
        assert!(build_candidate_sets(&h, 1.0).is_err());
        assert!(build_candidate_sets(&h, f64::NAN).is_err());
    }

    #[test]
    fn scaled_magnitudes_stay_in_ball() {
        let xs: Vec<f64> = (0..60).map(|i| ((i * 37) % 61) as f64 * 1.7).collect();
        let h = NetHierarchy::build(&line(&xs));
        let c = 6.0;
        for s in build_candidate_sets(&h, c).unwrap().values() {
            for &x in &s.members {
                let v = s.scaled_member(&h, x);
                assert!(v[0].abs() <= c * (1.0 + 1e-12));
            }
        }
    }
}
