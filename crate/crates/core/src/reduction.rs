//! Reduction from approximate nearest neighbor to near-neighbor oracles: a
//! geometric ladder of radii and a binary search over its rungs.

use crate::error::{invalid, Result};
use crate::stats::SetStats;

/// Descending radii `diam, diam/2, …` down to the first rung at or below
/// `min_dist`, i.e. `⌈log₂ Δ⌉ + 1` rungs, plus one more halved rung when
/// `extra_half_rung` is set.
pub fn ladder_radii(stats: &SetStats, extra_half_rung: bool) -> Vec<f64> {
    let mut radii = vec![stats.diam];
    let floor = stats.min_dist * (1.0 + 1e-12);
    while *radii.last().unwrap() > floor {
        radii.push(radii.last().unwrap() / 2.0);
    }
    if extra_half_rung {
        radii.push(radii.last().unwrap() / 2.0);
    }
    radii
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusLadder {
    radii: Vec<f64>,
}

impl RadiusLadder {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(invalid("ladder needs at least one rung"));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) || radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("ladder radii must be positive, finite and strictly descending"));
        }
        Ok(RadiusLadder { radii })
    }

    pub fn from_stats(stats: &SetStats, extra_half_rung: bool) -> Self {
        RadiusLadder { radii: ladder_radii(stats, extra_half_rung) }
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Upper bound on oracle calls made by [`ann_via_ladder`] when the rung
    /// oracles are monotone.
    pub fn invocation_budget(&self) -> usize {
        ceil_log2(self.len()) + 2
    }
}

fn ceil_log2(n: usize) -> usize {
    n.next_power_of_two().trailing_zeros() as usize
}

#[derive(Clone, Debug, PartialEq)]
pub struct LadderSearch<A> {
    /// Answer of the smallest non-null rung found, if any.
    pub answer: Option<A>,
    /// Index of that rung (0 is the largest radius).
    pub rung: Option<usize>,
    pub invocations: usize,
    /// The search met non-monotone answers and rescanned every rung.
    pub linear_fallback: bool,
}

/// Binary search for the smallest rung whose oracle answers. A non-null
/// answer at rung `j` is assumed to imply non-null at every larger radius;
/// the rung just above the result is re-queried when it was not probed, and
/// any inconsistency (including all probes null) falls back to
/// [`ann_via_linear_scan`].
pub fn ann_via_ladder<A>(ladder: &RadiusLadder, mut query: impl FnMut(usize) -> Option<A>) -> LadderSearch<A> {
    let rungs = ladder.len();
    let mut invocations = 0;
    let mut probed = vec![false; rungs];
    let (mut lo, mut hi): (isize, isize) = (-1, rungs as isize);
    let mut best = None;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        invocations += 1;
        probed[mid as usize] = true;
        match query(mid as usize) {
            Some(a) => {
                best = Some(a);
                lo = mid;
            }
            None => hi = mid,
        }
    }
    let consistent = if lo < 0 {
        false
    } else if lo >= 1 && !probed[lo as usize - 1] {
        invocations += 1;
        query(lo as usize - 1).is_some()
    } else {
        true
    };
    if consistent {
        return LadderSearch { answer: best, rung: Some(lo as usize), invocations, linear_fallback: false };
    }
    let mut scan = ann_via_linear_scan(ladder, query);
    scan.invocations += invocations;
    scan.linear_fallback = true;
    scan
}

/// Queries rungs from the smallest radius upward and returns the first
/// non-null answer.
pub fn ann_via_linear_scan<A>(ladder: &RadiusLadder, mut query: impl FnMut(usize) -> Option<A>) -> LadderSearch<A> {
    let mut invocations = 0;
    for j in (0..ladder.len()).rev() {
        invocations += 1;
        if let Some(a) = query(j) {
            return LadderSearch { answer: Some(a), rung: Some(j), invocations, linear_fallback: false };
        }
    }
    LadderSearch { answer: None, rung: None, invocations, linear_fallback: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stats(diam: f64, min_dist: f64) -> SetStats {
        SetStats { diam, min_dist, aspect_ratio: diam / min_dist, ddim_est: 1.0 }
    }

    #[test]
    fn radii_examples() {
        assert_eq!(ladder_radii(&stats(16.0, 1.0), false), vec![16.0, 8.0, 4.0, 2.0, 1.0]);
        assert_eq!(ladder_radii(&stats(16.0, 1.0), true), vec![16.0, 8.0, 4.0, 2.0, 1.0, 0.5]);
        assert_eq!(ladder_radii(&stats(3.0, 3.0), false), vec![3.0]);
        assert_eq!(ladder_radii(&stats(1000.0, 1.0), false).len(), 11);
        let r = ladder_radii(&stats(7.3, 0.01), false);
        assert_eq!(r.len(), (730f64).log2().ceil() as usize + 1);
        assert!(r.windows(2).all(|w| w[0] == 2.0 * w[1]));
    }

    #[test]
    fn finds_smallest_answering_rung() {
        let ladder = RadiusLadder::new(vec![16.0, 8.0, 4.0, 2.0, 1.0]).unwrap();
        let opt = 3.0;
        let out = ann_via_ladder(&ladder, |j| (ladder.radii()[j] >= opt).then_some(ladder.radii()[j]));
        assert_eq!(out.rung, Some(2));
        assert_eq!(out.answer, Some(4.0));
        assert!(out.invocations <= ladder.invocation_budget());
        assert!(!out.linear_fallback);
    }

    #[test]
    fn single_rung_is_one_query() {
        let ladder = RadiusLadder::new(vec![5.0]).unwrap();
        let out = ann_via_ladder(&ladder, |_| Some(1));
        assert_eq!((out.rung, out.invocations), (Some(0), 1));
    }

    #[test]
    fn every_threshold_within_budget() {
        for rungs in 1..40 {
            let radii: Vec<f64> = (0..rungs).map(|j| 2f64.powi(-j)).collect();
            let ladder = RadiusLadder::new(radii).unwrap();
            for cut in 0..rungs as usize {
                let out = ann_via_ladder(&ladder, |j| (j <= cut).then_some(j));
                assert_eq!(out.rung, Some(cut));
                assert!(out.invocations <= ladder.invocation_budget(), "{rungs} {cut}");
                assert!(!out.linear_fallback);
            }
        }
    }

    #[test]
    fn inconsistent_oracles_fall_back() {
        let ladder = RadiusLadder::new(vec![8.0, 4.0, 2.0, 1.0, 0.5]).unwrap();
        // Only rung 3 answers: the binary search lands on it but rung 2 is null.
        let out = ann_via_ladder(&ladder, |j| (j == 3).then_some(j));
        assert!(out.linear_fallback);
        assert_eq!(out.rung, Some(3));
        let none = ann_via_ladder(&ladder, |_| None::<usize>);
        assert!(none.linear_fallback);
        assert_eq!(none.answer, None);
    }

    #[test]
    fn rejects_bad_ladders() {
        assert!(RadiusLadder::new(vec![]).is_err());
        assert!(RadiusLadder::new(vec![1.0, 2.0]).is_err());
        assert!(RadiusLadder::new(vec![1.0, 0.0]).is_err());
    }
}
