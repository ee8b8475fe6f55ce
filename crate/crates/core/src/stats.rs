//! Dataset statistics: diameter, minimum separation, aspect ratio and a
//! cover-based doubling-dimension estimate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pointset::PointSet;
use crate::scalar::Scalar;

/// Centers sampled for the doubling-dimension estimate.
const DDIM_CENTERS: usize = 16;
/// Sets up to this size use every point as a center.
const DDIM_ALL_CENTERS: usize = 64;
/// Radii tried per center.
const DDIM_RADII: usize = 16;
/// Cap on the number of ball members fed to one greedy cover.
const DDIM_BALL_CAP: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetStats {
    pub diam: f64,
    pub min_dist: f64,
    pub aspect_ratio: f64,
    /// Estimate only: the largest log2 greedy cover count seen over the
    /// sampled balls.
    pub ddim_est: f64,
}

impl SetStats {
    /// Ceiling of the estimate, at least 1.
    pub fn ddim_ceil(&self) -> u32 {
        (self.ddim_est.ceil() as u32).max(1)
    }
}

/// Exact diameter and minimum inter-point distance by quadratic scan, plus
/// the doubling-dimension estimate. Requires at least two points.
pub fn set_stats<T: Scalar>(set: &PointSet<T>) -> Result<SetStats> {
    if set.len() < 2 {
        return Err(invalid("set_stats needs at least two points"));
    }
    let (min_dist, diam) = extremes(set);
    let ddim_est = ddim_estimate(set, min_dist, diam);
    Ok(SetStats { diam, min_dist, aspect_ratio: diam / min_dist, ddim_est })
}

fn extremes<T: Scalar>(set: &PointSet<T>) -> (f64, f64) {
    let n = set.len();
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut lo = f64::INFINITY;
            let mut hi = 0.0f64;
            for j in i + 1..n {
                let d = set.dist(i, j).as_f64();
                lo = lo.min(d);
                hi = hi.max(d);
            }
            (lo, hi)
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| (a.0.min(b.0), a.1.max(b.1)))
}

/// `max log₂(count)` over sampled balls `B(x, R)`, where `count` is the size
/// of a greedy `R/2`-cover of the ball by data points (points visited in
/// order of distance from `x`). A greedy cover is never smaller than the
/// minimum one, so on the sampled balls this over-approximates the doubling
/// constant. Small sets use every point as a center and every distance as a
/// radius; larger ones use strided centers, quantile radii and subsampled
/// balls.
pub fn ddim_estimate<T: Scalar>(set: &PointSet<T>, min_dist: f64, diam: f64) -> f64 {
    let n = set.len();
    if n < 2 || !(min_dist > 0.0) || !(diam > 0.0) {
        return 0.0;
    }
    let centers: Vec<usize> = if n <= DDIM_ALL_CENTERS {
        (0..n).collect()
    } else {
        let stride = n / DDIM_CENTERS;
        (0..n).step_by(stride).take(DDIM_CENTERS).collect()
    };
    centers
        .par_iter()
        .map(|&x| {
            let mut by_dist: Vec<(f64, usize)> = (0..n).map(|y| (set.dist(x, y).as_f64(), y)).collect();
            by_dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let step = if n <= DDIM_ALL_CENTERS { 1 } else { (n - 1).div_ceil(DDIM_RADII) };
            let mut best = 0.0f64;
            for k in (1..n).step_by(step).chain([n - 1]) {
                let radius = by_dist[k].0;
                let inside = by_dist.partition_point(|&(d, _)| d <= radius);
                let ball = &by_dist[..inside];
                let sub = ball.len().div_ceil(DDIM_BALL_CAP).max(1);
                let mut cover: Vec<usize> = Vec::new();
                for &(_, y) in ball.iter().step_by(sub) {
                    if cover.iter().all(|&z| set.dist(y, z).as_f64() > radius / 2.0) {
                        cover.push(y);
                    }
                }
                best = best.max((cover.len() as f64).log2());
            }
            best
        })
        .reduce(|| 0.0, f64::max)
}

/// Packing bound `(2·diam/α)^⌈ddim⌉` for a set with minimum separation α.
pub fn packing_bound(diam: f64, alpha: f64, ddim_ceil: u32) -> f64 {
    (2.0 * diam / alpha).max(1.0).powi(ddim_ceil as i32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::PNorm;

    fn line(xs: &[f64]) -> PointSet<f64> {
        PointSet::from_rows(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>(), PNorm::new(3.0).unwrap()).unwrap()
    }

    #[test]
    fn line_stats() {
        let s = set_stats(&line(&[0.0, 1.0, 3.0])).unwrap();
        assert_eq!((s.diam, s.min_dist, s.aspect_ratio), (3.0, 1.0, 3.0));
    }

    #[test]
    fn two_points_have_ddim_at_most_one() {
        let s = set_stats(&line(&[0.0, 5.0])).unwrap();
        assert!(s.ddim_est <= 1.0, "{}", s.ddim_est);
    }

    #[test]
    fn near_equilateral_triple_needs_three_balls() {
        let set = PointSet::from_rows(
            &[vec![-1.125, -5.25], vec![3.0, 0.75], vec![3.625, -6.25], vec![2.625, -7.25]],
            PNorm::new(3.688).unwrap(),
        )
        .unwrap();
        let s = set_stats(&set).unwrap();
        assert!(s.ddim_est >= 3f64.log2(), "{}", s.ddim_est);
    }

    #[test]
    fn single_point_rejected() {
        assert!(set_stats(&line(&[1.0])).is_err());
    }

    #[test]
    fn packing_bound_examples() {
        assert_eq!(packing_bound(4.0, 1.0, 2), 64.0);
        assert_eq!(packing_bound(0.1, 1.0, 3), 1.0);
    }
}
