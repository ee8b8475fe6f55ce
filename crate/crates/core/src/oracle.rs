//! Exact brute-force answers: the ground truth every approximate path is
//! measured against.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pointset::PointSet;
use crate::scalar::Scalar;

/// Exact nearest neighbor by linear scan; ties go to the smallest id.
pub fn brute_force_nn<T: Scalar>(set: &PointSet<T>, q: &[T]) -> Result<(usize, T)> {
    set.check_query(q)?;
    Ok(nn_unchecked(set, q))
}

pub(crate) fn nn_unchecked<T: Scalar>(set: &PointSet<T>, q: &[T]) -> (usize, T) {
    let mut best = (0, set.dist_to(0, q));
    for id in 1..set.len() {
        let d = set.dist_to(id, q);
        if d < best.1 {
            best = (id, d);
        }
    }
    best
}

/// Exact near-neighbor oracle (approximation factor 1): some point within
/// distance `r` of `q` (boundary inclusive), or `None`. The point returned is
/// the nearest one, ties to the smallest id.
pub fn brute_force_near<T: Scalar>(set: &PointSet<T>, q: &[T], r: T) -> Result<Option<usize>> {
    if !(r > T::zero()) || !r.is_finite() {
        return Err(invalid(format!("radius must be positive and finite, got {r}")));
    }
    let (id, d) = brute_force_nn(set, q)?;
    Ok((d <= r).then_some(id))
}

/// Outcome of one query, with the distance recomputed from coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceReport {
    pub query_id: usize,
    pub returned_id: Option<usize>,
    pub dist: f64,
    pub opt_dist: f64,
    /// `dist / opt_dist`; `None` when nothing was returned. Infinite when the
    /// query coincides with a database point that was not returned.
    pub ratio: Option<f64>,
}

impl DistanceReport {
    /// Recomputes the returned distance and the exact optimum from scratch.
    pub fn evaluate<T: Scalar>(
        set: &PointSet<T>,
        query_id: usize,
        q: &[T],
        returned_id: Option<usize>,
    ) -> Result<Self> {
        let (_, opt) = brute_force_nn(set, q)?;
        let opt_dist = opt.as_f64();
        let dist = match returned_id {
            Some(id) => set.dist_to(id, q).as_f64(),
            None => f64::NAN,
        };
        Ok(DistanceReport { query_id, returned_id, dist, opt_dist, ratio: ratio_of(returned_id, dist, opt_dist) })
    }
}

pub fn ratio_of(returned_id: Option<usize>, dist: f64, opt: f64) -> Option<f64> {
    returned_id?;
    Some(if opt > 0.0 {
        (dist / opt).max(1.0)
    } else if dist == 0.0 {
        1.0
    } else {
        f64::INFINITY
    })
}
