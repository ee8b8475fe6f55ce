use std::sync::Arc;

use crate::embed::{JlProjection, MazurParams};
use crate::error::{invalid, LpError, Result};
use crate::metric::norm_unchecked;
use crate::pointset::PointSet;
use crate::scalar::Scalar;

/// Euclidean radius of the near-neighbor query in the embedded space.
pub const EMBEDDED_RADIUS: f64 = 2.0;

/// `p·18^{p/2}`, the radius of the ball a bounded near-neighbor oracle works in.
pub fn bnn_c(p: f64) -> Result<f64> {
    if !(p > 2.0) || !p.is_finite() {
        return Err(invalid(format!("bounded near-neighbor oracles need finite p > 2, got {p}")));
    }
    Ok(p * 18f64.powf(p / 2.0))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BnnOutcome<T> {
    /// A member within `c/9` of the query in scaled coordinates; the distance
    /// is in original units.
    Hit {
        id: usize,
        dist: T,
    },
    Null,
    /// The backend found a point but it failed the `c/9` check.
    Rejected,
    /// The scaled query left the `c`-ball; the promise does not apply.
    OutsideBall,
}

impl<T> BnnOutcome<T> {
    pub fn hit(&self) -> Option<usize> {
        match self {
            BnnOutcome::Hit { id, .. } => Some(*id),
            _ => None,
        }
    }
}

/// c-bounded near-neighbor oracle over a subset of the data. Members are
/// translated by `−center`, multiplied by `scale`, pushed through the scaled
/// Mazur map (bound `c`) and a JL projection, and searched with an exact
/// Euclidean scan at radius 2. Answers farther than `c/9` in scaled ℓ_p
/// distance are discarded.
#[derive(Clone, Debug, PartialEq)]
pub struct BnnOracle<T> {
    set: Arc<PointSet<T>>,
    members: Vec<usize>,
    center: Vec<T>,
    scale: T,
    c: T,
    mazur: MazurParams<T>,
    jl: JlProjection<T>,
    /// Row-major images of the members; computed on demand when absent.
    embedded: Option<Vec<T>>,
}

impl<T: Scalar> BnnOracle<T> {
    /// `scale` maps original coordinates: a member `x` is seen as
    /// `(x − center)·scale`, which must have ℓ_p magnitude at most `c`.
    pub fn new(set: Arc<PointSet<T>>, members: Vec<usize>, center: Vec<T>, scale: T, c: T, seed: u64) -> Result<Self> {
        let p = set.norm().above_two()?;
        set.check_query(&center)?;
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(invalid(format!("oracle scale must be positive, got {scale}")));
        }
        let mazur = MazurParams::new(p, c)?;
        let jl = JlProjection::new(members.len(), set.dim(), seed);
        let oracle = BnnOracle { set, members, center, scale, c, mazur, jl, embedded: None };
        let slack = T::lit(1.0 + 1e-9);
        for &x in &oracle.members {
            if x >= oracle.set.len() {
                return Err(invalid(format!("member id {x} out of range")));
            }
            let norm = norm_unchecked(&oracle.scaled(oracle.set.point(x)), oracle.set.norm());
            if norm > c * slack {
                return Err(LpError::OutsideBall { norm: norm.as_f64(), bound: c.as_f64() });
            }
        }
        Ok(oracle)
    }

    /// Stores the embedded members so queries skip recomputing them.
    pub fn materialize(&mut self) {
        if self.embedded.is_none() {
            let mut rows = Vec::with_capacity(self.members.len() * self.jl.target_dim());
            for &x in &self.members {
                rows.extend(self.embed(self.set.point(x)));
            }
            self.embedded = Some(rows);
        }
    }

    pub fn is_materialized(&self) -> bool {
        self.embedded.is_some()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn mazur(&self) -> &MazurParams<T> {
        &self.mazur
    }

    pub fn jl(&self) -> &JlProjection<T> {
        &self.jl
    }

    /// Embedded dimension.
    pub fn embedded_dim(&self) -> usize {
        self.jl.target_dim()
    }

    /// `(v − center)·scale`.
    pub fn scaled(&self, v: &[T]) -> Vec<T> {
        v.iter().zip(&self.center).map(|(&a, &b)| (a - b) * self.scale).collect()
    }

    /// Mazur then JL image of an original-coordinate vector.
    pub fn embed(&self, v: &[T]) -> Vec<T> {
        self.jl.apply_unchecked(&self.mazur.map_unchecked(&self.scaled(v), true))
    }

    /// Embedded image of member `i` (an index into [`members`](Self::members)).
    pub fn embedded_member(&self, i: usize) -> Vec<T> {
        match &self.embedded {
            Some(rows) => {
                let k = self.embedded_dim();
                rows[i * k..(i + 1) * k].to_vec()
            }
            None => self.embed(self.set.point(self.members[i])),
        }
    }

    /// Scaled ℓ_p distance between member `id` and an original-coordinate query.
    pub fn scaled_dist(&self, id: usize, q: &[T]) -> T {
        self.set.dist_to(id, q) * self.scale
    }

    pub fn query(&self, q: &[T]) -> Result<BnnOutcome<T>> {
        self.set.check_query(q)?;
        Ok(self.query_unchecked(q))
    }

    pub(crate) fn query_unchecked(&self, q: &[T]) -> BnnOutcome<T> {
        if self.members.is_empty() {
            return BnnOutcome::Null;
        }
        let qs = self.scaled(q);
        if norm_unchecked(&qs, self.set.norm()) > self.c * T::lit(1.0 + 1e-9) {
            return BnnOutcome::OutsideBall;
        }
        let e = self.jl.apply_unchecked(&self.mazur.map_unchecked(&qs, true));
        let radius2 = T::lit(EMBEDDED_RADIUS * EMBEDDED_RADIUS);
        let k = self.embedded_dim();
        let mut best: Option<(usize, T)> = None;
        let mut consider = |i: usize, row: &[T]| {
            let d2: T = row.iter().zip(&e).map(|(&a, &b)| (a - b) * (a - b)).sum();
            if d2 <= radius2 && best.is_none_or(|(_, bd)| d2 < bd) {
                best = Some((i, d2));
            }
        };
        match &self.embedded {
            Some(rows) => rows.chunks_exact(k).enumerate().for_each(|(i, row)| consider(i, row)),
            None => {
                for (i, &x) in self.members.iter().enumerate() {
                    consider(i, &self.embed(self.set.point(x)));
                }
            }
        }
        let Some((i, _)) = best else { return BnnOutcome::Null };
        let id = self.members[i];
        let dist = self.set.dist_to(id, q);
        if dist * self.scale <= self.c / T::lit(9.0) {
            BnnOutcome::Hit { id, dist }
        } else {
            BnnOutcome::Rejected
        }
    }
}
