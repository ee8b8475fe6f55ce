use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Grid cells are keyed on at most this many leading coordinates.
const GRID_KEY_DIMS: usize = 3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Linear ℓ∞ scan.
    #[default]
    Exact,
    /// ℓ∞ scan restricted to neighboring grid cells on the leading coordinates.
    Grid,
}

impl BackendKind {
    pub fn tag(self) -> u8 {
        match self {
            BackendKind::Exact => 0,
            BackendKind::Grid => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        match tag {
            0 => Ok(BackendKind::Exact),
            1 => Ok(BackendKind::Grid),
            _ => Err(invalid(format!("unknown backend tag {tag}"))),
        }
    }
}

/// ℓ∞ near-neighbor oracle with a fixed radius. Both implementations are
/// exact, so the approximation factor is 1: the answer is the ℓ∞-nearest
/// stored point (ties to the smallest index) if it lies within the radius.
#[derive(Clone, Debug, PartialEq)]
pub struct LinfBackend<T> {
    kind: BackendKind,
    data: Vec<T>,
    d: usize,
    radius: T,
    cells: BTreeMap<Vec<i64>, Vec<u32>>,
}

fn linf<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |m, (&x, &y)| m.max((x - y).abs()))
}

impl<T: Scalar> LinfBackend<T> {
    /// Loads `data` (row-major, `d` columns).
    pub fn new(kind: BackendKind, data: Vec<T>, d: usize, radius: T) -> Result<Self> {
        if d == 0 || !data.len().is_multiple_of(d) {
            return Err(invalid("backend data is not a whole number of rows"));
        }
        if !(radius > T::zero()) || !radius.is_finite() {
            return Err(invalid(format!("backend radius must be positive, got {radius}")));
        }
        let mut backend = LinfBackend { kind, data, d, radius, cells: BTreeMap::new() };
        if kind == BackendKind::Grid {
            for i in 0..backend.len() {
                let key = backend.cell_of(backend.row(i));
                backend.cells.entry(key).or_default().push(i as u32);
            }
        }
        Ok(backend)
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    /// Declared approximation factor.
    pub fn c_backend(&self) -> f64 {
        1.0
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    fn cell_of(&self, v: &[T]) -> Vec<i64> {
        v.iter()
            .take(GRID_KEY_DIMS)
            .map(|&x| (x / self.radius).floor().to_i64().unwrap_or(if x > T::zero() { i64::MAX } else { i64::MIN }))
            .collect()
    }

    /// Index of a stored point within ℓ∞ distance `radius` of `q`, with that
    /// distance.
    pub fn query(&self, q: &[T]) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        let mut consider = |i: usize| {
            let dist = linf(self.row(i), q);
            if dist <= self.radius && best.is_none_or(|(bi, bd)| dist < bd || (dist == bd && i < bi)) {
                best = Some((i, dist));
            }
        };
        match self.kind {
            BackendKind::Exact => (0..self.len()).for_each(&mut consider),
            BackendKind::Grid => {
                let center = self.cell_of(q);
                let mut keys = vec![Vec::with_capacity(center.len())];
                for &c in &center {
                    keys = keys
                        .into_iter()
                        .flat_map(|k: Vec<i64>| {
                            (-1..=1).map(move |s| {
                                let mut k = k.clone();
                                k.push(c.saturating_add(s));
                                k
                            })
                        })
                        .collect();
                }
                for key in keys {
                    if let Some(ids) = self.cells.get(&key) {
                        ids.iter().for_each(|&i| consider(i as usize));
                    }
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_and_grid_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 5;
        let data: Vec<f64> = (0..300 * d).map(|_| rng.random_range(-10.0..10.0)).collect();
        let exact = LinfBackend::new(BackendKind::Exact, data.clone(), d, 1.5).unwrap();
        let grid = LinfBackend::new(BackendKind::Grid, data, d, 1.5).unwrap();
        for _ in 0..200 {
            let q: Vec<f64> = (0..d).map(|_| rng.random_range(-11.0..11.0)).collect();
            assert_eq!(exact.query(&q), grid.query(&q));
        }
    }

    #[test]
    fn radius_is_inclusive_and_far_is_null() {
        let b = LinfBackend::new(BackendKind::Exact, vec![0.0, 0.0, 3.0, 1.0], 2, 2.0).unwrap();
        assert_eq!(b.query(&[1.0, 2.0]), Some((0, 2.0)));
        assert_eq!(b.query(&[10.0, 0.0]), None);
        assert_eq!(b.query(&[3.0, 1.0]), Some((1, 0.0)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(LinfBackend::new(BackendKind::Exact, vec![0.0; 3], 2, 1.0).is_err());
        assert!(LinfBackend::new(BackendKind::Grid, vec![0.0; 2], 2, 0.0).is_err());
        assert!(BackendKind::from_tag(7).is_err());
    }
}
