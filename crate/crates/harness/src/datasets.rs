//! Synthetic datasets with query batches.

use lpann_core::seed::{derive_seed, rng_from};
use lpann_core::{brute_force_nn, LpanFile, PNorm, PointSet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    Gaussian,
    /// Every query has one planted neighbor at distance `planted_distance`;
    /// all other points are at least ten times farther.
    Planted,
    /// Points on a random `manifold_dim`-dimensional affine subspace plus
    /// Gaussian noise.
    LowdimManifold,
    /// The first `n` lattice points of `{0, 1, …}^d` in lexicographic order.
    Grid,
}

impl std::str::FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| format!("unknown dataset kind {s:?} (gaussian, planted, lowdim-manifold, grid)"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub n: usize,
    pub d: usize,
    pub p: f64,
    pub seed: u64,
    pub queries: usize,
    pub planted_distance: f64,
    pub manifold_dim: usize,
    pub noise: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            kind: DatasetKind::Gaussian,
            n: 1000,
            d: 16,
            p: 3.0,
            seed: 0,
            queries: 100,
            planted_distance: 1.0,
            manifold_dim: 2,
            noise: 1e-3,
        }
    }
}

/// Ground truth recorded by the planted generator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub id: usize,
    pub dist: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub points: PointSet<f64>,
    pub queries: Vec<Vec<f64>>,
    pub truth: Option<Vec<PlantedTruth>>,
}

impl Dataset {
    pub fn queries_lpan(&self) -> Result<LpanFile> {
        Ok(LpanFile::from_rows(&self.queries, self.points.dim(), self.points.norm())?)
    }
}

/// Generates the points and queries described by `spec`. Equal specs give
/// identical datasets.
pub fn gen_dataset(spec: &DatasetSpec) -> Result<Dataset> {
    if spec.n == 0 || spec.d == 0 {
        return Err(config_err("dataset needs n ≥ 1 and d ≥ 1"));
    }
    let norm = PNorm::new(spec.p)?;
    let mut prng = rng_from(derive_seed(spec.seed, "points", 0));
    let mut qrng = rng_from(derive_seed(spec.seed, "queries", 0));
    let (n, d, m) = (spec.n, spec.d, spec.queries);
    let mut truth = None;
    let (rows, queries) = match spec.kind {
        DatasetKind::Gaussian => (normal_rows(&mut prng, n, d, 1.0), normal_rows(&mut qrng, m, d, 1.0)),
        DatasetKind::Grid => {
            let side = grid_side(n, d);
            let rows = (0..n).map(|i| lattice_point(i, side, d)).collect();
            let hi = side as f64 - 0.5;
            let queries = (0..m).map(|_| (0..d).map(|_| qrng.random_range(-0.5..hi)).collect()).collect();
            (rows, queries)
        }
        DatasetKind::LowdimManifold => {
            let k = spec.manifold_dim;
            if k == 0 || k > d {
                return Err(config_err(format!("manifold_dim must be in 1..={d}, got {k}")));
            }
            if !(spec.noise >= 0.0) {
                return Err(config_err("noise must be non-negative"));
            }
            let origin = normal_rows(&mut prng, 1, d, 1.0).remove(0);
            let basis = normal_rows(&mut prng, k, d, 1.0);
            let sample = |g: &mut ChaCha8Rng| -> Vec<f64> {
                let t: Vec<f64> = (0..k).map(|_| g.random_range(-10.0..10.0)).collect();
                (0..d)
                    .map(|j| {
                        let on: f64 = (0..k).map(|a| t[a] * basis[a][j]).sum();
                        let eps: f64 = StandardNormal.sample(g);
                        origin[j] + on + spec.noise * eps
                    })
                    .collect()
            };
            let rows = (0..n).map(|_| sample(&mut prng)).collect();
            let queries = (0..m).map(|_| sample(&mut qrng)).collect();
            (rows, queries)
        }
        DatasetKind::Planted => {
            let (rows, queries, t) = planted(spec, norm, &mut prng, &mut qrng)?;
            truth = Some(t);
            (rows, queries)
        }
    };
    let points = PointSet::from_rows(&rows, norm)?;
    Ok(Dataset { points, queries, truth })
}

fn normal_rows(g: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut *g);
                    scale * z
                })
                .collect::<Vec<f64>>()
        })
        .collect()
}

fn grid_side(n: usize, d: usize) -> usize {
    let mut side = (n as f64).powf(1.0 / d as f64).floor().max(1.0) as usize;
    while (side as f64).powi(d as i32) < n as f64 {
        side += 1;
    }
    side
}

fn lattice_point(mut i: usize, side: usize, d: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    for slot in x.iter_mut().rev() {
        *slot = (i % side) as f64;
        i /= side;
    }
    x
}

/// Points, queries and the planted neighbor of each query.
type PlantedData = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<PlantedTruth>);

/// Points are drawn one at a time in a cube and kept only if they are at least
/// `11·r★` from every earlier point; coordinates sit on a dyadic grid so the
/// planted offset (`±r★` along one axis) is exact. Each query is a data
/// point shifted that way, so its planted neighbor is at `r★` and every
/// other point is at least `10·r★` away.
fn planted(spec: &DatasetSpec, norm: PNorm<f64>, prng: &mut ChaCha8Rng, qrng: &mut ChaCha8Rng) -> Result<PlantedData> {
    let (n, d, r) = (spec.n, spec.d, spec.planted_distance);
    if !(r > 0.0 && r.is_finite()) {
        return Err(config_err("planted_distance must be positive and finite"));
    }
    let side = 22.0 * r * (4.0 * n as f64).powf(1.0 / d as f64);
    let grid = r / 65536.0;
    let sep = 11.0 * r;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut attempts = 0usize;
    while rows.len() < n {
        attempts += 1;
        if attempts > 200 * n + 1000 {
            return Err(config_err("could not place well-separated planted points"));
        }
        let x: Vec<f64> = (0..d).map(|_| (prng.random_range(0.0..side) / grid).round() * grid).collect();
        if rows.iter().all(|y| lpann_core::lp_dist(&x, y, norm).map(|v| v >= sep).unwrap_or(false)) {
            rows.push(x);
        }
    }
    let set = PointSet::from_rows(&rows, norm)?;
    let mut queries = Vec::with_capacity(spec.queries);
    let mut truth = Vec::with_capacity(spec.queries);
    for _ in 0..spec.queries {
        let id = qrng.random_range(0..n);
        let axis = qrng.random_range(0..d);
        let sign = if qrng.random_bool(0.5) { 1.0 } else { -1.0 };
        let mut q = rows[id].clone();
        q[axis] += sign * r;
        let (nn, dist) = brute_force_nn(&set, &q)?;
        debug_assert_eq!(nn, id);
        truth.push(PlantedTruth { id: nn, dist });
        queries.push(q);
    }
    Ok((rows, queries, truth))
}
