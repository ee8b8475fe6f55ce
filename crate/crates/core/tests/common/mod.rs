#![allow(dead_code)]

use lpann_core::{PNorm, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_rows(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(rng)).collect()).collect()
}

pub fn gaussian(n: usize, d: usize, p: f64, seed: u64) -> PointSet<f64> {
    PointSet::from_rows(&gaussian_rows(&mut rng(seed), n, d), PNorm::new(p).unwrap()).unwrap()
}

/// Random direction with unit ℓ_p norm.
pub fn unit_direction(rng: &mut ChaCha8Rng, d: usize, p: f64) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let norm = lpann_core::lp_norm(&v, PNorm::new(p).unwrap()).unwrap();
    v.into_iter().map(|x| x / norm).collect()
}

pub fn uniform_rows(rng: &mut ChaCha8Rng, n: usize, d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect()).collect()
}

/// Standard deviation of a Bernoulli(rate) mean over `trials`.
pub fn sigma(rate: f64, trials: usize) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}
