use rand_distr::{Distribution, StandardNormal};

use crate::error::{LpError, Result};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, rng_from};

/// Safety margin in the denominator: entries are scaled by `1/((1+ε₀)√k)`.
pub const JL_EPS0: f64 = 0.25;
pub const JL_MIN_DIM: usize = 32;

/// `max(32, ⌈24 ln n⌉)`.
pub fn jl_target_dim(n: usize) -> usize {
    let n = n.max(1) as f64;
    JL_MIN_DIM.max((24.0 * n.ln()).ceil() as usize)
}

/// Dense Gaussian projection `R^d → R^k`; the identity when `k >= d`.
#[derive(Clone, Debug, PartialEq)]
pub struct JlProjection<T> {
    /// Row-major `k × d`; `None` for the identity.
    matrix: Option<Vec<T>>,
    k: usize,
    d: usize,
    scale_down: T,
    seed: u64,
}

impl<T: Scalar> JlProjection<T> {
    /// Projection sized for `n` points in dimension `d`.
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        let k = jl_target_dim(n);
        if k >= d {
            return JlProjection { matrix: None, k: d, d, scale_down: T::one(), seed };
        }
        let scale_down = 1.0 / ((1.0 + JL_EPS0) * (k as f64).sqrt());
        let mut rng = rng_from(derive_seed(seed, "jl", 0));
        let matrix = (0..k * d)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                T::lit(g * scale_down)
            })
            .collect();
        JlProjection { matrix: Some(matrix), k, d, scale_down: T::lit(scale_down), seed }
    }

    pub fn identity(d: usize) -> Self {
        JlProjection { matrix: None, k: d, d, scale_down: T::one(), seed: 0 }
    }

    pub fn is_identity(&self) -> bool {
        self.matrix.is_none()
    }

    pub fn target_dim(&self) -> usize {
        self.k
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    pub fn scale_down(&self) -> T {
        self.scale_down
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.d {
            return Err(LpError::DimensionMismatch { expected: self.d, got: v.len() });
        }
        crate::metric::check_finite(v, "vector")?;
        Ok(self.apply_unchecked(v))
    }

    #[inline]
    pub(crate) fn apply_unchecked(&self, v: &[T]) -> Vec<T> {
        match &self.matrix {
            None => v.to_vec(),
            Some(m) => m.chunks_exact(self.d).map(|row| row.iter().zip(v).map(|(&a, &x)| a * x).sum()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_dim_formula() {
        assert_eq!(jl_target_dim(1), 32);
        assert_eq!(jl_target_dim(3), 32);
        assert_eq!(jl_target_dim(1000), 166);
    }

    #[test]
    fn identity_fallback() {
        let j = JlProjection::<f64>::new(1000, 64, 1);
        assert!(j.is_identity());
        let v = [1.5, -2.0, 0.0, 3.25].repeat(16);
        assert_eq!(j.apply(&v).unwrap(), v);
    }

    #[test]
    fn projection_shape_and_zero() {
        let j = JlProjection::<f64>::new(1000, 400, 2);
        assert!(!j.is_identity());
        assert_eq!(j.target_dim(), 166);
        assert_eq!(j.apply(&[0.0; 400]).unwrap(), vec![0.0; 166]);
        assert!(j.apply(&[0.0; 3]).is_err());
        assert_eq!(j, JlProjection::new(1000, 400, 2));
    }
}
