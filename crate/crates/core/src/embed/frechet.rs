use rand::distr::Open01;
use rand::Rng;

use crate::error::{invalid, LpError, Result};
use crate::scalar::Scalar;
use crate::seed::{derive_seed, rng_from};

/// Inverse-CDF Fréchet sample `(-ln u)^(-1/p)` for `u ∈ (0, 1)`.
pub fn sample_frechet<T: Scalar>(p: T, u: T) -> Result<T> {
    if !(p > T::zero()) || !p.is_finite() {
        return Err(invalid(format!("Fréchet shape must be positive, got {p}")));
    }
    if !(u > T::zero() && u < T::one()) {
        return Err(invalid(format!("uniform sample must lie in (0, 1), got {u}")));
    }
    Ok((-u.ln()).powf(-p.recip()))
}

/// `Pr[Z <= x] = exp(-x^-p)` for `x > 0`, and 0 otherwise.
pub fn frechet_cdf(p: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-x.powf(-p)).exp()
    }
}

/// Embedding scale `(3 ln n)^(1/p)`, which makes the Fréchet map
/// non-contractive on `n` points with probability at least `1 - 1/n`.
pub fn frechet_scale_b(n: usize, p: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid("frechet_scale_b needs n >= 2"));
    }
    if !(p > 0.0) || !p.is_finite() {
        return Err(invalid(format!("p must be positive, got {p}")));
    }
    Ok((3.0 * (n as f64).ln()).powf(1.0 / p))
}

/// Real-valued variant used by tests of the closed form at non-integer `n`.
#[cfg(test)]
pub(crate) fn scale_b_real(n: f64, p: f64) -> f64 {
    (3.0 * n.ln()).powf(1.0 / p)
}

/// Radius `h = c·(8·log2(c)·ddim·ln(ddim))^(1/p)` beyond which net points stay
/// farther than `c` from the query under the unscaled map. `ddim` is clamped
/// to at least 2.
pub fn net_contraction_threshold(c: f64, ddim: f64, p: f64) -> Result<f64> {
    if !(c >= 4.0) || !c.is_finite() {
        return Err(invalid(format!("contraction threshold requires c >= 4, got {c}")));
    }
    if !(p > 0.0) || ddim.is_nan() {
        return Err(invalid("contraction threshold requires p > 0 and a numeric ddim"));
    }
    let ddim = ddim.max(2.0);
    if p.is_infinite() {
        return Ok(c);
    }
    Ok(c * (8.0 * c.log2() * ddim * ddim.ln()).powf(1.0 / p))
}

/// `v ↦ (b·v₁·Z₁, …, b·v_d·Z_d)` with i.i.d. Fréchet `Z_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrechetEmbedding<T> {
    z: Vec<T>,
    /// `b·z_i`, the per-coordinate multiplier.
    m: Vec<T>,
    b: T,
    p: T,
    seed: u64,
}

impl<T: Scalar> FrechetEmbedding<T> {
    /// Draws `d` Fréchet variables from the stream derived from `seed`.
    pub fn new(d: usize, p: T, b: T, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(invalid("embedding dimension must be >= 1"));
        }
        if !(p >= T::one()) || !p.is_finite() {
            return Err(invalid(format!("Fréchet embedding needs finite p >= 1, got {p}")));
        }
        if !(b > T::zero()) || !b.is_finite() {
            return Err(invalid(format!("scale b must be positive, got {b}")));
        }
        let mut rng = rng_from(derive_seed(seed, "frechet", 0));
        let z: Vec<T> = (0..d)
            .map(|_| {
                let u: f64 = rng.sample(Open01);
                sample_frechet(p, T::lit(u))
            })
            .collect::<Result<_>>()?;
        if z.iter().any(|x| !x.is_finite()) {
            return Err(LpError::NonFinite { context: "Fréchet sample".into() });
        }
        let m = z.iter().map(|&zi| b * zi).collect();
        Ok(FrechetEmbedding { z, m, b, p, seed })
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }

    pub fn z(&self) -> &[T] {
        &self.z
    }

    pub fn b(&self) -> T {
        self.b
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.dim() {
            return Err(LpError::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        crate::metric::check_finite(v, "vector")?;
        Ok(self.apply_unchecked(v))
    }

    #[inline]
    pub(crate) fn apply_unchecked(&self, v: &[T]) -> Vec<T> {
        v.iter().zip(&self.m).map(|(&x, &m)| x * m).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_cdf_fixed_points() {
        for p in [1.0, 2.5, 3.0, 8.0] {
            assert_relative_eq!(sample_frechet(p, (-1.0f64).exp()).unwrap(), 1.0, max_relative = 1e-15);
        }
        assert_relative_eq!(sample_frechet(3.0, (-8.0f64).exp()).unwrap(), 0.5, max_relative = 1e-14);
    }

    #[test]
    fn sample_is_monotone_and_rejects_closed_endpoints() {
        let xs: Vec<f64> = (1..100).map(|i| sample_frechet(3.0, i as f64 / 100.0).unwrap()).collect();
        assert!(xs.windows(2).all(|w| w[0] < w[1]));
        assert!(sample_frechet(3.0, 0.0).is_err());
        assert!(sample_frechet(3.0, 1.0).is_err());
        assert!(sample_frechet(0.0, 0.5).is_err());
    }

    #[test]
    fn scale_b_examples() {
        assert_relative_eq!(frechet_scale_b(1000, 3.0).unwrap(), (3.0 * 1000f64.ln()).cbrt(), max_relative = 1e-14);
        assert_relative_eq!(frechet_scale_b(1000, 3.0).unwrap(), 2.748, epsilon = 2e-3);
        assert_relative_eq!(scale_b_real(std::f64::consts::E, 1.0), 3.0, max_relative = 1e-15);
        let seq: Vec<f64> = [3.0, 6.0, 12.0, 48.0, 400.0].iter().map(|&p| frechet_scale_b(1000, p).unwrap()).collect();
        assert!(seq.windows(2).all(|w| w[0] > w[1]));
        assert!(seq.iter().all(|&b| b > 1.0));
        assert!(seq[4] - 1.0 < 0.01);
        assert!(frechet_scale_b(1, 3.0).is_err());
    }

    #[test]
    fn contraction_threshold_examples() {
        let h = net_contraction_threshold(4.0, 2.0, 3.0).unwrap();
        assert_relative_eq!(h, 4.0 * (32.0 * 2f64.ln()).cbrt(), max_relative = 1e-14);
        assert_relative_eq!(h, 11.25, epsilon = 0.015);
        assert_eq!(net_contraction_threshold(4.0, 2.0, f64::INFINITY).unwrap(), 4.0);
        assert!(net_contraction_threshold(4.0, 2.0, 1e9).unwrap() - 4.0 < 1e-6);
        let hs: Vec<f64> =
            [2.0, 3.0, 5.0, 9.0].iter().map(|&dd| net_contraction_threshold(6.0, dd, 4.0).unwrap()).collect();
        assert!(hs.windows(2).all(|w| w[0] <= w[1]));
        // ddim below 2 is clamped
        assert_eq!(net_contraction_threshold(4.0, 1.0, 3.0).unwrap(), h);
        assert!(net_contraction_threshold(3.0, 2.0, 3.0).is_err());
    }

    #[test]
    fn apply_examples() {
        let e = FrechetEmbedding::<f64>::new(2, 3.0, 1.0, 5).unwrap();
        assert_eq!(e.apply(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let manual = FrechetEmbedding { z: vec![2.0, 3.0], m: vec![2.0, 3.0], b: 1.0, p: 3.0, seed: 0 };
        let out = manual.apply(&[1.0, 1.0]).unwrap();
        assert_eq!(out, vec![2.0, 3.0]);
        assert_eq!(out.iter().cloned().fold(0.0, f64::max), 3.0);
        assert!(e.apply(&[1.0]).is_err());
    }

    #[test]
    fn regeneration_is_bit_exact() {
        let a = FrechetEmbedding::<f64>::new(16, 3.0, 2.0, 77).unwrap();
        let b = FrechetEmbedding::<f64>::new(16, 3.0, 2.0, 77).unwrap();
        assert_eq!(a, b);
        assert!(a.z().iter().all(|&z| z > 0.0 && z.is_finite()));
        let c = FrechetEmbedding::<f64>::new(16, 3.0, 2.0, 78).unwrap();
        assert_ne!(a.z(), c.z());
    }

    #[test]
    fn linear_up_to_rounding() {
        let e = FrechetEmbedding::<f64>::new(4, 4.0, 1.7, 3).unwrap();
        let u = [1.0, -2.0, 0.5, 3.0];
        let w = [0.25, 1.0, -1.5, 2.0];
        let diff: Vec<f64> = u.iter().zip(&w).map(|(a, b)| a - b).collect();
        let lhs = e.apply(&diff).unwrap();
        let (fu, fw) = (e.apply(&u).unwrap(), e.apply(&w).unwrap());
        for i in 0..4 {
            assert_relative_eq!(lhs[i], fu[i] - fw[i], max_relative = 1e-12);
        }
    }
}
