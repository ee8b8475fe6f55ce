use crate::error::{invalid, LpError, Result};
use crate::metric::{check_finite, norm_unchecked, PNorm, PowKernel};
use crate::scalar::Scalar;

/// Relative slack on the ball check, so points scaled to magnitude exactly
/// `bound` are not rejected over rounding.
const BALL_SLACK: f64 = 1e-12;

/// Parameters of the scaled Mazur map from the radius-`bound` ℓ_p ball into
/// ℓ_q (q = 2). The map `sign(v_i)|v_i|^(p/q)` is multiplied by
/// `scale = q / (p · bound^(p/q - 1))`, which makes it non-expansive on the
/// ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MazurParams<T> {
    p: T,
    q: T,
    bound: T,
    scale: T,
}

impl<T: Scalar> MazurParams<T> {
    pub fn new(p: T, bound: T) -> Result<Self> {
        let q = T::lit(2.0);
        if !(p > q) || !p.is_finite() {
            return Err(invalid(format!("Mazur map needs finite p > 2, got {p}")));
        }
        if !(bound > T::zero()) || !bound.is_finite() {
            return Err(invalid(format!("Mazur bound must be positive, got {bound}")));
        }
        let scale = q / (p * bound.powf(p / q - T::one()));
        Ok(MazurParams { p, q, bound, scale })
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn q(&self) -> T {
        self.q
    }

    pub fn bound(&self) -> T {
        self.bound
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    /// `(q/p)·(2C)^(1-p/q)·u^(p/q)`: the smallest ℓ_q distance between images of
    /// two ball points at ℓ_p distance `u`.
    pub fn contraction_lower_bound(&self, u: T) -> T {
        let two_c = T::lit(2.0) * self.bound;
        self.q / self.p * two_c.powf(T::one() - self.p / self.q) * u.powf(self.p / self.q)
    }

    fn check_ball(&self, v: &[T]) -> Result<()> {
        check_finite(v, "vector")?;
        let norm = norm_unchecked(v, PNorm::Finite(self.p));
        if norm > self.bound * T::lit(1.0 + BALL_SLACK) {
            return Err(LpError::OutsideBall { norm: norm.as_f64(), bound: self.bound.as_f64() });
        }
        Ok(())
    }

    /// Coordinates are divided by the bound before the power is taken, so
    /// intermediate magnitudes stay at most 1.
    #[inline]
    pub(crate) fn map_unchecked(&self, v: &[T], signed: bool) -> Vec<T> {
        let kernel = PowKernel::new(self.p / self.q);
        let inv_bound = self.bound.recip();
        let outer = self.q / self.p * self.bound;
        v.iter()
            .map(|&x| {
                let mag = outer * kernel.abs_pow(x * inv_bound);
                if signed && x < T::zero() {
                    -mag
                } else {
                    mag
                }
            })
            .collect()
    }
}

/// Sign-preserving scaled Mazur map. Rejects vectors outside the ball, where
/// the distortion bounds do not hold.
pub fn mazur_map<T: Scalar>(v: &[T], params: &MazurParams<T>) -> Result<Vec<T>> {
    params.check_ball(v)?;
    Ok(params.map_unchecked(v, true))
}

/// Map without sign preservation. Antipodal points collide under it, so it
/// violates the contraction bound; kept for fault-injection checks only.
pub fn mazur_map_unsigned<T: Scalar>(v: &[T], params: &MazurParams<T>) -> Result<Vec<T>> {
    params.check_ball(v)?;
    Ok(params.map_unchecked(v, false))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::lp_dist;
    use approx::assert_relative_eq;

    #[test]
    fn scale_matches_closed_form() {
        let m = MazurParams::new(4.0, 1.0).unwrap();
        assert_eq!(m.scale(), 0.5);
        let m = MazurParams::new(3.0, 10.0).unwrap();
        assert_relative_eq!(m.scale(), 2.0 / (3.0 * 10f64.sqrt()), max_relative = 1e-14);
        assert!(MazurParams::new(2.0, 1.0).is_err());
        assert!(MazurParams::new(3.0, 0.0).is_err());
    }

    #[test]
    fn unit_vectors_in_l4() {
        let m = MazurParams::new(4.0, 1.0).unwrap();
        let fx = mazur_map(&[1.0, 0.0], &m).unwrap();
        let fy = mazur_map(&[0.0, 1.0], &m).unwrap();
        assert_eq!(fx, vec![0.5, 0.0]);
        assert_eq!(fy, vec![0.0, 0.5]);
        let image = lp_dist(&fx, &fy, PNorm::Finite(2.0)).unwrap();
        let orig = lp_dist(&[1.0, 0.0], &[0.0, 1.0], PNorm::Finite(4.0)).unwrap();
        assert_relative_eq!(image, 0.5f64.sqrt(), max_relative = 1e-14);
        assert!(image <= orig);
        let lower = m.contraction_lower_bound(orig);
        assert_relative_eq!(lower, 0.25 * 2f64.sqrt(), max_relative = 1e-12);
        assert!(image >= lower);
    }

    #[test]
    fn zero_and_antipodes() {
        let m = MazurParams::new(3.0, 2.0).unwrap();
        assert_eq!(mazur_map(&[0.0, 0.0, 0.0], &m).unwrap(), vec![0.0; 3]);
        let a = 1.5f64;
        let fx = mazur_map(&[a], &m).unwrap();
        let fy = mazur_map(&[-a], &m).unwrap();
        let gap = (fx[0] - fy[0]).abs();
        assert_relative_eq!(gap, 2.0 * m.scale() * a.powf(1.5), max_relative = 1e-13);
        assert!(gap > 0.0);
        assert!(gap >= m.contraction_lower_bound(2.0 * a));
        let ux = mazur_map_unsigned(&[a], &m).unwrap();
        let uy = mazur_map_unsigned(&[-a], &m).unwrap();
        assert_eq!(ux, uy);
    }

    #[test]
    fn rejects_points_outside_ball() {
        let m = MazurParams::new(3.0, 1.0).unwrap();
        assert!(matches!(mazur_map(&[1.0, 1.0], &m), Err(LpError::OutsideBall { .. })));
        assert!(mazur_map(&[1.0, 0.0], &m).is_ok());
    }

    #[test]
    fn large_exponent_does_not_overflow() {
        let m = MazurParams::new(40.0, 1e30).unwrap();
        let out = mazur_map(&[1e30, 0.0], &m).unwrap();
        assert!(out.iter().all(|x: &f64| x.is_finite()));
        assert_relative_eq!(out[0], 2.0 / 40.0 * 1e30, max_relative = 1e-12);
    }
}
