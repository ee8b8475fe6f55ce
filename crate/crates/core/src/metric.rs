//! Minkowski norms and distances.

use crate::error::{invalid, LpError, Result};
use crate::scalar::Scalar;

/// Norm exponent. The `Infinity` tag selects the coordinate maximum exactly
/// instead of approximating it with a large finite exponent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PNorm<T> {
    Finite(T),
    Infinity,
}

impl<T: Scalar> PNorm<T> {
    /// A finite exponent; must satisfy `p >= 1`.
    pub fn new(p: T) -> Result<Self> {
        if !p.is_finite() || p < T::one() {
            return Err(invalid(format!("norm exponent must be finite and >= 1, got {p}")));
        }
        Ok(PNorm::Finite(p))
    }

    pub fn exponent(self) -> Option<T> {
        match self {
            PNorm::Finite(p) => Some(p),
            PNorm::Infinity => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, PNorm::Infinity)
    }

    /// `Some(p)` only when `p > 2` (the regime both pipelines require).
    pub fn above_two(self) -> Result<T> {
        match self {
            PNorm::Finite(p) if p > T::lit(2.0) => Ok(p),
            other => Err(invalid(format!("this pipeline requires finite p > 2, got {other:?}"))),
        }
    }

    pub fn cast<U: Scalar>(self) -> PNorm<U> {
        match self {
            PNorm::Finite(p) => PNorm::Finite(U::lit(p.as_f64())),
            PNorm::Infinity => PNorm::Infinity,
        }
    }
}

/// Precomputed power evaluation for a finite exponent.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PowKernel<T> {
    p: T,
    inv_p: T,
    int_p: Option<i32>,
}

impl<T: Scalar> PowKernel<T> {
    pub(crate) fn new(p: T) -> Self {
        let int_p = if p == p.round() && p <= T::lit(64.0) { p.to_i32() } else { None };
        PowKernel { p, inv_p: p.recip(), int_p }
    }

    /// `|x|^p`, with an explicit zero branch.
    #[inline]
    pub(crate) fn abs_pow(&self, x: T) -> T {
        let a = x.abs();
        if a == T::zero() {
            return T::zero();
        }
        match self.int_p {
            Some(k) => a.powi(k),
            None => (self.p * a.ln()).exp(),
        }
    }

    /// `s^(1/p)` for `s >= 0`.
    #[inline]
    pub(crate) fn root(&self, s: T) -> T {
        if s == T::zero() {
            return T::zero();
        }
        let r = (s.ln() * self.inv_p).exp();
        match self.int_p {
            // One Newton step recovers exact roots of perfect powers.
            Some(k) if k > 1 => {
                let rk1 = r.powi(k - 1);
                let fixed = r - (rk1 * r - s) / (self.p * rk1);
                if fixed.is_finite() {
                    fixed
                } else {
                    r
                }
            }
            _ => r,
        }
    }
}

/// Unchecked ℓ_p norm of an iterator of coordinates.
#[inline]
pub(crate) fn norm_iter<T: Scalar, I>(coords: I, p: PNorm<T>) -> T
where
    I: Iterator<Item = T> + Clone,
{
    match p {
        PNorm::Infinity => coords.fold(T::zero(), |m, x| m.max(x.abs())),
        PNorm::Finite(p) => {
            let k = PowKernel::new(p);
            let s: T = coords.clone().map(|x| k.abs_pow(x)).sum();
            if s.is_finite() && s >= T::min_positive_value() {
                return k.root(s);
            }
            let m = coords.clone().fold(T::zero(), |m, x| m.max(x.abs()));
            if m == T::zero() {
                return T::zero();
            }
            let inv_m = m.recip();
            let s: T = coords.map(|x| k.abs_pow(x * inv_m)).sum();
            m * k.root(s)
        }
    }
}

/// Unchecked ℓ_p distance; callers guarantee equal lengths and finite input.
#[inline]
pub(crate) fn dist_unchecked<T: Scalar>(u: &[T], v: &[T], p: PNorm<T>) -> T {
    debug_assert_eq!(u.len(), v.len());
    norm_iter(u.iter().zip(v).map(|(&a, &b)| a - b), p)
}

/// Unchecked ℓ_p norm of a slice.
#[inline]
pub(crate) fn norm_unchecked<T: Scalar>(v: &[T], p: PNorm<T>) -> T {
    norm_iter(v.iter().copied(), p)
}

pub(crate) fn check_finite<T: Scalar>(v: &[T], context: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(LpError::NonFinite { context: format!("{context}[{i}]") }),
    }
}

/// `(Σ|v_i|^p)^(1/p)`, or `max |v_i|` for the infinity tag.
pub fn lp_norm<T: Scalar>(v: &[T], p: PNorm<T>) -> Result<T> {
    if let PNorm::Finite(e) = p {
        PNorm::new(e)?;
    }
    check_finite(v, "vector")?;
    Ok(norm_unchecked(v, p))
}

/// `lp_norm(u - v, p)`.
pub fn lp_dist<T: Scalar>(u: &[T], v: &[T], p: PNorm<T>) -> Result<T> {
    if u.len() != v.len() {
        return Err(LpError::DimensionMismatch { expected: u.len(), got: v.len() });
    }
    if let PNorm::Finite(e) = p {
        PNorm::new(e)?;
    }
    check_finite(u, "u")?;
    check_finite(v, "v")?;
    Ok(dist_unchecked(u, v, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(x: f64) -> PNorm<f64> {
        PNorm::new(x).unwrap()
    }

    #[test]
    fn norm_examples() {
        assert_relative_eq!(lp_norm(&[1.0, 2.0, 2.0], p(3.0)).unwrap(), 17f64.cbrt(), max_relative = 1e-14);
        assert_relative_eq!(lp_norm(&[1.0, 2.0, 2.0], p(3.0)).unwrap(), 2.5713, epsilon = 1e-4);
        for e in [1.0, 2.5, 3.0, 7.0] {
            assert_eq!(lp_norm(&[0.0, 0.0, 0.0], p(e)).unwrap(), 0.0);
        }
        assert_eq!(lp_norm(&[3.0, -4.0], PNorm::Infinity).unwrap(), 4.0);
    }

    #[test]
    fn dist_examples() {
        assert_relative_eq!(lp_dist(&[1.0, 0.0], &[0.0, 1.0], p(4.0)).unwrap(), 1.189207115, epsilon = 1e-9);
        assert_eq!(lp_dist(&[1.5, -2.0], &[1.5, -2.0], p(3.0)).unwrap(), 0.0);
        let ones = [1.0; 4];
        let zero = [0.0; 4];
        let l2 = lp_dist(&ones, &zero, p(2.0)).unwrap();
        let l4 = lp_dist(&ones, &zero, p(4.0)).unwrap();
        assert_relative_eq!(l2, 2.0, max_relative = 1e-14);
        assert_relative_eq!(l4, 2f64.sqrt(), max_relative = 1e-14);
        assert!(l4 <= l2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(lp_norm(&[1.0, f64::NAN], p(3.0)), Err(LpError::NonFinite { .. })));
        assert!(matches!(lp_norm(&[f64::INFINITY], PNorm::Infinity), Err(LpError::NonFinite { .. })));
        assert!(matches!(
            lp_dist(&[1.0], &[1.0, 2.0], p(3.0)),
            Err(LpError::DimensionMismatch { expected: 1, got: 2 })
        ));
        assert!(PNorm::new(0.5).is_err());
        assert!(PNorm::new(f64::INFINITY).is_err());
    }

    #[test]
    fn non_integer_exponent_uses_exp_log_path() {
        let v = [0.5, -1.25, 2.0];
        let direct: f64 = v.iter().map(|x: &f64| x.abs().powf(2.5)).sum::<f64>().powf(1.0 / 2.5);
        assert_relative_eq!(lp_norm(&v, p(2.5)).unwrap(), direct, max_relative = 1e-13);
    }

    #[test]
    fn extreme_magnitudes_are_rescaled() {
        let big = [1e200, 1e200];
        assert_relative_eq!(lp_norm(&big, p(4.0)).unwrap(), 1e200 * 2f64.powf(0.25), max_relative = 1e-12);
        let tiny = [1e-200, 0.0, 1e-200];
        assert_relative_eq!(lp_norm(&tiny, p(3.0)).unwrap(), 1e-200 * 2f64.cbrt(), max_relative = 1e-12);
    }

    #[test]
    fn works_for_f32() {
        let n = lp_norm(&[1.0f32, 2.0, 2.0], PNorm::new(3.0f32).unwrap()).unwrap();
        assert!((n - 17f32.cbrt()).abs() < 1e-5);
    }
}
