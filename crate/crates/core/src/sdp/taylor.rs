//! Taylor expansion of `f(x) = x^{-2} e^{1/x}` around `x = 1`.
//!
//! The coefficients are `a_k = f^{(k)}(1)/k! = e·r_k` with the three-term recurrence
//! `(k+1) r_{k+1} = −(2k+3) r_k − (k+1) r_{k−1}`, `r_0 = 1`, `r_1 = −3`. Near `x = 0.05` the
//! polynomial value is about `2e11` while the target accuracy is absolute, so the recurrence
//! and the Horner evaluation run in double-double arithmetic. For `x < 1` every Horner term
//! `a_k (x−1)^k` is nonnegative, so there is no cancellation to fight.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Spectrum};
use crate::potential::{barrier_kernel, BARRIER_MARGIN, EXPONENT_LIMIT};

/// Constant `c` of the degree rule `d ≥ (c/x²)·ln(1/(xε))`.
pub const TAYLOR_DEGREE_CONSTANT: f64 = 5.0;

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const E: DoubleDouble = DoubleDouble {
    hi: std::f64::consts::E,
    lo: 1.4456468917292502e-16,
};

impl DoubleDouble {
    fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        Self { hi: s, lo: err }
    }

    fn quick_two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        Self {
            hi: s,
            lo: b - (s - a),
        }
    }

    fn add(self, other: Self) -> Self {
        let s = Self::two_sum(self.hi, other.hi);
        let t = Self::two_sum(self.lo, other.lo);
        let hi = Self::quick_two_sum(s.hi, s.lo + t.hi);
        Self::quick_two_sum(hi.hi, hi.lo + t.lo)
    }

    fn mul(self, other: Self) -> Self {
        let p = self.hi * other.hi;
        let err = self.hi.mul_add(other.hi, -p) + (self.hi * other.lo + self.lo * other.hi);
        Self::quick_two_sum(p, err)
    }

    fn scale(self, b: f64) -> Self {
        let p = self.hi * b;
        let err = self.hi.mul_add(b, -p) + self.lo * b;
        Self::quick_two_sum(p, err)
    }

    fn div_f64(self, b: f64) -> Self {
        let q1 = self.hi / b;
        let r = self.add(Self::from_f64(q1).scale(-b));
        let q2 = r.hi / b;
        let r = r.add(Self::from_f64(q2).scale(-b));
        let q3 = r.hi / b;
        Self::quick_two_sum(q1, q2).add(Self::from_f64(q3))
    }
}

fn coefficients_dd(degree: usize) -> Vec<DoubleDouble> {
    let mut r = Vec::with_capacity(degree + 1);
    r.push(DoubleDouble::from_f64(1.0));
    if degree >= 1 {
        r.push(DoubleDouble::from_f64(-3.0));
    }
    for k in 1..degree {
        let kf = k as f64;
        let next = r[k]
            .scale(-(2.0 * kf + 3.0))
            .add(r[k - 1].scale(-(kf + 1.0)))
            .div_f64(kf + 1.0);
        r.push(next);
    }
    r.into_iter().map(|x| x.mul(E)).collect()
}

/// `f^{(k)}(1)/k!` for `k = 0..=degree`.
pub fn taylor_coefficients(degree: usize) -> Vec<f64> {
    coefficients_dd(degree).into_iter().map(|x| x.hi).collect()
}

/// Degree-`degree` Taylor polynomial of `f` at 1, evaluated at `x`. Returns NaN for `x ≤ 0`.
pub fn taylor_f(x: f64, degree: usize) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    let coeffs = coefficients_dd(degree);
    let t = DoubleDouble::two_sum(x, -1.0);
    let mut acc = coeffs[degree];
    for a in coeffs[..degree].iter().rev() {
        acc = acc.mul(t).add(*a);
    }
    acc.hi
}

/// `8(d+1)·e^{5/x − x·d}`, a bound on the truncation error at `x ∈ (0, 1]`.
pub fn error_bound(x: f64, degree: usize) -> f64 {
    8.0 * (degree as f64 + 1.0) * (5.0 / x - x * degree as f64).exp()
}

/// `⌈(c/x²)·ln(1/(xε))⌉` with `c = TAYLOR_DEGREE_CONSTANT`.
pub fn lemma_degree(x: f64, eps: f64) -> usize {
    let d = (TAYLOR_DEGREE_CONSTANT / (x * x)) * (1.0 / (x * eps)).ln();
    d.ceil().max(0.0) as usize
}

/// Polynomial approximations of the barrier kernels `f(uI − A)` and `f(A − ℓI)`.
#[derive(Debug, Clone)]
pub struct TaylorKernels {
    pub upper: Matrix,
    pub lower: Matrix,
    /// Smallest eigenvalue of `uI − A` and `A − ℓI`.
    pub gap: f64,
    pub degree: usize,
    /// `error_bound(gap, degree)`, valid for both kernels in spectral norm.
    pub error_bound: f64,
}

impl TaylorKernels {
    pub fn within(&self, tolerance: f64) -> bool {
        self.error_bound <= tolerance
    }
}

fn matrix_horner(coeffs: &[f64], x: &Matrix) -> Matrix {
    let n = x.nrows();
    let t = x - Matrix::identity(n, n);
    let degree = coeffs.len() - 1;
    let mut acc = Matrix::identity(n, n) * coeffs[degree];
    for &a in coeffs[..degree].iter().rev() {
        acc = &acc * &t;
        for i in 0..n {
            acc[(i, i)] += a;
        }
    }
    crate::linalg::symmetrize(&acc)
}

/// Evaluates both kernels by matrix Horner on `X − I`, `X ∈ {uI − A, A − ℓI}`.
pub fn matfun_taylor(a: &Matrix, ell: f64, u: f64, degree: usize) -> Result<TaylorKernels> {
    if u - ell > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!(
            "Taylor kernels need u - ell <= 1, got {}",
            u - ell
        )));
    }
    let spec = Spectrum::of(a)?;
    let gap = (u - spec.max()).min(spec.min() - ell);
    if gap <= BARRIER_MARGIN {
        let side = if u - spec.max() <= spec.min() - ell {
            "upper"
        } else {
            "lower"
        };
        return Err(Error::BarrierViolation { side, gap });
    }
    if 1.0 / gap > EXPONENT_LIMIT {
        return Err(Error::PotentialOverflow {
            inverse_gap: 1.0 / gap,
        });
    }
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let coeffs = taylor_coefficients(degree);
    let upper = matrix_horner(&coeffs, &(&id * u - a));
    let lower = matrix_horner(&coeffs, &(a - &id * ell));
    Ok(TaylorKernels {
        upper,
        lower,
        gap,
        degree,
        error_bound: error_bound(gap, degree),
    })
}

/// Same as [`matfun_taylor`] with the degree picked by [`lemma_degree`] for `tolerance`.
/// Logs a warning if the reported bound still exceeds the tolerance.
pub fn matfun_taylor_for_tolerance(
    a: &Matrix,
    ell: f64,
    u: f64,
    tolerance: f64,
) -> Result<TaylorKernels> {
    let spec = Spectrum::of(a)?;
    let gap = (u - spec.max()).min(spec.min() - ell);
    if !(gap > 0.0) {
        return matfun_taylor(a, ell, u, 0);
    }
    let kernels = matfun_taylor(a, ell, u, lemma_degree(gap, tolerance))?;
    if !kernels.within(tolerance) {
        log::warn!(
            "Taylor kernels at degree {} have error bound {:e} above tolerance {:e}",
            kernels.degree,
            kernels.error_bound,
            tolerance
        );
    }
    Ok(kernels)
}

/// Exact `f` for reference, identical to the barrier kernel.
pub fn exact_f(x: f64) -> f64 {
    barrier_kernel(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn leading_coefficients() {
        let c = taylor_coefficients(4);
        let e = std::f64::consts::E;
        assert_eq!(c[0], e);
        assert_relative_eq!(c[1], -3.0 * e, max_relative = 1e-15);
        assert_relative_eq!(c[2], 6.5 * e, max_relative = 1e-15);
        assert_relative_eq!(c[3], -73.0 / 6.0 * e, max_relative = 1e-15);
        assert_relative_eq!(c[4], 20.875 * e, max_relative = 1e-15);
    }

    #[test]
    fn first_coefficient_matches_finite_difference() {
        let h = 1e-5;
        let fd = (exact_f(1.0 + h) - exact_f(1.0 - h)) / (2.0 * h);
        assert_relative_eq!(taylor_coefficients(1)[1], fd, max_relative = 1e-8);
    }

    #[test]
    fn value_at_one_is_e_for_every_degree() {
        for d in [0, 1, 2, 7, 50, 400] {
            assert_eq!(taylor_f(1.0, d), std::f64::consts::E);
        }
    }

    #[test]
    fn half_reaches_four_e_squared() {
        let mut d = 1;
        while error_bound(0.5, d) > 1e-6 {
            d += 1;
        }
        let target = 29.5562243957226;
        assert!((taylor_f(0.5, d) - target).abs() <= 1e-6);
    }

    #[test]
    fn tenth_within_lemma_tolerance() {
        let d = lemma_degree(0.1, 1e-3);
        let target = 2202646.5794806704;
        assert!((taylor_f(0.1, d) - target).abs() <= 1e-3, "d = {d}");
    }

    #[test]
    fn diagonal_matrix_agrees_with_scalar_polynomial() {
        let a = Matrix::from_diagonal(&crate::linalg::Vector::from_vec(vec![0.1, -0.2, 0.3]));
        let (ell, u) = (-0.45, 0.5);
        let k = matfun_taylor(&a, ell, u, 60).unwrap();
        for (i, lam) in [0.1, -0.2, 0.3].into_iter().enumerate() {
            assert_relative_eq!(k.upper[(i, i)], taylor_f(u - lam, 60), max_relative = 1e-12);
            assert_relative_eq!(
                k.lower[(i, i)],
                taylor_f(lam - ell, 60),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn small_gap_is_an_error() {
        let a = Matrix::identity(2, 2) * 0.4999;
        let err = matfun_taylor(&a, -0.25, 0.5, 10).unwrap_err();
        assert!(matches!(err, Error::PotentialOverflow { .. }));
    }

    #[test]
    fn low_degree_reports_large_bound() {
        let a = Matrix::zeros(2, 2);
        let k = matfun_taylor(&a, -0.25, 0.25, 3).unwrap();
        assert!(!k.within(1e-3));
    }
}
