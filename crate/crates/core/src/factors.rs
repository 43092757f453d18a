//! Factor sets `{M_i}` with `Σ M_i = I`, the universal input of the sparsification problem.

use crate::error::{Error, Result};
use crate::linalg::{frobenius_dot, Matrix, Spectrum, Vector};

/// A single PSD factor. Graph reductions only produce rank-one factors `v vᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub enum Factor {
    Rank1(Vector),
    Dense(Matrix),
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Rank1(v) => v.len(),
            Factor::Dense(m) => m.nrows(),
        }
    }

    /// `M • C`.
    pub fn dot(&self, c: &Matrix) -> f64 {
        match self {
            Factor::Rank1(v) => (c * v).dot(v),
            Factor::Dense(m) => frobenius_dot(m, c),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            Factor::Rank1(v) => v.norm_squared(),
            Factor::Dense(m) => m.trace(),
        }
    }

    /// `target += scale · M`.
    pub fn add_scaled_to(&self, scale: f64, target: &mut Matrix) {
        match self {
            Factor::Rank1(v) => target.ger(scale, v, v, 1.0),
            Factor::Dense(m) => *target += m * scale,
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            Factor::Rank1(v) => v * v.transpose(),
            Factor::Dense(m) => m.clone(),
        }
    }

    /// `T M Tᵀ`, preserving the rank-one representation.
    pub fn congruence(&self, t: &Matrix) -> Factor {
        match self {
            Factor::Rank1(v) => Factor::Rank1(t * v),
            Factor::Dense(m) => Factor::Dense(t * m * t.transpose()),
        }
    }

    /// Largest eigenvalue of `K M Kᵀ` where `K` is the inverse Cholesky factor of some
    /// positive-definite `X`; this is the smallest `s` with `M ⪯ s·X`.
    pub fn max_relative_eigenvalue(&self, inv_chol: &Matrix) -> Result<f64> {
        match self {
            Factor::Rank1(v) => Ok((inv_chol * v).norm_squared()),
            Factor::Dense(m) => {
                let whitened = inv_chol * m * inv_chol.transpose();
                Ok(Spectrum::of(&whitened)?.max())
            }
        }
    }
}

/// A collection of PSD matrices summing to the identity.
#[derive(Debug, Clone)]
pub struct FactorSet {
    dim: usize,
    factors: Vec<Factor>,
    provenance: Option<Vec<usize>>,
}

impl FactorSet {
    /// Validates dimensions, positive semidefiniteness and `‖Σ M_i − I‖_F ≤ 1e-8 · n`.
    pub fn new(dim: usize, factors: Vec<Factor>, provenance: Option<Vec<usize>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Validation(
                "factor dimension must be positive".into(),
            ));
        }
        if factors.is_empty() {
            return Err(Error::Validation("factor set is empty".into()));
        }
        if let Some(p) = &provenance {
            if p.len() != factors.len() {
                return Err(Error::Validation(format!(
                    "provenance has {} entries for {} factors",
                    p.len(),
                    factors.len()
                )));
            }
        }
        for (i, f) in factors.iter().enumerate() {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: f.dim(),
                });
            }
            if let Factor::Dense(m) = f {
                let spec = Spectrum::of(m)?;
                let scale = spec.max().abs().max(1.0);
                if spec.min() < -1e-9 * scale {
                    return Err(Error::Validation(format!(
                        "factor {i} is not PSD (lambda_min = {:e})",
                        spec.min()
                    )));
                }
            }
        }
        let set = Self {
            dim,
            factors,
            provenance,
        };
        let residual = (set.total() - Matrix::identity(dim, dim)).norm();
        let tol = 1e-8 * dim as f64;
        if residual > tol {
            return Err(Error::Validation(format!(
                "factors do not sum to the identity (Frobenius residual {residual:e} > {tol:e})"
            )));
        }
        Ok(set)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, i: usize) -> &Factor {
        &self.factors[i]
    }

    pub fn provenance(&self) -> Option<&[usize]> {
        self.provenance.as_deref()
    }

    /// `Σ M_i`.
    pub fn total(&self) -> Matrix {
        self.weighted_sum(self.factors.iter().enumerate().map(|(i, _)| (i, 1.0)))
    }

    /// `Σ c_i M_i` over the given `(index, coefficient)` pairs.
    pub fn weighted_sum(&self, coefficients: impl IntoIterator<Item = (usize, f64)>) -> Matrix {
        let mut out = Matrix::zeros(self.dim, self.dim);
        for (i, c) in coefficients {
            self.factors[i].add_scaled_to(c, &mut out);
        }
        out
    }

    /// `M_i • C` for every factor.
    pub fn dots(&self, c: &Matrix) -> Vec<f64> {
        self.factors.iter().map(|f| f.dot(c)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis(d: usize, k: usize) -> Vector {
        let mut v = Vector::zeros(d);
        v[k] = 1.0;
        v
    }

    #[test]
    fn accepts_standard_basis() {
        let set = FactorSet::new(
            3,
            (0..3).map(|k| Factor::Rank1(basis(3, k))).collect(),
            None,
        );
        assert!(set.is_ok());
    }

    #[test]
    fn rejects_non_identity_sum() {
        let err = FactorSet::new(2, vec![Factor::Rank1(basis(2, 0))], None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rejects_indefinite_factor() {
        let bad = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -1.0]);
        let err = FactorSet::new(2, vec![Factor::Dense(bad)], None).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn rank_one_and_dense_agree() {
        let v = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let r = Factor::Rank1(v.clone());
        let d = Factor::Dense(&v * v.transpose());
        let c = Matrix::from_fn(3, 3, |i, j| {
            (i + 2 * j) as f64 * 0.1 + if i == j { 1.0 } else { 0.0 }
        });
        let c = crate::linalg::symmetrize(&c);
        assert!((r.dot(&c) - d.dot(&c)).abs() < 1e-12);
        assert!((r.trace() - d.trace()).abs() < 1e-12);
        let x = Matrix::from_row_slice(3, 3, &[3.0, 0.1, 0.0, 0.1, 2.0, 0.3, 0.0, 0.3, 1.5]);
        let k = crate::linalg::inverse_cholesky_factor(&x).unwrap();
        let a = r.max_relative_eigenvalue(&k).unwrap();
        let b = d.max_relative_eigenvalue(&k).unwrap();
        assert!((a - b).abs() < 1e-10);
    }
}
