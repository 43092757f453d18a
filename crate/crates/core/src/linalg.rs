//! Dense symmetric linear-algebra helpers shared by every module.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

const EIGEN_MAX_SWEEPS: usize = 10_000;

/// Eigendecomposition of a symmetric matrix, `m = V diag(values) Vᵀ`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vector,
    pub vectors: Matrix,
}

impl Spectrum {
    /// Decomposes the symmetric part of `m`.
    pub fn of(m: &Matrix) -> Result<Self> {
        let sym = symmetrize(m);
        let eig = SymmetricEigen::try_new(sym, f64::EPSILON, EIGEN_MAX_SWEEPS)
            .ok_or(Error::Eigen("symmetric QR iteration"))?;
        Ok(Self {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let weights = self.values.map(f);
        self.reconstruct(&weights)
    }

    /// `V diag(weights) Vᵀ` for an arbitrary weight vector.
    pub fn reconstruct(&self, weights: &Vector) -> Matrix {
        let mut scaled = self.vectors.clone();
        for (mut col, w) in scaled.column_iter_mut().zip(weights.iter()) {
            col *= *w;
        }
        let mut out = &scaled * self.vectors.transpose();
        symmetrize_in_place(&mut out);
        out
    }
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    symmetrize_in_place(&mut out);
    out
}

pub fn symmetrize_in_place(m: &mut Matrix) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

pub fn lambda_min(m: &Matrix) -> Result<f64> {
    Ok(Spectrum::of(m)?.min())
}

pub fn lambda_max(m: &Matrix) -> Result<f64> {
    Ok(Spectrum::of(m)?.max())
}

/// Frobenius inner product `A • B = tr(AᵀB)`.
pub fn frobenius_dot(a: &Matrix, b: &Matrix) -> f64 {
    a.dot(b)
}

/// Absolute PSD slack used for dominance tests against `b`: `1e-9 · ‖b‖₂`.
pub fn psd_tolerance(b: &Matrix) -> Result<f64> {
    let spec = Spectrum::of(b)?;
    Ok(1e-9 * spec.min().abs().max(spec.max().abs()))
}

/// `lower ⪯ upper` up to the absolute slack `tol`, i.e. `λ_min(upper − lower) ≥ −tol`.
pub fn is_dominated(lower: &Matrix, upper: &Matrix, tol: f64) -> Result<bool> {
    Ok(lambda_min(&(upper - lower))? >= -tol)
}

pub fn cholesky(m: &Matrix) -> Option<Cholesky<f64, Dyn>> {
    Cholesky::new(symmetrize(m))
}

/// Inverse of the lower Cholesky factor of a positive-definite matrix.
pub fn inverse_cholesky_factor(m: &Matrix) -> Option<Matrix> {
    let chol = cholesky(m)?;
    let l = chol.l();
    let n = l.nrows();
    l.solve_lower_triangular(&Matrix::identity(n, n))
}

/// `V diag(λ^{-1/2}) Vᵀ` for a positive-definite matrix.
pub fn inverse_sqrt(m: &Matrix) -> Result<Matrix> {
    let spec = Spectrum::of(m)?;
    if spec.min() <= 0.0 {
        return Err(Error::Precondition(format!(
            "matrix is not positive definite (lambda_min = {:e})",
            spec.min()
        )));
    }
    Ok(spec.map(|x| x.powf(-0.5)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spectrum_round_trips() {
        let m = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let spec = Spectrum::of(&m).unwrap();
        let back = spec.map(|x| x);
        assert_relative_eq!(back, m, epsilon = 1e-12);
        let trace: f64 = spec.values.iter().sum();
        assert_relative_eq!(trace, 9.0, epsilon = 1e-12);
    }

    #[test]
    fn dominance_detects_violation() {
        let i = Matrix::identity(2, 2);
        let half = &i * 0.5;
        assert!(is_dominated(&half, &i, 0.0).unwrap());
        assert!(!is_dominated(&i, &half, 1e-9).unwrap());
    }

    #[test]
    fn inverse_cholesky_gives_inverse_trace() {
        let m = Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let linv = inverse_cholesky_factor(&m).unwrap();
        let inv = m.clone().try_inverse().unwrap();
        assert_relative_eq!(linv.norm_squared(), inv.trace(), epsilon = 1e-12);
    }
}
