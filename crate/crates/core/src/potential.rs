//! Exponential barrier potentials and the inequalities that govern their change.
//!
//! For a symmetric `A` strictly between the barriers `ℓI ≺ A ≺ uI`:
//!
//! ```text
//! Φ_u(A)   = tr exp((uI − A)^{-1})
//! Φ_ℓ(A)   = tr exp((A − ℓI)^{-1})
//! Φ_{u,ℓ}  = Φ_u + Φ_ℓ
//! ```
//!
//! Everything here is evaluated exactly from one symmetric eigendecomposition per call;
//! this module doubles as the ground-truth oracle for the approximate paths elsewhere.

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Spectrum};

/// Minimum eigenvalue distance to either barrier.
pub const BARRIER_MARGIN: f64 = 1e-12;

/// Largest admissible `1/gap` before `exp(1/gap)` is treated as an overflow.
pub const EXPONENT_LIMIT: f64 = 700.0;

/// Relative slack when comparing the two sides of a potential inequality.
const INEQUALITY_SLACK: f64 = 1e-10;

/// `f(x) = x^{-2} exp(1/x)`, the scalar kernel of the potential gradients.
pub fn barrier_kernel(x: f64) -> f64 {
    (1.0 / x).exp() / (x * x)
}

fn check_gap(gap: f64, side: &'static str) -> Result<()> {
    if !(gap >= BARRIER_MARGIN) {
        return Err(Error::BarrierViolation { side, gap });
    }
    if 1.0 / gap > EXPONENT_LIMIT {
        return Err(Error::PotentialOverflow {
            inverse_gap: 1.0 / gap,
        });
    }
    Ok(())
}

/// Accumulated matrix and barrier pair of the sparsification loop.
#[derive(Debug, Clone)]
pub struct BarrierState {
    pub a: Matrix,
    pub upper: f64,
    pub lower: f64,
    pub iteration: usize,
}

impl BarrierState {
    /// Checks `ℓI ≺ A ≺ uI` with the barrier margin.
    pub fn new(a: Matrix, upper: f64, lower: f64, iteration: usize) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Validation(
                "accumulated matrix must be square".into(),
            ));
        }
        BarrierSpectrum::new(&a, upper, lower)?;
        Ok(Self {
            a,
            upper,
            lower,
            iteration,
        })
    }

    /// `A = 0`, `u = 1/4`, `ℓ = −1/4`.
    pub fn initial(dim: usize) -> Self {
        Self {
            a: Matrix::zeros(dim, dim),
            upper: 0.25,
            lower: -0.25,
            iteration: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn spectrum(&self) -> Result<BarrierSpectrum> {
        BarrierSpectrum::new(&self.a, self.upper, self.lower)
    }
}

/// Eigendecomposition of `A` together with the barrier pair; every potential quantity
/// for one iteration is derived from it.
#[derive(Debug, Clone)]
pub struct BarrierSpectrum {
    spectrum: Spectrum,
    upper: f64,
    lower: f64,
}

impl BarrierSpectrum {
    pub fn new(a: &Matrix, upper: f64, lower: f64) -> Result<Self> {
        let spectrum = Spectrum::of(a)?;
        for &l in spectrum.values.iter() {
            check_gap(upper - l, "upper")?;
            check_gap(l - lower, "lower")?;
        }
        Ok(Self {
            spectrum,
            upper,
            lower,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        self.spectrum.values.as_slice()
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    fn upper_gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.spectrum.values.iter().map(move |l| self.upper - l)
    }

    fn lower_gaps(&self) -> impl Iterator<Item = f64> + '_ {
        self.spectrum.values.iter().map(move |l| l - self.lower)
    }

    /// Smallest distance from the spectrum to either barrier.
    pub fn min_gap(&self) -> f64 {
        self.upper_gaps()
            .chain(self.lower_gaps())
            .fold(f64::INFINITY, f64::min)
    }

    pub fn phi_upper(&self) -> f64 {
        self.upper_gaps().map(|g| (1.0 / g).exp()).sum()
    }

    pub fn phi_lower(&self) -> f64 {
        self.lower_gaps().map(|g| (1.0 / g).exp()).sum()
    }

    pub fn phi(&self) -> f64 {
        self.phi_upper() + self.phi_lower()
    }

    /// `(uI − A)^{-2} exp((uI − A)^{-1})`.
    pub fn upper_kernel(&self) -> Matrix {
        let u = self.upper;
        self.spectrum.map(|l| barrier_kernel(u - l))
    }

    /// `(A − ℓI)^{-2} exp((A − ℓI)^{-1})`.
    pub fn lower_kernel(&self) -> Matrix {
        let ell = self.lower;
        self.spectrum.map(|l| barrier_kernel(l - ell))
    }

    pub fn upper_kernel_trace(&self) -> f64 {
        self.upper_gaps().map(barrier_kernel).sum()
    }

    pub fn lower_kernel_trace(&self) -> f64 {
        self.lower_gaps().map(barrier_kernel).sum()
    }

    /// `(C₊, C₋) = ((1−2ε) f(A − ℓI), (1+2ε) f(uI − A))`.
    pub fn gradients(&self, eps: f64) -> (Matrix, Matrix) {
        (
            self.lower_kernel() * (1.0 - 2.0 * eps),
            self.upper_kernel() * (1.0 + 2.0 * eps),
        )
    }

    /// `(uI − A)²`.
    pub fn b_upper(&self) -> Matrix {
        let u = self.upper;
        self.spectrum.map(|l| (u - l).powi(2))
    }

    /// `(A − ℓI)²`.
    pub fn b_lower(&self) -> Matrix {
        let ell = self.lower;
        self.spectrum.map(|l| (l - ell).powi(2))
    }

    /// `λ_min((uI − A)² ⊕ (A − ℓI)²)`.
    pub fn lambda_min_b(&self) -> f64 {
        self.min_gap().powi(2)
    }

    /// `tr(((uI − A)² ⊕ (A − ℓI)²)^{-1})`.
    pub fn trace_b_inverse(&self) -> f64 {
        self.upper_gaps()
            .chain(self.lower_gaps())
            .map(|g| 1.0 / (g * g))
            .sum()
    }
}

/// `Φ_u(A) = Σ exp(1/(u − λ_i))`.
pub fn phi_upper(a: &Matrix, u: f64) -> Result<f64> {
    let spec = Spectrum::of(a)?;
    let mut total = 0.0;
    for &l in spec.values.iter() {
        check_gap(u - l, "upper")?;
        total += (1.0 / (u - l)).exp();
    }
    Ok(total)
}

/// `Φ_ℓ(A) = Σ exp(1/(λ_i − ℓ))`.
pub fn phi_lower(a: &Matrix, ell: f64) -> Result<f64> {
    let spec = Spectrum::of(a)?;
    let mut total = 0.0;
    for &l in spec.values.iter() {
        check_gap(l - ell, "lower")?;
        total += (1.0 / (l - ell)).exp();
    }
    Ok(total)
}

pub fn phi(state: &BarrierState) -> Result<f64> {
    Ok(state.spectrum()?.phi())
}

/// The objective pair `(C₊, C₋)` handed to the one-sided oracle.
pub fn gradient_matrices(state: &BarrierState, eps: f64) -> Result<(Matrix, Matrix)> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::Precondition(format!(
            "gradient step parameter must lie in [0, 1/2], got {eps}"
        )));
    }
    Ok(state.spectrum()?.gradients(eps))
}

fn check_common(a: &Matrix, u: f64, ell: f64, delta: f64) -> Result<BarrierSpectrum> {
    if !(0.0..=0.1).contains(&delta) {
        return Err(Error::Precondition(format!(
            "delta = {delta} outside [0, 1/10]"
        )));
    }
    if u - ell > 1.0 + 1e-12 {
        return Err(Error::Precondition(format!(
            "barrier width u - ell = {} exceeds 1",
            u - ell
        )));
    }
    BarrierSpectrum::new(a, u, ell)
        .map_err(|e| Error::Precondition(format!("barrier invariant: {e}")))
}

fn holds(lhs: f64, rhs: f64) -> bool {
    lhs <= rhs + INEQUALITY_SLACK * lhs.abs().max(rhs.abs())
}

/// Evaluates both sides of the one-step potential bound for `A + Δ`:
///
/// `Φ(A+Δ) ≤ Φ(A) + (1+2δ) f(uI−A)•Δ − (1−2δ) f(A−ℓI)•Δ`
///
/// Returns `Err(Precondition)` unless `0 ⪯ Δ`, `Δ ⪯ δ(uI−A)²`, `Δ ⪯ δ(A−ℓI)²`, `δ ≤ 1/10`
/// and `u − ℓ ≤ 1`; otherwise whether the inequality holds.
pub fn check_lemma_potentialchange(
    a: &Matrix,
    u: f64,
    ell: f64,
    step: &Matrix,
    delta: f64,
) -> Result<bool> {
    let spec = check_common(a, u, ell, delta)?;
    if step.shape() != a.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: step.nrows(),
        });
    }
    let step_spec = Spectrum::of(step)?;
    let step_scale = step_spec.max().abs().max(1.0);
    if step_spec.min() < -1e-12 * step_scale {
        return Err(Error::Precondition("step matrix is not PSD".into()));
    }
    for (name, bound) in [("(uI-A)^2", spec.b_upper()), ("(A-lI)^2", spec.b_lower())] {
        let scaled = bound * delta;
        let tol = crate::linalg::psd_tolerance(&scaled)?;
        if !crate::linalg::is_dominated(step, &scaled, tol)? {
            return Err(Error::Precondition(format!(
                "step is not dominated by delta * {name}"
            )));
        }
    }
    let lhs = BarrierSpectrum::new(&(a + step), u, ell)?.phi();
    let rhs = spec.phi() + (1.0 + 2.0 * delta) * spec.upper_kernel().dot(step)
        - (1.0 - 2.0 * delta) * spec.lower_kernel().dot(step);
    Ok(holds(lhs, rhs))
}

/// Evaluates both sides of the barrier-shift bound:
///
/// `Φ_{u+δ_u, ℓ+δ_ℓ}(A) ≤ Φ_{u,ℓ}(A) − (1−2δ) δ_u tr f(uI−A) + (1+2δ) δ_ℓ tr f(A−ℓI)`
pub fn check_lemma_potential2(
    a: &Matrix,
    u: f64,
    ell: f64,
    delta_u: f64,
    delta_ell: f64,
    delta: f64,
) -> Result<bool> {
    let spec = check_common(a, u, ell, delta)?;
    let upper_floor = spec.upper_gaps().fold(f64::INFINITY, f64::min).powi(2);
    let lower_floor = spec.lower_gaps().fold(f64::INFINITY, f64::min).powi(2);
    let slack = 1.0 + 1e-12;
    if !(delta_u >= 0.0 && delta_u <= delta * upper_floor * slack) {
        return Err(Error::Precondition(format!(
            "delta_u = {delta_u:e} outside [0, delta * lambda_min(uI-A)^2 = {:e}]",
            delta * upper_floor
        )));
    }
    if !(delta_ell >= 0.0 && delta_ell <= delta * lower_floor * slack) {
        return Err(Error::Precondition(format!(
            "delta_ell = {delta_ell:e} outside [0, delta * lambda_min(A-lI)^2 = {:e}]",
            delta * lower_floor
        )));
    }
    let lhs = BarrierSpectrum::new(a, u + delta_u, ell + delta_ell)?.phi();
    let rhs = spec.phi() - (1.0 - 2.0 * delta) * delta_u * spec.upper_kernel_trace()
        + (1.0 + 2.0 * delta) * delta_ell * spec.lower_kernel_trace();
    Ok(holds(lhs, rhs))
}
