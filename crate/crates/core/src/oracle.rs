//! One-sided oracles.
//!
//! A one-sided oracle receives factors `{M_i}` with `Σ M_i = I`, a PSD bound `B ⪯ I` and an
//! objective `C = C₊ − C₋`, and returns a sparse nonnegative `α` with `Δ = Σ α_i M_i ⪯ B`,
//! `nnz(α) ≤ λ_min(B)·tr(B^{-1})`, and `E[C•Δ] ≥ S·λ_min(B)·tr(C) − ε·S·λ_min(B)·tr(C₊ + C₋)`.
//!
//! The sparsification loop asks for `Δ ⊕ Δ ⪯ B_upper ⊕ B_lower` over the doubled factors
//! `M_i ⊕ M_i`. Both blocks share `α`, so the doubled problem is represented by the pair of
//! blocks and never materialized. With the objective halves `½(C₊ ⊕ C₊)`, `½(C₋ ⊕ C₋)` the
//! doubled inner products reduce to `C • M_i` and `tr(C)` in the original dimension.

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::factors::FactorSet;
use crate::linalg::{inverse_cholesky_factor, is_dominated, psd_tolerance, Matrix, Spectrum};
use crate::potential::BarrierSpectrum;
use crate::sdp::{solve_packing_sdp, SdpInstance, SdpOptions};

/// Declared speed of both oracles in this module.
pub const ORACLE_SPEED: f64 = 1.0 / 32.0;

/// Consecutive rejections tolerated per inner step of the sampling oracle.
pub const REJECTION_CAP: usize = 64;

/// Extreme values of the block-diagonal bound `B_upper ⊕ B_lower`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockStats {
    pub lambda_min: f64,
    pub trace_inverse: f64,
}

impl BlockStats {
    /// `⌊λ_min(B)·tr(B^{-1})⌋`, the number of samples an oracle call may draw.
    pub fn sample_budget(&self) -> usize {
        (self.lambda_min * self.trace_inverse).floor() as usize
    }
}

/// Input of a one-sided oracle call.
#[derive(Debug, Clone)]
pub struct OracleRequest<'a> {
    pub factors: &'a FactorSet,
    pub b_upper: Matrix,
    pub b_lower: Matrix,
    pub c_plus: Matrix,
    pub c_minus: Matrix,
    pub seed: u64,
    stats: BlockStats,
}

impl<'a> OracleRequest<'a> {
    /// Validates `0 ≺ B_upper, B_lower ⪯ I` and `C₊, C₋ ⪰ 0`.
    pub fn new(
        factors: &'a FactorSet,
        b_upper: Matrix,
        b_lower: Matrix,
        c_plus: Matrix,
        c_minus: Matrix,
        seed: u64,
    ) -> Result<Self> {
        let d = factors.dim();
        for m in [&b_upper, &b_lower, &c_plus, &c_minus] {
            if m.nrows() != d || m.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: m.nrows(),
                });
            }
        }
        let mut lambda_min = f64::INFINITY;
        let mut trace_inverse = 0.0;
        for (name, b) in [("B_upper", &b_upper), ("B_lower", &b_lower)] {
            let spec = Spectrum::of(b)?;
            if spec.min() <= 0.0 {
                return Err(Error::Precondition(format!(
                    "{name} is not positive definite"
                )));
            }
            if spec.max() > 1.0 + 1e-9 {
                return Err(Error::Precondition(format!(
                    "{name} is not dominated by the identity (lambda_max = {})",
                    spec.max()
                )));
            }
            lambda_min = lambda_min.min(spec.min());
            trace_inverse += spec.values.iter().map(|x| 1.0 / x).sum::<f64>();
        }
        for (name, c) in [("C_plus", &c_plus), ("C_minus", &c_minus)] {
            let spec = Spectrum::of(c)?;
            if spec.min() < -1e-9 * spec.max().abs().max(1.0) {
                return Err(Error::Precondition(format!("{name} is not PSD")));
            }
        }
        Ok(Self {
            factors,
            b_upper,
            b_lower,
            c_plus,
            c_minus,
            seed,
            stats: BlockStats {
                lambda_min,
                trace_inverse,
            },
        })
    }

    /// Builds the request of one sparsification step: `B = (uI−A)² ⊕ (A−ℓI)²`.
    pub fn from_barrier(
        factors: &'a FactorSet,
        spectrum: &BarrierSpectrum,
        c_plus: Matrix,
        c_minus: Matrix,
        seed: u64,
    ) -> Result<Self> {
        if spectrum.eigenvalues().len() != factors.dim() {
            return Err(Error::DimensionMismatch {
                expected: factors.dim(),
                found: spectrum.eigenvalues().len(),
            });
        }
        Ok(Self {
            factors,
            b_upper: spectrum.b_upper(),
            b_lower: spectrum.b_lower(),
            c_plus,
            c_minus,
            seed,
            stats: BlockStats {
                lambda_min: spectrum.lambda_min_b(),
                trace_inverse: spectrum.trace_b_inverse(),
            },
        })
    }

    pub fn stats(&self) -> BlockStats {
        self.stats
    }

    /// `C = C₊ − C₋`, formed once per call and shared by sampling and objective.
    pub fn objective(&self) -> Matrix {
        &self.c_plus - &self.c_minus
    }

    /// `C₊ + C₋`.
    pub fn objective_abs(&self) -> Matrix {
        &self.c_plus + &self.c_minus
    }
}

/// Output of a one-sided oracle call.
#[derive(Debug, Clone)]
pub struct OracleResponse {
    /// Nonzero coefficients, keyed by factor index.
    pub alpha: BTreeMap<usize, f64>,
    /// `Σ α_i M_i` (one block of `Δ ⊕ Δ`).
    pub delta: Matrix,
    pub speed: f64,
    pub error_eps: f64,
    /// Number of indices drawn.
    pub samples: usize,
    /// Proposals made by the rejection loop (sampling oracle only).
    pub proposals: usize,
}

impl OracleResponse {
    /// `Δ = 0`, a valid answer whenever no factor has `M_i • C > 0`, since then `tr(C) ≤ 0`.
    pub fn empty(dim: usize, speed: f64, error_eps: f64) -> Self {
        Self {
            alpha: BTreeMap::new(),
            delta: Matrix::zeros(dim, dim),
            speed,
            error_eps,
            samples: 0,
            proposals: 0,
        }
    }

    pub fn nnz(&self) -> usize {
        self.alpha.len()
    }
}

/// Sampling distribution `p_i = (M_i•C)⁺ / β` with `β = Σ_t (M_t•C)⁺`.
#[derive(Debug, Clone)]
pub struct SamplingDistribution {
    pub probabilities: Vec<f64>,
    pub beta: f64,
    /// The raw inner products `M_i • C`.
    pub dots: Vec<f64>,
}

pub fn sampling_probabilities(factors: &FactorSet, c: &Matrix) -> Result<SamplingDistribution> {
    let dots = factors.dots(c);
    let beta: f64 = dots.iter().map(|x| x.max(0.0)).sum();
    if !(beta > 0.0) {
        return Err(Error::NoPositiveDirection);
    }
    let probabilities = dots.iter().map(|x| x.max(0.0) / beta).collect();
    Ok(SamplingDistribution {
        probabilities,
        beta,
        dots,
    })
}

fn sampler(dist: &SamplingDistribution) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(&dist.probabilities)
        .map_err(|e| Error::InvariantViolation(format!("sampling weights rejected: {e}")))
}

/// The randomized existence procedure: draws `T = ⌊λ_min(B)·tr(B^{-1})⌋` factors one at a
/// time, each rescaled by `(4Ψ_j·p_t)^{-1}` with `Ψ_j = tr(u_jB − A_j)^{-1}`, rejecting any
/// draw that exceeds `½(u_jB − A_j)`, then returns `A_T / u_T`.
///
/// Declared speed `1/32`, error `0`.
pub fn solution_existence_oracle(req: &OracleRequest<'_>) -> Result<OracleResponse> {
    let factors = req.factors;
    let d = factors.dim();
    let c = req.objective();
    let dist = sampling_probabilities(factors, &c)?;
    let stats = req.stats();
    let budget = stats.sample_budget();
    if budget == 0 {
        return Err(Error::EmptySampleBudget(
            stats.lambda_min * stats.trace_inverse,
        ));
    }
    let index = sampler(&dist)?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);

    let mut acc = Matrix::zeros(d, d);
    let mut barrier = 1.0;
    let mut alpha: BTreeMap<usize, f64> = BTreeMap::new();
    let mut proposals = 0;
    for step in 0..budget {
        // A Cholesky factor exists iff A_j ≺ u_j·B on both blocks.
        let slack_upper = &req.b_upper * barrier - &acc;
        let slack_lower = &req.b_lower * barrier - &acc;
        let (k_upper, k_lower) = match (
            inverse_cholesky_factor(&slack_upper),
            inverse_cholesky_factor(&slack_lower),
        ) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::InvariantViolation(format!(
                    "accumulated matrix left u_j * B at inner step {step}"
                )))
            }
        };
        let psi = k_upper.norm_squared() + k_lower.norm_squared();

        let mut rejections = 0;
        let (picked, scale) = loop {
            proposals += 1;
            let t = index.sample(&mut rng);
            let scale = 1.0 / (4.0 * psi * dist.probabilities[t]);
            let factor = factors.factor(t);
            let fits = scale * factor.max_relative_eigenvalue(&k_upper)? <= 0.5
                && scale * factor.max_relative_eigenvalue(&k_lower)? <= 0.5;
            if fits {
                break (t, scale);
            }
            rejections += 1;
            if rejections >= REJECTION_CAP {
                return Err(Error::RejectionExhausted {
                    step,
                    attempts: rejections,
                });
            }
        };
        factors.factor(picked).add_scaled_to(scale, &mut acc);
        *alpha.entry(picked).or_insert(0.0) += scale;
        barrier += 1.0 / (psi * stats.lambda_min);
    }

    for value in alpha.values_mut() {
        *value /= barrier;
    }
    Ok(OracleResponse {
        alpha,
        delta: acc / barrier,
        speed: ORACLE_SPEED,
        error_eps: 0.0,
        samples: budget,
        proposals,
    })
}

/// `(ln d)²`, floored at `d = 2`.
pub(crate) fn log_squared(d: usize) -> f64 {
    (d.max(2) as f64).ln().powi(2)
}

/// The SDP-filtering oracle: draws `⌊λ_min(B)·tr(B^{-1})⌋` indices i.i.d. from the sampling
/// distribution and solves the packing SDP
/// `max C • Σ_{i∈S} α_i M_i  s.t.  Σ α_i M_i ⪯ B_upper, Σ α_i M_i ⪯ B_lower`
/// restricted to the drawn set.
///
/// Declared speed `1/32`; the declared error is `δ·(ln d)²`, the inverse of the usual
/// `δ = ε/(ln d)²` setting.
pub fn sdp_oracle(req: &OracleRequest<'_>, delta: f64) -> Result<OracleResponse> {
    sdp_oracle_with(req, delta, &SdpOptions::for_delta(delta))
}

pub fn sdp_oracle_with(
    req: &OracleRequest<'_>,
    delta: f64,
    options: &SdpOptions,
) -> Result<OracleResponse> {
    let factors = req.factors;
    let d = factors.dim();
    let c = req.objective();
    let dist = sampling_probabilities(factors, &c)?;
    let stats = req.stats();
    let budget = stats.sample_budget();
    if budget == 0 {
        return Err(Error::EmptySampleBudget(
            stats.lambda_min * stats.trace_inverse,
        ));
    }
    let index = sampler(&dist)?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut drawn: Vec<usize> = (0..budget).map(|_| index.sample(&mut rng)).collect();
    drawn.sort_unstable();
    drawn.dedup();

    let instance = SdpInstance::new(
        drawn.iter().map(|&i| dist.dots[i]).collect(),
        drawn.iter().map(|&i| factors.factor(i).clone()).collect(),
        vec![req.b_upper.clone(), req.b_lower.clone()],
        delta,
    )?;
    let solution = solve_packing_sdp(&instance, options)?;

    let alpha: BTreeMap<usize, f64> = drawn
        .iter()
        .zip(solution.x.iter())
        .filter(|(_, &x)| x > 0.0)
        .map(|(&i, &x)| (i, x))
        .collect();
    let delta_matrix = factors.weighted_sum(alpha.iter().map(|(&i, &x)| (i, x)));
    Ok(OracleResponse {
        alpha,
        delta: delta_matrix,
        speed: ORACLE_SPEED,
        error_eps: delta * log_squared(d),
        samples: budget,
        proposals: 0,
    })
}

/// Outcome of the three deterministic oracle contract checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractCheck {
    pub nnz: usize,
    pub nnz_bound: f64,
    pub sparsity_ok: bool,
    pub upper_ok: bool,
    pub lower_ok: bool,
    pub nonnegative_ok: bool,
}

impl ContractCheck {
    pub fn passed(&self) -> bool {
        self.sparsity_ok && self.upper_ok && self.lower_ok && self.nonnegative_ok
    }
}

/// Checks `nnz(α) ≤ λ_min(B)·tr(B^{-1})`, `Δ ⪯ B_upper`, `Δ ⪯ B_lower` (slack `1e-9·‖B‖₂`)
/// and `α ≥ 0`.
pub fn check_contract(req: &OracleRequest<'_>, resp: &OracleResponse) -> Result<ContractCheck> {
    let stats = req.stats();
    let nnz_bound = stats.lambda_min * stats.trace_inverse;
    let nnz = resp.nnz();
    let upper_ok = is_dominated(&resp.delta, &req.b_upper, psd_tolerance(&req.b_upper)?)?;
    let lower_ok = is_dominated(&resp.delta, &req.b_lower, psd_tolerance(&req.b_lower)?)?;
    Ok(ContractCheck {
        nnz,
        nnz_bound,
        sparsity_ok: nnz as f64 <= nnz_bound,
        upper_ok,
        lower_ok,
        nonnegative_ok: resp.alpha.values().all(|&a| a >= 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::Factor;
    use crate::linalg::Vector;
    use approx::assert_relative_eq;

    fn standard_basis(d: usize) -> FactorSet {
        let factors = (0..d)
            .map(|k| {
                let mut v = Vector::zeros(d);
                v[k] = 1.0;
                Factor::Rank1(v)
            })
            .collect();
        FactorSet::new(d, factors, None).unwrap()
    }

    fn identity_request(factors: &FactorSet, b: f64, seed: u64) -> OracleRequest<'_> {
        let d = factors.dim();
        let i = Matrix::identity(d, d);
        OracleRequest::new(
            factors,
            &i * b,
            &i * b,
            i.clone(),
            Matrix::zeros(d, d),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn probabilities_follow_trace_for_identity_objective() {
        let v1 = Vector::from_vec(vec![0.6, 0.0]);
        let v2 = Vector::from_vec(vec![0.8, 0.0]);
        let v3 = Vector::from_vec(vec![0.0, 1.0]);
        let set = FactorSet::new(
            2,
            vec![Factor::Rank1(v1), Factor::Rank1(v2), Factor::Rank1(v3)],
            None,
        )
        .unwrap();
        let dist = sampling_probabilities(&set, &Matrix::identity(2, 2)).unwrap();
        assert_relative_eq!(dist.beta, 2.0, epsilon = 1e-14);
        let expected = [0.36 / 2.0, 0.64 / 2.0, 0.5];
        for (p, e) in dist.probabilities.iter().zip(expected) {
            assert_relative_eq!(*p, e, epsilon = 1e-14);
        }
    }

    #[test]
    fn probabilities_clamp_negative_directions() {
        let set = standard_basis(3);
        let c = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, -1.0, 1.0]));
        let dist = sampling_probabilities(&set, &c).unwrap();
        assert_eq!(dist.probabilities, vec![0.75, 0.0, 0.25]);
        assert_eq!(dist.beta, 4.0);
    }

    #[test]
    fn no_positive_direction_is_an_error() {
        let set = standard_basis(2);
        let c = -Matrix::identity(2, 2);
        assert!(matches!(
            sampling_probabilities(&set, &c),
            Err(Error::NoPositiveDirection)
        ));
    }

    #[test]
    fn existence_oracle_on_single_identity_factor() {
        let d = 3;
        let set = FactorSet::new(d, vec![Factor::Dense(Matrix::identity(d, d))], None).unwrap();
        let req = identity_request(&set, 1.0, 5);
        assert_eq!(req.stats().sample_budget(), 2 * d);
        let resp = solution_existence_oracle(&req).unwrap();
        assert_eq!(resp.samples, 2 * d);
        assert!(check_contract(&req, &resp).unwrap().passed());
    }

    #[test]
    fn existence_oracle_scalar_case_matches_hand_simulation() {
        // d = 1, M = [1], B = [b] ⊕ [b], C = [1]. Ψ_j = 2/(u_j b − a_j), p = 1, so every draw
        // has Δ_j = (u_j b − a_j)/8 and is accepted; u grows by (u_j b − a_j)/(2b).
        let b = 0.3;
        let set =
            FactorSet::new(1, vec![Factor::Rank1(Vector::from_vec(vec![1.0]))], None).unwrap();
        let req = identity_request(&set, b, 11);
        let budget = req.stats().sample_budget();
        assert_eq!(budget, 2);
        let (mut a, mut u) = (0.0f64, 1.0f64);
        for _ in 0..budget {
            let slack = u * b - a;
            a += slack / 8.0;
            u += slack / (2.0 * b);
        }
        let resp = solution_existence_oracle(&req).unwrap();
        assert_relative_eq!(resp.delta[(0, 0)], a / u, max_relative = 1e-14);
        assert!(resp.delta[(0, 0)] <= b);
        assert_eq!(resp.proposals, budget);
    }

    #[test]
    fn identical_seeds_reproduce_bitwise() {
        let set = standard_basis(4);
        let c = Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0, -0.5, 0.7]));
        let i = Matrix::identity(4, 4);
        let mk = |seed| {
            OracleRequest::new(
                &set,
                &i * 0.5,
                &i * 0.8,
                c.map(|x| x.max(0.0)),
                c.map(|x| (-x).max(0.0)),
                seed,
            )
            .unwrap()
        };
        let a = solution_existence_oracle(&mk(3)).unwrap();
        let b = solution_existence_oracle(&mk(3)).unwrap();
        assert_eq!(a.alpha, b.alpha);
        let a = sdp_oracle(&mk(9), 0.1).unwrap();
        let b = sdp_oracle(&mk(9), 0.1).unwrap();
        assert_eq!(a.alpha, b.alpha);
    }

    #[test]
    fn sdp_oracle_single_factor_scales_to_bound() {
        // One factor M = I on d = 2 with B_upper = 0.5 I, B_lower = 0.8 I: α = 0.5.
        let d = 2;
        let set = FactorSet::new(d, vec![Factor::Dense(Matrix::identity(d, d))], None).unwrap();
        let i = Matrix::identity(d, d);
        let req = OracleRequest::new(&set, &i * 0.5, &i * 0.8, i.clone(), Matrix::zeros(d, d), 1)
            .unwrap();
        let resp = sdp_oracle(&req, 0.05).unwrap();
        let alpha = resp.alpha[&0];
        assert!(
            (0.5 * (1.0 - 0.05)..=0.5 + 1e-12).contains(&alpha),
            "alpha = {alpha}"
        );
        assert!(check_contract(&req, &resp).unwrap().passed());
    }

    #[test]
    fn request_rejects_bound_above_identity() {
        let set = standard_basis(2);
        let i = Matrix::identity(2, 2);
        let err =
            OracleRequest::new(&set, &i * 2.0, i.clone(), i.clone(), i.clone(), 0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }
}
