//! The two-sided barrier loop: starting from `A = 0`, `u = 1/4`, `ℓ = −1/4`, repeatedly ask a
//! one-sided oracle for a step `Δ`, set `A ← A + εΔ`, and move both barriers by closed-form
//! amounts until `u − ℓ ≥ 1`. The accumulated coefficients, rescaled by `2/(u_T + ℓ_T)`, form
//! the sparsifier.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factors::FactorSet;
use crate::linalg::{Matrix, Spectrum};
use crate::oracle::{
    check_contract, log_squared, sdp_oracle, solution_existence_oracle, OracleRequest,
    OracleResponse, ORACLE_SPEED,
};
use crate::potential::{BarrierSpectrum, BarrierState};
use crate::sdp::matfun_taylor_for_tolerance;

/// Upper limit on `ε`; the upper-barrier increment has a pole at `ε = 1/4`.
pub const MAX_EPSILON: f64 = 0.25;

/// Below this `ε` the loop carries its full two-sided guarantee.
pub const GUARANTEED_EPSILON: f64 = 0.05;

pub const DEFAULT_RESTARTS: usize = 5;

/// Iteration cap is `ITERATION_CAP_FACTOR · max(1, ln²d) / (ε²·S)`.
pub const ITERATION_CAP_FACTOR: f64 = 50.0;

/// Documented constant `κ_T` in `iterations ≤ κ_T·ln²d/(ε²·S)`.
pub const TERMINATION_CONSTANT: f64 = 5.0;

/// Documented constant `κ_B` in `λ_min(B_j)·ln²d ≥ κ_B` while `Φ ≤ d^{10}`.
pub const LAMBDA_FLOOR_CONSTANT: f64 = 0.01;

/// Certification tolerance multiplier: runs pass when `eps_actual ≤ 10·ε`.
pub const CERTIFY_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    Sampling,
    Sdp,
}

impl OracleKind {
    pub fn speed(&self) -> f64 {
        ORACLE_SPEED
    }
}

impl std::str::FromStr for OracleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampling" => Ok(Self::Sampling),
            "sdp" => Ok(Self::Sdp),
            other => Err(Error::Config(format!("unknown oracle kind '{other}'"))),
        }
    }
}

impl std::fmt::Display for OracleKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sampling => "sampling",
            Self::Sdp => "sdp",
        })
    }
}

/// How the barrier kernels `f(uI − A)`, `f(A − ℓI)` are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GradientMode {
    Exact,
    /// Taylor polynomials with the degree chosen for the given absolute tolerance.
    Taylor {
        tolerance: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyConfig {
    pub epsilon: f64,
    pub oracle: OracleKind,
    pub seed: u64,
    /// Defaults to `ITERATION_CAP_FACTOR · max(1, ln²d)/(ε²·S)`.
    pub max_iterations: Option<usize>,
    /// Defaults to `ε / ln²d`.
    pub delta_sdp: Option<f64>,
    /// Oracle error used in the barrier increments; defaults to the oracle's declared error,
    /// and to `ε` for the exact sampling oracle.
    pub error_eps: Option<f64>,
    pub restarts: usize,
    /// Defaults to `CERTIFY_FACTOR · ε`.
    pub certify_tolerance: Option<f64>,
    pub gradients: GradientMode,
}

impl SparsifyConfig {
    pub fn new(epsilon: f64, oracle: OracleKind, seed: u64) -> Result<Self> {
        let config = Self {
            epsilon,
            oracle,
            seed,
            max_iterations: None,
            delta_sdp: None,
            error_eps: None,
            restarts: DEFAULT_RESTARTS,
            certify_tolerance: None,
            gradients: GradientMode::Exact,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < MAX_EPSILON) {
            return Err(Error::Config(format!(
                "epsilon must lie in (0, {MAX_EPSILON}), got {}",
                self.epsilon
            )));
        }
        if let Some(delta) = self.delta_sdp {
            if !(delta > 0.0 && delta < 1.0) {
                return Err(Error::Config(format!(
                    "delta must lie in (0, 1), got {delta}"
                )));
            }
        }
        if let Some(e) = self.error_eps {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::Config(format!(
                    "error_eps must lie in [0, 1), got {e}"
                )));
            }
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        if let GradientMode::Taylor { tolerance } = self.gradients {
            if !(tolerance > 0.0) {
                return Err(Error::Config("Taylor tolerance must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn speed(&self) -> f64 {
        self.oracle.speed()
    }

    pub fn iteration_cap(&self, dim: usize) -> usize {
        self.max_iterations.unwrap_or_else(|| {
            let e = self.epsilon;
            (ITERATION_CAP_FACTOR * log_squared(dim).max(1.0) / (e * e * self.speed())).ceil()
                as usize
        })
    }

    pub fn sdp_delta(&self, dim: usize) -> f64 {
        self.delta_sdp
            .unwrap_or_else(|| (self.epsilon / log_squared(dim)).min(0.5))
    }

    pub fn oracle_error(&self) -> f64 {
        self.error_eps.unwrap_or(self.epsilon)
    }

    pub fn tolerance(&self) -> f64 {
        self.certify_tolerance
            .unwrap_or(CERTIFY_FACTOR * self.epsilon)
    }
}

/// Normalized sparsifier coefficients `c_i = scale · ε·Σ_j α_i^{(j)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparsifierResult {
    pub coefficients: BTreeMap<usize, f64>,
    pub epsilon: f64,
    pub nnz: usize,
    /// `(u_T, ℓ_T)`.
    pub final_barriers: (f64, f64),
    /// Normalization `2/(u_T + ℓ_T)` already applied to `coefficients`.
    pub scale: f64,
    pub iterations: usize,
}

impl SparsifierResult {
    /// Wraps already-normalized coefficients; nonpositive entries are dropped.
    pub fn from_coefficients(
        coefficients: impl IntoIterator<Item = (usize, f64)>,
        epsilon: f64,
        final_barriers: (f64, f64),
    ) -> Self {
        let coefficients: BTreeMap<usize, f64> =
            coefficients.into_iter().filter(|(_, c)| *c > 0.0).collect();
        Self {
            nnz: coefficients.len(),
            coefficients,
            epsilon,
            final_barriers,
            scale: 1.0,
            iterations: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub j: usize,
    pub upper: f64,
    pub lower: f64,
    pub lambda_min_b: f64,
    pub potential: f64,
    pub nnz: usize,
    pub c_dot_delta: f64,
    pub oracle_nnz: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub seed: u64,
    pub records: Vec<IterationRecord>,
}

/// Barrier increments `(δ_u, δ_ℓ)`:
/// `δ_u = ε(1+2ε)(1+e)/(1−4ε)·S·λ`, `δ_ℓ = ε(1−2ε)(1−e)/(1+4ε)·S·λ` with `e` the oracle error.
pub fn barrier_update(lambda_min_b: f64, eps: f64, speed: f64, oracle_error: f64) -> (f64, f64) {
    let base = eps * speed * lambda_min_b;
    let du = base * (1.0 + 2.0 * eps) * (1.0 + oracle_error) / (1.0 - 4.0 * eps);
    let dl = base * (1.0 - 2.0 * eps) * (1.0 - oracle_error) / (1.0 + 4.0 * eps);
    (du, dl)
}

/// One loop iteration.
#[derive(Debug, Clone)]
pub struct Step {
    pub next: BarrierState,
    pub response: OracleResponse,
    pub record: IterationRecord,
}

/// SplitMix64 finalizer, used to derive independent per-iteration and per-restart seeds.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn kernel_matrices(
    state: &BarrierState,
    spectrum: &BarrierSpectrum,
    config: &SparsifyConfig,
) -> Result<(Matrix, Matrix)> {
    let eps = config.epsilon;
    match config.gradients {
        GradientMode::Exact => Ok(spectrum.gradients(eps)),
        GradientMode::Taylor { tolerance } => {
            let k = matfun_taylor_for_tolerance(&state.a, state.lower, state.upper, tolerance)?;
            Ok((k.lower * (1.0 - 2.0 * eps), k.upper * (1.0 + 2.0 * eps)))
        }
    }
}

/// Runs one oracle call and barrier update from `state`. Pure in `(state, config, oracle_seed)`.
pub fn advance(
    factors: &FactorSet,
    state: &BarrierState,
    config: &SparsifyConfig,
    oracle_seed: u64,
) -> Result<Step> {
    if state.width() >= 1.0 {
        return Err(Error::Precondition(
            "barrier width already reached 1".into(),
        ));
    }
    let spectrum = state.spectrum()?;
    let potential = spectrum.phi();
    let lambda_min_b = spectrum.lambda_min_b();
    let (c_plus, c_minus) = kernel_matrices(state, &spectrum, config)?;
    let request = OracleRequest::from_barrier(factors, &spectrum, c_plus, c_minus, oracle_seed)?;
    let d = factors.dim();
    let outcome = match config.oracle {
        OracleKind::Sampling => solution_existence_oracle(&request),
        OracleKind::Sdp => sdp_oracle(&request, config.sdp_delta(d)),
    };
    let response = match outcome {
        Ok(r) => r,
        Err(Error::NoPositiveDirection) => OracleResponse::empty(d, config.speed(), 0.0),
        Err(e) => return Err(e),
    };
    let contract = check_contract(&request, &response)?;
    if !contract.passed() {
        return Err(Error::InvariantViolation(format!(
            "oracle contract failed at iteration {}: {contract:?}",
            state.iteration
        )));
    }
    let c_dot_delta = crate::linalg::frobenius_dot(&request.objective(), &response.delta);

    let eps = config.epsilon;
    let (du, dl) = barrier_update(lambda_min_b, eps, response.speed, config.oracle_error());
    let a = &state.a + &response.delta * eps;
    let (upper, lower) = (state.upper + du, state.lower + dl);
    let next = BarrierState::new(a, upper, lower, state.iteration + 1).map_err(|e| match e {
        Error::BarrierViolation { side, gap } => Error::InvariantViolation(format!(
            "{side} barrier crossed at iteration {} (gap {gap:e})",
            state.iteration + 1
        )),
        other => other,
    })?;
    let record = IterationRecord {
        j: state.iteration,
        upper: state.upper,
        lower: state.lower,
        lambda_min_b,
        potential,
        nnz: 0,
        c_dot_delta,
        oracle_nnz: response.nnz(),
        samples: response.samples,
    };
    Ok(Step {
        next,
        response,
        record,
    })
}

/// A single run of the loop with a fixed seed, without certification.
#[derive(Debug, Clone)]
pub struct Run {
    pub result: SparsifierResult,
    pub trace: RunTrace,
    pub final_state: BarrierState,
}

pub fn run_once(factors: &FactorSet, config: &SparsifyConfig, seed: u64) -> Result<Run> {
    config.validate()?;
    let d = factors.dim();
    let cap = config.iteration_cap(d);
    let mut state = BarrierState::initial(d);
    let mut raw: BTreeMap<usize, f64> = BTreeMap::new();
    let mut trace = RunTrace {
        seed,
        records: Vec::new(),
    };
    while state.width() < 1.0 {
        if state.iteration >= cap {
            return Err(Error::MaxIterations(cap));
        }
        let step = advance(
            factors,
            &state,
            config,
            mix_seed(seed, state.iteration as u64),
        )?;
        for (&i, &a) in &step.response.alpha {
            *raw.entry(i).or_insert(0.0) += config.epsilon * a;
        }
        let mut record = step.record;
        record.nnz = raw.len();
        trace.records.push(record);
        state = step.next;
    }
    let (u, ell) = (state.upper, state.lower);
    if !(u + ell > 0.0) {
        return Err(Error::InvariantViolation(format!(
            "final barriers do not admit normalization (u = {u}, ell = {ell})"
        )));
    }
    let scale = 2.0 / (u + ell);
    let coefficients: BTreeMap<usize, f64> = raw
        .into_iter()
        .filter(|(_, c)| *c > 0.0)
        .map(|(i, c)| (i, c * scale))
        .collect();
    let result = SparsifierResult {
        nnz: coefficients.len(),
        coefficients,
        epsilon: config.epsilon,
        final_barriers: (u, ell),
        scale,
        iterations: state.iteration,
    };
    Ok(Run {
        result,
        trace,
        final_state: state,
    })
}

/// Spectral quality of `Σ c_i M_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub eps_actual: f64,
    pub nnz: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn certify(
    factors: &FactorSet,
    result: &SparsifierResult,
    tolerance: f64,
) -> Result<Certificate> {
    let sum = factors.weighted_sum(result.coefficients.iter().map(|(&i, &c)| (i, c)));
    let spec = Spectrum::of(&sum)?;
    let (lambda_min, lambda_max) = (spec.min(), spec.max());
    let eps_actual = (1.0 - lambda_min).max(lambda_max - 1.0);
    Ok(Certificate {
        lambda_min,
        lambda_max,
        eps_actual,
        nnz: result.nnz,
        tolerance,
        passed: eps_actual <= tolerance,
    })
}

/// Result of [`sparsify`]: the accepted (or last) run with its certificate.
#[derive(Debug, Clone)]
pub struct SparsifyOutcome {
    pub result: SparsifierResult,
    pub trace: RunTrace,
    pub certificate: Certificate,
    pub final_state: BarrierState,
    /// Number of runs attempted, including the returned one.
    pub attempts: usize,
}

/// Runs the loop with up to `config.restarts` derived seeds, returning the first run that
/// certifies. If none does, returns the last completed run (with `certificate.passed == false`),
/// or the last error if every run failed.
pub fn sparsify(factors: &FactorSet, config: &SparsifyConfig) -> Result<SparsifyOutcome> {
    config.validate()?;
    if config.epsilon >= GUARANTEED_EPSILON {
        log::warn!(
            "epsilon = {} is outside (0, {GUARANTEED_EPSILON}); the two-sided guarantee is not proven there",
            config.epsilon
        );
    }
    let tolerance = config.tolerance();
    let mut last_outcome = None;
    let mut last_error = None;
    for attempt in 0..config.restarts {
        let seed = mix_seed(config.seed, u64::MAX - attempt as u64);
        match run_once(factors, config, seed) {
            Ok(run) => {
                let certificate = certify(factors, &run.result, tolerance)?;
                log::info!(
                    "run {attempt}: {} iterations, nnz {}, eps_actual {:.4}",
                    run.result.iterations,
                    run.result.nnz,
                    certificate.eps_actual
                );
                let outcome = SparsifyOutcome {
                    result: run.result,
                    trace: run.trace,
                    certificate,
                    final_state: run.final_state,
                    attempts: attempt + 1,
                };
                if certificate.passed {
                    return Ok(outcome);
                }
                last_outcome = Some(outcome);
            }
            Err(e @ (Error::InvariantViolation(_) | Error::Config(_))) => return Err(e),
            Err(e) => {
                log::warn!("run {attempt} failed: {e}");
                last_error = Some(e);
            }
        }
    }
    match (last_outcome, last_error) {
        (Some(outcome), _) => Ok(outcome),
        (None, Some(e)) => Err(e),
        (None, None) => unreachable!("restarts >= 1 is validated"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factors::Factor;
    use crate::linalg::Vector;
    use approx::assert_relative_eq;

    #[test]
    fn barrier_update_closed_form() {
        // ε = 1/40, S = 1/32, λ = 1/16, oracle error = ε.
        let (du, dl) = barrier_update(1.0 / 16.0, 1.0 / 40.0, 1.0 / 32.0, 1.0 / 40.0);
        let base = 1.0 / 40.0 / 32.0 / 16.0;
        assert_relative_eq!(
            du,
            base * (21.0 / 20.0) * (41.0 / 40.0) / (9.0 / 10.0),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            dl,
            base * (19.0 / 20.0) * (39.0 / 40.0) / (11.0 / 10.0),
            max_relative = 1e-15
        );
        assert!(du > dl && dl > 0.0);
    }

    #[test]
    fn barrier_gap_is_second_order() {
        let (s, lam) = (1.0 / 32.0, 0.1);
        for eps in [1e-2, 1e-3, 1e-4] {
            let (du, dl) = barrier_update(lam, eps, s, eps);
            let ratio = (du - dl) / (eps * eps * s * lam);
            assert!(ratio > 10.0 && ratio < 20.0, "ratio {ratio}");
            assert!((du - dl) / du < 20.0 * eps);
        }
    }

    #[test]
    fn config_rejects_epsilon_out_of_range() {
        assert!(SparsifyConfig::new(0.0, OracleKind::Sampling, 0).is_err());
        assert!(SparsifyConfig::new(0.25, OracleKind::Sampling, 0).is_err());
        assert!(SparsifyConfig::new(0.15, OracleKind::Sampling, 0).is_ok());
    }

    #[test]
    fn certify_unit_coefficients_is_exact() {
        let factors = FactorSet::new(
            2,
            vec![
                Factor::Rank1(Vector::from_vec(vec![1.0, 0.0])),
                Factor::Rank1(Vector::from_vec(vec![0.0, 1.0])),
            ],
            None,
        )
        .unwrap();
        let all = SparsifierResult::from_coefficients([(0, 1.0), (1, 1.0)], 0.1, (1.0, 0.0));
        let cert = certify(&factors, &all, 1e-9).unwrap();
        assert_relative_eq!(cert.eps_actual, 0.0, epsilon = 1e-14);
        let dropped = SparsifierResult::from_coefficients([(0, 1.0)], 0.1, (1.0, 0.0));
        let cert = certify(&factors, &dropped, 0.5).unwrap();
        assert!(cert.lambda_min < 1.0 && !cert.passed);
    }

    #[test]
    fn seed_mixing_separates_streams() {
        assert_ne!(mix_seed(1, 0), mix_seed(1, 1));
        assert_ne!(mix_seed(1, 0), mix_seed(2, 0));
        assert_eq!(mix_seed(5, 9), mix_seed(5, 9));
    }
}
