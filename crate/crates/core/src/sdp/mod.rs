//! Packing SDPs `max cᵀx  s.t.  x ≥ 0, Σ x_i A_i ⪯ B_k` for one or two bound blocks, solved
//! with a matrix-multiplicative-weights scheme.
//!
//! The solver works on the normalized instance `Ã_i = B_k^{-1/2} A_i B_k^{-1/2} / c_i`,
//! `y_i = c_i x_i`, maximizing `Σ y_i` subject to `Σ y_i Ã_i ⪯ I` on every block. It ascends the
//! smoothed objective `F(y) = Σ y_i − (1/L)·Σ_k tr exp(L(Ψ_k − I))` by exponentiated-gradient
//! steps with a backtracked step size, where `L = (4/δ)·ln(N·m'/δ)` and `N` is the total block
//! dimension. The gradient of the penalty is the exponential trace `v_i = Σ_k Ã_i • W_k`.
//!
//! Stopping uses a rigorous dual certificate: `Y = W / min_i v_i` satisfies `Ã_i • Y ≥ 1` for all
//! `i`, so `tr(Y)` bounds OPT from above. The loop ends once the scaled primal value reaches
//! `(1−δ)·tr(Y)`, hence the returned objective is at least `(1−κδ)·OPT` with `κ = 1`.

pub mod taylor;

pub use taylor::{
    error_bound, lemma_degree, matfun_taylor, matfun_taylor_for_tolerance, taylor_coefficients,
    taylor_f, TaylorKernels, TAYLOR_DEGREE_CONSTANT,
};

use crate::error::{Error, Result};
use crate::factors::Factor;
use crate::linalg::{inverse_sqrt, Matrix, Spectrum};
use crate::potential::EXPONENT_LIMIT;

/// Multiplicative slack `κ` in `objective ≥ (1 − κδ)·OPT`.
pub const APPROXIMATION_CONSTANT: f64 = 1.0;

/// Safety factor of the iteration cap `safety·max(1, ln m')/δ²`.
pub const ITERATION_SAFETY: f64 = 50.0;

const MAX_STEP: f64 = 1.0;
const MIN_STEP: f64 = 1e-14;
const DOMAIN_LIMIT: f64 = 2.0;

#[derive(Debug, Clone)]
pub struct SdpInstance {
    pub c: Vec<f64>,
    pub constraints: Vec<Factor>,
    pub bounds: Vec<Matrix>,
    pub delta: f64,
}

impl SdpInstance {
    /// Validates shapes, `δ ∈ (0, 1)`, positive-definite bound blocks and PSD constraints.
    pub fn new(
        c: Vec<f64>,
        constraints: Vec<Factor>,
        bounds: Vec<Matrix>,
        delta: f64,
    ) -> Result<Self> {
        if c.len() != constraints.len() {
            return Err(Error::DimensionMismatch {
                expected: constraints.len(),
                found: c.len(),
            });
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Validation(format!(
                "delta must lie in (0, 1), got {delta}"
            )));
        }
        if bounds.is_empty() {
            return Err(Error::Validation(
                "at least one bound block is required".into(),
            ));
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("objective has non-finite entries".into()));
        }
        let dim = bounds[0].nrows();
        for b in &bounds {
            if b.nrows() != dim || b.ncols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: b.nrows(),
                });
            }
            if Spectrum::of(b)?.min() <= 0.0 {
                return Err(Error::Validation(
                    "bound blocks must be positive definite".into(),
                ));
            }
        }
        for a in &constraints {
            if a.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: a.dim(),
                });
            }
            if let Factor::Dense(m) = a {
                let spec = Spectrum::of(m)?;
                if spec.min() < -1e-9 * spec.max().abs().max(1.0) {
                    return Err(Error::Validation("constraint matrix is not PSD".into()));
                }
            }
        }
        Ok(Self {
            c,
            constraints,
            bounds,
            delta,
        })
    }

    pub fn dim(&self) -> usize {
        self.bounds[0].nrows()
    }

    /// `L = (4/δ)·ln(N·m/δ)`.
    pub fn smoothing(&self) -> f64 {
        let n = (self.dim() * self.bounds.len()) as f64;
        let m = self.constraints.len().max(1) as f64;
        (4.0 / self.delta) * (n * m / self.delta).ln()
    }

    /// `Σ x_i A_i`.
    pub fn load(&self, x: &[f64]) -> Matrix {
        let d = self.dim();
        let mut out = Matrix::zeros(d, d);
        for (a, &xi) in self.constraints.iter().zip(x) {
            if xi != 0.0 {
                a.add_scaled_to(xi, &mut out);
            }
        }
        out
    }

    /// `min_k λ_min(B_k − Σ x_i A_i)`.
    pub fn feasibility_margin(&self, x: &[f64]) -> Result<f64> {
        let load = self.load(x);
        let mut margin = f64::INFINITY;
        for b in &self.bounds {
            margin = margin.min(Spectrum::of(&(b - &load))?.min());
        }
        Ok(margin)
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub iterations: usize,
    pub primal: f64,
    pub dual_bound: f64,
    /// Final feasibility scaling `1/max(1, λ_max)`.
    pub scale: f64,
    /// Scaled primal value after every accepted step.
    pub objective_trace: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub feasibility_margin: f64,
    pub report: SolverReport,
}

#[derive(Debug, Clone, Copy)]
pub struct SdpOptions {
    pub max_iterations: usize,
}

impl SdpOptions {
    pub fn for_delta(delta: f64) -> Self {
        Self {
            max_iterations: (ITERATION_SAFETY / (delta * delta)).ceil() as usize,
        }
    }

    fn cap(&self, m: usize) -> usize {
        let log_m = (m.max(1) as f64).ln().max(1.0);
        (self.max_iterations as f64 * log_m).ceil() as usize
    }
}

/// Whitened constraints `B_k^{-1/2} A_i B_k^{-1/2} / s_i` for a subset of the instance.
struct Whitened {
    blocks: Vec<Vec<Factor>>,
}

/// Exponential-trace evaluation at one point, with the top scale `e^{shift}` factored out:
/// `v_i = rel_v_i·e^{shift}`, `Σ_k tr W_k = rel_trace·e^{shift}`.
struct Evaluation {
    rel_v: Vec<f64>,
    rel_trace: f64,
    shift: f64,
    lambda_max: f64,
}

impl Whitened {
    fn new(instance: &SdpInstance, members: &[usize], scale: &[f64]) -> Result<Self> {
        let mut blocks = Vec::with_capacity(instance.bounds.len());
        for b in &instance.bounds {
            let t = inverse_sqrt(b)?;
            let factors = members
                .iter()
                .zip(scale)
                .map(|(&i, &s)| match instance.constraints[i].congruence(&t) {
                    Factor::Rank1(v) => Factor::Rank1(v / s.sqrt()),
                    Factor::Dense(m) => Factor::Dense(m / s),
                })
                .collect();
            blocks.push(factors);
        }
        Ok(Self { blocks })
    }

    fn len(&self) -> usize {
        self.blocks[0].len()
    }

    fn dim(&self) -> usize {
        self.blocks[0].first().map(Factor::dim).unwrap_or(0)
    }

    /// `max_k λ_max(Ã_i^{(k)})`.
    fn unit_loads(&self) -> Result<Vec<f64>> {
        let mut out = vec![0.0f64; self.len()];
        for block in &self.blocks {
            for (o, a) in out.iter_mut().zip(block) {
                let lam = match a {
                    Factor::Rank1(v) => v.norm_squared(),
                    Factor::Dense(m) => Spectrum::of(m)?.max(),
                };
                *o = o.max(lam);
            }
        }
        Ok(out)
    }

    fn evaluate(&self, y: &[f64], smoothing: f64) -> Result<Evaluation> {
        let d = self.dim();
        let mut spectra = Vec::with_capacity(self.blocks.len());
        let mut lambda_max = f64::NEG_INFINITY;
        for block in &self.blocks {
            let mut psi = Matrix::zeros(d, d);
            for (a, &yi) in block.iter().zip(y) {
                a.add_scaled_to(yi, &mut psi);
            }
            let spec = Spectrum::of(&psi)?;
            lambda_max = lambda_max.max(spec.max());
            spectra.push(spec);
        }
        let shift = smoothing * (lambda_max - 1.0);
        let mut rel_v = vec![0.0; self.len()];
        let mut rel_trace = 0.0;
        for (block, spec) in self.blocks.iter().zip(&spectra) {
            let w = spec.map(|lam| (smoothing * (lam - lambda_max)).exp());
            rel_trace += w.trace();
            for (v, a) in rel_v.iter_mut().zip(block) {
                *v += a.dot(&w);
            }
        }
        Ok(Evaluation {
            rel_v,
            rel_trace,
            shift,
            lambda_max,
        })
    }
}

impl Evaluation {
    /// `F(y) = Σ y − (1/L)·Σ tr W`; `-∞` once the penalty overflows.
    fn smoothed(&self, y: &[f64], smoothing: f64) -> f64 {
        let penalty = if self.shift > EXPONENT_LIMIT {
            f64::INFINITY
        } else {
            self.rel_trace * self.shift.exp() / smoothing
        };
        y.iter().sum::<f64>() - penalty
    }

    fn dual_bound(&self) -> f64 {
        let min_v = self.rel_v.iter().copied().fold(f64::INFINITY, f64::min);
        if min_v > 0.0 {
            self.rel_trace / min_v
        } else {
            f64::INFINITY
        }
    }
}

/// `v_i = A_i • Σ_k B_k^{-1/2} exp(L·B_k^{-1/2}(Σ x_j A_j − B_k)B_k^{-1/2}) B_k^{-1/2}`, evaluated
/// exactly by eigendecomposition.
pub fn exp_trace_oracle(instance: &SdpInstance, x: &[f64], smoothing: f64) -> Result<Vec<f64>> {
    if x.len() != instance.constraints.len() {
        return Err(Error::DimensionMismatch {
            expected: instance.constraints.len(),
            found: x.len(),
        });
    }
    if x.iter().any(|&xi| !(xi >= 0.0)) {
        return Err(Error::Precondition("x must be nonnegative".into()));
    }
    let load = instance.load(x);
    let mut v = vec![0.0; x.len()];
    for b in &instance.bounds {
        let t = inverse_sqrt(b)?;
        let spec = Spectrum::of(&(&t * &load * &t))?;
        if spec.max() > DOMAIN_LIMIT * (1.0 + 1e-9) {
            return Err(Error::Precondition(format!(
                "load exceeds 2B (relative lambda_max = {})",
                spec.max()
            )));
        }
        let top = smoothing * (spec.max() - 1.0);
        if top > EXPONENT_LIMIT {
            return Err(Error::ExponentOverflow(top));
        }
        let e = spec.map(|lam| (smoothing * (lam - 1.0)).exp());
        let g = &t * e * &t;
        for (vi, a) in v.iter_mut().zip(&instance.constraints) {
            *vi += a.dot(&g);
        }
    }
    Ok(v)
}

fn zero_solution(instance: &SdpInstance) -> Result<SdpSolution> {
    let x = vec![0.0; instance.c.len()];
    let margin = instance.feasibility_margin(&x)?;
    Ok(SdpSolution {
        x,
        objective: 0.0,
        feasibility_margin: margin,
        report: SolverReport {
            iterations: 0,
            primal: 0.0,
            dual_bound: 0.0,
            scale: 1.0,
            objective_trace: Vec::new(),
        },
    })
}

/// Solves the packing SDP to relative accuracy `δ`. Deterministic.
pub fn solve_packing_sdp(instance: &SdpInstance, options: &SdpOptions) -> Result<SdpSolution> {
    let members: Vec<usize> = (0..instance.c.len())
        .filter(|&i| instance.c[i] > 0.0)
        .collect();
    if members.is_empty() {
        return zero_solution(instance);
    }
    let scale: Vec<f64> = members.iter().map(|&i| instance.c[i]).collect();
    let whitened = Whitened::new(instance, &members, &scale)?;
    let m = members.len();
    let delta = instance.delta;
    let n_total = (instance.dim() * instance.bounds.len()) as f64;
    let smoothing = (4.0 / delta) * (n_total * m as f64 / delta).ln().max(1.0);

    let loads = whitened.unit_loads()?;
    if let Some(k) = loads.iter().position(|&l| !(l > 0.0)) {
        return Err(Error::Validation(format!(
            "constraint {} is zero with positive objective; the SDP is unbounded",
            members[k]
        )));
    }
    let mut y: Vec<f64> = loads.iter().map(|&l| 1.0 / (2.0 * m as f64 * l)).collect();
    let mut eval = whitened.evaluate(&y, smoothing)?;
    let mut value = eval.smoothed(&y, smoothing);
    let mut step = MAX_STEP;
    let mut trace = Vec::new();
    let cap = options.cap(m);

    let mut iterations = 0;
    loop {
        let feasible_scale = 1.0 / eval.lambda_max.max(1.0);
        let primal = y.iter().sum::<f64>() * feasible_scale;
        let dual = eval.dual_bound();
        trace.push(primal);
        if primal >= (1.0 - delta) * dual {
            break;
        }
        if iterations >= cap {
            return Err(Error::SdpNonConvergence {
                iterations,
                primal,
                dual,
            });
        }
        iterations += 1;

        let factor = if eval.shift > EXPONENT_LIMIT {
            f64::INFINITY
        } else {
            eval.shift.exp()
        };
        let gradient: Vec<f64> = eval
            .rel_v
            .iter()
            .map(|&rv| (1.0 - rv * factor).clamp(-1.0, 1.0))
            .collect();
        loop {
            let candidate: Vec<f64> = y
                .iter()
                .zip(&gradient)
                .map(|(&yi, &g)| yi * (step * g).exp())
                .collect();
            let accepted = match whitened.evaluate(&candidate, smoothing) {
                Ok(next) if next.lambda_max <= DOMAIN_LIMIT => {
                    let next_value = next.smoothed(&candidate, smoothing);
                    if next_value >= value {
                        y = candidate;
                        eval = next;
                        value = next_value;
                        true
                    } else {
                        false
                    }
                }
                Ok(_) => false,
                Err(e) => return Err(e),
            };
            if accepted {
                step = (step * 1.5).min(MAX_STEP);
                break;
            }
            step *= 0.5;
            if step < MIN_STEP {
                let primal = y.iter().sum::<f64>() / eval.lambda_max.max(1.0);
                return Err(Error::SdpNonConvergence {
                    iterations,
                    primal,
                    dual: eval.dual_bound(),
                });
            }
        }
    }

    let feasible_scale = 1.0 / eval.lambda_max.max(1.0);
    let mut x = vec![0.0; instance.c.len()];
    for ((&i, &yi), &s) in members.iter().zip(&y).zip(&scale) {
        x[i] = yi / s * feasible_scale;
    }
    let mut margin = instance.feasibility_margin(&x)?;
    let tol = 1e-9
        * instance
            .bounds
            .iter()
            .map(|b| Spectrum::of(b).map(|s| s.max()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
    if margin < -tol {
        // Rounding pushed the scaled point out; shrink by the observed overshoot.
        let shrink = 1.0 - 2.0 * tol;
        for xi in x.iter_mut() {
            *xi *= shrink;
        }
        margin = instance.feasibility_margin(&x)?;
    }
    let objective = x.iter().zip(&instance.c).map(|(a, b)| a * b).sum();
    Ok(SdpSolution {
        x,
        objective,
        feasibility_margin: margin,
        report: SolverReport {
            iterations,
            primal: y.iter().sum::<f64>() * feasible_scale,
            dual_bound: eval.dual_bound(),
            scale: feasible_scale,
            objective_trace: trace,
        },
    })
}
