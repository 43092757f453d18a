//! Independent quality checks on graph sparsifiers, plus an effective-resistance sampling
//! baseline for comparison.

use std::collections::HashSet;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{complement_basis, isotropize, laplacian, reduced_laplacian, WeightedGraph};
use crate::linalg::{cholesky, Matrix, Spectrum};

/// Sample-count constant of the baseline: `⌈9·d·ln(d+1)/ε²⌉`.
pub const BASELINE_CONSTANT: f64 = 9.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub eps_actual: f64,
    pub eig_min: f64,
    pub eig_max: f64,
    pub nnz: usize,
    pub cut_max_err: f64,
    /// Extremes of the Rayleigh quotients `xᵀL_Hx / xᵀL_Gx` over the random trials.
    pub rayleigh_min: f64,
    pub rayleigh_max: f64,
    pub baseline_nnz: Option<usize>,
}

fn check_compatible(g: &WeightedGraph, h: &WeightedGraph) -> Result<()> {
    if g.n() != h.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            found: h.n(),
        });
    }
    let edges: HashSet<(usize, usize)> = g.edges().iter().map(|e| (e.u, e.v)).collect();
    if let Some(e) = h.edges().iter().find(|e| !edges.contains(&(e.u, e.v))) {
        return Err(Error::Validation(format!(
            "sparsifier edge ({}, {}) is not an edge of the original graph",
            e.u, e.v
        )));
    }
    Ok(())
}

/// Extreme generalized eigenvalues of `(L_H, L_G)` restricted to `1⊥`.
pub fn generalized_extremes(g: &WeightedGraph, h: &WeightedGraph) -> Result<(f64, f64)> {
    let basis = complement_basis(g.n());
    let lg = reduced_laplacian(g, &basis);
    let lh = reduced_laplacian(h, &basis);
    let chol = cholesky(&lg).ok_or_else(|| {
        Error::Validation(
            "original Laplacian is singular on the complement of the ones vector".into(),
        )
    })?;
    let l = chol.l();
    let k = l.nrows();
    let linv = l
        .solve_lower_triangular(&Matrix::identity(k, k))
        .ok_or(Error::Eigen("triangular solve"))?;
    let whitened = &linv * lh * linv.transpose();
    let spec = Spectrum::of(&whitened)?;
    Ok((spec.min(), spec.max()))
}

/// Exact `eps_actual = max(1 − λ_min, λ_max − 1)` of `(L_H, L_G)` on `1⊥`, cross-checked by
/// Rayleigh quotients on `trials` random vectors and by random cuts.
pub fn check_quadratic_form(
    g: &WeightedGraph,
    h: &WeightedGraph,
    trials: usize,
    seed: u64,
) -> Result<QualityReport> {
    check_compatible(g, h)?;
    let (eig_min, eig_max) = generalized_extremes(g, h)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.n();
    let mut rayleigh_min = f64::INFINITY;
    let mut rayleigh_max = f64::NEG_INFINITY;
    for _ in 0..trials {
        let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let denom = g.quadratic_form(&x);
        if denom > 0.0 {
            let q = h.quadratic_form(&x) / denom;
            rayleigh_min = rayleigh_min.min(q);
            rayleigh_max = rayleigh_max.max(q);
        }
    }
    let cut_max_err = check_cuts(g, h, trials, seed)?;
    Ok(QualityReport {
        eps_actual: (1.0 - eig_min).max(eig_max - 1.0),
        eig_min,
        eig_max,
        nnz: h.m(),
        cut_max_err,
        rayleigh_min,
        rayleigh_max,
        baseline_nnz: None,
    })
}

/// Maximum relative cut error `|cut_H(S) − cut_G(S)| / cut_G(S)` over `num_cuts` random
/// nonempty proper subsets `S`.
pub fn check_cuts(g: &WeightedGraph, h: &WeightedGraph, num_cuts: usize, seed: u64) -> Result<f64> {
    check_compatible(g, h)?;
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6375_7473);
    let mut worst: f64 = 0.0;
    let mut indicator = vec![0.0; n];
    for _ in 0..num_cuts {
        loop {
            for v in indicator.iter_mut() {
                *v = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
            }
            let size = indicator.iter().sum::<f64>() as usize;
            if size > 0 && size < n {
                break;
            }
        }
        let cut_g = g.quadratic_form(&indicator);
        let cut_h = h.quadratic_form(&indicator);
        worst = worst.max((cut_h - cut_g).abs() / cut_g);
    }
    Ok(worst)
}

/// `w_e · R_eff(e)` for every edge, in edge order. Sums to `n − 1`.
pub fn leverage_scores(g: &WeightedGraph) -> Result<Vec<f64>> {
    Ok(isotropize(g)?.factors().iter().map(|f| f.trace()).collect())
}

/// `⌈9·d·ln(d+1)/ε²⌉` with `d = n − 1`.
pub fn baseline_sample_count(n: usize, eps: f64) -> usize {
    let d = n.saturating_sub(1).max(1) as f64;
    (BASELINE_CONSTANT * d * (d + 1.0).ln() / (eps * eps)).ceil() as usize
}

/// Effective-resistance sampling with the default sample count.
pub fn effective_resistance_baseline(
    g: &WeightedGraph,
    eps: f64,
    seed: u64,
) -> Result<WeightedGraph> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    effective_resistance_sample(g, baseline_sample_count(g.n(), eps), seed)
}

/// Draws `samples` edges i.i.d. with probability `p_e ∝ w_e·R_eff(e)` and gives each draw the
/// weight `w_e/(samples·p_e)`, so `E[L_H] = L_G`.
pub fn effective_resistance_sample(
    g: &WeightedGraph,
    samples: usize,
    seed: u64,
) -> Result<WeightedGraph> {
    if samples == 0 {
        return Err(Error::Config("sample count must be positive".into()));
    }
    let leverage = leverage_scores(g)?;
    let total: f64 = leverage.iter().sum();
    let probs: Vec<f64> = leverage.iter().map(|l| l / total).collect();
    let index = WeightedIndex::new(&probs)
        .map_err(|e| Error::InvariantViolation(format!("leverage weights rejected: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![0.0; g.m()];
    for _ in 0..samples {
        let e = index.sample(&mut rng);
        weights[e] += g.edges()[e].weight / (samples as f64 * probs[e]);
    }
    WeightedGraph::from_parts(
        g.n(),
        g.edges()
            .iter()
            .zip(&weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(e, &w)| (e.u, e.v, w)),
    )
}

/// Dense Laplacian quadratic-form ratio for one vector, used by tests.
pub fn rayleigh_quotient(g: &WeightedGraph, h: &WeightedGraph, x: &[f64]) -> f64 {
    let lg = laplacian(g);
    let lh = laplacian(h);
    let v = crate::linalg::Vector::from_column_slice(x);
    (&lh * &v).dot(&v) / (&lg * &v).dot(&v)
}
