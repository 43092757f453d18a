use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsekit::linalg::{Matrix, Vector};
use sparsekit::oracle::{
    check_contract, sampling_probabilities, sdp_oracle, solution_existence_oracle, OracleRequest,
    ORACLE_SPEED,
};
use sparsekit::potential::BarrierSpectrum;
use sparsekit::{isotropize, FactorSet, WeightedGraph};

fn complete(n: usize) -> WeightedGraph {
    let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j, 1.0)));
    WeightedGraph::new(n, edges).unwrap()
}

/// A barrier state with random eigenvectors, skewed toward the lower barrier so that the
/// objective has positive directions.
fn skewed_state(d: usize, seed: u64) -> BarrierSpectrum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (ell, u) = (-0.3, 0.6);
    let eig = Vector::from_fn(d, |_, _| rng.random_range(ell + 0.08..ell + 0.5));
    let g = Matrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let a = &q * Matrix::from_diagonal(&eig) * q.transpose();
    BarrierSpectrum::new(&a, u, ell).unwrap()
}

fn request<'a>(factors: &'a FactorSet, spec: &BarrierSpectrum, seed: u64) -> OracleRequest<'a> {
    let (cp, cm) = spec.gradients(0.05);
    OracleRequest::from_barrier(factors, spec, cp, cm, seed).unwrap()
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn triangle_factors_are_sampled_uniformly_for_identity() {
    let f = isotropize(&complete(3)).unwrap();
    let dist = sampling_probabilities(&f, &Matrix::identity(2, 2)).unwrap();
    for p in dist.probabilities {
        assert!((p - 1.0 / 3.0).abs() < 1e-12);
    }
}

#[test]
fn sampling_oracle_meets_expected_progress() {
    let factors = isotropize(&complete(9)).unwrap();
    let spec = skewed_state(8, 1);
    let base = request(&factors, &spec, 0);
    let c = base.objective();
    let target = ORACLE_SPEED * base.stats().lambda_min * c.trace();
    assert!(target > 0.0);
    let gains: Vec<f64> = (0..200)
        .map(|seed| {
            let req = request(&factors, &spec, seed);
            let resp = solution_existence_oracle(&req).unwrap();
            assert!(check_contract(&req, &resp).unwrap().passed());
            c.dot(&resp.delta)
        })
        .collect();
    let (mean, se) = mean_and_stderr(&gains);
    assert!(mean >= target - 3.0 * se, "mean {mean} < {target} - 3*{se}");
}

#[test]
fn sdp_oracle_meets_expected_progress() {
    let factors = isotropize(&complete(9)).unwrap();
    let spec = skewed_state(8, 2);
    let base = request(&factors, &spec, 0);
    let c = base.objective();
    let eps = 0.05;
    let stats = base.stats();
    let target = ORACLE_SPEED * stats.lambda_min * (c.trace() - eps * base.objective_abs().trace());
    let gains: Vec<f64> = (0..60)
        .map(|seed| {
            let req = request(&factors, &spec, seed);
            let resp = sdp_oracle(&req, 0.05).unwrap();
            assert!(check_contract(&req, &resp).unwrap().passed());
            c.dot(&resp.delta)
        })
        .collect();
    let (mean, se) = mean_and_stderr(&gains);
    assert!(mean >= target - 3.0 * se, "mean {mean} < {target} - 3*{se}");
}

#[test]
fn rejection_loop_accepts_most_proposals() {
    let factors = isotropize(&complete(12)).unwrap();
    let spec = skewed_state(11, 3);
    let (mut samples, mut proposals) = (0, 0);
    let mut seed = 0;
    while proposals < 1000 {
        let resp = solution_existence_oracle(&request(&factors, &spec, seed)).unwrap();
        samples += resp.samples;
        proposals += resp.proposals;
        seed += 1;
    }
    let rate = samples as f64 / proposals as f64;
    assert!(rate >= 0.4, "acceptance rate {rate}");
}

#[test]
fn responses_are_reproducible_per_seed() {
    let factors = isotropize(&complete(7)).unwrap();
    let spec = skewed_state(6, 4);
    let a = solution_existence_oracle(&request(&factors, &spec, 42)).unwrap();
    let b = solution_existence_oracle(&request(&factors, &spec, 42)).unwrap();
    assert_eq!(a.alpha, b.alpha);
    assert_eq!(a.delta, b.delta);
}

#[test]
fn sdp_oracle_two_blocks_feasible() {
    let factors = isotropize(&complete(10)).unwrap();
    for seed in 0..5 {
        let spec = skewed_state(9, 10 + seed);
        let req = request(&factors, &spec, seed);
        let resp = sdp_oracle(&req, 0.05).unwrap();
        let check = check_contract(&req, &resp).unwrap();
        assert!(check.upper_ok && check.lower_ok, "seed {seed}: {check:?}");
    }
}
