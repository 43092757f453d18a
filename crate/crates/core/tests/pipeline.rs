use std::f64::consts::E;

use sparsekit::factors::Factor;
use sparsekit::linalg::{Matrix, Spectrum};
use sparsekit::potential::{phi, BarrierState};
use sparsekit::sparsify::{advance, run_once, LAMBDA_FLOOR_CONSTANT, TERMINATION_CONSTANT};
use sparsekit::verify::check_quadratic_form;
use sparsekit::{
    certify, check_cuts, export_sparsifier, isotropize, sparsify, Error, FactorSet, GradientMode,
    OracleKind, SparsifyConfig, WeightedGraph,
};

fn complete(n: usize) -> WeightedGraph {
    let edges = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j, 1.0)));
    WeightedGraph::new(n, edges).unwrap()
}

fn log_sq(d: usize) -> f64 {
    (d as f64).ln().powi(2)
}

#[test]
fn initial_potential_is_two_d_e4() {
    for d in 2..=100 {
        let got = phi(&BarrierState::initial(d)).unwrap();
        let expected = 2.0 * d as f64 * E.powi(4);
        assert!((got / expected - 1.0).abs() <= 1e-10, "d = {d}");
    }
}

#[test]
fn complete_graph_end_to_end() {
    let eps = 0.15;
    let g = complete(16);
    let factors = isotropize(&g).unwrap();
    let d = factors.dim();
    let config = SparsifyConfig::new(eps, OracleKind::Sampling, 11).unwrap();
    let out = sparsify(&factors, &config).unwrap();
    assert!(out.certificate.passed);
    assert!(out.certificate.eps_actual <= 10.0 * eps);
    assert!((out.result.nnz as f64) <= 40.0 * d as f64 / (eps * eps));

    let records = &out.trace.records;
    for w in records.windows(2) {
        assert!(w[1].upper - w[1].lower > w[0].upper - w[0].lower);
    }
    let speed = config.speed();
    assert!(out.result.iterations as f64 <= TERMINATION_CONSTANT * log_sq(d) / (eps * eps * speed));
    for r in records {
        if r.potential <= (d as f64).powi(10) {
            assert!(r.lambda_min_b * log_sq(d) >= LAMBDA_FLOOR_CONSTANT);
        }
    }

    let (u, ell) = out.result.final_barriers;
    let a = &out.final_state.a;
    let spec = Spectrum::of(a).unwrap();
    assert!(spec.min() > ell && spec.max() < u);

    let h = export_sparsifier(&g, &factors, &out.result).unwrap();
    let report = check_quadratic_form(&g, &h, 50, 3).unwrap();
    assert!((report.eps_actual - out.certificate.eps_actual).abs() <= 1e-9);
    assert!(report.eig_min >= 1.0 - 10.0 * eps && report.eig_max <= 1.0 + 10.0 * eps);
    let cuts = check_cuts(&g, &h, 200, 5).unwrap();
    assert!(cuts <= report.eps_actual + 1e-9);
}

#[test]
fn uniform_dense_factors_stay_well_conditioned() {
    let d = 6;
    let factors = FactorSet::new(
        d,
        (0..d)
            .map(|_| Factor::Dense(Matrix::identity(d, d) / d as f64))
            .collect(),
        None,
    )
    .unwrap();
    let config = SparsifyConfig::new(0.04, OracleKind::Sampling, 2).unwrap();
    let run = run_once(&factors, &config, 9).unwrap();
    let (u, ell) = run.result.final_barriers;
    let raw = factors.weighted_sum(
        run.result
            .coefficients
            .iter()
            .map(|(&i, &c)| (i, c / run.result.scale)),
    );
    let spec = Spectrum::of(&raw).unwrap();
    assert!(ell > 0.0 && spec.min() > ell && spec.max() < u);
    let condition = spec.max() / spec.min();
    assert!(condition <= 1.0 / (1.0 - (u - ell) / u));
    assert!(certify(&factors, &run.result, 0.4).unwrap().passed);
}

#[test]
fn runs_are_deterministic() {
    let factors = isotropize(&complete(8)).unwrap();
    let config = SparsifyConfig::new(0.15, OracleKind::Sampling, 5).unwrap();
    let a = run_once(&factors, &config, 77).unwrap();
    let b = run_once(&factors, &config, 77).unwrap();
    assert_eq!(a.result, b.result);
    assert_eq!(a.trace, b.trace);

    let state = BarrierState::initial(factors.dim());
    let s1 = advance(&factors, &state, &config, 3).unwrap();
    let s2 = advance(&factors, &state, &config, 3).unwrap();
    assert_eq!(s1.next.a, s2.next.a);
    assert_eq!(s1.record, s2.record);
}

#[test]
fn iteration_cap_is_enforced() {
    let factors = isotropize(&complete(6)).unwrap();
    let mut config = SparsifyConfig::new(0.15, OracleKind::Sampling, 5).unwrap();
    config.max_iterations = Some(10);
    assert!(matches!(
        run_once(&factors, &config, 1),
        Err(Error::MaxIterations(10))
    ));
}

#[test]
fn taylor_gradients_certify() {
    let g = complete(8);
    let factors = isotropize(&g).unwrap();
    let mut config = SparsifyConfig::new(0.15, OracleKind::Sampling, 4).unwrap();
    config.gradients = GradientMode::Taylor { tolerance: 1e-6 };
    let out = sparsify(&factors, &config).unwrap();
    assert!(out.certificate.passed);
}

#[test]
fn sdp_oracle_end_to_end() {
    let g = complete(8);
    let factors = isotropize(&g).unwrap();
    let config = SparsifyConfig::new(0.15, OracleKind::Sdp, 4).unwrap();
    let out = sparsify(&factors, &config).unwrap();
    assert!(out.certificate.passed, "{:?}", out.certificate);
}
