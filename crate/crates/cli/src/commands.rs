//! Subcommand implementations.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sparsekit::factors::Factor;
use sparsekit::linalg::{Matrix, Vector};
use sparsekit::sdp::{solve_packing_sdp, SdpInstance, SdpOptions};
use sparsekit::sparsify::{IterationRecord, RunTrace};
use sparsekit::verify::effective_resistance_baseline;
use sparsekit::{
    certify, check_quadratic_form, export_sparsifier, isotropize, load_graph, sparsify,
    GradientMode, OracleKind, SparsifyConfig, WeightedGraph,
};

use crate::generators::{generate, GenParams};
use crate::{BenchArgs, CliError, CliResult, GenArgs, SelftestArgs, SparsifyArgs, VerifyArgs};

pub const TRACE_SCHEMA: u32 = 1;

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s: OsString = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Sidecar path for a sparsifier file: `<output>.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    with_suffix(output, ".json")
}

/// Trace path for a sparsifier file: `<output>.trace.jsonl`.
pub fn trace_path(output: &Path) -> PathBuf {
    with_suffix(output, ".trace.jsonl")
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    fs::write(path, text + "\n").map_err(io_err(path))
}

fn emit(json: bool, value: &impl Serialize, plain: impl FnOnce() -> String) {
    if json {
        println!(
            "{}",
            serde_json::to_string(value).expect("report serializes")
        );
    } else {
        println!("{}", plain());
    }
}

pub fn cmd_gen(args: &GenArgs, json: bool) -> CliResult<()> {
    let params = GenParams {
        p: args.p,
        cycles: args.cycles,
    };
    let g = generate(args.family, args.n, params, args.seed)?;
    g.save(&args.output)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        output: &'a Path,
        n: usize,
        m: usize,
    }
    let summary = Summary {
        output: &args.output,
        n: g.n(),
        m: g.m(),
    };
    emit(json, &summary, || {
        format!(
            "wrote {} ({} vertices, {} edges)",
            args.output.display(),
            g.n(),
            g.m()
        )
    });
    Ok(())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct PhaseTimes {
    pub isotropize_ms: f64,
    pub loop_ms: f64,
    pub certify_ms: f64,
}

#[derive(Debug, Serialize)]
pub struct Sidecar {
    pub input: PathBuf,
    pub output: PathBuf,
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub oracle: OracleKind,
    pub seed: u64,
    pub nnz: usize,
    pub eps_actual: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub iterations: usize,
    pub attempts: usize,
    pub final_upper: f64,
    pub final_lower: f64,
    pub scale: f64,
    pub timings: PhaseTimes,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    schema: u32,
    seed: u64,
    #[serde(flatten)]
    record: &'a IterationRecord,
}

/// Writes one JSON object per iteration, each tagged with `schema: 1`.
pub fn write_trace(path: &Path, trace: &RunTrace) -> CliResult<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut out = BufWriter::new(file);
    for record in &trace.records {
        let line = TraceLine {
            schema: TRACE_SCHEMA,
            seed: trace.seed,
            record,
        };
        serde_json::to_writer(&mut out, &line).expect("trace record serializes");
        out.write_all(b"\n").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

fn config_from(
    epsilon: f64,
    oracle: OracleKind,
    seed: u64,
    delta: Option<f64>,
) -> CliResult<SparsifyConfig> {
    let mut config = SparsifyConfig::new(epsilon, oracle, seed)?;
    config.delta_sdp = delta;
    config.validate()?;
    Ok(config)
}

/// Result of sparsifying one graph, shared by `sparsify` and `bench`.
pub struct Sparsified {
    pub graph: WeightedGraph,
    pub sparsifier: WeightedGraph,
    pub outcome: sparsekit::SparsifyOutcome,
    pub config: SparsifyConfig,
    pub timings: PhaseTimes,
}

pub fn sparsify_graph(g: &WeightedGraph, config: &SparsifyConfig) -> CliResult<Sparsified> {
    let t0 = Instant::now();
    let factors = isotropize(g)?;
    let t1 = Instant::now();
    let outcome = sparsify(&factors, config)?;
    let t2 = Instant::now();
    // Re-certify on its own so the phase is timed separately from the loop.
    let certificate = certify(&factors, &outcome.result, config.tolerance())?;
    let t3 = Instant::now();
    debug_assert_eq!(certificate, outcome.certificate);
    let sparsifier = export_sparsifier(g, &factors, &outcome.result)?;
    let ms = |a: Instant, b: Instant| (b - a).as_secs_f64() * 1e3;
    Ok(Sparsified {
        graph: g.clone(),
        sparsifier,
        outcome,
        config: config.clone(),
        timings: PhaseTimes {
            isotropize_ms: ms(t0, t1),
            loop_ms: ms(t1, t2),
            certify_ms: ms(t2, t3),
        },
    })
}

pub fn cmd_sparsify(args: &SparsifyArgs, json: bool) -> CliResult<()> {
    let mut config = config_from(args.epsilon, args.oracle, args.seed, args.delta)?;
    config.max_iterations = args.max_iterations;
    config.restarts = args.restarts;
    if let Some(tolerance) = args.taylor {
        config.gradients = GradientMode::Taylor { tolerance };
    }
    config.validate()?;
    let g = load_graph(&args.input)?;
    let run = sparsify_graph(&g, &config)?;
    run.sparsifier.save(&args.output)?;
    let cert = run.outcome.certificate;
    let (u, ell) = run.outcome.result.final_barriers;
    let sidecar = Sidecar {
        input: args.input.clone(),
        output: args.output.clone(),
        n: g.n(),
        m: g.m(),
        epsilon: config.epsilon,
        oracle: config.oracle,
        seed: config.seed,
        nnz: run.sparsifier.m(),
        eps_actual: cert.eps_actual,
        lambda_min: cert.lambda_min,
        lambda_max: cert.lambda_max,
        tolerance: cert.tolerance,
        passed: cert.passed,
        iterations: run.outcome.result.iterations,
        attempts: run.outcome.attempts,
        final_upper: u,
        final_lower: ell,
        scale: run.outcome.result.scale,
        timings: run.timings,
    };
    write_json(&sidecar_path(&args.output), &sidecar)?;
    write_trace(&trace_path(&args.output), &run.outcome.trace)?;
    emit(json, &sidecar, || {
        format!(
            "{} edges -> {} edges, eps_actual {:.6} (tolerance {:.3}), {} iterations, {}",
            g.m(),
            sidecar.nnz,
            cert.eps_actual,
            cert.tolerance,
            sidecar.iterations,
            if cert.passed {
                "certified"
            } else {
                "NOT certified"
            }
        )
    });
    if cert.passed {
        Ok(())
    } else {
        Err(CliError::Certification {
            eps_actual: cert.eps_actual,
            tolerance: cert.tolerance,
        })
    }
}

pub fn cmd_verify(args: &VerifyArgs, json: bool) -> CliResult<()> {
    let g = load_graph(&args.input)?;
    let h = load_graph(&args.sparsifier)?;
    let mut report = check_quadratic_form(&g, &h, args.trials, args.seed)?;
    if let Some(eps) = args.baseline_epsilon {
        report.baseline_nnz = Some(effective_resistance_baseline(&g, eps, args.seed)?.m());
    }
    emit(json, &report, || {
        let mut s = format!(
            "eps_actual {:.6}  eig_min {:.6}  eig_max {:.6}  nnz {}  cut_max_err {:.6}",
            report.eps_actual, report.eig_min, report.eig_max, report.nnz, report.cut_max_err
        );
        if let Some(b) = report.baseline_nnz {
            s.push_str(&format!("  baseline_nnz {b}"));
        }
        s
    });
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub graph: String,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub epsilon: f64,
    pub oracle: OracleKind,
    pub seed: u64,
    pub status: &'static str,
    pub nnz: Option<usize>,
    pub eps_actual: Option<f64>,
    pub iterations: Option<usize>,
    pub max_iterations: Option<usize>,
    pub attempts: Option<usize>,
    pub isotropize_ms: Option<f64>,
    pub loop_ms: Option<f64>,
    pub certify_ms: Option<f64>,
    pub error: String,
}

fn corpus_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.is_file() {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn bench_row(
    name: &str,
    graph: &Result<WeightedGraph, String>,
    epsilon: f64,
    oracle: OracleKind,
    seed: u64,
    delta: Option<f64>,
) -> BenchRow {
    let mut row = BenchRow {
        graph: name.to_string(),
        n: None,
        m: None,
        epsilon,
        oracle,
        seed,
        status: "error",
        nnz: None,
        eps_actual: None,
        iterations: None,
        max_iterations: None,
        attempts: None,
        isotropize_ms: None,
        loop_ms: None,
        certify_ms: None,
        error: String::new(),
    };
    let g = match graph {
        Ok(g) => g,
        Err(e) => {
            row.error = e.clone();
            return row;
        }
    };
    row.n = Some(g.n());
    row.m = Some(g.m());
    let outcome = config_from(epsilon, oracle, seed, delta).and_then(|c| sparsify_graph(g, &c));
    match outcome {
        Ok(run) => {
            let cert = run.outcome.certificate;
            row.status = if cert.passed { "ok" } else { "uncertified" };
            row.nnz = Some(run.sparsifier.m());
            row.eps_actual = Some(cert.eps_actual);
            row.iterations = Some(run.outcome.result.iterations);
            row.max_iterations = Some(run.config.iteration_cap(g.n() - 1));
            row.attempts = Some(run.outcome.attempts);
            row.isotropize_ms = Some(run.timings.isotropize_ms);
            row.loop_ms = Some(run.timings.loop_ms);
            row.certify_ms = Some(run.timings.certify_ms);
        }
        Err(e) => row.error = e.to_string(),
    }
    row
}

/// One CSV row per (graph, ε, oracle, seed). Failures are recorded in the row.
pub fn run_bench(args: &BenchArgs) -> CliResult<Vec<BenchRow>> {
    let files = corpus_files(&args.input)?;
    let graphs: Vec<(String, Result<WeightedGraph, String>)> = files
        .iter()
        .map(|p| {
            let name = p
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            (name, load_graph(p).map_err(|e| e.to_string()))
        })
        .collect();
    let mut jobs = Vec::new();
    for (gi, _) in graphs.iter().enumerate() {
        for &eps in &args.epsilon {
            for &oracle in &args.oracle {
                for &seed in &args.seed {
                    jobs.push((gi, eps, oracle, seed));
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError::Internal(sparsekit::Error::Config(e.to_string())))?;
    Ok(pool.install(|| {
        jobs.par_iter()
            .map(|&(gi, eps, oracle, seed)| {
                let (name, graph) = &graphs[gi];
                bench_row(name, graph, eps, oracle, seed, args.delta)
            })
            .collect()
    }))
}

pub fn write_bench_csv(rows: &[BenchRow], out: impl Write) -> CliResult<()> {
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    let header = [
        "graph",
        "n",
        "m",
        "epsilon",
        "oracle",
        "seed",
        "status",
        "nnz",
        "eps_actual",
        "iterations",
        "max_iterations",
        "attempts",
        "isotropize_ms",
        "loop_ms",
        "certify_ms",
        "error",
    ];
    let csv_err = |e: csv::Error| CliError::Internal(sparsekit::Error::Config(e.to_string()));
    writer.write_record(header).map_err(csv_err)?;
    for row in rows {
        writer.serialize(row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| CliError::Io {
        path: PathBuf::from("<csv>"),
        source: e,
    })
}

pub fn cmd_bench(args: &BenchArgs) -> CliResult<()> {
    let rows = run_bench(args)?;
    match &args.output {
        Some(path) => {
            let file = File::create(path).map_err(io_err(path))?;
            write_bench_csv(&rows, BufWriter::new(file))
        }
        None => write_bench_csv(&rows, std::io::stdout().lock()),
    }
}

/// Diagonal packing instance where every constraint touches one coordinate; its optimum is
/// `Σ_k min_b B_b[k,k] · max_{i on k} c_i / a_i`.
pub fn selftest_instance(seed: u64, delta: f64) -> sparsekit::Result<(SdpInstance, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=8);
    let m = rng.random_range(1..=6);
    let blocks = rng.random_range(1..=2);
    let bounds: Vec<Vec<f64>> = (0..blocks)
        .map(|_| (0..d).map(|_| rng.random_range(0.1..1.0)).collect())
        .collect();
    let mut best = vec![0.0f64; d];
    let mut constraints = Vec::with_capacity(m);
    let mut c = Vec::with_capacity(m);
    for _ in 0..m {
        let k = rng.random_range(0..d);
        let a: f64 = rng.random_range(0.1..2.0);
        let ci: f64 = rng.random_range(0.1..3.0);
        best[k] = best[k].max(ci / a);
        let mut v = Vector::zeros(d);
        v[k] = a.sqrt();
        constraints.push(Factor::Rank1(v));
        c.push(ci);
    }
    let opt = (0..d)
        .map(|k| bounds.iter().map(|b| b[k]).fold(f64::INFINITY, f64::min) * best[k])
        .sum();
    let bound_mats = bounds
        .into_iter()
        .map(|b| Matrix::from_diagonal(&Vector::from_vec(b)))
        .collect();
    Ok((SdpInstance::new(c, constraints, bound_mats, delta)?, opt))
}

pub fn cmd_sdp_selftest(args: &SelftestArgs, json: bool) -> CliResult<()> {
    #[derive(Serialize)]
    struct Summary {
        trials: usize,
        passed: usize,
        worst_ratio: f64,
        delta: f64,
    }
    let mut passed = 0;
    let mut worst_ratio = f64::INFINITY;
    for t in 0..args.trials {
        let (inst, opt) = selftest_instance(args.seed.wrapping_add(t as u64), args.delta)?;
        let sol = solve_packing_sdp(&inst, &SdpOptions::for_delta(args.delta))?;
        let ratio = sol.objective / opt;
        worst_ratio = worst_ratio.min(ratio);
        if sol.feasibility_margin >= -1e-9 && ratio >= 1.0 - args.delta {
            passed += 1;
        }
    }
    let summary = Summary {
        trials: args.trials,
        passed,
        worst_ratio,
        delta: args.delta,
    };
    emit(json, &summary, || {
        format!(
            "{passed}/{} instances within (1 - {}) of the optimum; worst ratio {worst_ratio:.6}",
            args.trials, args.delta
        )
    });
    if passed == args.trials {
        Ok(())
    } else {
        Err(CliError::Selftest {
            failed: args.trials - passed,
            trials: args.trials,
        })
    }
}
