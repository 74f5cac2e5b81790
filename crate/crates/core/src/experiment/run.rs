use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::config::{ExperimentConfig, ExperimentKind, PotentialKind, SamplerKind, Scenario};
use super::{prox_bench, theory_report, ExperimentError};
use crate::diagnostics::{aggregate, moment_estimate, oracle_moment, DiagnosticsError};
use crate::imaging::{self, deconvolve_sample, DeconvolutionConfig, ImageProblem, ProblemSpec};
use crate::potentials::{GinzburgLandau, GinzburgLandauParams, Potential};
use crate::prox::ProxOperator;
use crate::rng::{stream_rng, streams};
use crate::samplers::{
    run_chain, run_replicas, step_size_warning, ChainState, ChainTrace, Ipla, Kernel, RandomWalkMh, RunSpec,
    SamplerError, Tula, Ula,
};

const MOMENT_ORDERS: [u32; 3] = [2, 4, 6];

/// One line of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub method: String,
    pub scenario: String,
    pub moment_order: u32,
    pub estimate: f64,
    pub re: f64,
    pub cv: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub dir: PathBuf,
    /// Human-readable report for standard output.
    pub table: String,
    pub summary: Vec<SummaryRow>,
}

/// The potential named by the configuration, plus the image problem for
/// deconvolution.
pub fn build_potential(cfg: &ExperimentConfig) -> Result<(Arc<Potential>, Option<ImageProblem>), ExperimentError> {
    Ok(match cfg.potential {
        PotentialKind::Gaussian => (Arc::new(Potential::gaussian(cfg.d)), None),
        PotentialKind::Quartic => (Arc::new(Potential::quartic(cfg.d)), None),
        PotentialKind::GinzburgLandau => {
            let params: GinzburgLandauParams = cfg.ginzburg_landau.unwrap_or_default();
            let gl =
                GinzburgLandau::new(params).map_err(|e| ExperimentError::Config(format!("[ginzburg_landau]: {e}")))?;
            (Arc::new(Potential::GinzburgLandau(gl)), None)
        }
        PotentialKind::Deconvolution => {
            let im = cfg.imaging.clone().unwrap_or_default();
            let problem = imaging::make_problem(&ProblemSpec {
                side: im.side,
                depth: im.depth,
                sigma: im.sigma,
                beta: im.beta,
                seed: cfg.base_seed,
                intensity_scale: im.intensity_scale,
            })?;
            (Arc::new(problem.potential()?), Some(problem))
        }
    })
}

/// Starting point for the configured scenario (moment experiments).
pub fn initial_point(cfg: &ExperimentConfig, potential: &Potential) -> Vec<f64> {
    let d = potential.dim();
    match (cfg.scenario, cfg.potential) {
        (Scenario::Tail, PotentialKind::GinzburgLandau) => {
            let mut x = vec![0.0; d];
            x[0] = 100.0;
            x
        }
        (Scenario::Tail, _) => vec![7.0; d],
        (Scenario::Minimizer, _) => potential.profile().minimizer.clone().unwrap_or_else(|| vec![0.0; d]),
    }
}

fn build_kernel(cfg: &ExperimentConfig, potential: &Arc<Potential>) -> Result<Box<dyn Kernel>, SamplerError> {
    Ok(match cfg.sampler {
        SamplerKind::Ipla => {
            let op = ProxOperator::new(potential.clone(), cfg.prox.solver)?.with_pdhg_settings(cfg.prox.pdhg);
            let mut k = Ipla::new(op, cfg.tau, cfg.prox.kappa, cfg.prox.alpha)?
                .with_max_prox_iterations(cfg.prox.max_iterations)
                .with_failure_policy(cfg.prox.failure_policy);
            if let Some(delta) = cfg.prox.delta {
                k = k.with_delta(delta)?;
            }
            Box::new(k)
        }
        SamplerKind::Ula => Box::new(Ula::new(potential.clone(), cfg.tau)?),
        SamplerKind::Tula => Box::new(Tula::new(potential.clone(), cfg.tau, cfg.taming)?),
        SamplerKind::Mh => Box::new(RandomWalkMh::new(potential.clone(), cfg.proposal_std)?),
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    fs::write(path, bytes).map_err(|e| ExperimentError::io(path, e))
}

fn create_dir(path: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(path).map_err(|e| ExperimentError::io(path, e))
}

/// Plain decimal in the everyday range, scientific notation outside it;
/// both forms parse back to the same `f64`.
pub(crate) fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || !v.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn output_dir(cfg: &ExperimentConfig, root: &Path) -> PathBuf {
    root.join(&cfg.output)
}

fn prepare_output(cfg: &ExperimentConfig, root: &Path) -> Result<PathBuf, ExperimentError> {
    let dir = output_dir(cfg, root);
    create_dir(&dir)?;
    write_file(&dir.join("config.toml"), cfg.to_toml().as_bytes())?;
    Ok(dir)
}

/// Runs the configured experiment and writes its outputs below `root`.
pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<RunOutcome, ExperimentError> {
    cfg.validate()?;
    let dir = prepare_output(cfg, root)?;
    if cfg.experiment == ExperimentKind::Theory {
        return run_theory(cfg, dir);
    }
    if cfg.potential == PotentialKind::Deconvolution {
        return run_imaging(cfg, dir);
    }
    run_moments(cfg, dir)
}

fn header(cfg: &ExperimentConfig) -> String {
    format!(
        "experiment {} | sampler {} | potential {:?} (d = {}) | tau = {} | {} replica(s) x {} steps, burn-in {}\n",
        cfg.experiment.name(),
        cfg.sampler.name(),
        cfg.potential,
        cfg.d,
        cfg.tau,
        cfg.replicas,
        cfg.n_steps,
        cfg.burn_in
    )
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("method,scenario,moment_order,estimate,re,cv\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.method,
            r.scenario,
            r.moment_order,
            fmt_f64(r.estimate),
            fmt_f64(r.re),
            fmt_f64(r.cv)
        );
    }
    s
}

fn chain_csv(trace: &ChainTrace) -> String {
    let mut s = String::from("step,x1,norm_sq,prox_iters,diverged\n");
    for r in &trace.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.step,
            fmt_f64(r.x1),
            fmt_f64(r.norm_sq),
            r.prox_iterations,
            u8::from(r.diverged)
        );
    }
    s
}

/// Analytic moments where available, otherwise a Metropolis–Hastings
/// reference run on its own random stream, otherwise NaN.
fn reference_moments(
    cfg: &ExperimentConfig,
    potential: &Arc<Potential>,
) -> Result<([f64; 3], &'static str), ExperimentError> {
    let oracle: Result<Vec<f64>, DiagnosticsError> = MOMENT_ORDERS
        .iter()
        .map(|&m| oracle_moment(potential.name(), cfg.d, m))
        .collect();
    if let Ok(v) = oracle {
        return Ok(([v[0], v[1], v[2]], "analytic oracle"));
    }
    if cfg.reference_steps == 0 {
        return Ok(([f64::NAN; 3], "none"));
    }
    let x0 = potential
        .profile()
        .minimizer
        .clone()
        .unwrap_or_else(|| vec![0.0; cfg.d]);
    let mut kernel = RandomWalkMh::new(potential.clone(), cfg.proposal_std)?;
    let mut state = ChainState::new(x0, stream_rng(cfg.base_seed, streams::REFERENCE_CHAIN));
    let spec = RunSpec::new(cfg.reference_steps, cfg.reference_steps / 10);
    let trace = run_chain(&mut kernel, &mut state, &spec)?;
    let mut out = [f64::NAN; 3];
    for (o, m) in out.iter_mut().zip(MOMENT_ORDERS) {
        *o = moment_estimate(&trace, m)?;
    }
    Ok((out, "Metropolis-Hastings reference"))
}

fn run_moments(cfg: &ExperimentConfig, dir: PathBuf) -> Result<RunOutcome, ExperimentError> {
    let (potential, _) = build_potential(cfg)?;
    let x0 = initial_point(cfg, &potential);
    let spec = RunSpec {
        trace_every: Some(cfg.trace_every),
        ..RunSpec::new(cfg.n_steps, cfg.burn_in)
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| ExperimentError::Run(format!("cannot start worker pool: {e}")))?;
    let results = pool.install(|| {
        run_replicas(cfg.replicas, &spec, |r| {
            Ok((
                build_kernel(cfg, &potential)?,
                ChainState::for_replica(x0.clone(), cfg.base_seed, r as u64),
            ))
        })
    });
    let traces = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let chains = dir.join("chains");
    create_dir(&chains)?;
    for (r, t) in traces.iter().enumerate() {
        write_file(&chains.join(format!("chain_{r:03}.csv")), chain_csv(t).as_bytes())?;
    }

    let (truth, truth_source) = reference_moments(cfg, &potential)?;
    let mut rows = Vec::new();
    for (m, t) in MOMENT_ORDERS.into_iter().zip(truth) {
        let estimates = traces
            .iter()
            .map(|tr| moment_estimate(tr, m))
            .collect::<Result<Vec<_>, _>>()?;
        let rep = aggregate(&estimates, t, m)?;
        rows.push(SummaryRow {
            method: cfg.sampler.name().to_string(),
            scenario: cfg.scenario.name().to_string(),
            moment_order: m,
            estimate: rep.estimate,
            re: rep.re,
            cv: rep.cv,
        });
    }
    write_file(&dir.join("summary.csv"), summary_csv(&rows).as_bytes())?;

    let mut table = header(cfg);
    let _ = writeln!(table, "truth: {truth_source}");
    let _ = writeln!(
        table,
        "{:<8} {:<10} {:>2} {:>16} {:>16} {:>12} {:>12}",
        "method", "scenario", "m", "estimate", "truth", "RE", "CV"
    );
    for (r, t) in rows.iter().zip(truth) {
        let _ = writeln!(
            table,
            "{:<8} {:<10} {:>2} {:>16.6} {:>16.6} {:>12.5} {:>12.5}",
            r.method, r.scenario, r.moment_order, r.estimate, t, r.re, r.cv
        );
    }
    let diverged: Vec<u64> = traces.iter().filter_map(|t| t.diverged_at).collect();
    if diverged.is_empty() {
        let _ = writeln!(table, "divergence: none");
    } else {
        let _ = writeln!(
            table,
            "divergence: {}/{} replicas, diverged_at in [{}, {}]",
            diverged.len(),
            traces.len(),
            diverged.iter().min().unwrap(),
            diverged.iter().max().unwrap()
        );
    }
    if cfg.sampler == SamplerKind::Ipla {
        let iters: f64 = traces.iter().map(ChainTrace::mean_prox_iterations).sum::<f64>() / traces.len() as f64;
        let failures: u64 = traces.iter().map(|t| t.prox_failures).sum();
        let _ = writeln!(
            table,
            "prox: {iters:.2} iterations per step on average, {failures} failed solves"
        );
    }
    if cfg.sampler == SamplerKind::Mh {
        let steps: u64 = traces.iter().map(|t| t.steps).sum();
        let accepted: u64 = traces.iter().map(|t| t.accepted).sum();
        let _ = writeln!(table, "acceptance rate: {:.3}", accepted as f64 / steps.max(1) as f64);
    }
    if let Some(w) = step_size_warning(potential.profile(), cfg.tau) {
        let _ = writeln!(table, "warning: {w}");
    }
    Ok(RunOutcome {
        dir,
        table,
        summary: rows,
    })
}

fn run_imaging(cfg: &ExperimentConfig, dir: PathBuf) -> Result<RunOutcome, ExperimentError> {
    let (_, problem) = build_potential(cfg)?;
    let problem = problem.expect("deconvolution builds an image problem");
    let im = cfg.imaging.clone().unwrap_or_default();
    let dcfg = DeconvolutionConfig {
        tau: cfg.tau,
        delta: cfg.prox.delta,
        kappa: cfg.prox.kappa,
        alpha: cfg.prox.alpha,
        burn_in: cfg.burn_in,
        n_samples: cfg.n_steps - cfg.burn_in,
        thinning: cfg.thinning,
        quantiles: im.quantiles.clone(),
        start: cfg.start_point(),
        map_iterations: im.map_iterations,
        max_prox_iterations: cfg.prox.max_iterations,
        failure_tolerance: im.failure_tolerance,
        pdhg: cfg.prox.pdhg,
        seed: cfg.base_seed,
    };
    let out = deconvolve_sample(&problem, &dcfg)?;

    let images = dir.join("images");
    create_dir(&images)?;
    let start_name = match cfg.scenario {
        Scenario::Minimizer => "map",
        Scenario::Tail => "start",
    };
    let mut named: Vec<(String, &[f64])> = vec![
        ("truth".into(), &problem.truth),
        ("observed".into(), &problem.observed),
        (start_name.into(), &out.start),
        ("mean".into(), &out.mean),
    ];
    for (q, img) in &out.quantiles {
        named.push((format!("quantile_{q}"), img));
    }
    for (name, pixels) in &named {
        imaging::io::write_pgm(
            &images.join(format!("{name}.pgm")),
            pixels,
            problem.side,
            problem.intensity_scale,
        )?;
        imaging::io::write_raw(&images.join(format!("{name}.raw")), pixels, problem.side)?;
    }

    let metrics = [
        ("rmse_observed", out.rmse_observed),
        ("rmse_start", out.rmse_start),
        ("rmse_mean", out.rmse_mean),
        ("mean_prox_iterations", out.mean_prox_iterations),
        ("prox_failures", out.prox_failures as f64),
        ("n_samples", out.n_samples as f64),
    ];
    let mut csv = String::from("metric,value\n");
    for (k, v) in metrics {
        let _ = writeln!(csv, "{k},{}", fmt_f64(v));
    }
    write_file(&dir.join("metrics.csv"), csv.as_bytes())?;

    let rows: Vec<SummaryRow> = MOMENT_ORDERS
        .into_iter()
        .zip(out.power_means)
        .map(|(m, e)| SummaryRow {
            method: cfg.sampler.name().to_string(),
            scenario: cfg.scenario.name().to_string(),
            moment_order: m,
            estimate: e,
            re: f64::NAN,
            cv: f64::NAN,
        })
        .collect();
    write_file(&dir.join("summary.csv"), summary_csv(&rows).as_bytes())?;

    let mut table = header(cfg);
    let _ = writeln!(table, "RMSE to truth ([0, 1] scale)");
    let _ = writeln!(table, "  observed        {:.5}", out.rmse_observed);
    let _ = writeln!(table, "  {start_name:<15} {:.5}", out.rmse_start);
    let _ = writeln!(table, "  posterior mean  {:.5}", out.rmse_mean);
    let _ = writeln!(
        table,
        "prox: {:.1} PDHG iterations per step on average, {} of {} solves above delta",
        out.mean_prox_iterations, out.prox_failures, cfg.n_steps
    );
    let _ = writeln!(table, "images: {}", images.display());
    Ok(RunOutcome {
        dir,
        table,
        summary: rows,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Theory rows as CSV: `quantity,order,eps,value,note`.
pub fn theory_csv(rows: &[super::TheoryRow]) -> String {
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    let mut s = String::from("quantity,order,eps,value,note\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            r.quantity,
            opt(r.order),
            opt(r.eps),
            fmt_f64(r.value),
            csv_field(&r.note)
        );
    }
    s
}

pub fn theory_table(rows: &[super::TheoryRow]) -> String {
    let mut t = format!("{:<26} {:>5} {:>8} {:>22}  note\n", "quantity", "m", "eps", "value");
    for r in rows {
        let _ = writeln!(
            t,
            "{:<26} {:>5} {:>8} {:>22}  {}",
            r.quantity,
            r.order.map(|v| v.to_string()).unwrap_or_default(),
            r.eps.map(|v| v.to_string()).unwrap_or_default(),
            if r.value.is_nan() {
                "n/a".to_string()
            } else {
                format!("{:.6e}", r.value)
            },
            r.note
        );
    }
    t
}

fn run_theory(cfg: &ExperimentConfig, dir: PathBuf) -> Result<RunOutcome, ExperimentError> {
    let rows = theory_report(cfg)?;
    write_file(&dir.join("theory.csv"), theory_csv(&rows).as_bytes())?;
    let mut table = format!(
        "theory | potential {:?} (d = {}) | tau = {} | kappa = {} | alpha = {}\n",
        cfg.potential, cfg.d, cfg.tau, cfg.prox.kappa, cfg.prox.alpha
    );
    table.push_str(&theory_table(&rows));
    Ok(RunOutcome {
        dir,
        table,
        summary: Vec::new(),
    })
}

/// Runs the prox iteration-count benchmark and writes `prox_bench.csv`.
pub fn run_prox_bench(cfg: &ExperimentConfig, root: &Path) -> Result<RunOutcome, ExperimentError> {
    cfg.validate()?;
    let dir = prepare_output(cfg, root)?;
    let report = prox_bench(cfg)?;
    let mut csv = String::from("delta,log_inv_delta,mean_iterations,max_error_bound,failures\n");
    let mut table = format!(
        "prox-bench | solver {} | potential {:?} (d = {}) | tau = {}\n{:>12} {:>12} {:>16} {:>16} {:>8}\n",
        cfg.prox.solver.name(),
        cfg.potential,
        cfg.d,
        cfg.tau,
        "delta",
        "log(1/delta)",
        "mean iterations",
        "max bound",
        "failed"
    );
    for l in &report.levels {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            fmt_f64(l.delta),
            fmt_f64(-l.delta.ln()),
            fmt_f64(l.mean_iterations),
            fmt_f64(l.max_error_bound),
            l.failures
        );
        let _ = writeln!(
            table,
            "{:>12.4e} {:>12.4} {:>16.2} {:>16.4e} {:>8}",
            l.delta,
            -l.delta.ln(),
            l.mean_iterations,
            l.max_error_bound,
            l.failures
        );
    }
    write_file(&dir.join("prox_bench.csv"), csv.as_bytes())?;
    let _ = writeln!(
        table,
        "affine fit: iterations = {:.3} + {:.3} log(1/delta), R^2 = {:.4}",
        report.intercept, report.slope, report.r_squared
    );
    Ok(RunOutcome {
        dir,
        table,
        summary: Vec::new(),
    })
}
