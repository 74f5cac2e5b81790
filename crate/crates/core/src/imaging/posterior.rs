use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{rmse, ImageProblem, ImagingError};
use crate::diagnostics::quantile_images;
use crate::potentials::Potential;
use crate::prox::{prox_tv_pdhg, PdhgSettings, ProxError, ProxOperator, ProxRequest, ProxSolver};
use crate::samplers::{run_chain, ChainState, Ipla, ProxFailurePolicy, RunSpec};

/// Where the deconvolution chain starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPoint {
    /// The MAP estimate, computed by a long PDHG run.
    Minimizer,
    /// The observed image.
    Observed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeconvolutionConfig {
    pub tau: f64,
    /// Absolute prox accuracy; `None` uses `kappa * tau^(1 + alpha)`.
    pub delta: Option<f64>,
    pub kappa: f64,
    pub alpha: f64,
    pub burn_in: u64,
    /// Post-burn-in steps.
    pub n_samples: u64,
    pub thinning: u64,
    pub quantiles: Vec<f64>,
    pub start: StartPoint,
    pub map_iterations: usize,
    pub max_prox_iterations: usize,
    /// Largest tolerated fraction of prox solves that miss `delta`.
    pub failure_tolerance: f64,
    pub pdhg: PdhgSettings,
    pub seed: u64,
}

impl Default for DeconvolutionConfig {
    fn default() -> Self {
        Self {
            tau: 0.1,
            delta: Some(0.1),
            kappa: 1.0,
            alpha: 1.0,
            burn_in: 50,
            n_samples: 500,
            thinning: 1,
            quantiles: vec![0.05, 0.25, 0.5, 0.75, 0.95],
            start: StartPoint::Minimizer,
            map_iterations: 3000,
            max_prox_iterations: 500,
            failure_tolerance: 0.05,
            pdhg: PdhgSettings::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DeconvolutionOutput {
    pub start: Vec<f64>,
    pub mean: Vec<f64>,
    /// `(level, image)` pairs in the configured order.
    pub quantiles: Vec<(f64, Vec<f64>)>,
    pub n_samples: usize,
    pub mean_prox_iterations: f64,
    pub prox_failures: u64,
    /// Post-burn-in means of `|X|^2`, `|X|^4`, `|X|^6`.
    pub power_means: [f64; 3],
    /// RMSE to the truth on the `[0, 1]` scale.
    pub rmse_observed: f64,
    pub rmse_start: f64,
    pub rmse_mean: f64,
}

/// Approximate MAP estimate: the prox of the posterior potential with a
/// negligible anchor weight, started from the observation.
pub fn map_estimate(
    problem: &ImageProblem,
    iterations: usize,
    settings: &PdhgSettings,
) -> Result<Vec<f64>, ImagingError> {
    let Potential::Deconvolution(post) = problem.potential()? else {
        unreachable!("image problems build deconvolution potentials")
    };
    let req = ProxRequest::new(&problem.observed, 1e8, 1e-12, iterations.max(1));
    match prox_tv_pdhg(&post, &req, settings, None).0 {
        Ok(r) => Ok(r.point),
        Err(ProxError::NotConverged { best, .. }) => Ok(best.point),
        Err(e) => Err(ImagingError::Sampler(e.into())),
    }
}

/// IPLA on the TV posterior with the PDHG prox: running mean over all
/// post-burn-in states and quantile images from the thinned samples.
pub fn deconvolve_sample(
    problem: &ImageProblem,
    cfg: &DeconvolutionConfig,
) -> Result<DeconvolutionOutput, ImagingError> {
    if cfg.n_samples == 0 || cfg.thinning == 0 {
        return Err(ImagingError::InvalidParameter(
            "n_samples and thinning must be positive".into(),
        ));
    }
    if !(cfg.failure_tolerance >= 0.0) {
        return Err(ImagingError::InvalidParameter(
            "failure_tolerance must be non-negative".into(),
        ));
    }
    let potential = Arc::new(problem.potential()?);
    let start = match cfg.start {
        StartPoint::Minimizer => map_estimate(problem, cfg.map_iterations, &cfg.pdhg)?,
        StartPoint::Observed => problem.observed.clone(),
    };
    let prox = ProxOperator::new(potential, ProxSolver::Pdhg)
        .map_err(|e| ImagingError::Sampler(e.into()))?
        .with_pdhg_settings(cfg.pdhg);
    let mut kernel = Ipla::new(prox, cfg.tau, cfg.kappa, cfg.alpha)?
        .with_max_prox_iterations(cfg.max_prox_iterations)
        .with_failure_policy(ProxFailurePolicy::Tolerate);
    if let Some(delta) = cfg.delta {
        kernel = kernel.with_delta(delta)?;
    }
    let mut state = ChainState::for_replica(start.clone(), cfg.seed, 0);
    let spec = RunSpec {
        sample_thinning: Some(cfg.thinning),
        track_mean: true,
        ..RunSpec::new(cfg.burn_in + cfg.n_samples, cfg.burn_in)
    };
    let trace = run_chain(&mut kernel, &mut state, &spec)?;
    if let Some(at) = trace.diverged_at {
        return Err(ImagingError::InvalidParameter(format!(
            "deconvolution chain diverged at step {at}: {}",
            trace.failure.as_deref().unwrap_or("state overflow")
        )));
    }
    let rate = trace.prox_failures as f64 / trace.steps.max(1) as f64;
    if rate > cfg.failure_tolerance {
        return Err(ImagingError::ProxFailures {
            failures: trace.prox_failures,
            steps: trace.steps,
            rate,
            tolerance: cfg.failure_tolerance,
            detail: format!(
                "certified error above delta = {} within {} PDHG iterations",
                kernel.delta(),
                cfg.max_prox_iterations
            ),
        });
    }
    let mean = trace.mean().expect("n_samples > 0 gives a non-empty window");
    let images =
        quantile_images(&trace.samples, &cfg.quantiles).map_err(|e| ImagingError::InvalidParameter(e.to_string()))?;
    let scale = problem.intensity_scale;
    Ok(DeconvolutionOutput {
        rmse_observed: rmse(&problem.observed, &problem.truth) / scale,
        rmse_start: rmse(&start, &problem.truth) / scale,
        rmse_mean: rmse(&mean, &problem.truth) / scale,
        start,
        mean,
        quantiles: cfg.quantiles.iter().copied().zip(images).collect(),
        n_samples: trace.samples.len(),
        mean_prox_iterations: trace.mean_prox_iterations(),
        prox_failures: trace.prox_failures,
        power_means: [2, 4, 6].map(|m| trace.power_mean(m).unwrap_or(f64::NAN)),
    })
}
