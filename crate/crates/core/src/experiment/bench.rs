use rand::Rng;
use rand_distr::StandardNormal;

use super::config::ExperimentConfig;
use super::run::build_potential;
use super::ExperimentError;
use crate::prox::{ProxError, ProxOperator, ProxRequest};
use crate::rng::{stream_rng, streams};

/// Iteration statistics at one accuracy level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchLevel {
    pub delta: f64,
    pub mean_iterations: f64,
    pub max_error_bound: f64,
    pub failures: usize,
}

/// Levels plus the least-squares fit `iterations ~ a + b log(1/delta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub levels: Vec<BenchLevel>,
    pub intercept: f64,
    pub slope: f64,
    pub r_squared: f64,
}

/// Solves the prox at random centres for `delta_max / 2^j`,
/// `j = 0..=halvings`, each solve starting from scratch.
pub fn prox_bench(cfg: &ExperimentConfig) -> Result<BenchReport, ExperimentError> {
    let bench = cfg.prox_bench.clone().unwrap_or_default();
    let (potential, _) = build_potential(cfg)?;
    let d = potential.dim();
    let mut rng = stream_rng(cfg.base_seed, streams::TEST_POINTS);
    let points: Vec<Vec<f64>> = (0..bench.points)
        .map(|_| {
            (0..d)
                .map(|_| bench.x_scale * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    let mut op = ProxOperator::new(potential, cfg.prox.solver)?.with_pdhg_settings(cfg.prox.pdhg);
    let mut levels = Vec::new();
    for j in 0..=bench.halvings {
        let delta = bench.delta_max / 2f64.powi(j as i32);
        let (mut iters, mut worst, mut failures) = (0usize, 0f64, 0usize);
        for x in &points {
            let req = ProxRequest::new(x, cfg.tau, delta, cfg.prox.max_iterations);
            let r = match op.solve(&req) {
                Ok(r) => r,
                Err(ProxError::NotConverged { best, .. }) => {
                    failures += 1;
                    *best
                }
                Err(e) => return Err(e.into()),
            };
            iters += r.iterations;
            worst = worst.max(r.error_bound);
        }
        levels.push(BenchLevel {
            delta,
            mean_iterations: iters as f64 / points.len() as f64,
            max_error_bound: worst,
            failures,
        });
    }
    let xs: Vec<f64> = levels.iter().map(|l| -l.delta.ln()).collect();
    let ys: Vec<f64> = levels.iter().map(|l| l.mean_iterations).collect();
    let (intercept, slope, r_squared) = affine_fit(&xs, &ys);
    Ok(BenchReport {
        levels,
        intercept,
        slope,
        r_squared,
    })
}

/// Ordinary least squares `y ~ a + b x`; returns `(a, b, R^2)`.
pub(crate) fn affine_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (a, b, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_fit_recovers_exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 + 0.5 * x).collect();
        let (a, b, r2) = affine_fit(&xs, &ys);
        assert!((a - 3.0).abs() < 1e-12 && (b - 0.5).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_fit_hand_computed() {
        // x = 0, 1, 2 and y = 0, 2, 1: b = 0.5, a = 0.5, R^2 = 0.25.
        let (a, b, r2) = affine_fit(&[0.0, 1.0, 2.0], &[0.0, 2.0, 1.0]);
        assert!((a - 0.5).abs() < 1e-12 && (b - 0.5).abs() < 1e-12 && (r2 - 0.25).abs() < 1e-12);
    }
}
