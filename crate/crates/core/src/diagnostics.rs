//! Moment estimates, relative error / coefficient of variation across
//! replicas, analytic moment oracles and per-pixel quantiles.

use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::samplers::ChainTrace;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum DiagnosticsError {
    #[error("no post-burn-in samples to average")]
    EmptyWindow,
    #[error("moment order {0} is not tracked (use 2, 4 or 6)")]
    UnsupportedOrder(u32),
    #[error("the true value is zero, so relative error and CV are undefined")]
    ZeroTruth,
    #[error(
        "no analytic oracle for the {potential} potential at order {order}; use a Metropolis–Hastings reference run"
    )]
    NoOracle { potential: String, order: u32 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Replica-aggregated moment estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport {
    pub moment_order: u32,
    /// Mean of the replica estimates.
    pub estimate: f64,
    pub truth: f64,
    /// `|estimate - truth| / |truth|`.
    pub re: f64,
    /// Sample standard deviation of the replica estimates over `|truth|`.
    pub cv: f64,
    pub replicas: usize,
}

/// Mean of `|X_k|^m` over the chain's post-burn-in window; NaN for a
/// diverged chain.
pub fn moment_estimate(trace: &ChainTrace, m: u32) -> Result<f64, DiagnosticsError> {
    if !matches!(m, 2 | 4 | 6) {
        return Err(DiagnosticsError::UnsupportedOrder(m));
    }
    if trace.is_diverged() {
        return Ok(f64::NAN);
    }
    trace.power_mean(m).ok_or(DiagnosticsError::EmptyWindow)
}

/// Combines per-replica estimates. Any NaN estimate makes `estimate`, `re`
/// and `cv` NaN; a single replica leaves `cv` NaN.
pub fn aggregate(estimates: &[f64], truth: f64, moment_order: u32) -> Result<MomentReport, DiagnosticsError> {
    if truth == 0.0 {
        return Err(DiagnosticsError::ZeroTruth);
    }
    if estimates.is_empty() {
        return Err(DiagnosticsError::Invalid("no replica estimates".into()));
    }
    let r = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / r;
    let cv = if estimates.len() < 2 {
        f64::NAN
    } else {
        let ss: f64 = estimates.iter().map(|e| (e - mean) * (e - mean)).sum();
        (ss / (r - 1.0)).sqrt() / truth.abs()
    };
    Ok(MomentReport {
        moment_order,
        estimate: mean,
        truth,
        re: (mean - truth).abs() / truth.abs(),
        cv,
        replicas: estimates.len(),
    })
}

/// Per-coordinate moments `E y^2`, `E y^4`, `E y^6` under `exp(-y^4/4)`.
pub fn quartic_coordinate_moments() -> [f64; 3] {
    let c2 = 2.0 * gamma(0.75) / gamma(0.25);
    // E y^4 = 1 exactly by integration by parts.
    let c4 = 1.0;
    let mass = integrate(|y| (-0.25 * y.powi(4)).exp(), 0.0, QUARTIC_CUTOFF);
    let c6 = integrate(|y| y.powi(6) * (-0.25 * y.powi(4)).exp(), 0.0, QUARTIC_CUTOFF) / mass;
    [c2, c4, c6]
}

/// `exp(-y^4/4)` is below 1e-300 past this point.
const QUARTIC_CUTOFF: f64 = 6.5;

/// Analytic `E|Y|^m` under the named potential in dimension `d`.
pub fn oracle_moment(potential: &str, d: usize, m: u32) -> Result<f64, DiagnosticsError> {
    let no = || DiagnosticsError::NoOracle {
        potential: potential.to_string(),
        order: m,
    };
    let d = d as f64;
    match (potential, m) {
        ("gaussian", 2) => Ok(d),
        ("gaussian", 4) => Ok(d * (d + 2.0)),
        ("gaussian", 6) => Ok(d * (d + 2.0) * (d + 4.0)),
        ("quartic", 2 | 4 | 6) => {
            let [c2, c4, c6] = quartic_coordinate_moments();
            Ok(match m {
                2 => d * c2,
                4 => d * c4 + d * (d - 1.0) * c2 * c2,
                _ => d * c6 + 3.0 * d * (d - 1.0) * c4 * c2 + d * (d - 1.0) * (d - 2.0) * c2.powi(3),
            })
        }
        _ => Err(no()),
    }
}

/// Adaptive Simpson quadrature to roughly 1e-14 relative accuracy.
fn integrate(f: impl Fn(f64) -> f64 + Copy, a: f64, b: f64) -> f64 {
    fn simpson(f: impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: impl Fn(f64) -> f64 + Copy,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let diff = left + right - whole;
        if depth == 0 || diff.abs() <= 15.0 * tol {
            return left + right + diff / 15.0;
        }
        recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, m, fm, whole, 1e-15, 50)
}

/// Per-pixel empirical quantiles (linear interpolation between order
/// statistics at position `(n - 1) q`), one image per entry of `qs`.
pub fn quantile_images(samples: &[Vec<f64>], qs: &[f64]) -> Result<Vec<Vec<f64>>, DiagnosticsError> {
    let first = samples
        .first()
        .ok_or_else(|| DiagnosticsError::Invalid("no samples".into()))?;
    let len = first.len();
    if samples.iter().any(|s| s.len() != len) {
        return Err(DiagnosticsError::Invalid("samples differ in length".into()));
    }
    if let Some(q) = qs.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(DiagnosticsError::Invalid(format!(
            "quantile level {q} is outside (0, 1)"
        )));
    }
    let n = samples.len();
    let mut out = vec![vec![0.0; len]; qs.len()];
    let mut column = vec![0.0; n];
    for pixel in 0..len {
        for (c, s) in column.iter_mut().zip(samples) {
            *c = s[pixel];
        }
        column.sort_by(f64::total_cmp);
        for (img, &q) in out.iter_mut().zip(qs) {
            let h = (n - 1) as f64 * q;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            img[pixel] = column[lo] + (h - lo as f64) * (column[hi] - column[lo]);
        }
    }
    Ok(out)
}

pub fn quantile_image(samples: &[Vec<f64>], q: f64) -> Result<Vec<f64>, DiagnosticsError> {
    Ok(quantile_images(samples, &[q])?.remove(0))
}
