use super::{finish, ProxError, ProxRequest, ProxResult};

/// Absolute accuracy targeted for each cubic root.
const ROOT_TOLERANCE: f64 = 1e-14;

/// `prox(x) = x / (1 + tau)` for `V = |x|^2 / 2`.
pub fn prox_exact_gaussian(req: &ProxRequest) -> Result<ProxResult, ProxError> {
    req.validate(req.x.len())?;
    let s = 1.0 / (1.0 + req.tau);
    let point: Vec<f64> = req.x.iter().map(|v| v * s).collect();
    let objective = 0.5 * point.iter().map(|v| v * v).sum::<f64>()
        + point.iter().zip(req.x).map(|(p, x)| (p - x) * (p - x)).sum::<f64>() / (2.0 * req.tau);
    finish(point, 0.0, 0, objective, req.delta)
}

/// Separable quartic: coordinate `i` is the real root of `tau y^3 + y = x_i`.
///
/// The cubic `f(y) = tau y^3 + y - x_i` has `f' >= 1`, so `|y - y*| <= |f(y)|`
/// bounds every computed root by its own residual. The reported bound is
/// `sqrt(d) * max(1e-14, largest residual)`, which stays honest when the
/// coordinates are so large that 1e-14 is below their floating-point spacing.
pub fn prox_exact_quartic(req: &ProxRequest) -> Result<ProxResult, ProxError> {
    req.validate(req.x.len())?;
    let tau = req.tau;
    let mut worst: f64 = 0.0;
    let mut objective = 0.0;
    let point: Vec<f64> = req
        .x
        .iter()
        .map(|&x| {
            let y = cubic_root(tau, x);
            let t = tau * y * y * y;
            let rounding = 4.0 * f64::EPSILON * (t.abs() + y.abs() + x.abs());
            worst = worst.max((t + y - x).abs() + rounding);
            objective += 0.25 * (y * y) * (y * y) + (y - x) * (y - x) / (2.0 * tau);
            y
        })
        .collect();
    let bound = (req.x.len() as f64).sqrt() * worst.max(ROOT_TOLERANCE);
    finish(point, bound, 0, objective, req.delta)
}

/// Safeguarded Newton on `tau y^3 + y - x` inside `[min(0, x), max(0, x)]`.
pub(crate) fn cubic_root(tau: f64, x: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let f = |y: f64| tau * y * y * y + y - x;
    let (mut lo, mut hi) = if x > 0.0 { (0.0, x) } else { (x, 0.0) };
    // x / sqrt(1 + tau x^2) lies in the bracket and is close to the root at
    // both ends of the scale.
    let mut y = x / (1.0 + tau * x * x).sqrt();
    for _ in 0..200 {
        let fy = f(y);
        if fy == 0.0 {
            return y;
        }
        if fy > 0.0 {
            hi = y;
        } else {
            lo = y;
        }
        let mut next = y - fy / (3.0 * tau * y * y + 1.0);
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - y).abs() <= 0.25 * ROOT_TOLERANCE || next == y {
            return next;
        }
        y = next;
    }
    y
}
