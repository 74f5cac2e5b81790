use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{finish, ProxError, ProxRequest, ProxResult};
use crate::linalg::dist;
use crate::potentials::tv::{gradient, gradient_adjoint, GRADIENT_NORM_SQ_BOUND};
use crate::potentials::TvDeconvolution;

/// Residual-balancing constants of the adaptive primal-dual solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdhgSettings {
    /// Initial adaptation strength; the step ratio moves by `1 + alpha`.
    pub alpha0: f64,
    /// Multiplier applied to `alpha` after every adaptation.
    pub eta: f64,
    /// Residual imbalance that triggers an adaptation.
    pub balance: f64,
    /// Reuse the dual iterate of the previous solve as the starting point.
    pub warm_start_dual: bool,
}

impl Default for PdhgSettings {
    fn default() -> Self {
        Self {
            alpha0: 0.5,
            eta: 0.5,
            balance: 10.0,
            warm_start_dual: true,
        }
    }
}

/// Adaptive primal-dual hybrid gradient for the TV-deconvolution prox
///
/// ```text
/// min_u  precision/2 |y - H u|^2 + beta TV(u) + |u - x|^2 / (2 tau)
/// ```
///
/// written as the saddle problem `min_u max_{|p_ij| <= beta} G(u) + <D u, p>`
/// with the smooth part `G` handled exactly in the Fourier domain. The
/// returned dual iterate can seed the next call.
///
/// With residuals `r_P`, `r_D` at the current iterate, strong convexity of
/// `G` (modulus `mu = 1/tau`) and the bounded dual set give
/// `|u - u*| <= (|r_P| + sqrt(|r_P|^2 + 2 mu |r_D| 2 beta sqrt(n))) / mu`.
/// `beta = 0` is solved in closed form.
pub fn prox_tv_pdhg(
    problem: &TvDeconvolution,
    req: &ProxRequest,
    settings: &PdhgSettings,
    dual: Option<Vec<f64>>,
) -> (Result<ProxResult, ProxError>, Vec<f64>) {
    let side = problem.side();
    let n = side * side;
    let empty_dual = || vec![0.0; 2 * n];
    if let Err(e) = req.validate(n) {
        return (Err(e), dual.unwrap_or_else(empty_dual));
    }
    let fft = problem.blur().fft();
    let h = problem.blur().transfer();
    let prec = problem.precision();
    let beta = problem.beta();
    let tau = req.tau;
    let x = req.x;
    let objective = |u: &[f64]| problem.value(u) + dist(u, x).powi(2) / (2.0 * tau);
    let phi_x = objective(x);

    // Constant part of the Fourier-domain normal equations.
    let y_hat = fft.forward_real(problem.observed());
    let x_hat = fft.forward_real(x);
    let rhs0: Vec<Complex64> = (0..n).map(|k| h[k].conj() * y_hat[k] * prec + x_hat[k] / tau).collect();
    let diag0: Vec<f64> = h.iter().map(|hk| hk.norm_sqr() * prec + 1.0 / tau).collect();

    let solve = |extra_hat: Option<(&[Complex64], f64)>| -> Vec<f64> {
        let mut buf: Vec<Complex64> = match extra_hat {
            Some((v_hat, t)) => (0..n)
                .map(|k| (rhs0[k] + v_hat[k] / t) / (diag0[k] + 1.0 / t))
                .collect(),
            None => (0..n).map(|k| rhs0[k] / diag0[k]).collect(),
        };
        fft.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    };

    if beta == 0.0 {
        let u = solve(None);
        let f = objective(&u);
        let (point, obj) = if f <= phi_x { (u, f) } else { (x.to_vec(), phi_x) };
        return (finish(point, 0.0, 0, obj, req.delta), empty_dual());
    }

    let mu = 1.0 / tau;
    let dual_radius = 2.0 * beta * (n as f64).sqrt();
    let mut t = 1.0 / GRADIENT_NORM_SQ_BOUND.sqrt();
    let mut s = t;
    let mut alpha = settings.alpha0;

    let mut u = x.to_vec();
    let mut p = match dual {
        Some(d) if d.len() == 2 * n => d,
        _ => empty_dual(),
    };
    project(&mut p, beta);
    let (mut du_h, mut du_v) = (vec![0.0; n], vec![0.0; n]);
    gradient(&u, side, &mut du_h, &mut du_v);
    let mut dtp = vec![0.0; n];
    gradient_adjoint(&p[..n], &p[n..], side, &mut dtp);

    let mut v = vec![0.0; n];
    let (mut nh, mut nv) = (vec![0.0; n], vec![0.0; n]);
    let mut dtp_next = vec![0.0; n];
    let mut iterations = 0;
    while iterations < req.max_iterations {
        iterations += 1;
        for k in 0..n {
            v[k] = u[k] - t * dtp[k];
        }
        let v_hat = fft.forward_real(&v);
        let u_next = solve(Some((&v_hat, t)));
        gradient(&u_next, side, &mut nh, &mut nv);
        let p_prev = p.clone();
        for k in 0..n {
            p[k] += s * (2.0 * nh[k] - du_h[k]);
            p[n + k] += s * (2.0 * nv[k] - du_v[k]);
        }
        project(&mut p, beta);
        gradient_adjoint(&p[..n], &p[n..], side, &mut dtp_next);

        let mut rp = 0.0;
        for k in 0..n {
            let r = (u[k] - u_next[k]) / t - (dtp[k] - dtp_next[k]);
            rp += r * r;
        }
        let mut rd = 0.0;
        for k in 0..n {
            let a = (p_prev[k] - p[k]) / s - (du_h[k] - nh[k]);
            let b = (p_prev[n + k] - p[n + k]) / s - (du_v[k] - nv[k]);
            rd += a * a + b * b;
        }
        let (rp, rd) = (rp.sqrt(), rd.sqrt());
        let bound = (rp + (rp * rp + 2.0 * mu * rd * dual_radius).sqrt()) / mu;

        u = u_next;
        std::mem::swap(&mut du_h, &mut nh);
        std::mem::swap(&mut du_v, &mut nv);
        std::mem::swap(&mut dtp, &mut dtp_next);

        if bound <= req.delta || iterations == req.max_iterations {
            let f = objective(&u);
            let candidate = if f <= phi_x {
                ProxResult {
                    point: u.clone(),
                    error_bound: bound,
                    iterations,
                    objective: f,
                }
            } else {
                ProxResult {
                    point: x.to_vec(),
                    error_bound: bound + dist(&u, x),
                    iterations,
                    objective: phi_x,
                }
            };
            if candidate.error_bound <= req.delta || iterations == req.max_iterations {
                return (
                    finish(
                        candidate.point,
                        candidate.error_bound,
                        iterations,
                        candidate.objective,
                        req.delta,
                    ),
                    p,
                );
            }
        }

        if rp > settings.balance * rd {
            t *= 1.0 + alpha;
            s /= 1.0 + alpha;
            alpha *= settings.eta;
        } else if rp * settings.balance < rd {
            t /= 1.0 + alpha;
            s *= 1.0 + alpha;
            alpha *= settings.eta;
        }
    }
    unreachable!("the loop returns at max_iterations")
}

/// Pixelwise projection of `(p_h, p_v)` onto the disk of radius `beta`.
fn project(p: &mut [f64], beta: f64) {
    let n = p.len() / 2;
    let (ph, pv) = p.split_at_mut(n);
    for (a, b) in ph.iter_mut().zip(pv.iter_mut()) {
        let r = a.hypot(*b);
        if r > beta {
            let s = beta / r;
            *a *= s;
            *b *= s;
        }
    }
}
