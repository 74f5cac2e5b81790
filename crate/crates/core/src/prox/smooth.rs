use super::{certificate, finish, finite_norm, modulus, prox_objective, ProxError, ProxRequest, ProxResult};
use crate::linalg::{dot, norm_sq};
use crate::potentials::Potential;

const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-300;

struct Phi<'a> {
    potential: &'a Potential,
    x: &'a [f64],
    tau: f64,
}

impl Phi<'_> {
    fn value(&self, y: &[f64]) -> f64 {
        prox_objective(self.potential, self.x, y, self.tau)
    }

    fn gradient(&self, y: &[f64], out: &mut [f64]) {
        self.potential.gradient_unchecked(y, out);
        for ((o, yi), xi) in out.iter_mut().zip(y).zip(self.x) {
            *o += (yi - xi) / self.tau;
        }
    }

    /// `(Hess V(y) + I / tau) v`.
    fn hessian_vec(&self, y: &[f64], v: &[f64], out: &mut [f64]) {
        self.potential.hessian_vec_unchecked(y, v, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o += vi / self.tau;
        }
    }
}

fn prepare<'a>(potential: &'a Potential, req: &ProxRequest<'a>) -> Result<(Phi<'a>, f64), ProxError> {
    let profile = potential.profile();
    if !profile.smooth {
        return Err(ProxError::Unsupported {
            solver: "gradient-based",
            potential: potential.name(),
        });
    }
    req.validate(profile.dim)?;
    let mu = modulus(profile, req.tau)?;
    Ok((
        Phi {
            potential,
            x: req.x,
            tau: req.tau,
        },
        mu,
    ))
}

/// Backtracking search along `dir` from `y`; returns the accepted point and
/// its objective, or `None` when no step decreases `phi` sufficiently.
///
/// Near the minimizer the predicted decrease falls below the rounding error
/// of `phi`; a step whose objective change is lost in rounding is judged
/// by whether it shrinks the gradient norm instead.
fn line_search(
    phi: &Phi,
    y: &[f64],
    f0: f64,
    grad_norm: f64,
    dir: &[f64],
    slope: f64,
    initial: f64,
) -> Option<(Vec<f64>, f64, f64)> {
    let mut t = initial;
    let mut trial = vec![0.0; y.len()];
    let mut g = vec![0.0; y.len()];
    let noise = 64.0 * f64::EPSILON * f0.abs().max(1.0);
    while t >= MIN_STEP {
        for ((c, yi), di) in trial.iter_mut().zip(y).zip(dir) {
            *c = yi + t * di;
        }
        let f = phi.value(&trial);
        let accept = if !f.is_finite() {
            false
        } else if (f - f0).abs() <= noise {
            phi.gradient(&trial, &mut g);
            finite_norm(&g) < grad_norm
        } else {
            f <= f0 + ARMIJO * t * slope
        };
        if accept {
            return Some((trial, f, t));
        }
        t *= 0.5;
    }
    None
}

/// Gradient descent on `phi` from `y0 = x` with Armijo backtracking.
///
/// Stops once the certificate `|grad phi(y)| / mu` (or the ball bound for
/// convex potentials with a known minimizer) drops below `delta`.
pub fn prox_gd(potential: &Potential, req: &ProxRequest) -> Result<ProxResult, ProxError> {
    let (phi, mu) = prepare(potential, req)?;
    let profile = potential.profile();
    let mut y = req.x.to_vec();
    let mut f = phi.value(&y);
    let mut g = vec![0.0; y.len()];
    let mut step = req.tau;
    let mut iterations = 0;
    loop {
        phi.gradient(&y, &mut g);
        let gn = finite_norm(&g);
        let bound = certificate(profile, mu, req.x, &y, gn);
        if bound <= req.delta || iterations >= req.max_iterations {
            return finish(y, bound, iterations, f, req.delta);
        }
        let dir: Vec<f64> = g.iter().map(|v| -v).collect();
        // Grow the trial step again after a backtracked iteration, capped at tau.
        let initial = (2.0 * step).min(req.tau);
        match line_search(&phi, &y, f, gn, &dir, -gn * gn, initial) {
            Some((next, fnext, t)) => {
                y = next;
                f = fnext;
                step = t;
                iterations += 1;
            }
            None => return finish(y, bound, iterations, f, req.delta),
        }
    }
}

/// Newton's method on `phi` with conjugate-gradient inner solves for
/// `(Hess V(y) + I / tau) p = -grad phi(y)` and Armijo backtracking.
/// A CG breakdown (non-positive curvature) falls back to a gradient step.
pub fn prox_newton(potential: &Potential, req: &ProxRequest) -> Result<ProxResult, ProxError> {
    let (phi, mu) = prepare(potential, req)?;
    let profile = potential.profile();
    let dim = profile.dim;
    let mut y = req.x.to_vec();
    let mut f = phi.value(&y);
    let mut g = vec![0.0; dim];
    let mut iterations = 0;
    loop {
        phi.gradient(&y, &mut g);
        let gn = finite_norm(&g);
        let bound = certificate(profile, mu, req.x, &y, gn);
        if bound <= req.delta || iterations >= req.max_iterations {
            return finish(y, bound, iterations, f, req.delta);
        }
        let forcing = gn.sqrt().min(0.5) * gn;
        let newton = conjugate_gradient(&phi, &y, &g, forcing, 2 * dim + 10);
        let (dir, initial) = match newton {
            Some(p) if dot(&p, &g) < 0.0 => (p, 1.0),
            _ => (g.iter().map(|v| -v).collect(), req.tau),
        };
        let slope = dot(&dir, &g);
        match line_search(&phi, &y, f, gn, &dir, slope, initial) {
            Some((next, fnext, _)) => {
                y = next;
                f = fnext;
                iterations += 1;
            }
            None => return finish(y, bound, iterations, f, req.delta),
        }
    }
}

/// Solves `A p = -g` to residual `tol`, where `A` is the Hessian of `phi` at
/// `y`. Returns `None` on negative curvature.
fn conjugate_gradient(phi: &Phi, y: &[f64], g: &[f64], tol: f64, max_iter: usize) -> Option<Vec<f64>> {
    let n = g.len();
    let mut p = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut d = r.clone();
    let mut ad = vec![0.0; n];
    let mut rr = norm_sq(&r);
    let tol_sq = tol * tol;
    for _ in 0..max_iter {
        if rr <= tol_sq {
            break;
        }
        phi.hessian_vec(y, &d, &mut ad);
        let curvature = dot(&d, &ad);
        if !(curvature > 0.0) {
            return None;
        }
        let a = rr / curvature;
        for i in 0..n {
            p[i] += a * d[i];
            r[i] -= a * ad[i];
        }
        let rr_next = norm_sq(&r);
        let b = rr_next / rr;
        for i in 0..n {
            d[i] = r[i] + b * d[i];
        }
        rr = rr_next;
    }
    Some(p)
}
