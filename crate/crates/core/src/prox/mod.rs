//! Certified inexact proximal maps.
//!
//! For a potential `V`, step `tau` and anchor `x`, every solver here
//! approximately minimizes
//!
//! ```text
//! phi(y) = V(y) + |y - x|^2 / (2 tau)
//! ```
//!
//! and returns a point together with a certified upper bound on its
//! distance to the true minimizer `prox_V^tau(x)`. Smooth solvers certify
//! through strong convexity: `phi` has modulus `mu = 1/tau + hessian_floor`,
//! so `|y - prox(x)| <= |grad phi(y)| / mu`.

mod exact;
mod pdhg;
mod smooth;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exact::{prox_exact_gaussian, prox_exact_quartic};
pub use pdhg::{prox_tv_pdhg, PdhgSettings};
pub use smooth::{prox_gd, prox_newton};

use crate::linalg::{dist, norm};
use crate::potentials::{Potential, PotentialError, PotentialProfile};

#[derive(Debug, Clone, Copy)]
pub struct ProxRequest<'a> {
    pub x: &'a [f64],
    pub tau: f64,
    pub delta: f64,
    pub max_iterations: usize,
}

impl<'a> ProxRequest<'a> {
    pub fn new(x: &'a [f64], tau: f64, delta: f64, max_iterations: usize) -> Self {
        Self {
            x,
            tau,
            delta,
            max_iterations,
        }
    }

    pub(crate) fn validate(&self, dim: usize) -> Result<(), ProxError> {
        if self.x.len() != dim {
            return Err(PotentialError::DimensionMismatch {
                expected: dim,
                got: self.x.len(),
            }
            .into());
        }
        if let Some(index) = self.x.iter().position(|v| !v.is_finite()) {
            return Err(PotentialError::NonFinite { index }.into());
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(ProxError::InvalidRequest(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.delta > 0.0) {
            return Err(ProxError::InvalidRequest(format!(
                "delta must be positive, got {}",
                self.delta
            )));
        }
        if self.max_iterations == 0 {
            return Err(ProxError::InvalidRequest("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub point: Vec<f64>,
    /// Certified bound on `|point - prox_V^tau(x)|`.
    pub error_bound: f64,
    pub iterations: usize,
    /// `phi(point)`.
    pub objective: f64,
}

#[derive(Debug, Clone, Error)]
pub enum ProxError {
    #[error("invalid prox request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error("the {solver} solver does not apply to the {potential} potential")]
    Unsupported {
        solver: &'static str,
        potential: &'static str,
    },
    #[error("prox objective is not strongly convex: 1/tau + hessian_floor = {modulus} (tau = {tau})")]
    NotStronglyConvex { tau: f64, modulus: f64 },
    #[error(
        "prox solve stopped after {} iterations with certified error {} > delta = {delta}",
        best.iterations,
        best.error_bound
    )]
    NotConverged { best: Box<ProxResult>, delta: f64 },
}

/// Solver selection, as named in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxSolver {
    Exact,
    Gd,
    Newton,
    Pdhg,
}

impl ProxSolver {
    pub fn name(self) -> &'static str {
        match self {
            ProxSolver::Exact => "exact",
            ProxSolver::Gd => "gd",
            ProxSolver::Newton => "newton",
            ProxSolver::Pdhg => "pdhg",
        }
    }

    pub fn supports(self, potential: &Potential) -> bool {
        match (self, potential) {
            (ProxSolver::Exact, Potential::Gaussian(_) | Potential::Quartic(_)) => true,
            (ProxSolver::Gd | ProxSolver::Newton, p) => p.profile().smooth,
            (ProxSolver::Pdhg, Potential::Deconvolution(_)) => true,
            _ => false,
        }
    }
}

impl std::str::FromStr for ProxSolver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(ProxSolver::Exact),
            "gd" => Ok(ProxSolver::Gd),
            "newton" => Ok(ProxSolver::Newton),
            "pdhg" => Ok(ProxSolver::Pdhg),
            other => Err(format!(
                "unknown prox solver `{other}` (expected exact, gd, newton or pdhg)"
            )),
        }
    }
}

/// A prox solver bound to one potential. PDHG keeps its last dual iterate
/// and, when enabled, warm-starts the next solve from it.
#[derive(Debug, Clone)]
pub struct ProxOperator {
    potential: Arc<Potential>,
    solver: ProxSolver,
    pdhg: PdhgSettings,
    dual: Option<Vec<f64>>,
}

impl ProxOperator {
    pub fn new(potential: Arc<Potential>, solver: ProxSolver) -> Result<Self, ProxError> {
        if !solver.supports(&potential) {
            return Err(ProxError::Unsupported {
                solver: solver.name(),
                potential: potential.name(),
            });
        }
        Ok(Self {
            potential,
            solver,
            pdhg: PdhgSettings::default(),
            dual: None,
        })
    }

    pub fn with_pdhg_settings(mut self, settings: PdhgSettings) -> Self {
        self.pdhg = settings;
        self
    }

    pub fn potential(&self) -> &Arc<Potential> {
        &self.potential
    }

    pub fn solver(&self) -> ProxSolver {
        self.solver
    }

    pub fn solve(&mut self, req: &ProxRequest) -> Result<ProxResult, ProxError> {
        match self.solver {
            ProxSolver::Exact => match self.potential.as_ref() {
                Potential::Gaussian(_) => prox_exact_gaussian(req),
                Potential::Quartic(_) => prox_exact_quartic(req),
                other => Err(ProxError::Unsupported {
                    solver: "exact",
                    potential: other.name(),
                }),
            },
            ProxSolver::Gd => prox_gd(&self.potential, req),
            ProxSolver::Newton => prox_newton(&self.potential, req),
            ProxSolver::Pdhg => {
                let Potential::Deconvolution(deconv) = self.potential.as_ref() else {
                    return Err(ProxError::Unsupported {
                        solver: "pdhg",
                        potential: self.potential.name(),
                    });
                };
                let warm = if self.pdhg.warm_start_dual {
                    self.dual.take()
                } else {
                    None
                };
                let (result, dual) = prox_tv_pdhg(deconv, req, &self.pdhg, warm);
                self.dual = Some(dual);
                result
            }
        }
    }
}

/// `phi(y) = V(y) + |y - x|^2 / (2 tau)`.
pub fn prox_objective(potential: &Potential, x: &[f64], y: &[f64], tau: f64) -> f64 {
    potential.value_unchecked(y) + dist(x, y).powi(2) / (2.0 * tau)
}

/// Strong-convexity modulus of `phi`, or an error if `phi` may be nonconvex.
pub(crate) fn modulus(profile: &PotentialProfile, tau: f64) -> Result<f64, ProxError> {
    let mu = 1.0 / tau + profile.hessian_floor;
    if mu > 0.0 && mu.is_finite() {
        Ok(mu)
    } else {
        Err(ProxError::NotStronglyConvex { tau, modulus: mu })
    }
}

/// Distance certificate for an iterate `y` with `|grad phi(y)| = grad_norm`.
///
/// Besides the strong-convexity bound, a convex potential with known
/// minimizer `x*` confines `prox(x)` to the ball with diameter `[x*, x]`
/// (monotonicity of the subdifferential), which certifies `y = x` for free
/// when `delta` is large.
pub(crate) fn certificate(profile: &PotentialProfile, mu: f64, x: &[f64], y: &[f64], grad_norm: f64) -> f64 {
    let mut bound = grad_norm / mu;
    if let (true, Some(xs)) = (profile.is_convex(), profile.minimizer.as_ref()) {
        let mut to_centre = 0.0;
        for ((yi, xi), si) in y.iter().zip(x).zip(xs) {
            let c = 0.5 * (xi + si);
            to_centre += (yi - c) * (yi - c);
        }
        bound = bound.min(to_centre.sqrt() + 0.5 * dist(x, xs));
    }
    bound
}

pub(crate) fn finish(
    point: Vec<f64>,
    error_bound: f64,
    iterations: usize,
    objective: f64,
    delta: f64,
) -> Result<ProxResult, ProxError> {
    let result = ProxResult {
        point,
        error_bound,
        iterations,
        objective,
    };
    if error_bound <= delta {
        Ok(result)
    } else {
        Err(ProxError::NotConverged {
            best: Box::new(result),
            delta,
        })
    }
}

/// `|v|` with a non-finite guard for line searches.
pub(crate) fn finite_norm(v: &[f64]) -> f64 {
    let n = norm(v);
    if n.is_finite() {
        n
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{GinzburgLandau, GinzburgLandauParams};

    #[test]
    fn solver_names_round_trip() {
        for s in [ProxSolver::Exact, ProxSolver::Gd, ProxSolver::Newton, ProxSolver::Pdhg] {
            assert_eq!(s.name().parse::<ProxSolver>().unwrap(), s);
        }
        assert!("bfgs".parse::<ProxSolver>().is_err());
    }

    #[test]
    fn operator_rejects_mismatched_solver() {
        let gl = Arc::new(Potential::GinzburgLandau(
            GinzburgLandau::new(GinzburgLandauParams {
                q: 2,
                ..Default::default()
            })
            .unwrap(),
        ));
        assert!(matches!(
            ProxOperator::new(gl.clone(), ProxSolver::Exact),
            Err(ProxError::Unsupported { .. })
        ));
        assert!(ProxOperator::new(gl, ProxSolver::Newton).is_ok());
        assert!(ProxOperator::new(Arc::new(Potential::quartic(3)), ProxSolver::Pdhg).is_err());
    }

    #[test]
    fn request_validation() {
        let x = [1.0, 2.0];
        assert!(ProxRequest::new(&x, 0.0, 0.1, 10).validate(2).is_err());
        assert!(ProxRequest::new(&x, 0.1, 0.0, 10).validate(2).is_err());
        assert!(ProxRequest::new(&x, 0.1, 0.1, 0).validate(2).is_err());
        assert!(ProxRequest::new(&x, 0.1, 0.1, 10).validate(3).is_err());
        assert!(ProxRequest::new(&[f64::NAN], 0.1, 0.1, 10).validate(1).is_err());
        assert!(ProxRequest::new(&x, 0.1, 0.1, 10).validate(2).is_ok());
    }

    #[test]
    fn ball_certificate_is_sound_for_gaussian() {
        // prox(x) = x / 2 at tau = 1 lies inside the ball with diameter [0, x].
        let p = Potential::gaussian(2);
        let x = [4.0, -2.0];
        let b = certificate(p.profile(), 2.0, &x, &x, f64::INFINITY);
        assert!((b - norm(&x)).abs() < 1e-12);
        assert!(dist(&x, &[2.0, -1.0]) <= b);
    }
}
