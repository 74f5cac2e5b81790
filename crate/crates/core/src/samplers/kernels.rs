use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Kernel, SamplerError, StepInfo};
use crate::potentials::Potential;
use crate::prox::{ProxError, ProxOperator, ProxRequest};

/// What IPLA does when a prox solve misses its accuracy target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxFailurePolicy {
    /// Stop the chain and mark it diverged.
    Diverge,
    /// Continue from the solver's best point and count the failure.
    Tolerate,
}

/// Inexact proximal Langevin step:
/// `X_{k+1} = prox_V^tau(X_k) + Theta + sqrt(2 tau) xi` with `|Theta| <= delta`.
#[derive(Debug, Clone)]
pub struct Ipla {
    prox: ProxOperator,
    tau: f64,
    delta: f64,
    max_prox_iterations: usize,
    policy: ProxFailurePolicy,
}

impl Ipla {
    /// Uses the accuracy schedule `delta = kappa * tau^(1 + alpha)`.
    pub fn new(prox: ProxOperator, tau: f64, kappa: f64, alpha: f64) -> Result<Self, SamplerError> {
        check_tau(tau)?;
        if !(kappa > 0.0) || !(alpha >= 0.0) {
            return Err(SamplerError::InvalidParameter(
                "kappa must be positive and alpha non-negative".into(),
            ));
        }
        Ok(Self {
            prox,
            tau,
            delta: kappa * tau.powf(1.0 + alpha),
            max_prox_iterations: 10_000,
            policy: ProxFailurePolicy::Diverge,
        })
    }

    /// Replaces the schedule by an absolute accuracy.
    pub fn with_delta(mut self, delta: f64) -> Result<Self, SamplerError> {
        if !(delta > 0.0) {
            return Err(SamplerError::InvalidParameter("delta must be positive".into()));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn with_max_prox_iterations(mut self, n: usize) -> Self {
        self.max_prox_iterations = n.max(1);
        self
    }

    pub fn with_failure_policy(mut self, policy: ProxFailurePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }
}

impl Kernel for Ipla {
    fn name(&self) -> &'static str {
        "ipla"
    }

    fn dim(&self) -> usize {
        self.prox.potential().dim()
    }

    fn advance(&mut self, x: &mut [f64], noise: &[f64], _uniform: f64) -> Result<StepInfo, SamplerError> {
        let req = ProxRequest::new(x, self.tau, self.delta, self.max_prox_iterations);
        let (result, failed) = match self.prox.solve(&req) {
            Ok(r) => (r, false),
            Err(ProxError::NotConverged { best, .. }) if self.policy == ProxFailurePolicy::Tolerate => (*best, true),
            Err(e) => return Err(e.into()),
        };
        let scale = (2.0 * self.tau).sqrt();
        for ((xi, pi), zi) in x.iter_mut().zip(&result.point).zip(noise) {
            *xi = pi + scale * zi;
        }
        Ok(StepInfo {
            prox_iterations: result.iterations,
            prox_failed: failed,
            accepted: true,
        })
    }
}

/// Unadjusted Langevin: `X_{k+1} = X_k - tau grad V(X_k) + sqrt(2 tau) xi`.
#[derive(Debug, Clone)]
pub struct Ula {
    potential: Arc<Potential>,
    tau: f64,
    grad: Vec<f64>,
}

impl Ula {
    pub fn new(potential: Arc<Potential>, tau: f64) -> Result<Self, SamplerError> {
        check_tau(tau)?;
        require_smooth(&potential, "ula")?;
        let grad = vec![0.0; potential.dim()];
        Ok(Self { potential, tau, grad })
    }
}

impl Kernel for Ula {
    fn name(&self) -> &'static str {
        "ula"
    }

    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn advance(&mut self, x: &mut [f64], noise: &[f64], _uniform: f64) -> Result<StepInfo, SamplerError> {
        self.potential.gradient_unchecked(x, &mut self.grad);
        let scale = (2.0 * self.tau).sqrt();
        for ((xi, gi), zi) in x.iter_mut().zip(&self.grad).zip(noise) {
            *xi += -self.tau * gi + scale * zi;
        }
        Ok(StepInfo::plain())
    }
}

/// Normalization used by the tamed drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Taming {
    /// `tau g / (1 + tau |g|)`.
    #[default]
    Tau,
    /// `tau g / (1 + |g|)`.
    Plain,
}

/// Tamed unadjusted Langevin.
#[derive(Debug, Clone)]
pub struct Tula {
    potential: Arc<Potential>,
    tau: f64,
    taming: Taming,
    grad: Vec<f64>,
}

impl Tula {
    pub fn new(potential: Arc<Potential>, tau: f64, taming: Taming) -> Result<Self, SamplerError> {
        check_tau(tau)?;
        require_smooth(&potential, "tula")?;
        let grad = vec![0.0; potential.dim()];
        Ok(Self {
            potential,
            tau,
            taming,
            grad,
        })
    }
}

impl Kernel for Tula {
    fn name(&self) -> &'static str {
        "tula"
    }

    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn advance(&mut self, x: &mut [f64], noise: &[f64], _uniform: f64) -> Result<StepInfo, SamplerError> {
        self.potential.gradient_unchecked(x, &mut self.grad);
        let g_norm = self.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let denom = match self.taming {
            Taming::Tau => 1.0 + self.tau * g_norm,
            Taming::Plain => 1.0 + g_norm,
        };
        let factor = self.tau / denom;
        let scale = (2.0 * self.tau).sqrt();
        for ((xi, gi), zi) in x.iter_mut().zip(&self.grad).zip(noise) {
            *xi += -factor * gi + scale * zi;
        }
        Ok(StepInfo::plain())
    }
}

/// Random-walk Metropolis–Hastings with Gaussian proposals.
#[derive(Debug, Clone)]
pub struct RandomWalkMh {
    potential: Arc<Potential>,
    proposal_std: f64,
    proposal: Vec<f64>,
    accepted: u64,
    proposed: u64,
}

impl RandomWalkMh {
    /// `proposal_std = None` selects `0.5 / sqrt(d)`.
    pub fn new(potential: Arc<Potential>, proposal_std: Option<f64>) -> Result<Self, SamplerError> {
        let dim = potential.dim();
        let proposal_std = proposal_std.unwrap_or(0.5 / (dim as f64).sqrt());
        if !(proposal_std >= 0.0) || !proposal_std.is_finite() {
            return Err(SamplerError::InvalidParameter(
                "proposal_std must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            potential,
            proposal_std,
            proposal: vec![0.0; dim],
            accepted: 0,
            proposed: 0,
        })
    }

    pub fn proposal_std(&self) -> f64 {
        self.proposal_std
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

impl Kernel for RandomWalkMh {
    fn name(&self) -> &'static str {
        "mh"
    }

    fn dim(&self) -> usize {
        self.potential.dim()
    }

    fn uses_uniform(&self) -> bool {
        true
    }

    fn advance(&mut self, x: &mut [f64], noise: &[f64], uniform: f64) -> Result<StepInfo, SamplerError> {
        for ((p, xi), zi) in self.proposal.iter_mut().zip(x.iter()).zip(noise) {
            *p = xi + self.proposal_std * zi;
        }
        let log_ratio = self.potential.value_unchecked(x) - self.potential.value_unchecked(&self.proposal);
        self.proposed += 1;
        let accept = uniform < log_ratio.exp();
        if accept {
            x.copy_from_slice(&self.proposal);
            self.accepted += 1;
        }
        Ok(StepInfo {
            prox_iterations: 0,
            prox_failed: false,
            accepted: accept,
        })
    }
}

fn check_tau(tau: f64) -> Result<(), SamplerError> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(SamplerError::InvalidParameter(format!(
            "tau must be positive, got {tau}"
        )))
    }
}

fn require_smooth(potential: &Potential, sampler: &'static str) -> Result<(), SamplerError> {
    if potential.profile().smooth {
        Ok(())
    } else {
        Err(SamplerError::NeedsGradient {
            sampler,
            potential: potential.name(),
        })
    }
}
