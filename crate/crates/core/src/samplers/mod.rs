//! Markov kernels and the chain driver.
//!
//! Every step of a live chain consumes exactly `d` standard normal draws
//! from the chain's generator, followed by one uniform draw on `[0, 1)` for
//! kernels that report [`Kernel::uses_uniform`]. Kernels receive the draws
//! and never touch the generator themselves, so a chain is replayable from
//! its seed and tests can force the noise to zero.

mod kernels;
mod trace;

pub use kernels::{Ipla, ProxFailurePolicy, RandomWalkMh, Taming, Tula, Ula};
pub use trace::{run_chain, run_replicas, ChainTrace, RunSpec, TraceRow};

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::linalg::norm_sq;
use crate::potentials::{PotentialError, PotentialProfile};
use crate::prox::ProxError;
use crate::rng::{stream_rng, ChainRng};

/// A chain whose squared norm exceeds this (|x| > 1e154) is declared diverged
/// before its coordinates overflow.
pub const DIVERGENCE_NORM_SQ: f64 = 1e308;

#[derive(Debug, Clone, Error)]
pub enum SamplerError {
    #[error("invalid sampler parameter: {0}")]
    InvalidParameter(String),
    #[error("the {sampler} sampler needs a gradient, which the {potential} potential does not provide")]
    NeedsGradient {
        sampler: &'static str,
        potential: &'static str,
    },
    #[error("initial point has {got} coordinates, the kernel expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Prox(#[from] ProxError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// Per-step bookkeeping returned by a kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    pub prox_iterations: usize,
    /// IPLA tolerated a prox solve that missed its accuracy target.
    pub prox_failed: bool,
    /// Metropolis–Hastings acceptance; `true` for unadjusted kernels.
    pub accepted: bool,
}

impl StepInfo {
    pub(crate) fn plain() -> Self {
        Self {
            prox_iterations: 0,
            prox_failed: false,
            accepted: true,
        }
    }
}

/// One transition of a Markov chain, driven by externally supplied noise.
pub trait Kernel: Send {
    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    fn uses_uniform(&self) -> bool {
        false
    }

    /// Moves `x` in place. `noise` holds `d` standard normal draws and
    /// `uniform` a draw on `[0, 1)` (ignored unless [`Kernel::uses_uniform`]).
    /// On error `x` is left unchanged.
    fn advance(&mut self, x: &mut [f64], noise: &[f64], uniform: f64) -> Result<StepInfo, SamplerError>;
}

/// Current point, step counter and generator of one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub x: Vec<f64>,
    pub step: u64,
    pub diverged_at: Option<u64>,
    /// Why the chain stopped, when a kernel error (not overflow) stopped it.
    pub failure: Option<String>,
    rng: ChainRng,
    noise: Vec<f64>,
}

/// Outcome of [`ChainState::advance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepReport {
    pub info: StepInfo,
    /// The chain is diverged after this call (possibly already before it).
    pub diverged: bool,
}

impl ChainState {
    pub fn new(x0: Vec<f64>, rng: ChainRng) -> Self {
        let noise = vec![0.0; x0.len()];
        Self {
            x: x0,
            step: 0,
            diverged_at: None,
            failure: None,
            rng,
            noise,
        }
    }

    /// State of replica `replica` under `base_seed`.
    pub fn for_replica(x0: Vec<f64>, base_seed: u64, replica: u64) -> Self {
        Self::new(x0, stream_rng(base_seed, replica))
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    /// Draws the step's noise and applies `kernel`. A diverged chain is left
    /// untouched and draws nothing.
    pub fn advance(&mut self, kernel: &mut dyn Kernel) -> Result<StepReport, SamplerError> {
        if self.noise.len() != self.x.len() || kernel.dim() != self.x.len() {
            return Err(SamplerError::DimensionMismatch {
                expected: kernel.dim(),
                got: self.x.len(),
            });
        }
        if self.is_diverged() {
            return Ok(StepReport {
                info: StepInfo::plain(),
                diverged: true,
            });
        }
        for z in self.noise.iter_mut() {
            *z = self.rng.sample(StandardNormal);
        }
        let uniform = if kernel.uses_uniform() {
            self.rng.random::<f64>()
        } else {
            0.0
        };
        self.step += 1;
        match kernel.advance(&mut self.x, &self.noise, uniform) {
            Ok(info) => {
                let n2 = norm_sq(&self.x);
                let diverged = !(n2 <= DIVERGENCE_NORM_SQ);
                if diverged {
                    self.diverged_at = Some(self.step);
                }
                Ok(StepReport { info, diverged })
            }
            Err(e) => {
                self.diverged_at = Some(self.step);
                self.failure = Some(e.to_string());
                Ok(StepReport {
                    info: StepInfo::plain(),
                    diverged: true,
                })
            }
        }
    }
}

/// Warning text when `tau >= 1 / lambda_v`, where the moment bounds no
/// longer apply; the step is still allowed.
pub fn step_size_warning(profile: &PotentialProfile, tau: f64) -> Option<String> {
    (profile.lambda_v > 0.0 && tau * profile.lambda_v >= 1.0).then(|| {
        format!(
            "tau = {tau} is not below 1/lambda_v = {}; moment bounds do not cover this step size",
            1.0 / profile.lambda_v
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::Potential;
    use crate::prox::{ProxOperator, ProxSolver};
    use std::sync::Arc;

    fn zero_noise_step(kernel: &mut dyn Kernel, x: &mut [f64]) -> StepInfo {
        let noise = vec![0.0; x.len()];
        kernel.advance(x, &noise, 0.5).unwrap()
    }

    fn kernels(p: Arc<Potential>) -> Vec<Box<dyn Kernel>> {
        let prox = ProxOperator::new(p.clone(), ProxSolver::Newton).unwrap();
        vec![
            Box::new(Ipla::new(prox, 0.1, 1.0, 1.0).unwrap()),
            Box::new(Ula::new(p.clone(), 0.1).unwrap()),
            Box::new(Tula::new(p.clone(), 0.1, Taming::Tau).unwrap()),
            Box::new(RandomWalkMh::new(p, None).unwrap()),
        ]
    }

    #[test]
    fn ipla_zero_noise_is_prox() {
        let p = Arc::new(Potential::gaussian(2));
        let prox = ProxOperator::new(p, ProxSolver::Exact).unwrap();
        let mut k = Ipla::new(prox, 1.0, 1.0, 1.0).unwrap();
        let mut x = vec![2.0, -2.0];
        zero_noise_step(&mut k, &mut x);
        assert_eq!(x, vec![1.0, -1.0]);
    }

    #[test]
    fn ipla_delta_schedule() {
        let p = Arc::new(Potential::quartic(1));
        let prox = ProxOperator::new(p, ProxSolver::Gd).unwrap();
        let k = Ipla::new(prox, 0.01, 1.0, 1.0).unwrap();
        assert!((k.delta() - 1e-4).abs() < 1e-18);
        assert_eq!(k.clone().with_delta(0.1).unwrap().delta(), 0.1);
    }

    #[test]
    fn ula_examples() {
        let mut k = Ula::new(Arc::new(Potential::gaussian(1)), 0.5).unwrap();
        let mut x = vec![1.0];
        zero_noise_step(&mut k, &mut x);
        assert_eq!(x, vec![0.5]);
        let mut q = Ula::new(Arc::new(Potential::quartic(3)), 0.1).unwrap();
        let mut zero = vec![0.0; 3];
        zero_noise_step(&mut q, &mut zero);
        assert_eq!(zero, vec![0.0; 3]);
    }

    #[test]
    fn tula_examples() {
        let mut k = Tula::new(Arc::new(Potential::gaussian(1)), 0.5, Taming::Tau).unwrap();
        let mut x = vec![1.0];
        zero_noise_step(&mut k, &mut x);
        assert!((x[0] - 2.0 / 3.0).abs() < 1e-15);

        let mut plain = Tula::new(Arc::new(Potential::gaussian(1)), 0.5, Taming::Plain).unwrap();
        let mut x = vec![1.0];
        zero_noise_step(&mut plain, &mut x);
        assert!((x[0] - 0.75).abs() < 1e-15);

        // |grad V| = 1e8 at x = (1e8,) for the Gaussian: drift tends to one unit.
        let mut big = Tula::new(Arc::new(Potential::gaussian(1)), 0.1, Taming::Tau).unwrap();
        let mut x = vec![1e8];
        zero_noise_step(&mut big, &mut x);
        let drift = 1e8 - x[0];
        assert!((drift - 1.0).abs() < 1e-6);
    }

    #[test]
    fn mh_examples() {
        let p = Arc::new(Potential::quartic(1));
        let mut k = RandomWalkMh::new(p.clone(), Some(1.0)).unwrap();
        // Downhill move from 2 towards 1: always accepted, even with u close to 1.
        let mut x = vec![2.0];
        let info = k.advance(&mut x, &[-1.0], 0.999_999).unwrap();
        assert!(info.accepted);
        assert_eq!(x, vec![1.0]);
        // Uphill move with u = 0.9 > exp(V(1) - V(3)): rejected.
        let info = k.advance(&mut x, &[2.0], 0.9).unwrap();
        assert!(!info.accepted);
        assert_eq!(x, vec![1.0]);

        let mut frozen = RandomWalkMh::new(p, Some(0.0)).unwrap();
        let mut state = ChainState::for_replica(vec![0.3], 5, 0);
        for _ in 0..100 {
            state.advance(&mut frozen).unwrap();
        }
        assert_eq!(state.x, vec![0.3]);
        assert_eq!(frozen.proposal_std(), 0.0);
        assert_eq!(
            RandomWalkMh::new(Arc::new(Potential::quartic(4)), None)
                .unwrap()
                .proposal_std(),
            0.25
        );
    }

    #[test]
    fn ula_on_quartic_from_tail_diverges_quickly() {
        // Deterministic drift x <- x - 0.1 x^3 from 7, iterated directly.
        let mut v: f64 = 7.0;
        let mut escape = None;
        for k in 1..=20 {
            v -= 0.1 * v * v * v;
            if !(10.0 * v * v <= DIVERGENCE_NORM_SQ) {
                escape = Some(k);
                break;
            }
        }
        let escape = escape.expect("drift iteration escapes");
        assert!(escape <= 10);

        let mut k = Ula::new(Arc::new(Potential::quartic(10)), 0.1).unwrap();
        let mut s = ChainState::for_replica(vec![7.0; 10], 1, 0);
        for _ in 0..20 {
            s.advance(&mut k).unwrap();
        }
        let at = s.diverged_at.expect("ULA diverges");
        assert!(at <= 10);
        assert_eq!(s.step, at);
    }

    #[test]
    fn diverged_state_is_frozen() {
        let mut k = Ula::new(Arc::new(Potential::quartic(2)), 0.1).unwrap();
        let mut s = ChainState::for_replica(vec![1e30, 0.0], 1, 0);
        s.advance(&mut k).unwrap();
        s.advance(&mut k).unwrap();
        assert!(s.is_diverged());
        let frozen = (s.x.clone(), s.step);
        s.advance(&mut k).unwrap();
        assert_eq!(frozen.1, s.step);
        assert_eq!(
            frozen.0.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            s.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn kernels_are_pure_given_state_and_seed() {
        let p = Arc::new(Potential::quartic(3));
        for (mut a, mut b) in kernels(p.clone()).into_iter().zip(kernels(p)) {
            let mut sa = ChainState::for_replica(vec![1.5, -0.5, 2.0], 9, 3);
            let mut sb = sa.clone();
            for _ in 0..50 {
                sa.advance(a.as_mut()).unwrap();
                sb.advance(b.as_mut()).unwrap();
            }
            assert_eq!(sa.x, sb.x, "{}", a.name());
        }
    }

    #[test]
    fn prox_failure_marks_divergence_under_default_policy() {
        let p = Arc::new(Potential::quartic(2));
        let prox = ProxOperator::new(p, ProxSolver::Gd).unwrap();
        let mut k = Ipla::new(prox, 0.1, 1e-12, 1.0).unwrap().with_max_prox_iterations(1);
        let mut s = ChainState::for_replica(vec![30.0, -30.0], 2, 0);
        s.advance(&mut k).unwrap();
        assert_eq!(s.diverged_at, Some(1));
        assert!(s.failure.as_deref().unwrap().contains("prox"));
        assert_eq!(s.x, vec![30.0, -30.0]);
    }

    #[test]
    fn tolerated_prox_failure_continues() {
        let p = Arc::new(Potential::quartic(2));
        let prox = ProxOperator::new(p, ProxSolver::Gd).unwrap();
        let mut k = Ipla::new(prox, 0.1, 1e-12, 1.0)
            .unwrap()
            .with_max_prox_iterations(1)
            .with_failure_policy(ProxFailurePolicy::Tolerate);
        let mut s = ChainState::for_replica(vec![30.0, -30.0], 2, 0);
        let report = s.advance(&mut k).unwrap();
        assert!(report.info.prox_failed);
        assert!(!s.is_diverged());
    }

    #[test]
    fn step_size_warning_threshold() {
        let prof = Potential::gaussian(1).profile().clone();
        assert!(step_size_warning(&prof, 0.5).is_none());
        assert!(step_size_warning(&prof, 1.0).is_some());
    }
}
