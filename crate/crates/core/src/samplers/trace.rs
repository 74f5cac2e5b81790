use rayon::prelude::*;

use super::{ChainState, Kernel, SamplerError};
use crate::linalg::{norm_sq, CompensatedSum};

/// Length and recording options of a chain run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub n_steps: u64,
    pub burn_in: u64,
    /// Keep every `k`-th post-burn-in state.
    pub sample_thinning: Option<u64>,
    /// Record a trajectory row every `k` steps (and at step 0).
    pub trace_every: Option<u64>,
    /// Accumulate the coordinatewise mean of post-burn-in states.
    pub track_mean: bool,
}

impl RunSpec {
    pub fn new(n_steps: u64, burn_in: u64) -> Self {
        Self {
            n_steps,
            burn_in,
            sample_thinning: None,
            trace_every: None,
            track_mean: false,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.burn_in > self.n_steps {
            return Err(SamplerError::InvalidParameter(format!(
                "burn_in ({}) exceeds n_steps ({})",
                self.burn_in, self.n_steps
            )));
        }
        if self.sample_thinning == Some(0) || self.trace_every == Some(0) {
            return Err(SamplerError::InvalidParameter(
                "thinning and trace intervals must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// One line of the per-chain trajectory output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub x1: f64,
    pub norm_sq: f64,
    pub prox_iterations: usize,
    pub diverged: bool,
}

/// Post-burn-in statistics of one chain.
#[derive(Debug, Clone, Default)]
pub struct ChainTrace {
    /// Sums of `|X_k|^2`, `|X_k|^4`, `|X_k|^6` over post-burn-in states.
    pub power_sums: [CompensatedSum; 3],
    /// Number of post-burn-in states accumulated.
    pub count: u64,
    pub samples: Vec<Vec<f64>>,
    pub rows: Vec<TraceRow>,
    mean_sums: Vec<CompensatedSum>,
    pub steps: u64,
    pub prox_iterations: u64,
    pub prox_failures: u64,
    pub accepted: u64,
    pub diverged_at: Option<u64>,
    pub failure: Option<String>,
}

impl ChainTrace {
    /// Mean of `|X_k|^m` for `m` in {2, 4, 6}, without divergence handling.
    pub fn power_mean(&self, m: u32) -> Option<f64> {
        let idx = match m {
            2 => 0,
            4 => 1,
            6 => 2,
            _ => return None,
        };
        (self.count > 0).then(|| self.power_sums[idx].value() / self.count as f64)
    }

    /// Coordinatewise mean of post-burn-in states, if tracked.
    pub fn mean(&self) -> Option<Vec<f64>> {
        (self.count > 0 && !self.mean_sums.is_empty())
            .then(|| self.mean_sums.iter().map(|s| s.value() / self.count as f64).collect())
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged_at.is_some()
    }

    pub fn mean_prox_iterations(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.prox_iterations as f64 / self.steps as f64
        }
    }
}

/// Runs `spec.n_steps` steps of `kernel` from `state`. A diverged chain stops
/// early; divergence is recorded, not returned as an error.
pub fn run_chain(kernel: &mut dyn Kernel, state: &mut ChainState, spec: &RunSpec) -> Result<ChainTrace, SamplerError> {
    spec.validate()?;
    let mut trace = ChainTrace {
        mean_sums: if spec.track_mean {
            vec![CompensatedSum::default(); state.x.len()]
        } else {
            Vec::new()
        },
        ..ChainTrace::default()
    };
    let record = |trace: &mut ChainTrace, state: &ChainState, step: u64, iters: usize, diverged: bool| {
        trace.rows.push(TraceRow {
            step,
            x1: state.x.first().copied().unwrap_or(f64::NAN),
            norm_sq: norm_sq(&state.x),
            prox_iterations: iters,
            diverged,
        });
    };
    if spec.trace_every.is_some() {
        record(&mut trace, state, 0, 0, state.is_diverged());
    }
    if state.is_diverged() {
        trace.diverged_at = state.diverged_at;
        return Ok(trace);
    }
    for k in 1..=spec.n_steps {
        let report = state.advance(kernel)?;
        trace.steps = k;
        trace.prox_iterations += report.info.prox_iterations as u64;
        trace.prox_failures += u64::from(report.info.prox_failed);
        trace.accepted += u64::from(report.info.accepted);
        let on_grid = spec.trace_every.is_some_and(|e| k % e == 0);
        if report.diverged {
            if spec.trace_every.is_some() {
                record(&mut trace, state, k, report.info.prox_iterations, true);
            }
            trace.diverged_at = Some(k);
            trace.failure = state.failure.clone();
            break;
        }
        if on_grid {
            record(&mut trace, state, k, report.info.prox_iterations, false);
        }
        if k > spec.burn_in {
            let r2 = norm_sq(&state.x);
            trace.power_sums[0].add(r2);
            trace.power_sums[1].add(r2 * r2);
            trace.power_sums[2].add(r2 * r2 * r2);
            trace.count += 1;
            for (s, v) in trace.mean_sums.iter_mut().zip(&state.x) {
                s.add(*v);
            }
            if spec
                .sample_thinning
                .is_some_and(|t| (k - spec.burn_in).is_multiple_of(t))
            {
                trace.samples.push(state.x.clone());
            }
        }
    }
    Ok(trace)
}

/// Runs `replicas` independent chains in parallel on the current rayon pool.
/// `build(r)` creates the kernel and initial state of replica `r`; results
/// come back in replica order regardless of scheduling.
pub fn run_replicas<F>(replicas: usize, spec: &RunSpec, build: F) -> Vec<Result<ChainTrace, SamplerError>>
where
    F: Fn(usize) -> Result<(Box<dyn Kernel>, ChainState), SamplerError> + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let (mut kernel, mut state) = build(r)?;
            run_chain(kernel.as_mut(), &mut state, spec)
        })
        .collect()
}
