//! Explicit constants and step-size / iteration budgets for IPLA.
//!
//! Symbols follow the sampler: `d` dimension, `q_v`, `lambda_v`, `r_v`,
//! `c_v`, `l_q` from the potential profile, and the accuracy schedule
//! `delta = kappa * tau^(1 + alpha)`, which is always recomputed here from
//! `kappa`, `alpha` and `tau`. The initial law is a point mass at distance
//! `x0_norm` from the origin, so `E|X_0|^m = x0_norm^m`.
//!
//! The Taylor-remainder constant inside the moment bounds is fixed to
//! `c = m^2 2^m`, which makes every `C_m` a valid (loose) upper bound.

use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::potentials::PotentialProfile;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TheoryError {
    #[error("invalid theory input: {0}")]
    Invalid(String),
    #[error("lambda_v = 0 but the formula needs lambda_v^(-{exponent})")]
    NeedsStrongConvexity { exponent: f64 },
    #[error("the Wasserstein bounds need global strong convexity (r_v = 0), got r_v = {r_v}")]
    NeedsGlobalConvexity { r_v: f64 },
    #[error("tau = {tau} must be below 1/lambda_v = {limit}")]
    StepTooLarge { tau: f64, limit: f64 },
    #[error("no step size in (0, 1] meets the accuracy target: {0}")]
    Infeasible(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs {
    pub d: usize,
    pub q_v: f64,
    pub lambda_v: f64,
    pub r_v: f64,
    pub c_v: f64,
    pub l_q: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub tau: f64,
    /// `|X_0|` of the deterministic starting point.
    pub x0_norm: f64,
    /// `W_2^2(rho_0, mu*)` or a declared upper bound on it.
    pub w2_init: f64,
}

impl TheoryInputs {
    /// Inputs with the potential's metadata and unit schedule constants.
    pub fn from_profile(profile: &PotentialProfile, tau: f64) -> Self {
        Self {
            d: profile.dim,
            q_v: profile.q_v,
            lambda_v: profile.lambda_v,
            r_v: profile.r_v,
            c_v: profile.c_v,
            l_q: profile.l_q,
            kappa: 1.0,
            alpha: 1.0,
            tau,
            x0_norm: 0.0,
            w2_init: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), TheoryError> {
        let bad = |m: &str| Err(TheoryError::Invalid(m.to_string()));
        if self.d == 0 {
            return bad("d must be positive");
        }
        if !(self.q_v >= 1.0) || !self.q_v.is_finite() {
            return bad("q_v must be >= 1");
        }
        if !(self.lambda_v >= 0.0) || !(self.r_v >= 0.0) {
            return bad("lambda_v and r_v must be non-negative");
        }
        if !(self.c_v > 0.0) || !(self.l_q > 0.0) {
            return bad("c_v and l_q must be positive");
        }
        if !(self.kappa > 0.0) || !(self.alpha >= 0.0) {
            return bad("kappa must be positive and alpha non-negative");
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return bad("tau must be positive");
        }
        if !(self.x0_norm >= 0.0) || !(self.w2_init >= 0.0) {
            return bad("x0_norm and w2_init must be non-negative");
        }
        Ok(())
    }

    /// `kappa * tau^(1 + alpha)`.
    pub fn delta(&self) -> f64 {
        self.kappa * self.tau.powf(1.0 + self.alpha)
    }

    fn at_tau(&self, tau: f64) -> Self {
        Self { tau, ..*self }
    }
}

/// Gaussian moment constant: `E|Z|^m <= C~_m tau^(m/2) d^(m/2)` for
/// `Z ~ N(0, 2 tau I_d)`.
pub fn noise_moment_constant(m: f64) -> f64 {
    if m >= 2.0 {
        4f64.powf(m / 2.0) * gamma((1.0 + m) / 2.0) / gamma(0.5)
    } else {
        2f64.powf(m / 2.0)
    }
}

/// Uniform-in-time moment constant `C_m` of the chain.
pub fn moment_constant(inp: &TheoryInputs, m: f64) -> Result<f64, TheoryError> {
    inp.validate()?;
    if !(m >= 0.0) || !m.is_finite() {
        return Err(TheoryError::Invalid(format!(
            "moment order must be non-negative, got {m}"
        )));
    }
    Ok(moment_constant_unchecked(inp, m))
}

fn moment_constant_unchecked(inp: &TheoryInputs, m: f64) -> f64 {
    let d = inp.d as f64;
    let (kappa, lambda, r) = (inp.kappa, inp.lambda_v, inp.r_v);
    let delta = inp.delta();
    if m <= 2.0 {
        let base = 36.0 * kappa * kappa / d
            + lambda * lambda / d * inp.x0_norm.powi(2)
            + (16.0 * kappa * delta + 4.0 * r * r * lambda + 4.0 * delta * r * lambda + 8.0 * d) / d * lambda;
        return base.powf(m / 2.0);
    }
    let fl = m.floor();
    let a = m - fl;
    let c = m * m * 2f64.powf(m);
    let a0 = inp.x0_norm.powf(m);
    let dpow = d.powf(-fl / 2.0);
    let drift = 2.0 * kappa * delta + 4.0 * d;
    let term1 = (2.0 * c * kappa).powf(fl) * dpow;
    let term2 = (fl - 1.0) * 2.0 * c * drift / d;
    let term3 = dpow * lambda.powf(fl) * (a0 + r.powf(fl));
    // lambda^(fl-1) * lambda^(-1) is folded into lambda^(fl-2), which stays
    // finite at lambda = 0 because fl >= 2.
    let term4 = c
        * dpow
        * (lambda.powf(fl - 1.0) * r.powf(fl - 1.0)
            + 2.0 * drift * r.powf(fl - 2.0) * lambda.powf(fl - 2.0)
            + lambda.powf(fl - 1.0) * 2f64.powf(fl) * kappa * delta.powf(fl - 1.0));
    let term5 = c * 2f64.powf(fl) * noise_moment_constant(m) * lambda.powf(fl / 2.0);
    moment_constant_unchecked(inp, a) * (term1 + term2 + term3 + term4 + term5)
}

/// `K(tau)` and the comparison bound `C_q tau d^((q+1)/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KTau {
    pub value: f64,
    pub remark_constant: f64,
    pub remark_bound: f64,
}

/// Discretization term of the one-step inequality.
pub fn k_tau(inp: &TheoryInputs) -> Result<KTau, TheoryError> {
    inp.validate()?;
    let value = k_tau_value(inp)?;
    let remark_constant = remark_constant(inp)?;
    let d = inp.d as f64;
    Ok(KTau {
        value,
        remark_constant,
        remark_bound: remark_constant * inp.tau * d.powf((inp.q_v + 1.0) / 2.0),
    })
}

fn lambda_factor(inp: &TheoryInputs) -> Result<f64, TheoryError> {
    let e = (inp.q_v - 1.0) / 2.0;
    if e == 0.0 {
        Ok(1.0)
    } else if inp.lambda_v > 0.0 {
        Ok(inp.lambda_v.powf(-e))
    } else {
        Err(TheoryError::NeedsStrongConvexity { exponent: e })
    }
}

fn k_tau_value(inp: &TheoryInputs) -> Result<f64, TheoryError> {
    let q = inp.q_v;
    let d = inp.d as f64;
    let tau = inp.tau;
    let lf = lambda_factor(inp)?;
    let c_lo = moment_constant_unchecked(inp, q - 1.0);
    let c_hi = moment_constant_unchecked(inp, q + 1.0);
    Ok(2f64.powf(4.0 * q - 3.0)
        * inp.l_q
        * ((1.0 + c_lo * d.powf((q - 1.0) / 2.0) * lf) * 2.0 * d * tau
            + c_hi * d.powf((q + 1.0) / 2.0) * tau.powf((q + 1.0) / 2.0)))
}

/// `C_q` such that `K(tau) <= C_q tau d^((q+1)/2)` for all `tau <= 1`: the
/// moment constants grow with `delta`, so they are taken at `tau = 1`.
fn remark_constant(inp: &TheoryInputs) -> Result<f64, TheoryError> {
    let at_one = inp.at_tau(1.0);
    let q = inp.q_v;
    let lf = lambda_factor(inp)?;
    let c_lo = moment_constant_unchecked(&at_one, q - 1.0);
    let c_hi = moment_constant_unchecked(&at_one, q + 1.0);
    Ok(2f64.powf(4.0 * q - 3.0) * inp.l_q * (2.0 * (1.0 + c_lo * lf) + c_hi))
}

/// Moments `nu(|.|^p)` of a reference law, bounded from its even moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetMoments {
    pub e2: f64,
    pub e4: f64,
    pub e6: f64,
}

impl TargetMoments {
    /// Upper bound on `E|Y|^p` for `0 <= p <= 6` by Lyapunov's inequality.
    pub fn moment(&self, p: f64) -> f64 {
        if p <= 0.0 {
            1.0
        } else if p <= 2.0 {
            self.e2.powf(p / 2.0)
        } else if p <= 4.0 {
            self.e4.powf(p / 4.0)
        } else {
            self.e6.powf(p / 6.0)
        }
    }
}

/// Constant `C(nu)` of the one-step inequality at the inputs' `tau`.
pub fn c_nu(inp: &TheoryInputs, nu: &TargetMoments) -> Result<f64, TheoryError> {
    inp.validate()?;
    if inp.q_v > 6.0 {
        return Err(TheoryError::Invalid("C(nu) needs moments up to order q_v <= 6".into()));
    }
    Ok(c_nu_unchecked(inp, nu))
}

fn c_nu_unchecked(inp: &TheoryInputs, nu: &TargetMoments) -> f64 {
    let q = inp.q_v;
    let delta = inp.delta();
    let d = inp.d as f64;
    let m1 = nu.moment(1.0);
    let c1 = moment_constant_unchecked(inp, 1.0);
    let lam = if inp.lambda_v > 0.0 {
        (1.0f64).min(1.0 / inp.lambda_v)
    } else {
        1.0
    };
    inp.c_v * (m1 + nu.moment(q) * delta + delta * nu.moment(q - 1.0) + delta.powf(q)) * inp.tau
        + 2.0 * (m1 + c1 * lam * d.sqrt() + delta)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub tau: f64,
    pub n: u64,
}

/// Largest `tau` in `(0, cap]` with `feasible(tau)`, for a predicate that
/// holds on an initial segment.
fn largest_feasible(cap: f64, feasible: impl Fn(f64) -> bool, what: &str) -> Result<f64, TheoryError> {
    if feasible(cap) {
        return Ok(cap);
    }
    let mut lo = cap * 1e-15;
    if !feasible(lo) {
        return Err(TheoryError::Infeasible(what.to_string()));
    }
    let mut hi = cap;
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo < 1.0 + 1e-13 {
            break;
        }
    }
    Ok(lo)
}

/// Step size and iteration count for KL accuracy `eps` of the averaged law.
pub fn kl_budget(inp: &TheoryInputs, target: &TargetMoments, eps: f64) -> Result<Budget, TheoryError> {
    inp.validate()?;
    if !(eps > 0.0) {
        return Err(TheoryError::Invalid("eps must be positive".into()));
    }
    lambda_factor(inp)?;
    let feasible = |tau: f64| {
        let at = inp.at_tau(tau);
        let bias = tau.powf(inp.alpha) * 3.0 * c_nu_unchecked(&at, target) * inp.kappa;
        bias <= eps && k_tau_value(&at).is_ok_and(|k| k <= eps / 3.0)
    };
    let tau = largest_feasible(1.0, feasible, "KL bias terms exceed eps")?;
    let n = (3.0 * inp.w2_init / (2.0 * eps * tau)).ceil();
    Ok(Budget { tau, n: n as u64 })
}

fn require_global_convexity(inp: &TheoryInputs) -> Result<(), TheoryError> {
    if inp.r_v != 0.0 {
        return Err(TheoryError::NeedsGlobalConvexity { r_v: inp.r_v });
    }
    if !(inp.lambda_v > 0.0) {
        return Err(TheoryError::NeedsStrongConvexity { exponent: 1.0 });
    }
    Ok(())
}

/// Step size and iteration count for `W_2^2` accuracy `eps` under global
/// strong convexity.
pub fn w2_budget(inp: &TheoryInputs, eps: f64) -> Result<Budget, TheoryError> {
    inp.validate()?;
    require_global_convexity(inp)?;
    if !(eps > 0.0) {
        return Err(TheoryError::Invalid("eps must be positive".into()));
    }
    let lambda = inp.lambda_v;
    let log = (6.0 * inp.w2_init / eps).ln();
    let below_inverse = f64::from_bits((1.0 / lambda).to_bits() - 1);
    let cap = below_inverse.min(1.0);
    let feasible = |tau: f64| {
        let at = inp.at_tau(tau);
        let schedule_ok = log <= 0.0
            || tau.powf(2.0 * inp.alpha) <= lambda * lambda * eps / (96.0 * inp.kappa * inp.kappa * log * log);
        schedule_ok && k_tau_value(&at).is_ok_and(|k| k <= lambda * eps / 12.0)
    };
    let tau = largest_feasible(cap, feasible, "W2 bias terms exceed eps")?;
    let n = if log <= 0.0 {
        0
    } else {
        (2.0 * log / (tau * lambda)).ceil() as u64
    };
    Ok(Budget { tau, n })
}

/// Right-hand side of the `W_2^2` bound after `k` steps.
pub fn w2_bias_bound(inp: &TheoryInputs, k: u64) -> Result<f64, TheoryError> {
    inp.validate()?;
    require_global_convexity(inp)?;
    let (tau, lambda) = (inp.tau, inp.lambda_v);
    if tau * lambda >= 1.0 {
        return Err(TheoryError::StepTooLarge {
            tau,
            limit: 1.0 / lambda,
        });
    }
    let contraction = 2.0 * (1.0 - tau * lambda / 2.0).powf(k as f64) * inp.w2_init;
    let discretization = 4.0 / lambda * k_tau_value(inp)?;
    let inexact = if k <= 1 {
        0.0
    } else {
        let ratio = -(-lambda * tau * (k - 1) as f64).exp_m1() / -(-lambda * tau).exp_m1();
        2.0 * inp.kappa.powi(2) * tau.powf(2.0 + 2.0 * inp.alpha) * ratio * ratio
    };
    Ok(contraction + discretization + inexact)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(q: f64, d: usize, tau: f64) -> TheoryInputs {
        TheoryInputs {
            d,
            q_v: q,
            lambda_v: 1.0,
            r_v: 0.0,
            c_v: 1.0,
            l_q: 1.0,
            kappa: 1.0,
            alpha: 1.0,
            tau,
            x0_norm: 0.0,
            w2_init: 1.0,
        }
    }

    #[test]
    fn noise_constants() {
        assert!((noise_moment_constant(4.0) - 12.0).abs() < 1e-12);
        assert!((noise_moment_constant(2.0) - 2.0).abs() < 1e-12);
        assert!((noise_moment_constant(6.0) - 120.0).abs() < 1e-10);
        assert_eq!(noise_moment_constant(1.0), 2f64.sqrt());
    }

    #[test]
    fn moment_constant_base_cases() {
        let inp = unit(3.0, 10, 0.1);
        assert_eq!(moment_constant(&inp, 0.0).unwrap(), 1.0);
        // m = 2 is the first branch with exponent 1.
        let d = 10.0;
        let delta = 0.01;
        let base = 36.0 / d + (16.0 * delta + 8.0 * d) / d;
        assert!((moment_constant(&inp, 2.0).unwrap() - base).abs() < 1e-12);
        assert!((moment_constant(&inp, 1.0).unwrap() - base.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn k_tau_at_q_one_is_linear() {
        let inp = unit(1.0, 7, 0.05);
        let k1 = k_tau(&inp).unwrap().value;
        let k2 = k_tau(&inp.at_tau(0.1)).unwrap().value;
        // delta changes with tau, so only C_0 = 1 is tau-free; C_2 depends on
        // delta = tau^2 through 16 kappa delta / d, a small effect.
        let c0 = 1.0;
        let c2 = moment_constant(&inp, 2.0).unwrap();
        let direct = 2.0 * ((1.0 + c0) * 2.0 * 7.0 * 0.05 + c2 * 7.0 * 0.05);
        assert!((k1 - direct).abs() < 1e-12 * direct);
        assert!(k2 > 1.99 * k1 && k2 < 2.01 * k1);
    }

    #[test]
    fn zero_lambda_rejected_where_inverse_needed() {
        let mut inp = unit(3.0, 10, 0.1);
        inp.lambda_v = 0.0;
        assert!(matches!(k_tau(&inp), Err(TheoryError::NeedsStrongConvexity { .. })));
        assert!(moment_constant(&inp, 4.0).unwrap().is_finite());
    }

    #[test]
    fn remark_bound_dominates_on_grid() {
        for q in [1.0, 2.0, 3.0] {
            for d in [1, 10, 125] {
                for i in 1..=100 {
                    let tau = i as f64 / 100.0;
                    let k = k_tau(&unit(q, d, tau)).unwrap();
                    assert!(k.value <= k.remark_bound * (1.0 + 1e-12), "q={q} d={d} tau={tau}");
                }
            }
        }
    }

    #[test]
    fn w2_bias_bound_limits() {
        let inp = unit(1.0, 3, 0.1);
        let k = k_tau(&inp).unwrap().value;
        let b0 = w2_bias_bound(&inp, 0).unwrap();
        assert!((b0 - (2.0 + 4.0 * k)).abs() < 1e-12);
        let far = w2_bias_bound(&inp, 1_000_000).unwrap();
        let limit = 4.0 * k + 2.0 * 0.1f64.powi(4) / (1.0 - (-0.1f64).exp()).powi(2);
        assert!((far - limit).abs() < 1e-9 * limit);
        let mut big = inp;
        big.tau = 1.0;
        assert!(matches!(w2_bias_bound(&big, 3), Err(TheoryError::StepTooLarge { .. })));
        let mut tail = inp;
        tail.r_v = 1.0;
        assert!(matches!(
            w2_budget(&tail, 0.1),
            Err(TheoryError::NeedsGlobalConvexity { .. })
        ));
    }

    #[test]
    fn w2_budget_log_equal_one() {
        let eps = 0.05;
        let mut inp = unit(1.0, 2, 0.1);
        inp.w2_init = std::f64::consts::E * eps / 6.0;
        let b = w2_budget(&inp, eps).unwrap();
        assert_eq!(b.n, (2.0 / (b.tau * inp.lambda_v)).ceil() as u64);
    }

    #[test]
    fn kl_budget_caps_at_one_for_huge_eps() {
        let inp = unit(1.0, 2, 0.1);
        let target = TargetMoments {
            e2: 2.0,
            e4: 8.0,
            e6: 48.0,
        };
        let b = kl_budget(&inp, &target, 1e9).unwrap();
        assert_eq!(b.tau, 1.0);
    }
}
