//! Oracles shared by the integration tests and the acceptance harness.
#![allow(dead_code)]

use ipla::diagnostics::oracle_moment;
use ipla::theory::{kl_budget, TargetMoments, TheoryInputs};
use ipla::Potential;
use statrs::function::gamma::gamma;

/// Reference prox: `x / (1 + tau)` for the Gaussian, and per coordinate the
/// real root of `t^3 + t / tau = x / tau` by bisection for the quartic.
pub fn reference_prox(potential: &str, x: &[f64], tau: f64) -> Vec<f64> {
    match potential {
        "gaussian" => x.iter().map(|v| v / (1.0 + tau)).collect(),
        _ => x
            .iter()
            .map(|&v| {
                let f = |t: f64| t * t * t + t / tau - v / tau;
                let (mut lo, mut hi) = (-v.abs() - 1.0, v.abs() + 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid) > 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect(),
    }
}

pub fn noise_const(m: f64) -> f64 {
    if m < 2.0 {
        return 2f64.powf(m / 2.0);
    }
    // E|N(0, 2)|^m = 2^(m/2) 2^(m/2) Gamma((m+1)/2) / sqrt(pi).
    2f64.powf(m) * gamma((m + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}

/// Moment constant written out term by term, independently of the library.
pub fn c_m(i: &TheoryInputs, m: f64) -> f64 {
    let d = i.d as f64;
    let (k, l, r) = (i.kappa, i.lambda_v, i.r_v);
    let delta = k * i.tau.powf(1.0 + i.alpha);
    if m <= 2.0 {
        let inner = 36.0 * k.powi(2) / d
            + l.powi(2) / d * i.x0_norm.powi(2)
            + (16.0 * k * delta + 4.0 * r.powi(2) * l + 4.0 * delta * r * l + 8.0 * d) / d * l;
        return inner.powf(m / 2.0);
    }
    let n = m.floor();
    let c = m.powi(2) * 2f64.powf(m);
    let s = 2.0 * k * delta + 4.0 * d;
    let a0 = i.x0_norm.powf(m);
    let bracket = 2f64.powf(n) * c.powf(n) * k.powf(n) * d.powf(-n / 2.0)
        + (m - 1.0).floor() * 2.0 * c * s / d
        + d.powf(-n / 2.0) * l.powf(n) * (a0 + r.powf(n))
        + c * d.powf(-n / 2.0)
            * l.powf((m - 1.0).floor())
            * (r.powf((m - 1.0).floor())
                + 2.0 * s * r.powf((m - 2.0).floor()) / l
                + 2f64.powf(n) * k * delta.powf((m - 1.0).floor()))
        + c * 2f64.powf(n) * noise_const(m) * l.powf(n / 2.0);
    c_m(i, m - n) * bracket
}

/// Log-log regression slope of the KL iteration budget against eps on the
/// quartic in d = 2, for eps from 1e-3 to 1e-5.
pub fn kl_iteration_slope(alpha: f64) -> f64 {
    let d = 2;
    let inp = TheoryInputs {
        alpha,
        ..TheoryInputs::from_profile(Potential::quartic(d).profile(), 0.1)
    };
    let t = TargetMoments {
        e2: oracle_moment("quartic", d, 2).unwrap(),
        e4: oracle_moment("quartic", d, 4).unwrap(),
        e6: oracle_moment("quartic", d, 6).unwrap(),
    };
    let epsilons: Vec<f64> = (0..6).map(|j| 1e-3 * 10f64.powf(-0.4 * j as f64)).collect();
    let xs: Vec<f64> = epsilons.iter().map(|e| e.ln()).collect();
    let ys: Vec<f64> = epsilons
        .iter()
        .map(|&e| (kl_budget(&inp, &t, e).unwrap().n as f64).ln())
        .collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}
