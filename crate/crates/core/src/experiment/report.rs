use super::config::{ExperimentConfig, PotentialKind};
use super::run::{build_potential, initial_point};
use super::ExperimentError;
use crate::diagnostics::oracle_moment;
use crate::linalg::norm;
use crate::theory::{
    k_tau, kl_budget, moment_constant, noise_moment_constant, w2_budget, TargetMoments, TheoryError, TheoryInputs,
};

/// One line of the theory report. `value` is NaN when the quantity is not
/// defined for the inputs; `note` then says why.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryRow {
    pub quantity: String,
    pub order: Option<f64>,
    pub eps: Option<f64>,
    pub value: f64,
    pub note: String,
}

fn row(quantity: &str, order: Option<f64>, eps: Option<f64>, value: Result<f64, TheoryError>) -> TheoryRow {
    let (value, note) = match value {
        Ok(v) => (v, String::new()),
        Err(e) => (f64::NAN, e.to_string()),
    };
    TheoryRow {
        quantity: quantity.to_string(),
        order,
        eps,
        value,
        note,
    }
}

/// Theory inputs for a configuration: the potential's metadata with any
/// `q_v`, `lambda_v`, `r_v`, `c_v`, `l_q` overrides applied.
pub fn theory_inputs(cfg: &ExperimentConfig) -> Result<TheoryInputs, ExperimentError> {
    let (potential, _) = build_potential(cfg)?;
    let mut inp = TheoryInputs::from_profile(potential.profile(), cfg.tau);
    inp.q_v = cfg.q_v.unwrap_or(inp.q_v);
    inp.lambda_v = cfg.lambda_v.unwrap_or(inp.lambda_v);
    inp.r_v = cfg.r_v.unwrap_or(inp.r_v);
    inp.c_v = cfg.c_v.unwrap_or(inp.c_v);
    inp.l_q = cfg.l_q.unwrap_or(inp.l_q);
    inp.kappa = cfg.prox.kappa;
    inp.alpha = cfg.prox.alpha;
    if cfg.potential != PotentialKind::Deconvolution {
        inp.x0_norm = norm(&initial_point(cfg, &potential));
    }
    inp.w2_init = cfg.theory.clone().unwrap_or_default().w2_init;
    inp.validate()
        .map_err(|e| ExperimentError::Config(format!("theory inputs: {e}")))?;
    Ok(inp)
}

/// `K(tau)`, moment constants and budgets for the configuration.
pub fn theory_report(cfg: &ExperimentConfig) -> Result<Vec<TheoryRow>, ExperimentError> {
    let inp = theory_inputs(cfg)?;
    let eps_list = cfg.theory.clone().unwrap_or_default().eps;
    let mut rows = vec![row("delta", None, None, Ok(inp.delta()))];
    let k = k_tau(&inp);
    rows.push(row("k_tau", None, None, k.clone().map(|k| k.value)));
    rows.push(row(
        "k_tau_remark_constant",
        None,
        None,
        k.clone().map(|k| k.remark_constant),
    ));
    rows.push(row("k_tau_remark_bound", None, None, k.clone().map(|k| k.remark_bound)));
    for m in [2.0, 4.0, 6.0] {
        rows.push(row(
            "noise_moment_constant",
            Some(m),
            None,
            Ok(noise_moment_constant(m)),
        ));
    }
    for m in [2.0, 4.0, 6.0] {
        rows.push(row("moment_constant", Some(m), None, moment_constant(&inp, m)));
    }
    let name = match cfg.potential {
        PotentialKind::Gaussian => "gaussian",
        PotentialKind::Quartic => "quartic",
        _ => "",
    };
    let target = (|| {
        Some(TargetMoments {
            e2: oracle_moment(name, cfg.d, 2).ok()?,
            e4: oracle_moment(name, cfg.d, 4).ok()?,
            e6: oracle_moment(name, cfg.d, 6).ok()?,
        })
    })();
    for &eps in &eps_list {
        match &target {
            Some(t) => {
                let b = kl_budget(&inp, t, eps);
                rows.push(row("kl_budget_tau", None, Some(eps), b.clone().map(|b| b.tau)));
                rows.push(row("kl_budget_n", None, Some(eps), b.clone().map(|b| b.n as f64)));
            }
            None => {
                for q in ["kl_budget_tau", "kl_budget_n"] {
                    rows.push(TheoryRow {
                        quantity: q.into(),
                        order: None,
                        eps: Some(eps),
                        value: f64::NAN,
                        note: "target moments need an analytic oracle".into(),
                    });
                }
            }
        }
        let b = w2_budget(&inp, eps);
        rows.push(row("w2_budget_tau", None, Some(eps), b.clone().map(|b| b.tau)));
        rows.push(row("w2_budget_n", None, Some(eps), b.clone().map(|b| b.n as f64)));
    }
    Ok(rows)
}
