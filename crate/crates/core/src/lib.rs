//! Langevin Monte Carlo for potentials without a globally Lipschitz gradient.
//!
//! The centrepiece is the inexact proximal Langevin algorithm: every step
//! replaces the explicit gradient move of ULA by an approximate proximal
//! step on the potential, solved to a certified accuracy
//! `delta = kappa * tau^(1 + alpha)`, followed by Gaussian noise of
//! covariance `2 tau Id`.
//!
//! Module map:
//!
//! * [`potentials`]: the target potentials (Gaussian, separable quartic,
//!   Ginzburg–Landau lattice, TV-regularized deconvolution posterior) with
//!   value / gradient / Hessian-vector oracles and growth metadata.
//! * [`prox`]: certified inexact proximal solvers (closed forms, gradient
//!   descent, Newton-CG, adaptive primal–dual for the TV posterior).
//! * [`samplers`]: IPLA, ULA, TULA and random-walk Metropolis–Hastings
//!   kernels plus a deterministic, replayable chain driver.
//! * [`diagnostics`]: moment estimation, RE/CV aggregation, analytic moment
//!   oracles and per-pixel quantiles.
//! * [`theory`]: explicit constants and step-size / iteration budgets.
//! * [`imaging`]: FFT circulant blur, test phantom, PGM / raw image I/O and
//!   the posterior sampling pipeline for deconvolution.
//! * [`experiment`]: configuration, presets for the three benchmark
//!   experiments and the runner that writes CSV / image outputs.

// NaN-rejecting checks are written as `!(x > 0.0)` throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod experiment;
pub mod imaging;
pub mod potentials;
pub mod prox;
pub mod rng;
pub mod samplers;
pub mod theory;

pub(crate) mod linalg;

pub use potentials::{Potential, PotentialError, PotentialProfile};
pub use prox::{ProxError, ProxRequest, ProxResult, ProxSolver};
pub use samplers::{ChainState, ChainTrace, Kernel};
