//! Target potentials `V` for densities `exp(-V(x)) / Z`.
//!
//! Each potential carries a [`PotentialProfile`] with its tail-growth
//! metadata: convexity modulus `lambda_v` outside a ball of radius `r_v`,
//! growth exponent `q_v` (V grows like `|x|^(q_v + 1)`), the constant `c_v`
//! of the upper quadratic-growth bound
//!
//! ```text
//! V(y) <= V(x) + <grad V(x), y - x> + c_v (1 + |x|^(q_v-1) + |y|^(q_v-1)) |y - x|^2
//! ```
//!
//! and the local-Lipschitz constant `l_q` of the gradient.

mod deconvolution;
mod ginzburg_landau;
pub mod tv;

pub use deconvolution::TvDeconvolution;
pub use ginzburg_landau::{GinzburgLandau, GinzburgLandauParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PotentialError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },
    #[error("{operation} is not available for the {potential} potential")]
    Unsupported {
        potential: &'static str,
        operation: &'static str,
    },
    #[error("invalid potential parameter: {0}")]
    InvalidParameter(String),
}

/// Growth and convexity metadata of a potential.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialProfile {
    pub dim: usize,
    /// Strong-convexity modulus outside the ball `B(0, r_v)`.
    pub lambda_v: f64,
    pub r_v: f64,
    /// Tail growth exponent; V grows with power `q_v + 1`.
    pub q_v: f64,
    pub c_v: f64,
    pub l_q: f64,
    /// `false` when V has no gradient (TV posterior).
    pub smooth: bool,
    /// Global lower bound on the Hessian spectrum (may be negative).
    /// The prox objective `V + |.-x|^2 / (2 tau)` is strongly convex with
    /// modulus `1 / tau + hessian_floor` whenever that is positive.
    pub hessian_floor: f64,
    /// A global minimizer, when known in closed form.
    pub minimizer: Option<Vec<f64>>,
}

impl PotentialProfile {
    pub fn validate(&self) -> Result<(), PotentialError> {
        let bad = |what: &str| Err(PotentialError::InvalidParameter(what.to_string()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if !(self.q_v >= 1.0) {
            return bad("q_v must be >= 1");
        }
        if !(self.lambda_v >= 0.0) || !(self.r_v >= 0.0) {
            return bad("lambda_v and r_v must be non-negative");
        }
        if !(self.c_v > 0.0) || !(self.l_q > 0.0) {
            return bad("c_v and l_q must be positive");
        }
        if let Some(m) = &self.minimizer {
            if m.len() != self.dim {
                return bad("minimizer length must equal dim");
            }
        }
        Ok(())
    }

    /// `true` when V is convex on the whole space.
    pub fn is_convex(&self) -> bool {
        self.hessian_floor >= 0.0
    }
}

/// `V(x) = |x|^2 / 2`, the standard normal target.
#[derive(Debug, Clone)]
pub struct Gaussian {
    profile: PotentialProfile,
}

impl Gaussian {
    pub fn new(dim: usize) -> Self {
        Self {
            profile: PotentialProfile {
                dim,
                lambda_v: 1.0,
                r_v: 0.0,
                q_v: 1.0,
                c_v: 0.5,
                l_q: 1.0,
                smooth: true,
                hessian_floor: 1.0,
                minimizer: Some(vec![0.0; dim]),
            },
        }
    }
}

/// Separable quartic `V(x) = sum_i x_i^4 / 4`, whose Langevin drift is the
/// elementwise cube `-x^3`.
#[derive(Debug, Clone)]
pub struct Quartic {
    profile: PotentialProfile,
}

impl Quartic {
    pub fn new(dim: usize) -> Self {
        Self {
            profile: PotentialProfile {
                dim,
                lambda_v: 1.0,
                r_v: 1.0,
                q_v: 3.0,
                c_v: 3.0,
                l_q: 3.0,
                smooth: true,
                hessian_floor: 0.0,
                minimizer: Some(vec![0.0; dim]),
            },
        }
    }
}

/// The closed set of potentials the samplers and solvers understand.
#[derive(Debug, Clone)]
pub enum Potential {
    Gaussian(Gaussian),
    Quartic(Quartic),
    GinzburgLandau(GinzburgLandau),
    Deconvolution(TvDeconvolution),
}

impl Potential {
    pub fn gaussian(dim: usize) -> Self {
        Potential::Gaussian(Gaussian::new(dim))
    }

    pub fn quartic(dim: usize) -> Self {
        Potential::Quartic(Quartic::new(dim))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Potential::Gaussian(_) => "gaussian",
            Potential::Quartic(_) => "quartic",
            Potential::GinzburgLandau(_) => "ginzburg_landau",
            Potential::Deconvolution(_) => "deconvolution",
        }
    }

    pub fn profile(&self) -> &PotentialProfile {
        match self {
            Potential::Gaussian(p) => &p.profile,
            Potential::Quartic(p) => &p.profile,
            Potential::GinzburgLandau(p) => p.profile(),
            Potential::Deconvolution(p) => p.profile(),
        }
    }

    pub fn dim(&self) -> usize {
        self.profile().dim
    }

    pub fn check_point(&self, x: &[f64]) -> Result<(), PotentialError> {
        let dim = self.dim();
        if x.len() != dim {
            return Err(PotentialError::DimensionMismatch {
                expected: dim,
                got: x.len(),
            });
        }
        match x.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(PotentialError::NonFinite { index }),
            None => Ok(()),
        }
    }

    fn require_smooth(&self, operation: &'static str) -> Result<(), PotentialError> {
        if self.profile().smooth {
            Ok(())
        } else {
            Err(PotentialError::Unsupported {
                potential: self.name(),
                operation,
            })
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, PotentialError> {
        self.check_point(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>, PotentialError> {
        let mut out = vec![0.0; x.len()];
        self.gradient_into(x, &mut out)?;
        Ok(out)
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), PotentialError> {
        self.require_smooth("gradient")?;
        self.check_point(x)?;
        if out.len() != x.len() {
            return Err(PotentialError::DimensionMismatch {
                expected: x.len(),
                got: out.len(),
            });
        }
        self.gradient_unchecked(x, out);
        Ok(())
    }

    /// `Hess V(x) v` without forming the Hessian.
    pub fn hessian_vec(&self, x: &[f64], v: &[f64]) -> Result<Vec<f64>, PotentialError> {
        self.require_smooth("hessian_vec")?;
        self.check_point(x)?;
        self.check_point(v)?;
        let mut out = vec![0.0; x.len()];
        self.hessian_vec_unchecked(x, v, &mut out);
        Ok(out)
    }

    /// Value without dimension or finiteness checks. Callers guarantee a
    /// point of the right length.
    pub(crate) fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Gaussian(_) => 0.5 * x.iter().map(|v| v * v).sum::<f64>(),
            Potential::Quartic(_) => 0.25 * x.iter().map(|v| (v * v) * (v * v)).sum::<f64>(),
            Potential::GinzburgLandau(p) => p.value(x),
            Potential::Deconvolution(p) => p.value(x),
        }
    }

    /// Panics on the non-smooth potential; callers check `profile().smooth`.
    pub(crate) fn gradient_unchecked(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Potential::Gaussian(_) => out.copy_from_slice(x),
            Potential::Quartic(_) => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = v * v * v;
                }
            }
            Potential::GinzburgLandau(p) => p.gradient_into(x, out),
            Potential::Deconvolution(_) => unreachable!("deconvolution potential has no gradient"),
        }
    }

    pub(crate) fn hessian_vec_unchecked(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        match self {
            Potential::Gaussian(_) => out.copy_from_slice(v),
            Potential::Quartic(_) => {
                for ((o, xi), vi) in out.iter_mut().zip(x).zip(v) {
                    *o = 3.0 * xi * xi * vi;
                }
            }
            Potential::GinzburgLandau(p) => p.hessian_vec_into(x, v, out),
            Potential::Deconvolution(_) => unreachable!("deconvolution potential has no Hessian"),
        }
    }
}
