use std::sync::Arc;

use super::tv::total_variation;
use super::{PotentialError, PotentialProfile};
use crate::imaging::CirculantBlur;

/// Negative log-posterior of TV-regularized deconvolution,
/// `V(x) = precision / 2 |y - H x|^2 + beta TV(x)`, with `precision = 1 / sigma^2`.
///
/// A zero precision switches the likelihood off and leaves the TV prior.
#[derive(Debug, Clone)]
pub struct TvDeconvolution {
    blur: Arc<CirculantBlur>,
    observed: Vec<f64>,
    precision: f64,
    beta: f64,
    profile: PotentialProfile,
}

impl TvDeconvolution {
    pub fn new(
        blur: Arc<CirculantBlur>,
        observed: Vec<f64>,
        noise_std: f64,
        beta: f64,
    ) -> Result<Self, PotentialError> {
        let n = blur.side() * blur.side();
        if observed.len() != n {
            return Err(PotentialError::DimensionMismatch {
                expected: n,
                got: observed.len(),
            });
        }
        if let Some(index) = observed.iter().position(|v| !v.is_finite()) {
            return Err(PotentialError::NonFinite { index });
        }
        if !(noise_std > 0.0) {
            return Err(PotentialError::InvalidParameter("noise_std must be positive".into()));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(PotentialError::InvalidParameter(
                "beta must be finite and non-negative".into(),
            ));
        }
        let precision = if noise_std.is_infinite() {
            0.0
        } else {
            1.0 / (noise_std * noise_std)
        };
        // Nominal growth constants: the likelihood is quadratic with curvature
        // at most `precision` because the blur kernel is a probability vector.
        let curvature = precision.max(f64::EPSILON);
        Ok(Self {
            blur,
            observed,
            precision,
            beta,
            profile: PotentialProfile {
                dim: n,
                lambda_v: 0.0,
                r_v: 0.0,
                q_v: 1.0,
                c_v: 0.5 * curvature,
                l_q: curvature,
                smooth: false,
                hessian_floor: 0.0,
                minimizer: None,
            },
        })
    }

    pub fn profile(&self) -> &PotentialProfile {
        &self.profile
    }

    pub fn blur(&self) -> &CirculantBlur {
        &self.blur
    }

    pub fn observed(&self) -> &[f64] {
        &self.observed
    }

    pub fn precision(&self) -> f64 {
        self.precision
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn side(&self) -> usize {
        self.blur.side()
    }

    pub fn data_fidelity(&self, x: &[f64]) -> f64 {
        if self.precision == 0.0 {
            return 0.0;
        }
        let hx = self.blur.apply(x);
        let r2: f64 = hx.iter().zip(&self.observed).map(|(a, b)| (a - b) * (a - b)).sum();
        0.5 * self.precision * r2
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        self.data_fidelity(x) + self.beta * total_variation(x, self.side())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Potential;

    fn setup(noise_std: f64) -> TvDeconvolution {
        let blur = Arc::new(CirculantBlur::uniform_disk(8, 3).unwrap());
        let truth: Vec<f64> = (0..64).map(|i| if i % 8 < 4 { 1.0 } else { 0.0 }).collect();
        let y = blur.apply(&truth);
        TvDeconvolution::new(blur, y, noise_std, 0.5).unwrap()
    }

    #[test]
    fn value_splits_into_fidelity_and_tv() {
        let p = setup(2.0);
        let x = vec![0.25; 64];
        let tv = 0.0;
        let y = p.observed().to_vec();
        let r2: f64 = p.blur().apply(&x).iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
        assert!((p.value(&x) - (r2 / 8.0 + 0.5 * tv)).abs() < 1e-12);
    }

    #[test]
    fn infinite_noise_drops_likelihood() {
        let p = setup(f64::INFINITY);
        assert_eq!(p.precision(), 0.0);
        let x: Vec<f64> = (0..64).map(|i| (i / 8) as f64).collect();
        // Seven unit steps down each of eight columns.
        assert!((p.value(&x) - 0.5 * 56.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_is_unsupported() {
        let p = Potential::Deconvolution(setup(1.0));
        assert!(matches!(
            p.gradient(&vec![0.0; 64]),
            Err(PotentialError::Unsupported { .. })
        ));
        assert!(p.value(&vec![0.0; 64]).is_ok());
    }

    #[test]
    fn rejects_wrong_observation_size() {
        let blur = Arc::new(CirculantBlur::uniform_disk(8, 3).unwrap());
        assert!(TvDeconvolution::new(blur, vec![0.0; 10], 1.0, 0.1).is_err());
    }
}
