//! Bayesian deconvolution support: FFT circulant blur, a synthetic
//! phantom, image files and the posterior sampling pipeline.
//!
//! Images are square, row-major `side x side` vectors. Pixel values live in
//! model units: the phantom is defined on `[0, 1]` and multiplied by an
//! intensity scale (255 by default, the 8-bit range) before blurring and
//! adding noise, so the noise level and TV weight are expressed on that
//! scale. Nothing is clamped until export.

mod blur;
mod fft;
pub mod io;
mod posterior;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

pub use blur::CirculantBlur;
pub use fft::Fft2;
pub use posterior::{deconvolve_sample, DeconvolutionConfig, DeconvolutionOutput, StartPoint};

use crate::potentials::{Potential, PotentialError, TvDeconvolution};
use crate::rng::{stream_rng, streams};
use crate::samplers::SamplerError;

#[derive(Debug, Error)]
pub enum ImagingError {
    #[error("image has {got} pixels, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid imaging parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed image file: {0}")]
    Format(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Potential(#[from] PotentialError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(
        "prox solver missed its accuracy target in {failures} of {steps} steps \
         (rate {rate:.4} > tolerance {tolerance}); last failure: {detail}"
    )]
    ProxFailures {
        failures: u64,
        steps: u64,
        rate: f64,
        tolerance: f64,
        detail: String,
    },
}

impl ImagingError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ImagingError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Piecewise-constant test image on `[0, 1]`: background 0.2, a wide
/// rectangle at 0.8, a disk at 0.5 and a small bright rectangle at 1.0.
/// Geometry is laid out for 64 x 64 and scaled with `side`.
pub fn phantom(side: usize) -> Vec<f64> {
    let s = side as f64 / 64.0;
    let mut img = vec![0.2; side * side];
    let inside = |lo: f64, hi: f64, v: usize| (v as f64) >= lo * s && (v as f64) < hi * s;
    for i in 0..side {
        for j in 0..side {
            let k = i * side + j;
            if inside(10.0, 30.0, i) && inside(8.0, 40.0, j) {
                img[k] = 0.8;
            }
            let (di, dj) = (i as f64 + 0.5 - 44.0 * s, j as f64 + 0.5 - 40.0 * s);
            if di * di + dj * dj <= (12.0 * s).powi(2) {
                img[k] = 0.5;
            }
            if inside(40.0, 56.0, i) && inside(6.0, 20.0, j) {
                img[k] = 1.0;
            }
        }
    }
    img
}

/// Parameters of a synthetic deconvolution instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemSpec {
    pub side: usize,
    /// Diameter of the uniform disk blur, odd and below `side`.
    pub depth: usize,
    pub sigma: f64,
    pub beta: f64,
    pub seed: u64,
    pub intensity_scale: f64,
}

impl Default for ProblemSpec {
    fn default() -> Self {
        Self {
            side: 64,
            depth: 9,
            sigma: 0.5,
            beta: 0.03,
            seed: 0,
            intensity_scale: 255.0,
        }
    }
}

/// Truth, blur and noisy observation of one deconvolution instance.
#[derive(Debug, Clone)]
pub struct ImageProblem {
    pub side: usize,
    /// Ground truth in model units.
    pub truth: Vec<f64>,
    pub blur: Arc<CirculantBlur>,
    pub sigma: f64,
    pub beta: f64,
    pub observed: Vec<f64>,
    /// Seed whose observation-noise stream produced `observed`.
    pub seed: u64,
    pub intensity_scale: f64,
}

/// Blurs the phantom and adds seeded Gaussian noise.
pub fn make_problem(spec: &ProblemSpec) -> Result<ImageProblem, ImagingError> {
    let truth: Vec<f64> = phantom(spec.side)
        .into_iter()
        .map(|v| v * spec.intensity_scale)
        .collect();
    make_problem_with_truth(spec, truth)
}

/// As [`make_problem`] with a caller-supplied truth image (model units).
pub fn make_problem_with_truth(spec: &ProblemSpec, truth: Vec<f64>) -> Result<ImageProblem, ImagingError> {
    if spec.side == 0 {
        return Err(ImagingError::InvalidParameter("side must be positive".into()));
    }
    if truth.len() != spec.side * spec.side {
        return Err(ImagingError::SizeMismatch {
            expected: spec.side * spec.side,
            got: truth.len(),
        });
    }
    if !(spec.sigma >= 0.0) || !(spec.beta >= 0.0) || !(spec.intensity_scale > 0.0) {
        return Err(ImagingError::InvalidParameter(
            "sigma and beta must be non-negative and intensity_scale positive".into(),
        ));
    }
    let blur = Arc::new(if spec.depth == 1 {
        CirculantBlur::identity(spec.side)?
    } else {
        CirculantBlur::uniform_disk(spec.side, spec.depth)?
    });
    let mut observed = blur.apply(&truth);
    if spec.sigma > 0.0 {
        let mut rng = stream_rng(spec.seed, streams::OBSERVATION_NOISE);
        for v in observed.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v += spec.sigma * z;
        }
    }
    Ok(ImageProblem {
        side: spec.side,
        truth,
        blur,
        sigma: spec.sigma,
        beta: spec.beta,
        observed,
        seed: spec.seed,
        intensity_scale: spec.intensity_scale,
    })
}

impl ImageProblem {
    /// Posterior potential `|y - H x|^2 / (2 sigma^2) + beta TV(x)`.
    pub fn potential(&self) -> Result<Potential, ImagingError> {
        Ok(Potential::Deconvolution(TvDeconvolution::new(
            self.blur.clone(),
            self.observed.clone(),
            self.sigma,
            self.beta,
        )?))
    }

    /// RMSE to the truth on the `[0, 1]` scale.
    pub fn rmse_to_truth(&self, image: &[f64]) -> f64 {
        rmse(image, &self.truth) / self.intensity_scale
    }
}

pub fn rmse(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().max(1) as f64;
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phantom_levels_and_geometry() {
        let img = phantom(64);
        let at = |i: usize, j: usize| img[i * 64 + j];
        assert_eq!(at(0, 0), 0.2);
        assert_eq!(at(20, 20), 0.8);
        assert_eq!(at(44, 40), 0.5);
        assert_eq!(at(48, 10), 1.0);
        let mut levels: Vec<f64> = img.clone();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        assert_eq!(levels, vec![0.2, 0.5, 0.8, 1.0]);
    }

    #[test]
    fn noiseless_and_delta_kernel_problems() {
        let spec = ProblemSpec {
            side: 16,
            depth: 5,
            sigma: 0.0,
            ..ProblemSpec::default()
        };
        let p = make_problem(&spec).unwrap();
        assert_eq!(p.observed, p.blur.apply(&p.truth));

        let spec = ProblemSpec {
            side: 16,
            depth: 1,
            sigma: 2.0,
            seed: 3,
            ..ProblemSpec::default()
        };
        let p = make_problem(&spec).unwrap();
        let mut rng = stream_rng(3, streams::OBSERVATION_NOISE);
        for (o, t) in p.observed.iter().zip(&p.truth) {
            let z: f64 = rng.sample(StandardNormal);
            assert!((o - (t + 2.0 * z)).abs() < 1e-9);
        }
    }

    #[test]
    fn invalid_depth_is_rejected() {
        let spec = ProblemSpec {
            side: 16,
            depth: 4,
            ..ProblemSpec::default()
        };
        assert!(matches!(make_problem(&spec), Err(ImagingError::InvalidParameter(_))));
    }

    #[test]
    fn observation_is_seeded() {
        let spec = ProblemSpec {
            side: 16,
            depth: 3,
            ..ProblemSpec::default()
        };
        let a = make_problem(&spec).unwrap();
        let b = make_problem(&spec).unwrap();
        let c = make_problem(&ProblemSpec { seed: 1, ..spec }).unwrap();
        assert_eq!(a.observed, b.observed);
        assert_ne!(a.observed, c.observed);
    }
}
