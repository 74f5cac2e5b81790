use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{PotentialError, PotentialProfile};
use crate::rng::{stream_rng, streams};

/// Parameters of the periodic Ginzburg–Landau lattice field on a `q^3` grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GinzburgLandauParams {
    /// Lattice side; the dimension is `q^3`.
    pub q: usize,
    /// Nearest-neighbour coupling.
    pub varkappa: f64,
    /// Quartic self-interaction.
    pub varsigma: f64,
    /// Overall interaction weight; `upsilon > 1` gives a double well.
    pub upsilon: f64,
}

impl Default for GinzburgLandauParams {
    fn default() -> Self {
        Self {
            q: 5,
            varkappa: 0.1,
            varsigma: 0.5,
            upsilon: 2.0,
        }
    }
}

/// `V(x) = sum_s (1 - u)/2 x_s^2 + u k / 2 sum_{axis} (x_{s+e} - x_s)^2 + u s / 4 x_s^4`
/// with periodic boundary in all three lattice directions.
#[derive(Debug, Clone)]
pub struct GinzburgLandau {
    params: GinzburgLandauParams,
    /// For each site: forward neighbours along the three axes, then backward.
    neighbours: Vec<[usize; 6]>,
    profile: PotentialProfile,
}

/// Radii at which the Hessian spectrum is probed when estimating the
/// convexity-at-infinity constants.
const SHELL_RADII: [f64; 8] = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
const SHELL_SAMPLES: usize = 24;

impl GinzburgLandau {
    pub fn new(params: GinzburgLandauParams) -> Result<Self, PotentialError> {
        let GinzburgLandauParams {
            q,
            varkappa,
            varsigma,
            upsilon,
        } = params;
        if q == 0 {
            return Err(PotentialError::InvalidParameter(
                "lattice side q must be positive".into(),
            ));
        }
        if ![varkappa, varsigma, upsilon].iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(PotentialError::InvalidParameter(
                "varkappa, varsigma and upsilon must be finite and non-negative".into(),
            ));
        }
        if varsigma * upsilon <= 0.0 {
            return Err(PotentialError::InvalidParameter(
                "the quartic term needs varsigma * upsilon > 0".into(),
            ));
        }
        let neighbours = build_neighbours(q);
        let dim = q * q * q;

        let quad = (1.0 - upsilon).max(0.0) + 12.0 * upsilon * varkappa;
        let c_v = 0.5 * quad.max(3.0 * upsilon * varsigma);
        let l_q = ((1.0 - upsilon).abs() + 12.0 * upsilon * varkappa).max(1.5 * upsilon * varsigma);
        let hessian_floor = 1.0 - upsilon;
        let well = if upsilon > 1.0 {
            ((upsilon - 1.0) / (upsilon * varsigma)).sqrt()
        } else {
            0.0
        };

        let mut gl = Self {
            params,
            neighbours,
            profile: PotentialProfile {
                dim,
                lambda_v: 0.0,
                r_v: 0.0,
                q_v: 3.0,
                c_v,
                l_q,
                smooth: true,
                hessian_floor,
                minimizer: Some(vec![well; dim]),
            },
        };
        let (lambda_v, r_v) = if hessian_floor > 0.0 {
            (hessian_floor, 0.0)
        } else {
            gl.estimate_convexity_at_infinity()
        };
        gl.profile.lambda_v = lambda_v;
        gl.profile.r_v = r_v;
        Ok(gl)
    }

    pub fn params(&self) -> &GinzburgLandauParams {
        &self.params
    }

    pub fn profile(&self) -> &PotentialProfile {
        &self.profile
    }

    pub(crate) fn value(&self, x: &[f64]) -> f64 {
        let GinzburgLandauParams {
            varkappa,
            varsigma,
            upsilon,
            ..
        } = self.params;
        let mut onsite = 0.0;
        let mut coupling = 0.0;
        for (s, nb) in self.neighbours.iter().enumerate() {
            let xs = x[s];
            let x2 = xs * xs;
            onsite += 0.5 * (1.0 - upsilon) * x2 + 0.25 * upsilon * varsigma * x2 * x2;
            for &f in &nb[..3] {
                let d = x[f] - xs;
                coupling += d * d;
            }
        }
        onsite + 0.5 * upsilon * varkappa * coupling
    }

    pub(crate) fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let GinzburgLandauParams {
            varkappa,
            varsigma,
            upsilon,
            ..
        } = self.params;
        let uk = upsilon * varkappa;
        for (s, nb) in self.neighbours.iter().enumerate() {
            let xs = x[s];
            let lap: f64 = nb.iter().map(|&n| xs - x[n]).sum();
            out[s] = (1.0 - upsilon) * xs + upsilon * varsigma * xs * xs * xs + uk * lap;
        }
    }

    pub(crate) fn hessian_vec_into(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        let GinzburgLandauParams {
            varkappa,
            varsigma,
            upsilon,
            ..
        } = self.params;
        let uk = upsilon * varkappa;
        for (s, nb) in self.neighbours.iter().enumerate() {
            let vs = v[s];
            let lap: f64 = nb.iter().map(|&n| vs - v[n]).sum();
            out[s] = (1.0 - upsilon + 3.0 * upsilon * varsigma * x[s] * x[s]) * vs + uk * lap;
        }
    }

    /// Dense Hessian at `x`.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let GinzburgLandauParams {
            varkappa,
            varsigma,
            upsilon,
            ..
        } = self.params;
        let uk = upsilon * varkappa;
        let n = self.profile.dim;
        let mut h = DMatrix::zeros(n, n);
        for (s, nb) in self.neighbours.iter().enumerate() {
            h[(s, s)] += 1.0 - upsilon + 3.0 * upsilon * varsigma * x[s] * x[s];
            for &m in nb {
                h[(s, s)] += uk;
                h[(s, m)] -= uk;
            }
        }
        h
    }

    fn min_eigenvalue(&self, x: &[f64]) -> f64 {
        SymmetricEigen::new(self.hessian(x))
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Probes the Hessian on random points of growing shells. `r_v` is the
    /// smallest probed radius beyond which every probe is positive definite
    /// and `lambda_v` the smallest eigenvalue seen there.
    fn estimate_convexity_at_infinity(&self) -> (f64, f64) {
        let dim = self.profile.dim;
        let mut rng = stream_rng(self.params.q as u64, streams::SHELL_SAMPLING);
        let mins: Vec<f64> = SHELL_RADII
            .iter()
            .map(|&radius| {
                let mut worst = f64::INFINITY;
                for _ in 0..SHELL_SAMPLES {
                    let mut dir: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
                    let nrm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
                    for v in &mut dir {
                        *v *= radius / nrm;
                    }
                    worst = worst.min(self.min_eigenvalue(&dir));
                }
                worst
            })
            .collect();
        let mut start = SHELL_RADII.len();
        while start > 0 && mins[start - 1] > 0.0 {
            start -= 1;
        }
        if start == SHELL_RADII.len() {
            return (0.0, SHELL_RADII[SHELL_RADII.len() - 1]);
        }
        let lambda = mins[start..].iter().copied().fold(f64::INFINITY, f64::min);
        (lambda, SHELL_RADII[start])
    }
}

fn build_neighbours(q: usize) -> Vec<[usize; 6]> {
    let idx = |i: usize, j: usize, k: usize| (i * q + j) * q + k;
    let up = |a: usize| (a + 1) % q;
    let down = |a: usize| (a + q - 1) % q;
    let mut out = Vec::with_capacity(q * q * q);
    for i in 0..q {
        for j in 0..q {
            for k in 0..q {
                out.push([
                    idx(up(i), j, k),
                    idx(i, up(j), k),
                    idx(i, j, up(k)),
                    idx(down(i), j, k),
                    idx(i, down(j), k),
                    idx(i, j, down(k)),
                ]);
            }
        }
    }
    out
}
