use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Square 2D FFT on row-major `side x side` buffers.
///
/// `inverse` includes the `1 / side^2` normalization, so a forward/inverse
/// round trip is the identity.
#[derive(Clone)]
pub struct Fft2 {
    side: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fft2").field("side", &self.side).finish()
    }
}

impl Fft2 {
    pub fn new(side: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            side,
            forward: planner.plan_fft_forward(side),
            inverse: planner.plan_fft_inverse(side),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(&self.forward, data);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(&self.inverse, data);
        let scale = 1.0 / (self.side * self.side) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    pub fn forward_real(&self, image: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = image.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut buf);
        buf
    }

    fn transform(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.side;
        assert_eq!(data.len(), n * n, "buffer is not side x side");
        // Rows are contiguous; rustfft processes every length-n chunk.
        plan.process(data);
        transpose(data, n);
        plan.process(data);
        transpose(data, n);
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Direct O(n^4) DFT.
    fn naive_dft(x: &[f64], n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for u in 0..n {
            for v in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let ang = -2.0 * PI * ((u * i + v * j) as f64) / n as f64;
                        acc += x[i * n + j] * Complex64::new(ang.cos(), ang.sin());
                    }
                }
                out[u * n + v] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        let n = 5;
        let x: Vec<f64> = (0..n * n).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
        let fast = Fft2::new(n).forward_real(&x);
        for (a, b) in fast.iter().zip(naive_dft(&x, n)) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let n = 16;
        let fft = Fft2::new(n);
        let x: Vec<f64> = (0..n * n).map(|i| (i as f64 * 0.37).sin() * 100.0).collect();
        let mut buf = fft.forward_real(&x);
        fft.inverse(&mut buf);
        for (a, b) in buf.iter().zip(&x) {
            assert!((a.re - b).abs() < 1e-12 * 100.0);
            assert!(a.im.abs() < 1e-12 * 100.0);
        }
    }
}
