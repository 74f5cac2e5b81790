use rustfft::num_complex::Complex64;

use super::fft::Fft2;
use super::ImagingError;

/// Periodic 2D convolution `H x = k * x`, applied through its transfer
/// function `FFT(k)`.
#[derive(Debug, Clone)]
pub struct CirculantBlur {
    side: usize,
    kernel: Vec<f64>,
    transfer: Vec<Complex64>,
    fft: Fft2,
}

impl CirculantBlur {
    /// `kernel` is a full `side x side` image with its centre at pixel
    /// `(0, 0)` and negative offsets wrapped around.
    pub fn from_kernel(side: usize, kernel: Vec<f64>) -> Result<Self, ImagingError> {
        if side == 0 {
            return Err(ImagingError::InvalidParameter("side must be positive".into()));
        }
        if kernel.len() != side * side {
            return Err(ImagingError::SizeMismatch {
                expected: side * side,
                got: kernel.len(),
            });
        }
        let fft = Fft2::new(side);
        let transfer = fft.forward_real(&kernel);
        Ok(Self {
            side,
            kernel,
            transfer,
            fft,
        })
    }

    /// Equal-weight disk of diameter `depth` pixels: offsets `(i, j)` with
    /// `i^2 + j^2 <= (depth / 2)^2`, normalized to sum to one.
    pub fn uniform_disk(side: usize, depth: usize) -> Result<Self, ImagingError> {
        if depth == 0 || depth.is_multiple_of(2) || depth >= side {
            return Err(ImagingError::InvalidParameter(format!(
                "blur depth must be odd and smaller than the side ({side}), got {depth}"
            )));
        }
        let half = (depth / 2) as i64;
        let r2 = (depth as f64 / 2.0).powi(2);
        let mut kernel = vec![0.0; side * side];
        let wrap = |a: i64| a.rem_euclid(side as i64) as usize;
        let mut count = 0usize;
        for i in -half..=half {
            for j in -half..=half {
                if ((i * i + j * j) as f64) <= r2 {
                    kernel[wrap(i) * side + wrap(j)] = 1.0;
                    count += 1;
                }
            }
        }
        let w = 1.0 / count as f64;
        kernel.iter_mut().for_each(|v| *v *= w);
        Self::from_kernel(side, kernel)
    }

    pub fn identity(side: usize) -> Result<Self, ImagingError> {
        let mut kernel = vec![0.0; side * side];
        if let Some(k) = kernel.first_mut() {
            *k = 1.0;
        }
        Self::from_kernel(side, kernel)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn kernel(&self) -> &[f64] {
        &self.kernel
    }

    pub fn transfer(&self) -> &[Complex64] {
        &self.transfer
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.filter(x, false)
    }

    pub fn adjoint(&self, x: &[f64]) -> Vec<f64> {
        self.filter(x, true)
    }

    pub fn try_apply(&self, x: &[f64]) -> Result<Vec<f64>, ImagingError> {
        self.check(x)?;
        Ok(self.apply(x))
    }

    pub fn try_adjoint(&self, x: &[f64]) -> Result<Vec<f64>, ImagingError> {
        self.check(x)?;
        Ok(self.adjoint(x))
    }

    fn check(&self, x: &[f64]) -> Result<(), ImagingError> {
        if x.len() == self.side * self.side {
            Ok(())
        } else {
            Err(ImagingError::SizeMismatch {
                expected: self.side * self.side,
                got: x.len(),
            })
        }
    }

    fn filter(&self, x: &[f64], conjugate: bool) -> Vec<f64> {
        let mut buf = self.fft.forward_real(x);
        for (b, t) in buf.iter_mut().zip(&self.transfer) {
            *b *= if conjugate { t.conj() } else { *t };
        }
        self.fft.inverse(&mut buf);
        buf.into_iter().map(|c| c.re).collect()
    }
}
