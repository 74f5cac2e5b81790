//! Discrete isotropic total variation on square row-major images.
//!
//! The gradient operator `D` uses forward differences with a zero
//! difference on the last column (horizontal) and last row (vertical), so
//! `TV(u) = sum_ij sqrt(Dh_ij^2 + Dv_ij^2)` and `|D|^2 <= 8`.

use super::PotentialError;

/// Upper bound on the squared operator norm of [`gradient`].
pub const GRADIENT_NORM_SQ_BOUND: f64 = 8.0;

/// Writes `Dh u` into `gh` and `Dv u` into `gv`.
pub fn gradient(u: &[f64], side: usize, gh: &mut [f64], gv: &mut [f64]) {
    debug_assert_eq!(u.len(), side * side);
    for i in 0..side {
        let row = i * side;
        for j in 0..side {
            let k = row + j;
            gh[k] = if j + 1 < side { u[k + 1] - u[k] } else { 0.0 };
            gv[k] = if i + 1 < side { u[k + side] - u[k] } else { 0.0 };
        }
    }
}

/// Writes `D^T (ph, pv)` into `out`.
pub fn gradient_adjoint(ph: &[f64], pv: &[f64], side: usize, out: &mut [f64]) {
    for i in 0..side {
        let row = i * side;
        for j in 0..side {
            let k = row + j;
            let mut acc = 0.0;
            if j + 1 < side {
                acc -= ph[k];
            }
            if j > 0 {
                acc += ph[k - 1];
            }
            if i + 1 < side {
                acc -= pv[k];
            }
            if i > 0 {
                acc += pv[k - side];
            }
            out[k] = acc;
        }
    }
}

/// Checked form of [`total_variation`].
pub fn tv(image: &[f64], side: usize) -> Result<f64, PotentialError> {
    if image.len() != side * side {
        return Err(PotentialError::DimensionMismatch {
            expected: side * side,
            got: image.len(),
        });
    }
    Ok(total_variation(image, side))
}

pub fn total_variation(u: &[f64], side: usize) -> f64 {
    let mut tv = 0.0;
    for i in 0..side {
        let row = i * side;
        for j in 0..side {
            let k = row + j;
            let dh = if j + 1 < side { u[k + 1] - u[k] } else { 0.0 };
            let dv = if i + 1 < side { u[k + side] - u[k] } else { 0.0 };
            tv += dh.hypot(dv);
        }
    }
    tv
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_examples() {
        assert_eq!(total_variation(&[0.0, 1.0, 0.0, 1.0], 2), 2.0);
        assert_eq!(total_variation(&[0.0, 0.0, 0.0, 1.0], 2), 2.0);
        assert_eq!(total_variation(&[3.0; 9], 3), 0.0);
        assert!(tv(&[0.0; 5], 2).is_err());
    }

    /// Interior isotropic terms plus anisotropic last row and last column,
    /// written out independently of the forward-difference loop above.
    fn tv_by_parts(u: &[f64], n: usize) -> f64 {
        let at = |i: usize, j: usize| u[i * n + j];
        let mut s = 0.0;
        for i in 0..n - 1 {
            for j in 0..n - 1 {
                let a = at(i + 1, j) - at(i, j);
                let b = at(i, j + 1) - at(i, j);
                s += (a * a + b * b).sqrt();
            }
        }
        for i in 0..n - 1 {
            s += (at(i + 1, n - 1) - at(i, n - 1)).abs();
        }
        for j in 0..n - 1 {
            s += (at(n - 1, j + 1) - at(n - 1, j)).abs();
        }
        s
    }

    proptest! {
        #[test]
        fn matches_interior_plus_boundary_form(
            n in 2usize..7,
            seed in prop::collection::vec(-5.0f64..5.0, 49),
        ) {
            let u = &seed[..n * n];
            let a = total_variation(u, n);
            let b = tv_by_parts(u, n);
            prop_assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }

        #[test]
        fn one_homogeneous(
            c in -10.0f64..10.0,
            data in prop::collection::vec(-5.0f64..5.0, 25),
        ) {
            let scaled: Vec<f64> = data.iter().map(|v| c * v).collect();
            let a = total_variation(&scaled, 5);
            let b = c.abs() * total_variation(&data, 5);
            prop_assert!((a - b).abs() <= 1e-10 * b.max(1.0));
        }

        #[test]
        fn adjoint_identity(
            n in 1usize..7,
            data in prop::collection::vec(-3.0f64..3.0, 3 * 49),
        ) {
            let m = n * n;
            let u = &data[..m];
            let ph = &data[49..49 + m];
            let pv = &data[98..98 + m];
            let mut gh = vec![0.0; m];
            let mut gv = vec![0.0; m];
            gradient(u, n, &mut gh, &mut gv);
            let mut dt = vec![0.0; m];
            gradient_adjoint(ph, pv, n, &mut dt);
            let lhs: f64 = gh.iter().zip(ph).map(|(a, b)| a * b).sum::<f64>()
                + gv.iter().zip(pv).map(|(a, b)| a * b).sum::<f64>();
            let rhs: f64 = u.iter().zip(&dt).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }

        #[test]
        fn operator_norm_bound(
            n in 1usize..7,
            data in prop::collection::vec(-3.0f64..3.0, 49),
        ) {
            let u = &data[..n * n];
            let mut gh = vec![0.0; n * n];
            let mut gv = vec![0.0; n * n];
            gradient(u, n, &mut gh, &mut gv);
            let dn: f64 = gh.iter().chain(&gv).map(|v| v * v).sum();
            let un: f64 = u.iter().map(|v| v * v).sum();
            prop_assert!(dn <= GRADIENT_NORM_SQ_BOUND * un + 1e-12);
        }
    }
}
