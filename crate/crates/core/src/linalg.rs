//! Small dense complex linear-algebra helpers shared by the model layers.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Resolvents whose 1-norm condition number exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// Maximum absolute column sum.
pub fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn diag_real(values: &[f64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(values[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

pub fn diag_complex(values: &[C64]) -> CMatrix {
    let n = values.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { values[i] } else { C64::new(0.0, 0.0) })
}

/// Inverts `m` by LU and returns the inverse with its 1-norm condition number.
///
/// Fails with [`Error::SingularResolvent`] when the factorization breaks down
/// or the condition number exceeds [`MAX_CONDITION`].
pub fn inverse_checked(m: &CMatrix) -> Result<(CMatrix, f64)> {
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or(Error::SingularResolvent {
            condition: f64::INFINITY,
        })?;
    let condition = one_norm(m) * one_norm(&inv);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::SingularResolvent { condition });
    }
    Ok((inv, condition))
}

pub fn all_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Singular values sorted in descending order.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    let mut sv: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Largest eigenvalue magnitude, from the complex Schur form.
pub fn spectral_radius(m: &CMatrix) -> f64 {
    let schur = m.clone().schur();
    let (_, t) = schur.unpack();
    (0..t.nrows()).map(|i| t[(i, i)].norm()).fold(0.0, f64::max)
}

/// Frobenius distance of `a` from `b`, relative to `|b|_F` (absolute when `b = 0`).
pub fn rel_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    let d = frobenius_sq(&(a - b)).sqrt();
    let scale = frobenius_sq(b).sqrt();
    if scale > 0.0 {
        d / scale
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_identity_has_unit_condition() {
        let (inv, cond) = inverse_checked(&CMatrix::identity(4, 4)).unwrap();
        assert_eq!(inv, CMatrix::identity(4, 4));
        assert!((cond - 1.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = CMatrix::from_element(3, 3, C64::new(1.0, 0.0));
        assert!(matches!(
            inverse_checked(&m),
            Err(Error::SingularResolvent { .. })
        ));
    }

    #[test]
    fn spectral_radius_of_diagonal() {
        let d = diag_complex(&[C64::new(0.3, 0.4), C64::new(-0.2, 0.0)]);
        assert!((spectral_radius(&d) - 0.5).abs() < 1e-12);
    }
}
