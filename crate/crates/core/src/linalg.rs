//! Dense linear-algebra kernels shared by the synthesis and verification code.
//!
//! Everything here works on small dense matrices (a few hundred rows at most).
//! Non-symmetric eigenproblems go through the complex Schur form, which keeps
//! the triangular solves free of 2x2 blocks.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub fn to_complex(a: &DMatrix<f64>) -> DMatrix<C64> {
    a.map(|x| C64::new(x, 0.0))
}

/// Complex Schur form `a = u * t * u^H` with `t` upper triangular.
pub fn complex_schur(a: &DMatrix<f64>) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let schur = Schur::try_new(to_complex(a), 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("Schur iteration did not converge".into()))?;
    let (u, mut t) = schur.unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((u, t))
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<C64>> {
    let (_, t) = complex_schur(a)?;
    Ok((0..a.nrows()).map(|i| t[(i, i)]).collect())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &DMatrix<f64>) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> DVector<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(symmetrize(a)).eigenvalues.iter().copied().collect();
    v.sort_by(|x, y| x.total_cmp(y));
    DVector::from_vec(v)
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Maximum absolute row sum; bounds every eigenvalue modulus.
pub fn gershgorin_bound(a: &DMatrix<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    SVD::new(a.clone(), false, false).singular_values.max()
}

pub fn singular_values_complex(m: &DMatrix<C64>) -> DVector<f64> {
    if m.is_empty() {
        return DVector::zeros(0);
    }
    SVD::new(m.clone(), false, false).singular_values
}

/// Solves `a^T x + x a + q = 0` by Bartels-Stewart on the complex Schur form.
///
/// Requires `conj(l_i) + l_j != 0` for every eigenvalue pair, which holds when
/// `a` is Hurwitz.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let (u, t) = complex_schur(a)?;
    let qh = u.adjoint() * to_complex(q) * &u;
    let mut y = DMatrix::<C64>::zeros(n, n);
    let scale = t.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1.0);
    for i in 0..n {
        for j in 0..n {
            let mut acc = -qh[(i, j)];
            for k in 0..i {
                acc -= t[(k, i)].conj() * y[(k, j)];
            }
            for k in 0..j {
                acc -= y[(i, k)] * t[(k, j)];
            }
            let denom = t[(i, i)].conj() + t[(j, j)];
            if denom.norm() <= 1e-14 * scale {
                return Err(Error::Numerical(format!(
                    "Lyapunov operator singular (eigenvalue sum {:e})",
                    denom.norm()
                )));
            }
            y[(i, j)] = acc / denom;
        }
    }
    let x = &u * y * u.adjoint();
    Ok(symmetrize(&x.map(|z| z.re)))
}

/// Matrix sign function by the scaled Newton iteration.
///
/// Fails when an iterate becomes singular or the iteration stalls, both of
/// which indicate eigenvalues on (or numerically at) the imaginary axis.
pub fn matrix_sign(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.nrows();
    let mut z = h.clone();
    let mut scaling = true;
    let mut last_diff = f64::INFINITY;
    for _ in 0..200 {
        let lu = z.clone().lu();
        let u = lu.u();
        let mut logdet = 0.0;
        for i in 0..n {
            let d = u[(i, i)].abs();
            if d == 0.0 || !d.is_finite() {
                return Err(Error::Numerical("sign iteration hit a singular iterate".into()));
            }
            logdet += d.ln();
        }
        let inv = lu
            .try_inverse()
            .ok_or_else(|| Error::Numerical("sign iteration hit a singular iterate".into()))?;
        let c = if scaling { (-logdet / n as f64).exp() } else { 1.0 };
        let next = (&z * c + inv / c) * 0.5;
        let diff = (&next - &z).norm() / next.norm();
        z = next;
        if !diff.is_finite() {
            return Err(Error::Numerical("sign iteration diverged".into()));
        }
        if diff < 1e-2 {
            scaling = false;
        }
        if diff < 1e-14 || (diff < 1e-9 && diff >= last_diff) {
            return Ok(z);
        }
        last_diff = diff;
    }
    Err(Error::Numerical("sign iteration did not converge".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[
                -3.0, 2.0, 0.5, 0.0, -2.0, -1.0, 0.1, 0.0, 0.0, 0.3, -2.0, 4.0, 1.0, 0.0, -4.0, -1.5,
            ],
        )
    }

    #[test]
    fn lyapunov_residual_is_small() {
        let a = test_matrix();
        assert!(spectral_abscissa(&a).unwrap() < 0.0);
        let q = DMatrix::identity(4, 4);
        let x = solve_lyapunov(&a, &q).unwrap();
        let res = a.transpose() * &x + &x * &a + &q;
        assert!(res.norm() < 1e-12, "{}", res.norm());
        assert!(sym_eigenvalues(&x)[0] > 0.0);
    }

    #[test]
    fn lyapunov_scalar() {
        let a = DMatrix::from_element(1, 1, -2.0);
        let q = DMatrix::from_element(1, 1, 1.0);
        let x = solve_lyapunov(&a, &q).unwrap();
        assert!((x[(0, 0)] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sign_of_diagonalizable_matrix() {
        let a = test_matrix();
        let s = matrix_sign(&a).unwrap();
        // a is Hurwitz so sign(a) = -I
        assert!((s + DMatrix::<f64>::identity(4, 4)).norm() < 1e-12);
        let mixed = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, -1.0]);
        let s = matrix_sign(&mixed).unwrap();
        assert!((&s * &s - DMatrix::<f64>::identity(2, 2)).norm() < 1e-12);
        assert!((s[(1, 0)] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn sign_rejects_imaginary_axis() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matrix_sign(&rot).is_err());
    }

    #[test]
    fn schur_eigenvalues_of_rotation() {
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let mut ev = eigenvalues(&rot).unwrap();
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0].im + 2.0).abs() < 1e-12 && ev[0].re.abs() < 1e-12);
    }
}
