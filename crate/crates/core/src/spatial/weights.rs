use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Result};

/// Diagonal quadrature weights defining a weighted inner product.
///
/// Channel spaces use unit weights; the state space uses trapezoid weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights(DVector<f64>);

impl Weights {
    /// Panics if any weight is not strictly positive.
    pub fn new(w: DVector<f64>) -> Self {
        assert!(
            w.iter().all(|x| *x > 0.0 && x.is_finite()),
            "weights must be positive"
        );
        Self(w)
    }

    pub fn unit(n: usize) -> Self {
        Self(DVector::from_element(n, 1.0))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.sum()
    }

    pub fn inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        check_len(self.len(), u.len(), "inner product lhs")?;
        check_len(self.len(), v.len(), "inner product rhs")?;
        Ok(self.inner_unchecked(u, v))
    }

    pub(crate) fn inner_unchecked(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        self.0
            .iter()
            .zip(u.iter().zip(v.iter()))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    pub fn norm_sq(&self, u: &DVector<f64>) -> f64 {
        self.inner_unchecked(u, u)
    }

    pub fn norm(&self, u: &DVector<f64>) -> f64 {
        self.norm_sq(u).sqrt()
    }

    pub fn sqrt(&self) -> DVector<f64> {
        self.0.map(f64::sqrt)
    }

    /// `W^{1/2} v`, mapping into Euclidean coordinates.
    pub fn fold(&self, v: &DVector<f64>) -> DVector<f64> {
        v.component_mul(&self.sqrt())
    }

    /// `W^{-1/2} v`.
    pub fn unfold(&self, v: &DVector<f64>) -> DVector<f64> {
        v.component_div(&self.sqrt())
    }
}

/// Adjoint of `m: (domain, W_in) -> (codomain, W_out)`: `W_in^{-1} m^T W_out`.
pub fn adjoint(m: &DMatrix<f64>, domain: &Weights, codomain: &Weights) -> DMatrix<f64> {
    let mut adj = m.transpose();
    for (j, mut col) in adj.column_iter_mut().enumerate() {
        col *= codomain.0[j];
    }
    for (i, mut row) in adj.row_iter_mut().enumerate() {
        row /= domain.0[i];
    }
    adj
}

/// `W_out^{1/2} m W_in^{-1/2}`: the Euclidean representative of a weighted operator.
pub fn fold_operator(m: &DMatrix<f64>, domain: &Weights, codomain: &Weights) -> DMatrix<f64> {
    let sin = domain.sqrt();
    let sout = codomain.sqrt();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| sout[i] * m[(i, j)] / sin[j])
}

/// Inverse of [`fold_operator`].
pub fn unfold_operator(m: &DMatrix<f64>, domain: &Weights, codomain: &Weights) -> DMatrix<f64> {
    let sin = domain.sqrt();
    let sout = codomain.sqrt();
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * sin[j] / sout[i])
}
