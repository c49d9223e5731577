use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthesis::{LinearSystem, RiccatiSolution};

const VALUE_TOL: f64 = 1e-3;
const GRADIENT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleSample {
    pub s0_norm: f64,
    /// `J(s0)` by trapezoid quadrature along the saddle trajectory.
    pub j: f64,
    /// `1/2 <s0, P s0>`.
    pub quadratic_value: f64,
    pub value_error: f64,
    /// `|grad J - P s0| / |P s0|` in the weighted norm.
    pub gradient_error: f64,
    pub bound_ok: bool,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleCostReport {
    /// `||P|| / 2 * 1.01`.
    pub k: f64,
    pub t_final: f64,
    pub dt: f64,
    pub samples: Vec<SaddleSample>,
    pub max_value_error: f64,
    pub max_gradient_error: f64,
    pub passed: bool,
}

/// Saddle cost `J(s0) = 1/2 int |Cs|^2 + |u|^2 - gamma^2 |w|^2 dt` under
/// `u = -B2* P s`, `w = gamma^-2 B1* P s`, for every column of the batch.
fn saddle_costs(sys: &LinearSystem, rs: &RiccatiSolution, batch: &DMatrix<f64>, t_final: f64, dt: f64) -> DMatrix<f64> {
    let w = &sys.weights;
    let k = &rs.gain;
    let l = rs.worst_case_gain(sys);
    let gamma2 = rs.gamma_used * rs.gamma_used;
    let weigh = |m: &DMatrix<f64>, wt: &crate::spatial::Weights| {
        let mut out = m.clone();
        for (i, mut row) in out.row_iter_mut().enumerate() {
            row *= wt.as_vector()[i];
        }
        m.transpose() * out
    };
    let q = weigh(&sys.c, &w.output) + weigh(k, &w.control) - weigh(&l, &w.disturbance) * gamma2;
    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let h = t_final / steps as f64;
    let phi = (rs.saddle_drift(sys) * h).exp();
    let integrand = |x: &DMatrix<f64>| {
        let qx = &q * x;
        DMatrix::from_fn(1, x.ncols(), |_, j| 0.5 * x.column(j).dot(&qx.column(j)))
    };
    let mut x = batch.clone();
    let mut prev = integrand(&x);
    let mut acc = DMatrix::zeros(1, batch.ncols());
    for _ in 0..steps {
        x = &phi * x;
        let cur = integrand(&x);
        acc += (&prev + &cur) * (0.5 * h);
        prev = cur;
    }
    acc
}

/// Checks `J(s0) = 1/2 <s0, P s0>`, `grad J(s0) = P s0` (central differences,
/// weighted gradient) and `J(s0) <= k |s0|^2` for each initial state.
pub fn saddle_cost_check(
    sys: &LinearSystem,
    rs: &RiccatiSolution,
    s0_list: &[DVector<f64>],
    t_final: f64,
    dt: f64,
) -> Result<SaddleCostReport> {
    if rs.saddle_abscissa >= 0.0 {
        return Err(Error::SaddleUnstable(rs.saddle_abscissa));
    }
    let n = sys.state_dim();
    let wt = &sys.weights.state;
    let k = rs.p_operator_norm() / 2.0 * 1.01;
    let mut samples = Vec::with_capacity(s0_list.len());
    for s0 in s0_list {
        crate::error::check_len(n, s0.len(), "saddle initial state")?;
        let scale = s0.amax().max(1e-3);
        let h = 1e-3 * scale;
        let mut batch = DMatrix::zeros(n, 2 * n + 1);
        batch.set_column(0, s0);
        for i in 0..n {
            let mut plus = s0.clone();
            plus[i] += h;
            let mut minus = s0.clone();
            minus[i] -= h;
            batch.set_column(1 + 2 * i, &plus);
            batch.set_column(2 + 2 * i, &minus);
        }
        let costs = saddle_costs(sys, rs, &batch, t_final, dt);
        let j = costs[(0, 0)];
        let euclid_grad = DVector::from_fn(n, |i, _| (costs[(0, 1 + 2 * i)] - costs[(0, 2 + 2 * i)]) / (2.0 * h));
        let grad = euclid_grad.component_div(wt.as_vector());
        let ps = &rs.p * s0;
        let quadratic_value = 0.5 * wt.inner_unchecked(s0, &ps);
        let s0_norm = wt.norm(s0);
        let (value_error, gradient_error) = if s0_norm == 0.0 {
            (j.abs(), wt.norm(&grad))
        } else {
            (
                (j - quadratic_value).abs() / quadratic_value.abs().max(f64::MIN_POSITIVE),
                wt.norm(&(&grad - &ps)) / wt.norm(&ps).max(f64::MIN_POSITIVE),
            )
        };
        let bound_ok = j <= k * s0_norm * s0_norm + 1e-15;
        samples.push(SaddleSample {
            s0_norm,
            j,
            quadratic_value,
            value_error,
            gradient_error,
            bound_ok,
            passed: value_error <= VALUE_TOL && gradient_error <= GRADIENT_TOL && bound_ok,
        });
    }
    let max_value_error = samples.iter().map(|s| s.value_error).fold(0.0, f64::max);
    let max_gradient_error = samples.iter().map(|s| s.gradient_error).fold(0.0, f64::max);
    Ok(SaddleCostReport {
        k,
        t_final,
        dt,
        passed: samples.iter().all(|s| s.passed),
        samples,
        max_value_error,
        max_gradient_error,
    })
}
