//! Numerical certificates for the closed loop: gain bounds, the Lyapunov
//! decrement, the contraction constants, basin sweeps, the saddle cost and
//! the Hamilton-Jacobi residual slopes.

mod basin;
mod certificate;
mod decrement;
mod gain;
mod saddle;

pub use basin::{basin_sweep, BasinOptions, BasinPoint, BasinReport, Verdict};
pub use certificate::{contraction_certificate, Certificate};
pub use decrement::{decrement_order, lyapunov_decrement_check, DecrementOrder, DecrementReport};
pub use gain::{
    closed_loop_hinf_norm, default_ensemble, default_frequencies, empirical_l2_gain, frequency_response,
    EmpiricalGain, EnsembleSample, GainEstimate, GainMethod,
};
pub use saddle::{saddle_cost_check, SaddleCostReport, SaddleSample};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::ModelParams;
use crate::error::Result;
use crate::synthesis::{hj_quadratic_correction, residual_ladder, HjRepresentation, LinearSystem, ResidualLadder, RiccatiSolution};

/// Expected slopes of the residual ladder and their tolerances.
pub const LINEAR_SLOPE: (f64, f64) = (3.0, 0.1);
pub const CORRECTED_SLOPE: (f64, f64) = (4.0, 0.15);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjSlopeReport {
    pub linear: ResidualLadder,
    pub corrected: ResidualLadder,
    pub passed: bool,
}

/// Log-spaced scales `1e-1 ... 1e-4`.
pub fn default_scales() -> Vec<f64> {
    (0..7).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect()
}

/// Residual ladders for `G = P s` and for `G = P s + G2(s)` along `alpha * s0`.
pub fn hj_slope_check(
    sys: &LinearSystem,
    params: &ModelParams,
    rs: &RiccatiSolution,
    s0: &DVector<f64>,
    scales: &[f64],
) -> Result<HjSlopeReport> {
    let linear = residual_ladder(sys, params, &HjRepresentation::linear(sys, rs), s0, scales)?;
    let g = hj_quadratic_correction(sys, params, rs)?;
    let corrected = residual_ladder(sys, params, &g, s0, scales)?;
    let passed = (linear.slope - LINEAR_SLOPE.0).abs() <= LINEAR_SLOPE.1
        && (corrected.slope - CORRECTED_SLOPE.0).abs() <= CORRECTED_SLOPE.1;
    Ok(HjSlopeReport {
        linear,
        corrected,
        passed,
    })
}
