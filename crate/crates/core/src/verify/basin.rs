use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, Controller, DisturbanceSignal, Plant, Scheme, SimOptions};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Converged,
    Diverged,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinPoint {
    pub amplitude: f64,
    pub verdict: Verdict,
    pub final_norm: f64,
    pub max_sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinReport {
    pub points: Vec<BasinPoint>,
    /// Largest amplitude such that it and every smaller amplitude converged.
    pub empirical_critical_amplitude: Option<f64>,
    pub certified_threshold: Option<f64>,
    /// `certified_threshold <= empirical_critical_amplitude` whenever some
    /// amplitude at or above the threshold was tested.
    pub conservative: bool,
    pub t_final: f64,
    pub tol_rel: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasinOptions {
    pub t_final: f64,
    pub dt: f64,
    pub scheme: Scheme,
    /// Convergence means `|s(T)| < tol_rel |s0|`.
    pub tol_rel: f64,
}

/// Simulates the nonlinear loop from `amplitude * shape / |shape|` for every
/// amplitude (ascending). A run diverges if `|s(T)| > S / 2`; runs whose state
/// blows up are stopped early and also count as diverged.
pub fn basin_sweep(
    plant: &Plant,
    controller: &Controller,
    shape: &DVector<f64>,
    amplitudes: &[f64],
    opts: &BasinOptions,
    certified_threshold: Option<f64>,
) -> Result<BasinReport> {
    if amplitudes.windows(2).any(|p| p[1] < p[0]) {
        return Err(Error::InvalidParams("basin amplitudes must be sorted ascending".into()));
    }
    let norm = plant.sys.weights.state.norm(shape);
    if !(norm > 0.0) {
        return Err(Error::InvalidParams("basin shape must be nonzero".into()));
    }
    let unit = shape / norm;
    let half_sat = 0.5 * plant.params.saturation;
    let mut sim = SimOptions::new(opts.t_final, opts.dt, opts.scheme);
    sim.record_states = false;
    sim.sample_stride = usize::MAX;

    let points: Vec<BasinPoint> = amplitudes
        .par_iter()
        .map(|&amplitude| {
            if amplitude == 0.0 {
                return Ok(BasinPoint {
                    amplitude,
                    verdict: Verdict::Converged,
                    final_norm: 0.0,
                    max_sup_norm: 0.0,
                });
            }
            let s0 = &unit * amplitude;
            let mut run = sim.clone();
            run.abort_above = Some(1e3 * plant.params.saturation.max(s0.amax()));
            let mut w = DisturbanceSignal::zero(plant.sys.b1.ncols());
            let traj = match simulate(plant, &s0, controller, &mut w, &run, None) {
                Ok(t) => t,
                Err(Error::NonFiniteState { .. }) => {
                    return Ok(BasinPoint {
                        amplitude,
                        verdict: Verdict::Diverged,
                        final_norm: f64::INFINITY,
                        max_sup_norm: f64::INFINITY,
                    })
                }
                Err(e) => return Err(e),
            };
            let final_norm = plant.sys.weights.state.norm(&traj.final_state);
            let verdict = if traj.aborted || final_norm > half_sat {
                Verdict::Diverged
            } else if final_norm < opts.tol_rel * amplitude.abs() {
                Verdict::Converged
            } else {
                Verdict::Inconclusive
            };
            Ok(BasinPoint {
                amplitude,
                verdict,
                final_norm,
                max_sup_norm: traj.max_sup_norm,
            })
        })
        .collect::<Result<_>>()?;

    let empirical_critical_amplitude = points
        .iter()
        .take_while(|p| p.verdict == Verdict::Converged)
        .last()
        .map(|p| p.amplitude);
    let conservative = match certified_threshold {
        None => points.iter().all(|p| p.verdict == Verdict::Converged),
        Some(t) => {
            let below_ok = points
                .iter()
                .filter(|p| p.amplitude < t)
                .all(|p| p.verdict == Verdict::Converged);
            let reach = empirical_critical_amplitude.is_some_and(|c| c >= t)
                || !points.iter().any(|p| p.amplitude >= t);
            below_ok && reach
        }
    };
    Ok(BasinReport {
        points,
        empirical_critical_amplitude,
        certified_threshold,
        conservative,
        t_final: opts.t_final,
        tol_rel: opts.tol_rel,
    })
}
