use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LinearSystem;
use crate::error::{Error, Result};
use crate::linalg::{complex_schur, gershgorin_bound, singular_values_complex, to_complex, C64};

/// Modes with real part at or above this are tested.
const UNSTABLE_TOL: f64 = -1e-12;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbhMode {
    pub re: f64,
    pub im: f64,
    pub sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbhReport {
    pub stabilizable: bool,
    pub detectable: bool,
    pub checked_modes: usize,
    pub unstabilizable_modes: Vec<PbhMode>,
    pub undetectable_modes: Vec<PbhMode>,
}

impl PbhReport {
    pub fn into_result(self) -> Result<Self> {
        let pairs = |v: &[PbhMode]| v.iter().map(|m| (m.re, m.im)).collect::<Vec<_>>();
        if !self.stabilizable {
            Err(Error::NotStabilizable(pairs(&self.unstabilizable_modes)))
        } else if !self.detectable {
            Err(Error::NotDetectable(pairs(&self.undetectable_modes)))
        } else {
            Ok(self)
        }
    }
}

/// Popov-Belevitch-Hautus test at every eigenvalue of the drift with
/// nonnegative real part, in folded (Euclidean) coordinates.
pub fn check_stabilizability_detectability(sys: &LinearSystem) -> Result<PbhReport> {
    let f = sys.folded();
    let n = f.a.nrows();
    let (_, t) = complex_schur(&f.a)?;
    let tol = RANK_TOL * gershgorin_bound(&f.a).max(1.0);
    let a = to_complex(&f.a);
    let b = to_complex(&f.b2);
    let c = to_complex(&f.c);
    let mut report = PbhReport {
        stabilizable: true,
        detectable: true,
        checked_modes: 0,
        unstabilizable_modes: Vec::new(),
        undetectable_modes: Vec::new(),
    };
    for i in 0..n {
        let lambda = t[(i, i)];
        if lambda.re < UNSTABLE_TOL {
            continue;
        }
        report.checked_modes += 1;
        let shifted = &a - DMatrix::<C64>::identity(n, n) * lambda;

        let mut ctrl = DMatrix::<C64>::zeros(n, n + b.ncols());
        ctrl.view_mut((0, 0), (n, n)).copy_from(&shifted);
        ctrl.view_mut((0, n), (n, b.ncols())).copy_from(&b);
        let s_ctrl = singular_values_complex(&ctrl).min();
        if !(s_ctrl > tol) {
            report.stabilizable = false;
            report.unstabilizable_modes.push(PbhMode {
                re: lambda.re,
                im: lambda.im,
                sigma_min: s_ctrl,
            });
        }

        let mut obs = DMatrix::<C64>::zeros(n + c.nrows(), n);
        obs.view_mut((0, 0), (n, n)).copy_from(&shifted);
        obs.view_mut((n, 0), (c.nrows(), n)).copy_from(&c);
        let s_obs = singular_values_complex(&obs).min();
        if !(s_obs > tol) {
            report.detectable = false;
            report.undetectable_modes.push(PbhMode {
                re: lambda.re,
                im: lambda.im,
                sigma_min: s_obs,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::ModelParams;
    use crate::spatial::{build_grid, build_io_operators, GridSpec, IoLayout, Weights};
    use crate::synthesis::{assemble_linearization, SpaceWeights};

    #[test]
    fn identity_mode_passes() {
        for (dim, n) in [(1, 9), (2, 5)] {
            let disc = build_grid(GridSpec::new(dim, 1.0, n).unwrap()).unwrap();
            let io = build_io_operators(&disc, &IoLayout::identity()).unwrap();
            let params = ModelParams::new(0.01, 1.0, 1.0, 2.0).unwrap();
            let sys = assemble_linearization(&disc, &params, &io).unwrap();
            let r = check_stabilizability_detectability(&sys).unwrap();
            assert!(r.stabilizable && r.detectable);
            assert!(r.checked_modes >= 1);
        }
    }

    #[test]
    fn antisymmetric_actuator_misses_constant_mode() {
        let disc = build_grid(GridSpec::new(1, 1.0, 2).unwrap()).unwrap();
        let params = ModelParams::new(0.1, 1.0, 1.0, 2.0).unwrap();
        let drift = &disc.laplacian * -params.diffusion + DMatrix::identity(2, 2) * params.growth;
        let b2 = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let eye = DMatrix::identity(2, 2);
        let w = SpaceWeights {
            state: disc.weights.clone(),
            disturbance: disc.weights.clone(),
            control: Weights::unit(1),
            output: disc.weights.clone(),
        };
        let sys = LinearSystem::new(drift, eye.clone(), b2, eye, 2.0, w).unwrap();
        let r = check_stabilizability_detectability(&sys).unwrap();
        assert!(!r.stabilizable);
        assert!(r.detectable);
        let bad = &r.unstabilizable_modes[0];
        assert!((bad.re - 1.0).abs() < 1e-12 && bad.sigma_min < 1e-12);
        assert!(matches!(r.into_result(), Err(Error::NotStabilizable(_))));
    }

    #[test]
    fn zero_output_is_undetectable() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let sys = LinearSystem::euclidean(one.clone(), one.clone(), one, DMatrix::zeros(1, 1), 2.0).unwrap();
        let r = check_stabilizability_detectability(&sys).unwrap();
        assert!(!r.detectable && r.stabilizable);
        assert!(matches!(r.into_result(), Err(Error::NotDetectable(_))));
    }
}
