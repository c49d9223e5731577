use serde::{Deserialize, Serialize};

use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::linalg::spectral_norm;
use crate::spatial::fold_operator;
use crate::synthesis::{LinearSystem, RiccatiSolution};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecrementReport {
    pub samples: usize,
    /// Largest `|dV/dt - rhs|` (identity form) or `max(dV/dt - bound, 0)`
    /// (inequality form, when the run was disturbed).
    pub max_identity_violation: f64,
    /// Largest violation divided by its per-sample allowance.
    pub worst_relative_violation: f64,
    /// Smallest `-rhs / |s|^2` over samples with nonzero state.
    pub m_est: f64,
    pub inequality_mode: bool,
    pub passed: bool,
}

/// Compares the central-difference derivative of `V = 1/2 <s, P s>` along a
/// linear closed-loop trajectory with the decrement identity
/// `dV/dt = -1/2 |B2* P s|^2 - 1/2 gamma^-2 |B1* P s|^2 - 1/2 |C s|^2`.
///
/// Disturbed runs are checked against the completed-square bound
/// `dV/dt <= 1/2 gamma^2 |w|^2 - 1/2 |C s|^2 - 1/2 |u|^2` instead. Each
/// sample is allowed `10 dt ||A_cl||^2 ||P|| |s|^2`.
pub fn lyapunov_decrement_check(traj: &Trajectory, sys: &LinearSystem, rs: &RiccatiSolution) -> Result<DecrementReport> {
    if !traj.linear {
        return Err(Error::NonlinearTrajectoryRejected);
    }
    if traj.states.len() != traj.len() {
        return Err(Error::InvalidParams("decrement check needs recorded states".into()));
    }
    let w = &sys.weights;
    let gamma2 = rs.gamma_used * rs.gamma_used;
    let b1a = sys.b1_adjoint();
    let b2a = sys.b2_adjoint();
    let inequality_mode = traj.w2.iter().any(|x| *x > 0.0);
    let a_cl = fold_operator(&rs.closed_loop_drift(sys), &w.state, &w.state);
    let allowance = 10.0 * traj.dt * spectral_norm(&a_cl).powi(2) * rs.p_operator_norm();

    let mut max_violation: f64 = 0.0;
    let mut worst_relative: f64 = 0.0;
    let mut m_est = f64::INFINITY;
    let mut samples = 0;
    for k in 1..traj.len().saturating_sub(1) {
        let h = traj.times[k + 1] - traj.times[k - 1];
        let dv = (traj.v[k + 1] - traj.v[k - 1]) / h;
        let s = &traj.states[k];
        let ps = &rs.p * s;
        let s2 = w.state.norm_sq(s);
        let ident = -0.5 * w.control.norm_sq(&(&b2a * &ps))
            - 0.5 * w.disturbance.norm_sq(&(&b1a * &ps)) / gamma2
            - 0.5 * traj.y2[k];
        let violation = if inequality_mode {
            let bound = 0.5 * gamma2 * traj.w2[k] - 0.5 * traj.y2[k] - 0.5 * traj.u2[k];
            (dv - bound).max(0.0)
        } else {
            (dv - ident).abs()
        };
        max_violation = max_violation.max(violation);
        let allowed = allowance * s2 + 1e-14;
        worst_relative = worst_relative.max(violation / allowed);
        if s2 > 0.0 {
            m_est = m_est.min(-ident / s2);
        }
        samples += 1;
    }
    if m_est == f64::INFINITY {
        m_est = 0.0;
    }
    let zero_run = traj.norm_s.iter().all(|x| *x == 0.0);
    Ok(DecrementReport {
        samples,
        max_identity_violation: max_violation,
        worst_relative_violation: worst_relative,
        m_est,
        inequality_mode,
        passed: worst_relative <= 1.0 && (m_est > 0.0 || zero_run),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecrementOrder {
    pub coarse: DecrementReport,
    pub fine: DecrementReport,
    /// `log2(coarse / fine)` of the max violations.
    pub observed_order: f64,
    pub passed: bool,
}

/// Two-run order check: halving `dt` should roughly halve the violation.
pub fn decrement_order(coarse: DecrementReport, fine: DecrementReport) -> DecrementOrder {
    let observed_order = (coarse.max_identity_violation / fine.max_identity_violation).log2();
    let passed = coarse.passed && fine.passed && (0.8..=1.2).contains(&observed_order);
    DecrementOrder {
        coarse,
        fine,
        observed_order,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{make_disturbance, simulate, Controller, DisturbanceSignal, DisturbanceSpec, ModelParams, Plant, Scheme, SimOptions};
    use crate::synthesis::{scalar_test_system, solve_h_infinity_riccati};
    use nalgebra::DVector;

    fn scalar_run(dt: f64, spec: Option<DisturbanceSpec>) -> (LinearSystem, RiccatiSolution, Trajectory) {
        scalar_run_with(dt, spec, Scheme::ImexEuler)
    }

    fn scalar_run_with(dt: f64, spec: Option<DisturbanceSpec>, scheme: Scheme) -> (LinearSystem, RiccatiSolution, Trajectory) {
        let sys = scalar_test_system(2.0);
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let plant = Plant::new(sys.clone(), ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap());
        let mut opts = SimOptions::new(3.0, dt, scheme);
        opts.linear_only = true;
        let mut w = match spec {
            Some(s) => make_disturbance(&s, &sys, Some(&rs), dt).unwrap(),
            None => DisturbanceSignal::zero(1),
        };
        let traj = simulate(&plant, &DVector::from_element(1, 1.0), &Controller::linear(&rs), &mut w, &opts, Some(&rs)).unwrap();
        (sys, rs, traj)
    }

    #[test]
    fn scalar_identity_holds() {
        // first-order splitting error of the IMEX run
        let (sys, rs, traj) = scalar_run(1e-4, None);
        let imex = lyapunov_decrement_check(&traj, &sys, &rs).unwrap();
        assert!(imex.passed, "{imex:?}");
        assert!(imex.max_identity_violation < 2e-3, "{}", imex.max_identity_violation);

        let (sys, rs, traj) = scalar_run_with(1e-4, None, Scheme::Rk4Explicit);
        let rep = lyapunov_decrement_check(&traj, &sys, &rs).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(!rep.inequality_mode);
        assert!(rep.max_identity_violation < 1e-3, "{}", rep.max_identity_violation);
        let p = rs.p[(0, 0)];
        let m = 0.5 * (p * p + 0.25 * p * p + 1.0);
        assert!((rep.m_est - m).abs() < 1e-9);
    }

    #[test]
    fn violation_is_first_order() {
        let coarse = {
            let (sys, rs, traj) = scalar_run(2e-3, None);
            lyapunov_decrement_check(&traj, &sys, &rs).unwrap()
        };
        let fine = {
            let (sys, rs, traj) = scalar_run(1e-3, None);
            lyapunov_decrement_check(&traj, &sys, &rs).unwrap()
        };
        let order = decrement_order(coarse, fine);
        assert!(order.passed, "{order:?}");
    }

    #[test]
    fn disturbed_run_uses_inequality() {
        let (sys, rs, traj) = scalar_run(1e-3, Some(DisturbanceSpec::sinusoid(0.5, 2.0)));
        let rep = lyapunov_decrement_check(&traj, &sys, &rs).unwrap();
        assert!(rep.inequality_mode);
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn zero_trajectory_has_no_violation() {
        let sys = scalar_test_system(2.0);
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let plant = Plant::new(sys.clone(), ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap());
        let mut opts = SimOptions::new(1.0, 1e-2, Scheme::ImexEuler);
        opts.linear_only = true;
        let traj = simulate(&plant, &DVector::zeros(1), &Controller::linear(&rs), &mut DisturbanceSignal::zero(1), &opts, Some(&rs)).unwrap();
        let rep = lyapunov_decrement_check(&traj, &sys, &rs).unwrap();
        assert_eq!(rep.max_identity_violation, 0.0);
        assert!(rep.passed);
    }

    #[test]
    fn nonlinear_run_rejected() {
        let (sys, rs, mut traj) = scalar_run(1e-2, None);
        traj.linear = false;
        assert_eq!(lyapunov_decrement_check(&traj, &sys, &rs).unwrap_err(), Error::NonlinearTrajectoryRejected);
    }
}
