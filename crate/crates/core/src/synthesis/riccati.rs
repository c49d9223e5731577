use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use super::{check_stabilizability_detectability, FoldedSystem, LinearSystem};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, matrix_sign, solve_lyapunov, spectral_abscissa, sym_eigenvalues, symmetrize};
use crate::spatial::unfold_operator;

/// Hamiltonian eigenvalues closer than this (relative) to the imaginary axis
/// mark gamma as infeasible.
const AXIS_TOL: f64 = 1e-9;
const MAX_NEWTON_SWEEPS: usize = 5;

#[derive(Debug, Clone)]
pub struct RiccatiSolution {
    pub gamma_used: f64,
    /// `P` as an operator on the weighted state space.
    pub p: DMatrix<f64>,
    /// Euclidean representative `W^{1/2} P W^{-1/2}`; symmetric.
    pub p_folded: DMatrix<f64>,
    /// `K = B2* P`, so `u = -K s`.
    pub gain: DMatrix<f64>,
    /// `||Res||_F / (1 + ||P||_F^2)` in folded coordinates.
    pub residual_norm: f64,
    pub closed_loop_abscissa: f64,
    pub saddle_abscissa: f64,
    pub newton_sweeps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiccatiReport {
    pub gamma_used: f64,
    pub residual_norm: f64,
    pub closed_loop_abscissa: f64,
    pub saddle_abscissa: f64,
    #[serde(rename = "P_frobenius")]
    pub p_frobenius: f64,
    pub gain_frobenius: f64,
}

impl RiccatiSolution {
    pub fn report(&self) -> RiccatiReport {
        RiccatiReport {
            gamma_used: self.gamma_used,
            residual_norm: self.residual_norm,
            closed_loop_abscissa: self.closed_loop_abscissa,
            saddle_abscissa: self.saddle_abscissa,
            p_frobenius: self.p_folded.norm(),
            gain_frobenius: self.gain.norm(),
        }
    }

    /// `A_d - B2 B2* P`.
    pub fn closed_loop_drift(&self, sys: &LinearSystem) -> DMatrix<f64> {
        &sys.drift - &sys.b2 * &self.gain
    }

    /// `A_d - (B2 B2* - gamma^-2 B1 B1*) P`.
    pub fn saddle_drift(&self, sys: &LinearSystem) -> DMatrix<f64> {
        self.closed_loop_drift(sys) + &sys.b1 * self.worst_case_gain(sys)
    }

    /// `gamma^-2 B1* P`, the worst-case disturbance law `w = gamma^-2 B1* P s`.
    pub fn worst_case_gain(&self, sys: &LinearSystem) -> DMatrix<f64> {
        sys.b1_adjoint() * &self.p / (self.gamma_used * self.gamma_used)
    }

    /// `V(s) = 1/2 <s, P s>`.
    pub fn value(&self, sys: &LinearSystem, s: &DVector<f64>) -> f64 {
        0.5 * sys.weights.state.inner_unchecked(s, &(&self.p * s))
    }

    /// Largest eigenvalue of `P`, its operator norm on the weighted space.
    pub fn p_operator_norm(&self) -> f64 {
        let ev = sym_eigenvalues(&self.p_folded);
        ev[ev.len() - 1].max(-ev[0])
    }
}

/// Closed-over linear feedback `u(s) = -K s`.
#[derive(Debug, Clone)]
pub struct FeedbackGain {
    pub k: DMatrix<f64>,
}

impl FeedbackGain {
    pub fn apply(&self, s: &DVector<f64>) -> DVector<f64> {
        -(&self.k * s)
    }
}

pub fn feedback_gain(rs: &RiccatiSolution) -> FeedbackGain {
    FeedbackGain { k: rs.gain.clone() }
}

fn infeasible(gamma: f64, reason: impl Into<String>) -> Error {
    Error::GammaInfeasible {
        gamma,
        reason: reason.into(),
    }
}

fn are_residual(f: &FoldedSystem, q: &DMatrix<f64>, r: &DMatrix<f64>, p: &DMatrix<f64>) -> DMatrix<f64> {
    let ap = f.a.transpose() * p;
    &ap + ap.transpose() + q - p * r * p
}

/// Solves `A^T P + P A + C*C + P (gamma^-2 B1 B1* - B2 B2*) P = 0` for the
/// stabilizing solution, after checking stabilizability and detectability.
pub fn solve_h_infinity_riccati(sys: &LinearSystem) -> Result<RiccatiSolution> {
    let pbh = check_stabilizability_detectability(sys)?;
    pbh.into_result()?;
    solve_unchecked(sys)
}

pub(crate) fn solve_unchecked(sys: &LinearSystem) -> Result<RiccatiSolution> {
    let gamma = sys.gamma;
    let n = sys.state_dim();
    let f = sys.folded();
    let q = f.c.transpose() * &f.c;
    let r = &f.b2 * f.b2.transpose() - &f.b1 * f.b1.transpose() / (gamma * gamma);

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&f.a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&r));
    h.view_mut((n, 0), (n, n)).copy_from(&(-&q));
    h.view_mut((n, n), (n, n)).copy_from(&(-f.a.transpose()));

    let spectrum = eigenvalues(&h)?;
    let radius = spectrum.iter().map(|l| l.norm()).fold(1.0, f64::max);
    if let Some(l) = spectrum.iter().find(|l| l.re.abs() <= AXIS_TOL * radius) {
        return Err(infeasible(
            gamma,
            format!("Hamiltonian eigenvalue {:.3e}{:+.3e}i on the imaginary axis", l.re, l.im),
        ));
    }

    let sign = matrix_sign(&h).map_err(|e| infeasible(gamma, e.to_string()))?;
    // (sign + I) annihilates the stable subspace spanned by [I; P].
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&sign.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n))
        .copy_from(&(sign.view((n, n), (n, n)) + DMatrix::<f64>::identity(n, n)));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n))
        .copy_from(&(-(sign.view((0, 0), (n, n)) + DMatrix::<f64>::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-sign.view((n, 0), (n, n))));

    let svd = SVD::new(lhs, true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-11 * smax) {
        return Err(infeasible(gamma, "stable subspace is not a graph over the state"));
    }
    let mut p = symmetrize(
        &svd.solve(&rhs, 1e-14 * smax)
            .map_err(|e| infeasible(gamma, e.to_string()))?,
    );

    let rel = |res: &DMatrix<f64>, p: &DMatrix<f64>| res.norm() / (1.0 + p.norm_squared());
    let mut res = are_residual(&f, &q, &r, &p);
    let mut residual = rel(&res, &p);
    let mut sweeps = 0;
    while sweeps < MAX_NEWTON_SWEEPS && residual > 1e-15 {
        let ak = &f.a - &r * &p;
        let Ok(delta) = solve_lyapunov(&ak, &res) else {
            break;
        };
        let cand = symmetrize(&(&p + delta));
        let cand_res = are_residual(&f, &q, &r, &cand);
        let cand_rel = rel(&cand_res, &cand);
        if !(cand_rel < residual) {
            break;
        }
        p = cand;
        res = cand_res;
        residual = cand_rel;
        sweeps += 1;
    }
    if !p.iter().all(|x| x.is_finite()) {
        return Err(infeasible(gamma, "non-finite Riccati solution"));
    }

    let ev = sym_eigenvalues(&p);
    let pnorm = ev[n - 1].abs().max(ev[0].abs()).max(1.0);
    if ev[0] < -1e-8 * pnorm {
        return Err(infeasible(
            gamma,
            format!("P is not positive semidefinite (min eigenvalue {:e})", ev[0]),
        ));
    }

    let k_folded = f.b2.transpose() * &p;
    let closed = &f.a - &f.b2 * &k_folded;
    let saddle = &f.a - &r * &p;
    let closed_loop_abscissa = spectral_abscissa(&closed)?;
    let saddle_abscissa = spectral_abscissa(&saddle)?;
    if !(saddle_abscissa < 0.0) {
        return Err(infeasible(gamma, format!("saddle abscissa {saddle_abscissa:e} >= 0")));
    }
    if !(closed_loop_abscissa < 0.0) {
        return Err(infeasible(
            gamma,
            format!("closed-loop abscissa {closed_loop_abscissa:e} >= 0"),
        ));
    }

    let w = &sys.weights;
    Ok(RiccatiSolution {
        gamma_used: gamma,
        p: unfold_operator(&p, &w.state, &w.state),
        gain: unfold_operator(&k_folded, &w.state, &w.control),
        p_folded: p,
        residual_norm: residual,
        closed_loop_abscissa,
        saddle_abscissa,
        newton_sweeps: sweeps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{adjoint, build_grid, build_io_operators, BumpChannel, GridSpec, IoLayout, IoMode, SensorChannel};
    use crate::synthesis::{assemble_linearization, scalar_test_system};
    use crate::dynamics::ModelParams;

    const SCALAR_P: f64 = 3.097_167_540_709_727; // (2 + sqrt 7) / 1.5

    #[test]
    fn scalar_closed_form() {
        let oracle = (2.0 + 7f64.sqrt()) / 1.5;
        assert!((oracle - SCALAR_P).abs() < 1e-14);
        let rs = solve_h_infinity_riccati(&scalar_test_system(2.0)).unwrap();
        assert!((rs.p[(0, 0)] - oracle).abs() < 1e-10);
        assert!((rs.closed_loop_abscissa - (1.0 - oracle)).abs() < 1e-9);
        assert!((rs.saddle_abscissa - (1.0 - 0.75 * oracle)).abs() < 1e-9);
        assert!(rs.residual_norm < 1e-12);
    }

    #[test]
    fn large_gamma_recovers_lqr() {
        let rs = solve_h_infinity_riccati(&scalar_test_system(1e9)).unwrap();
        assert!((rs.p[(0, 0)] - (1.0 + 2f64.sqrt())).abs() < 1e-6);
    }

    #[test]
    fn unit_gamma_is_infeasible() {
        let err = solve_h_infinity_riccati(&scalar_test_system(1.0)).unwrap_err();
        assert!(matches!(err, Error::GammaInfeasible { .. }), "{err}");
        assert!(solve_h_infinity_riccati(&scalar_test_system(0.9)).is_err());
        assert!(solve_h_infinity_riccati(&scalar_test_system(0.5)).is_err());
    }

    #[test]
    fn feedback_gain_scalar() {
        let rs = solve_h_infinity_riccati(&scalar_test_system(2.0)).unwrap();
        let k = feedback_gain(&rs);
        let u = k.apply(&DVector::from_element(1, 1.0));
        assert!((u[0] + SCALAR_P).abs() < 1e-10);
        assert_eq!(k.apply(&DVector::zeros(1))[0], 0.0);
    }

    fn bump_system(n: usize, gamma: f64) -> LinearSystem {
        let disc = build_grid(GridSpec::new(1, 1.0, n).unwrap()).unwrap();
        let layout = IoLayout {
            mode: IoMode::Bumps,
            disturbance_channels: vec![
                BumpChannel { center: vec![0.3], width: 0.1, amplitude: 1.0 },
                BumpChannel { center: vec![0.8], width: 0.2, amplitude: 0.5 },
            ],
            actuator_channels: vec![
                BumpChannel { center: vec![0.2], width: 0.15, amplitude: 1.0 },
                BumpChannel { center: vec![0.7], width: 0.15, amplitude: 1.0 },
            ],
            sensor_channels: vec![
                SensorChannel { center: vec![0.25], width: 0.5, weight: 2.0 },
                SensorChannel { center: vec![0.75], width: 0.5, weight: 2.0 },
            ],
        };
        let io = build_io_operators(&disc, &layout).unwrap();
        let params = ModelParams::new(0.05, 0.8, 1.0, gamma).unwrap();
        assemble_linearization(&disc, &params, &io).unwrap()
    }

    #[test]
    fn grid_solution_invariants() {
        let sys = bump_system(33, 5.0);
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        assert!(rs.residual_norm <= 1e-8, "{}", rs.residual_norm);
        let p_adj = adjoint(&rs.p, &sys.weights.state, &sys.weights.state);
        assert!((&p_adj - &rs.p).norm() <= 1e-10 * rs.p.norm());
        assert!(sym_eigenvalues(&rs.p_folded)[0] > -1e-10);
        assert!(rs.closed_loop_abscissa < 0.0 && rs.saddle_abscissa < 0.0);
        // residual also small in the original weighted coordinates
        let q = sys.c_adjoint() * &sys.c;
        let r = &sys.b2 * sys.b2_adjoint() - &sys.b1 * sys.b1_adjoint() / 25.0;
        let res = adjoint(&sys.drift, &sys.weights.state, &sys.weights.state) * &rs.p
            + &rs.p * &sys.drift
            + q
            - &rs.p * r * &rs.p;
        assert!(res.norm() <= 1e-8 * (1.0 + rs.p.norm_squared()));
    }

    #[test]
    fn monotone_in_gamma() {
        let sys = bump_system(17, 1.0);
        let p1 = solve_h_infinity_riccati(&sys.with_gamma(3.0)).unwrap();
        let p2 = solve_h_infinity_riccati(&sys.with_gamma(6.0)).unwrap();
        let diff = &p1.p_folded - &p2.p_folded;
        assert!(sym_eigenvalues(&diff)[0] > -1e-8);
    }
}
