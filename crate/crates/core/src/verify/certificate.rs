use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::dynamics::ModelParams;
use crate::error::{Error, Result};
use crate::linalg::{solve_lyapunov, spectral_abscissa, sym_eigenvalues};
use crate::spatial::fold_operator;
use crate::synthesis::{LinearSystem, RiccatiSolution};

/// Existence and stability constants for the nonlinear closed loop.
///
/// Thresholds are `None` when unbounded (vanishing nonlinearity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// Decay rate `-max Re spec(A_cl)`.
    pub a: f64,
    /// Amplification `sqrt(cond(X))`, `A_cl^T X + X A_cl = -I`.
    pub kappa: f64,
    /// `kappa / a`.
    #[serde(rename = "C_const")]
    pub c_const: f64,
    /// `S / (8 c2 C^2)`.
    pub s0_threshold: Option<f64>,
    /// `S / (4 c2 C)`.
    pub mu_contraction_cap: Option<f64>,
    /// `1 / sqrt(C)`.
    pub mu_detect_cap: f64,
    /// Tighter of the two caps.
    pub mu_contraction: f64,
    /// Initial-state norm the invariance interval was evaluated at.
    pub s0_norm: f64,
    /// Endpoints of the invariance interval; `None` when it is empty.
    pub mu_lower: Option<f64>,
    pub mu_upper: Option<f64>,
    /// Interval nonempty and `mu_lower < mu_contraction`.
    pub consistent: bool,
}

impl Certificate {
    pub fn within_threshold(&self, s0_norm: f64) -> bool {
        self.s0_threshold.is_none_or(|t| s0_norm < t)
    }
}

/// Computes the certificate for the linear feedback loop; `s0_norm` is the
/// weighted norm of the initial state.
pub fn contraction_certificate(
    sys: &LinearSystem,
    params: &ModelParams,
    rs: &RiccatiSolution,
    s0_norm: f64,
) -> Result<Certificate> {
    let a_cl = fold_operator(&rs.closed_loop_drift(sys), &sys.weights.state, &sys.weights.state);
    let abscissa = spectral_abscissa(&a_cl)?;
    if abscissa >= 0.0 {
        return Err(Error::UnstableClosedLoop(abscissa));
    }
    let a = -abscissa;
    let n = a_cl.nrows();
    let x = solve_lyapunov(&a_cl, &DMatrix::identity(n, n))?;
    let ev = sym_eigenvalues(&x);
    let (lo, hi) = (ev[0], ev[n - 1]);
    if !(lo > 0.0) {
        return Err(Error::Numerical(format!("closed-loop Lyapunov solution not positive (min eigenvalue {lo:e})")));
    }
    let kappa = (hi / lo).sqrt().max(1.0);
    let c = kappa / a;
    let sat = params.saturation;
    let c2 = params.growth;
    let bounded = c2 > 0.0;
    let s0_threshold = bounded.then(|| sat / (8.0 * c2 * c * c));
    let mu_contraction_cap = bounded.then(|| sat / (4.0 * c2 * c));
    let mu_detect_cap = 1.0 / c.sqrt();
    let mu_contraction = mu_contraction_cap.map_or(mu_detect_cap, |m| m.min(mu_detect_cap));

    // 2 c2 C mu^2 / S - mu + C |s0| <= 0
    let (mu_lower, mu_upper) = if bounded {
        let disc = sat * sat - 8.0 * c2 * c * c * sat * s0_norm;
        if disc >= 0.0 {
            let r = disc.sqrt();
            let denom = 4.0 * c2 * c;
            (Some((sat - r) / denom), Some((sat + r) / denom))
        } else {
            (None, None)
        }
    } else {
        (Some(c * s0_norm), None)
    };
    let consistent = mu_lower.is_some_and(|l| l < mu_contraction);
    Ok(Certificate {
        a,
        kappa,
        c_const: c,
        s0_threshold,
        mu_contraction_cap,
        mu_detect_cap,
        mu_contraction,
        s0_norm,
        mu_lower,
        mu_upper,
        consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{build_grid, build_io_operators, GridSpec, IoLayout};
    use crate::synthesis::{assemble_linearization, scalar_test_system, solve_h_infinity_riccati};

    #[test]
    fn scalar_constants() {
        let sys = scalar_test_system(2.0);
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let params = ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let cert = contraction_certificate(&sys, &params, &rs, 0.1).unwrap();
        let a = (2.0 + 7f64.sqrt()) / 1.5 - 1.0;
        assert!((cert.a - a).abs() < 1e-9);
        assert!((cert.kappa - 1.0).abs() < 1e-12);
        assert!((cert.c_const - 1.0 / a).abs() < 1e-9);
        assert!((cert.c_const - 0.47683).abs() < 1e-5);
        let s0t = cert.s0_threshold.unwrap();
        assert!((s0t - a * a / 8.0).abs() < 1e-9);
        assert!((s0t - 0.54984).abs() < 1e-3);
        assert!((cert.mu_contraction_cap.unwrap() - 0.52430).abs() < 1e-4);
        assert!((cert.mu_detect_cap - a.sqrt()).abs() < 1e-9);
        assert_eq!(cert.mu_contraction, cert.mu_contraction_cap.unwrap());
        assert!(cert.mu_lower.unwrap() <= cert.mu_upper.unwrap());
        assert!(cert.consistent);
        assert!(cert.within_threshold(0.1));
    }

    #[test]
    fn interval_empty_above_threshold() {
        let sys = scalar_test_system(2.0);
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let params = ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let cert = contraction_certificate(&sys, &params, &rs, 0.6).unwrap();
        assert!(cert.mu_lower.is_none());
        assert!(!cert.consistent);
        assert!(!cert.within_threshold(0.6));
    }

    #[test]
    fn vanishing_growth_is_unbounded() {
        let sys = scalar_test_system(2.0);
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let params = ModelParams::new(1.0, 0.0, 1.0, 2.0).unwrap();
        let cert = contraction_certificate(&sys, &params, &rs, 5.0).unwrap();
        assert!(cert.s0_threshold.is_none());
        assert!(cert.mu_contraction_cap.is_none());
        assert!(cert.within_threshold(1e9));
    }

    #[test]
    fn kappa_at_least_one_on_grids() {
        for n in [5, 17] {
            let disc = build_grid(GridSpec::new(1, 1.0, n).unwrap()).unwrap();
            let io = build_io_operators(&disc, &IoLayout::identity()).unwrap();
            let params = ModelParams::new(0.1, 1.0, 1.0, 3.0).unwrap();
            let sys = assemble_linearization(&disc, &params, &io).unwrap();
            let rs = solve_h_infinity_riccati(&sys).unwrap();
            let cert = contraction_certificate(&sys, &params, &rs, 0.0).unwrap();
            assert!(cert.kappa >= 1.0);
            assert!(cert.a > 0.0);
            assert!(cert.consistent);
        }
    }
}
