//! Linearization about the zero-distress state, the H-infinity Riccati
//! synthesis, and the Hamilton-Jacobi correction for the nonlinear loop.

mod gamma;
mod hj;
mod pbh;
mod riccati;

pub use gamma::{minimal_gamma, GAMMA_CEILING};
pub use hj::{hj_quadratic_correction, MAX_HJ_STATES, hj_residual, residual_ladder, HjRepresentation, ResidualLadder};
pub use pbh::{check_stabilizability_detectability, PbhMode, PbhReport};
pub use riccati::{feedback_gain, solve_h_infinity_riccati, FeedbackGain, RiccatiReport, RiccatiSolution};

use nalgebra::DMatrix;

use crate::dynamics::ModelParams;
use crate::error::{check_len, Error, Result};
use crate::spatial::{adjoint, fold_operator, Discretization, IoOperators, Weights};

/// Inner-product weights for each space the system touches.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceWeights {
    pub state: Weights,
    pub disturbance: Weights,
    pub control: Weights,
    pub output: Weights,
}

impl SpaceWeights {
    pub fn unit(n: usize, m1: usize, m2: usize, p: usize) -> Self {
        Self {
            state: Weights::unit(n),
            disturbance: Weights::unit(m1),
            control: Weights::unit(m2),
            output: Weights::unit(p),
        }
    }
}

/// `ds/dt = drift s + b1 w + b2 u`, `y = (c s, u)`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub drift: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub gamma: f64,
    pub weights: SpaceWeights,
}

/// Euclidean representatives of the weighted operators.
#[derive(Debug, Clone)]
pub(crate) struct FoldedSystem {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(
        drift: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        c: DMatrix<f64>,
        gamma: f64,
        weights: SpaceWeights,
    ) -> Result<Self> {
        let n = drift.nrows();
        check_len(n, drift.ncols(), "drift columns")?;
        check_len(n, b1.nrows(), "b1 rows")?;
        check_len(n, b2.nrows(), "b2 rows")?;
        check_len(n, c.ncols(), "c columns")?;
        check_len(n, weights.state.len(), "state weights")?;
        check_len(b1.ncols(), weights.disturbance.len(), "disturbance weights")?;
        check_len(b2.ncols(), weights.control.len(), "control weights")?;
        check_len(c.nrows(), weights.output.len(), "output weights")?;
        if !(gamma > 0.0) {
            return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self {
            drift,
            b1,
            b2,
            c,
            gamma,
            weights,
        })
    }

    /// System on plain Euclidean spaces.
    pub fn euclidean(
        drift: DMatrix<f64>,
        b1: DMatrix<f64>,
        b2: DMatrix<f64>,
        c: DMatrix<f64>,
        gamma: f64,
    ) -> Result<Self> {
        let w = SpaceWeights::unit(drift.nrows(), b1.ncols(), b2.ncols(), c.nrows());
        Self::new(drift, b1, b2, c, gamma, w)
    }

    pub fn state_dim(&self) -> usize {
        self.drift.nrows()
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self {
            gamma,
            ..self.clone()
        }
    }

    pub fn b1_adjoint(&self) -> DMatrix<f64> {
        adjoint(&self.b1, &self.weights.disturbance, &self.weights.state)
    }

    pub fn b2_adjoint(&self) -> DMatrix<f64> {
        adjoint(&self.b2, &self.weights.control, &self.weights.state)
    }

    pub fn c_adjoint(&self) -> DMatrix<f64> {
        adjoint(&self.c, &self.weights.state, &self.weights.output)
    }

    pub(crate) fn folded(&self) -> FoldedSystem {
        let w = &self.weights;
        FoldedSystem {
            a: fold_operator(&self.drift, &w.state, &w.state),
            b1: fold_operator(&self.b1, &w.disturbance, &w.state),
            b2: fold_operator(&self.b2, &w.control, &w.state),
            c: fold_operator(&self.c, &w.state, &w.output),
        }
    }
}

/// `drift = -D_s * laplacian + c2 * I`.
pub fn assemble_linearization(
    disc: &Discretization,
    params: &ModelParams,
    io: &IoOperators,
) -> Result<LinearSystem> {
    let n = disc.node_count();
    check_len(n, io.b1.nrows(), "b1 rows")?;
    check_len(n, io.b2.nrows(), "b2 rows")?;
    check_len(n, io.c.ncols(), "c columns")?;
    let drift = &disc.laplacian * (-params.diffusion) + DMatrix::identity(n, n) * params.growth;
    LinearSystem::new(
        drift,
        io.b1.clone(),
        io.b2.clone(),
        io.c.clone(),
        params.gamma,
        SpaceWeights {
            state: disc.weights.clone(),
            disturbance: io.disturbance_weights.clone(),
            control: io.control_weights.clone(),
            output: io.output_weights.clone(),
        },
    )
}

/// The scalar test plant `A_d = B1 = B2 = C = 1`.
pub fn scalar_test_system(gamma: f64) -> LinearSystem {
    let one = DMatrix::from_element(1, 1, 1.0);
    LinearSystem::euclidean(one.clone(), one.clone(), one.clone(), one, gamma)
        .expect("scalar test system is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{spectral_abscissa, sym_eigenvalues};
    use crate::spatial::{build_grid, build_io_operators, GridSpec, IoLayout};
    use std::f64::consts::PI;

    fn params(d: f64, c2: f64) -> ModelParams {
        ModelParams::new(d, c2, 1.0, 2.0).unwrap()
    }

    #[test]
    fn drift_spectrum_matches_neumann_modes() {
        let disc = build_grid(GridSpec::new(1, 1.0, 65).unwrap()).unwrap();
        let io = build_io_operators(&disc, &IoLayout::identity()).unwrap();
        let sys = assemble_linearization(&disc, &params(0.1, 1.0), &io).unwrap();
        let ev = sym_eigenvalues(&sys.folded().a);
        let n = ev.len();
        assert!((ev[n - 1] - 1.0).abs() < 1e-10);
        assert!((ev[n - 2] - (1.0 - 0.1 * PI * PI)).abs() < 1e-2);
        assert!((spectral_abscissa(&sys.drift).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn drift_is_self_adjoint_in_weighted_product() {
        let disc = build_grid(GridSpec::new(2, 1.3, 5).unwrap()).unwrap();
        let io = build_io_operators(&disc, &IoLayout::identity()).unwrap();
        let sys = assemble_linearization(&disc, &params(0.3, 0.7), &io).unwrap();
        let adj = adjoint(&sys.drift, &sys.weights.state, &sys.weights.state);
        assert!((&adj - &sys.drift).norm() < 1e-10 * sys.drift.norm());
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let a = DMatrix::identity(2, 2);
        let b = DMatrix::zeros(3, 1);
        assert!(matches!(
            LinearSystem::euclidean(a.clone(), b, a.clone(), a, 1.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scalar_reduction() {
        let sys = scalar_test_system(2.0);
        assert_eq!(sys.drift[(0, 0)], 1.0);
        assert_eq!(sys.state_dim(), 1);
    }
}
