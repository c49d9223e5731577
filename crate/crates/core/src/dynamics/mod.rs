//! Logistic reaction-diffusion dynamics: the reaction term, time stepping,
//! disturbance signals, and sampled trajectories.

mod disturbance;
mod simulate;

pub use disturbance::{make_disturbance, DisturbanceKind, DisturbanceSignal, DisturbanceSpec};
pub use simulate::{simulate, Controller, SimOptions, Trajectory};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::gershgorin_bound;
use crate::spatial::{Discretization, IoOperators};
use crate::synthesis::{assemble_linearization, LinearSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `D_s`
    pub diffusion: f64,
    /// `c2`
    pub growth: f64,
    /// `S`
    pub saturation: f64,
    pub gamma: f64,
}

impl ModelParams {
    /// `growth` may be zero (pure diffusion); everything else must be positive.
    pub fn new(diffusion: f64, growth: f64, saturation: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            diffusion,
            growth,
            saturation,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParams(format!("{name} must be positive, got {v}")))
            }
        };
        positive("diffusion", self.diffusion)?;
        positive("saturation", self.saturation)?;
        positive("gamma", self.gamma)?;
        if !(self.growth >= 0.0 && self.growth.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "growth must be nonnegative, got {}",
                self.growth
            )));
        }
        Ok(())
    }

    /// `c2 / S`, the coefficient of `F_N(s) = (c2/S) s^2`.
    pub fn nonlinear_coefficient(&self) -> f64 {
        self.growth / self.saturation
    }

    /// `-F(s) = c2 s (1 - s/S)`, pointwise.
    pub fn reaction(&self, s: &DVector<f64>) -> DVector<f64> {
        s.map(|x| self.growth * x * (1.0 - x / self.saturation))
    }

    /// `F0 s = -c2 s`.
    pub fn linear_part(&self, s: &DVector<f64>) -> DVector<f64> {
        s * (-self.growth)
    }

    /// `F_N(s) = (c2/S) s^2`.
    pub fn nonlinear_part(&self, s: &DVector<f64>) -> DVector<f64> {
        let k = self.nonlinear_coefficient();
        s.map(|x| k * x * x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ImexEuler,
    Rk4Explicit,
}

/// The controlled nonlinear plant `ds/dt = drift s - (c2/S) s^2 + B1 w + B2 u`.
#[derive(Debug, Clone)]
pub struct Plant {
    pub sys: LinearSystem,
    pub params: ModelParams,
    /// Upper bound on the stiffness of the linear part.
    pub stiffness: f64,
}

impl Plant {
    pub fn new(sys: LinearSystem, params: ModelParams) -> Self {
        let stiffness = gershgorin_bound(&sys.drift);
        Self {
            sys,
            params,
            stiffness,
        }
    }

    pub fn from_grid(disc: &Discretization, params: ModelParams, io: &IoOperators) -> Result<Self> {
        let sys = assemble_linearization(disc, &params, io)?;
        Ok(Self {
            sys,
            params,
            stiffness: params.growth + params.diffusion * disc.laplacian_bound(),
        })
    }

    pub fn state_dim(&self) -> usize {
        self.sys.state_dim()
    }

    /// `min(1e-3, 0.5 / stiffness)`.
    pub fn default_dt(&self) -> f64 {
        if self.stiffness > 0.0 {
            (0.5 / self.stiffness).min(1e-3)
        } else {
            1e-3
        }
    }

    /// Largest admissible explicit RK4 step.
    pub fn rk4_bound(&self) -> f64 {
        let lambda = gershgorin_bound(&self.sys.drift);
        if lambda > 0.0 {
            0.9 * 2.0 / lambda
        } else {
            f64::INFINITY
        }
    }

    pub fn rhs(&self, s: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>, linear_only: bool) -> DVector<f64> {
        let mut f = &self.sys.drift * s + &self.sys.b1 * w + &self.sys.b2 * u;
        if !linear_only {
            f -= self.params.nonlinear_part(s);
        }
        f
    }

    fn check_inputs(&self, s: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<()> {
        check_len(self.state_dim(), s.len(), "state")?;
        check_len(self.sys.b2.ncols(), u.len(), "control")?;
        check_len(self.sys.b1.ncols(), w.len(), "disturbance")
    }
}

/// Implicit system matrix `I - dt * drift` for the IMEX scheme, inverted once.
pub(crate) fn imex_inverse(plant: &Plant, dt: f64) -> Result<DMatrix<f64>> {
    let n = plant.state_dim();
    (DMatrix::identity(n, n) - &plant.sys.drift * dt)
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("I - dt*drift is singular for dt = {dt}")))
}

/// One step with inputs held fixed over the step.
pub fn step(
    plant: &Plant,
    s: &DVector<f64>,
    u: &DVector<f64>,
    w: &DVector<f64>,
    dt: f64,
    scheme: Scheme,
) -> Result<DVector<f64>> {
    plant.check_inputs(s, u, w)?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParams(format!("dt must be positive, got {dt}")));
    }
    let next = match scheme {
        Scheme::ImexEuler => {
            let inv = imex_inverse(plant, dt)?;
            let explicit = &plant.sys.b1 * w + &plant.sys.b2 * u - plant.params.nonlinear_part(s);
            inv * (s + explicit * dt)
        }
        Scheme::Rk4Explicit => {
            let bound = plant.rk4_bound();
            if dt > bound {
                return Err(Error::CflViolation { dt, bound });
            }
            let f = |x: &DVector<f64>| plant.rhs(x, u, w, false);
            let k1 = f(s);
            let k2 = f(&(s + &k1 * (dt / 2.0)));
            let k3 = f(&(s + &k2 * (dt / 2.0)));
            let k4 = f(&(s + &k3 * dt));
            s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
        }
    };
    if next.iter().all(|x| x.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NonFiniteState { last_finite_time: 0.0 })
    }
}
