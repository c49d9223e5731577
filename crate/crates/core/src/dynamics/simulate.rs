use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use super::{imex_inverse, DisturbanceSignal, Plant, Scheme};
use crate::error::{check_len, Error, Result};
use crate::synthesis::{FeedbackGain, HjRepresentation, LinearSystem, RiccatiSolution};

/// State-feedback law applied at every step (and every RK4 stage).
#[derive(Debug, Clone)]
pub enum Controller {
    None,
    /// `u = -K s`.
    Linear(FeedbackGain),
    /// `u = -B2* (P s + G2(s))`.
    Hj {
        gain: FeedbackGain,
        b2_adjoint: DMatrix<f64>,
        hj: HjRepresentation,
    },
}

impl Controller {
    pub fn linear(rs: &RiccatiSolution) -> Self {
        Controller::Linear(crate::synthesis::feedback_gain(rs))
    }

    pub fn hj(sys: &LinearSystem, rs: &RiccatiSolution, hj: HjRepresentation) -> Self {
        Controller::Hj {
            gain: crate::synthesis::feedback_gain(rs),
            b2_adjoint: sys.b2_adjoint(),
            hj,
        }
    }

    pub fn control(&self, s: &DVector<f64>, m2: usize) -> DVector<f64> {
        match self {
            Controller::None => DVector::zeros(m2),
            Controller::Linear(k) => k.apply(s),
            Controller::Hj { gain, b2_adjoint, hj } => {
                gain.apply(s) - b2_adjoint * hj.quadratic_part(s)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub t_final: f64,
    /// Requested step; the step actually used divides `t_final` evenly.
    pub dt: f64,
    pub scheme: Scheme,
    /// Record every `sample_stride`-th step (the final step is always kept).
    pub sample_stride: usize,
    /// Drop the nonlinear term.
    pub linear_only: bool,
    pub record_states: bool,
    /// Stop early once the sup norm of the state exceeds this value.
    pub abort_above: Option<f64>,
}

impl SimOptions {
    pub fn new(t_final: f64, dt: f64, scheme: Scheme) -> Self {
        Self {
            t_final,
            dt,
            scheme,
            sample_stride: 1,
            linear_only: false,
            record_states: true,
            abort_above: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "final time must be positive, got {}",
                self.t_final
            )));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParams(format!("dt must be positive, got {}", self.dt)));
        }
        if self.sample_stride == 0 {
            return Err(Error::InvalidParams("sample_stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Uniformly sampled simulation record. Squared norms use the weighted inner
/// products of the respective spaces.
#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Empty unless states were recorded.
    pub states: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    pub disturbances: Vec<DVector<f64>>,
    pub norm_s: Vec<f64>,
    pub norm_u: Vec<f64>,
    pub norm_w: Vec<f64>,
    /// `1/2 <s, P s>`, zero when no value operator was supplied.
    pub v: Vec<f64>,
    /// `|C s|^2`
    pub y2: Vec<f64>,
    pub u2: Vec<f64>,
    pub w2: Vec<f64>,
    pub final_state: DVector<f64>,
    /// Largest sup norm of the state seen at any step.
    pub max_sup_norm: f64,
    pub linear: bool,
    pub aborted: bool,
    /// Step used by the integrator.
    pub dt: f64,
    pub sample_stride: usize,
}

fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// `int |C s|^2 + |u|^2 dt`.
    pub fn output_energy(&self) -> f64 {
        trapezoid(&self.times, &self.y2) + trapezoid(&self.times, &self.u2)
    }

    /// `int |w|^2 dt`.
    pub fn input_energy(&self) -> f64 {
        trapezoid(&self.times, &self.w2)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,norm_s,norm_u,norm_w,V,y2,u2,w2\n");
        for k in 0..self.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                self.times[k],
                self.norm_s[k],
                self.norm_u[k],
                self.norm_w[k],
                self.v[k],
                self.y2[k],
                self.u2[k],
                self.w2[k]
            );
        }
        out
    }

    /// Wide per-node dump `t,s_0,...,s_{n-1}`; `None` if states were not recorded.
    pub fn state_dump_csv(&self) -> Option<String> {
        let first = self.states.first()?;
        let mut out = String::from("t");
        for i in 0..first.len() {
            let _ = write!(out, ",s_{i}");
        }
        out.push('\n');
        for (t, s) in self.times.iter().zip(&self.states) {
            let _ = write!(out, "{t}");
            for x in s.iter() {
                let _ = write!(out, ",{x}");
            }
            out.push('\n');
        }
        Some(out)
    }
}

struct Recorder<'a> {
    plant: &'a Plant,
    value: Option<&'a DMatrix<f64>>,
    record_states: bool,
    traj: Trajectory,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, s: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) {
        let wts = &self.plant.sys.weights;
        let tr = &mut self.traj;
        tr.times.push(t);
        if self.record_states {
            tr.states.push(s.clone());
        }
        tr.controls.push(u.clone());
        tr.disturbances.push(w.clone());
        let s2 = wts.state.norm_sq(s);
        let u2 = wts.control.norm_sq(u);
        let w2 = wts.disturbance.norm_sq(w);
        tr.norm_s.push(s2.sqrt());
        tr.norm_u.push(u2.sqrt());
        tr.norm_w.push(w2.sqrt());
        tr.u2.push(u2);
        tr.w2.push(w2);
        tr.y2.push(wts.output.norm_sq(&(&self.plant.sys.c * s)));
        tr.v.push(
            self.value
                .map_or(0.0, |p| 0.5 * wts.state.inner_unchecked(s, &(p * s))),
        );
    }
}

/// Integrates the closed loop from `s0` over `[0, t_final]`.
///
/// `value` is the operator `P` used for the `V` column. Feedback and
/// disturbance are evaluated at the start of each IMEX step and at every
/// RK4 stage.
pub fn simulate(
    plant: &Plant,
    s0: &DVector<f64>,
    controller: &Controller,
    disturbance: &mut DisturbanceSignal,
    opts: &SimOptions,
    value: Option<&RiccatiSolution>,
) -> Result<Trajectory> {
    opts.validate()?;
    let n = plant.state_dim();
    let m2 = plant.sys.b2.ncols();
    check_len(n, s0.len(), "initial state")?;
    check_len(plant.sys.b1.ncols(), disturbance.channels(), "disturbance channels")?;

    let steps = ((opts.t_final / opts.dt) - 1e-9).ceil().max(1.0) as usize;
    let dt = opts.t_final / steps as f64;
    let inverse = match opts.scheme {
        Scheme::ImexEuler => Some(imex_inverse(plant, dt)?),
        Scheme::Rk4Explicit => {
            let bound = plant.rk4_bound();
            if dt > bound {
                return Err(Error::CflViolation { dt, bound });
            }
            None
        }
    };

    let mut rec = Recorder {
        plant,
        value: value.map(|rs| &rs.p),
        record_states: opts.record_states,
        traj: Trajectory {
            linear: opts.linear_only,
            dt,
            sample_stride: opts.sample_stride,
            ..Default::default()
        },
    };

    let rhs = |s: &DVector<f64>, t: f64, w_src: &mut DisturbanceSignal| {
        let u = controller.control(s, m2);
        let w = w_src.value(t, s);
        let f = plant.rhs(s, &u, &w, opts.linear_only);
        (f, u, w)
    };

    let mut s = s0.clone();
    let mut t = 0.0;
    let mut max_sup = s.amax();
    for k in 0..steps {
        let (u, w, next) = match &inverse {
            Some(inv) => {
                let u = controller.control(&s, m2);
                let w = disturbance.value(t, &s);
                let mut explicit = &plant.sys.b1 * &w + &plant.sys.b2 * &u;
                if !opts.linear_only {
                    explicit -= plant.params.nonlinear_part(&s);
                }
                let next = inv * (&s + explicit * dt);
                (u, w, next)
            }
            None => {
                let (k1, u, w) = rhs(&s, t, disturbance);
                let (k2, _, _) = rhs(&(&s + &k1 * (dt / 2.0)), t + dt / 2.0, disturbance);
                let (k3, _, _) = rhs(&(&s + &k2 * (dt / 2.0)), t + dt / 2.0, disturbance);
                let (k4, _, _) = rhs(&(&s + &k3 * dt), t + dt, disturbance);
                let next = &s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
                (u, w, next)
            }
        };
        if k % opts.sample_stride == 0 {
            rec.push(t, &s, &u, &w);
        }
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFiniteState { last_finite_time: t });
        }
        s = next;
        t = (k + 1) as f64 * dt;
        max_sup = max_sup.max(s.amax());
        if opts.abort_above.is_some_and(|limit| s.amax() > limit) {
            rec.traj.aborted = true;
            break;
        }
    }
    let u = controller.control(&s, m2);
    let w = disturbance.value(t, &s);
    rec.push(t, &s, &u, &w);
    let mut traj = rec.traj;
    traj.final_state = s;
    traj.max_sup_norm = max_sup;
    Ok(traj)
}
