use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ControllerKind, GammaSetting, ScenarioConfig};
use super::plot::{verdict_strip, LinePlot, Scale, Series};
use crate::dynamics::{make_disturbance, simulate, Controller, DisturbanceSignal, Plant, SimOptions, Trajectory};
use crate::error::{Error, Result};
use crate::spatial::{build_grid, build_io_operators, Discretization, IoOperators};
use crate::synthesis::{
    check_stabilizability_detectability, hj_quadratic_correction, minimal_gamma, solve_h_infinity_riccati,
    RiccatiReport, RiccatiSolution, MAX_HJ_STATES,
};
use crate::verify::{
    basin_sweep, closed_loop_hinf_norm, contraction_certificate, decrement_order, default_ensemble,
    default_frequencies, default_scales, empirical_l2_gain, frequency_response, hj_slope_check,
    lyapunov_decrement_check, saddle_cost_check, BasinOptions, BasinReport, Certificate, DecrementOrder,
    EnsembleSample, GainEstimate, HjSlopeReport, SaddleCostReport, Verdict,
};

/// Search bracket handed to `minimal_gamma` under `gamma = "auto"`.
const AUTO_GAMMA_BRACKET: (f64, f64) = (1e-3, 1.0);

/// Process exit code for a failed operation.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::GammaInfeasible { .. } | Error::NoFeasibleGammaFound(_) => 2,
        Error::NotStabilizable(_) | Error::NotDetectable(_) => 3,
        Error::NonFiniteState { .. } => 4,
        _ => 1,
    }
}

/// A file produced by a command, held in memory until written.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: &str, contents: String) -> Self {
        Self {
            name: name.to_string(),
            contents,
        }
    }

    fn json<T: Serialize>(name: &str, value: &T) -> Self {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        Self::new(name, text)
    }
}

/// Everything derived from a config before any synthesis.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub disc: Discretization,
    pub io: IoOperators,
    pub plant: Plant,
    /// Minimal feasible gamma when the config asked for `auto`.
    pub gamma_min: Option<f64>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let disc = build_grid(config.grid_spec()?)?;
        let io = build_io_operators(&disc, &config.io)?;
        let (params, gamma_min) = match config.gamma {
            GammaSetting::Fixed(g) => (config.model_params(g)?, None),
            GammaSetting::Auto(_) => {
                let probe = Plant::from_grid(&disc, config.model_params(1.0)?, &io)?;
                let g = minimal_gamma(&probe.sys, AUTO_GAMMA_BRACKET.0, AUTO_GAMMA_BRACKET.1)?;
                (config.model_params(g * config.gamma_margin)?, Some(g))
            }
        };
        let plant = Plant::from_grid(&disc, params, &io)?;
        Ok(Self {
            config,
            disc,
            io,
            plant,
            gamma_min,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::new(ScenarioConfig::from_toml_str(text)?)
    }

    pub fn dt(&self) -> f64 {
        self.config.sim.dt.unwrap_or_else(|| self.plant.default_dt())
    }

    pub fn synthesize(&self) -> Result<RiccatiSolution> {
        solve_h_infinity_riccati(&self.plant.sys)
    }

    pub fn initial_state(&self) -> DVector<f64> {
        self.config.sim.initial.field(&self.disc)
    }

    /// Initial state for checks that need a nonzero start: the configured
    /// field, or its shape at amplitude `S / 10` when the amplitude is zero.
    fn probe_state(&self) -> DVector<f64> {
        let s0 = self.initial_state();
        if s0.amax() > 0.0 {
            s0
        } else {
            self.config.sim.initial.shape_field(&self.disc) * (0.1 * self.plant.params.saturation)
        }
    }

    pub fn controller(&self, kind: ControllerKind, rs: Option<&RiccatiSolution>) -> Result<Controller> {
        match (kind, rs) {
            (ControllerKind::None, _) => Ok(Controller::None),
            (ControllerKind::Linear, Some(rs)) => Ok(Controller::linear(rs)),
            (ControllerKind::Hj, Some(rs)) => {
                let hj = hj_quadratic_correction(&self.plant.sys, &self.plant.params, rs)?;
                Ok(Controller::hj(&self.plant.sys, rs, hj))
            }
            (_, None) => Err(Error::MissingRiccati),
        }
    }

    fn sim_options(&self) -> SimOptions {
        let sim = &self.config.sim;
        let mut opts = SimOptions::new(sim.t_final, self.dt(), sim.scheme);
        opts.sample_stride = sim.sample_stride;
        opts.linear_only = sim.linear_only;
        opts.record_states = sim.state_dump;
        opts
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthReport {
    #[serde(flatten)]
    pub riccati: RiccatiReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_min: Option<f64>,
    pub newton_sweeps: usize,
    pub pbh_checked_modes: usize,
}

fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Riccati report plus CSV dumps of `P` and `K`.
pub fn synth_artifacts(scenario: &Scenario) -> Result<(RiccatiSolution, Vec<Artifact>)> {
    let pbh = check_stabilizability_detectability(&scenario.plant.sys)?;
    let checked = pbh.checked_modes;
    pbh.into_result()?;
    let rs = scenario.synthesize()?;
    let report = SynthReport {
        riccati: rs.report(),
        gamma_min: scenario.gamma_min,
        newton_sweeps: rs.newton_sweeps,
        pbh_checked_modes: checked,
    };
    let files = vec![
        Artifact::json("riccati.json", &report),
        Artifact::new("P.csv", matrix_csv(&rs.p)),
        Artifact::new("K.csv", matrix_csv(&rs.gain)),
    ];
    Ok((rs, files))
}

fn norm_plot(traj: &Trajectory, timestamp: Option<u64>) -> String {
    let pts = |v: &[f64]| traj.times.iter().copied().zip(v.iter().copied()).collect::<Vec<_>>();
    LinePlot {
        title: "State, control and disturbance norms",
        x_label: "t",
        y_label: "norm",
        x_scale: Scale::Linear,
        y_scale: Scale::Log,
        series: vec![
            Series {
                label: "|s|",
                points: pts(&traj.norm_s),
                markers: false,
            },
            Series {
                label: "|u|",
                points: pts(&traj.norm_u),
                markers: false,
            },
            Series {
                label: "|w|",
                points: pts(&traj.norm_w),
                markers: false,
            },
        ],
        reference: None,
    }
    .render(timestamp)
}

/// Runs the configured simulation (synthesizing first when the controller needs it).
pub fn simulate_artifacts(scenario: &Scenario, timestamp: Option<u64>) -> Result<(Trajectory, Vec<Artifact>)> {
    let cfg = &scenario.config;
    let needs_riccati = cfg.controller != ControllerKind::None
        || cfg.disturbance.kind == crate::dynamics::DisturbanceKind::WorstCaseLinear;
    let rs = if needs_riccati { Some(scenario.synthesize()?) } else { None };
    let controller = scenario.controller(cfg.controller, rs.as_ref())?;
    let dt = scenario.dt();
    let mut w = make_disturbance(&cfg.disturbance.spec(cfg.sim.seed), &scenario.plant.sys, rs.as_ref(), dt)?;
    let traj = simulate(
        &scenario.plant,
        &scenario.initial_state(),
        &controller,
        &mut w,
        &scenario.sim_options(),
        rs.as_ref(),
    )?;
    let mut files = vec![Artifact::new("trajectory.csv", traj.to_csv())];
    if let Some(dump) = traj.state_dump_csv() {
        files.push(Artifact::new("state_dump.csv", dump));
    }
    files.push(Artifact::new("trajectory.svg", norm_plot(&traj, timestamp)));
    Ok((traj, files))
}

/// Outcome of one verification check; failures keep the error message.
#[derive(Debug, Clone, Serialize)]
pub struct Check<T> {
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(flatten)]
    pub result: Option<T>,
}

impl<T> Check<T> {
    fn from(outcome: Result<(T, bool)>) -> Self {
        match outcome {
            Ok((result, pass)) => Self {
                pass,
                error: None,
                result: Some(result),
            },
            Err(e) => Self {
                pass: false,
                error: Some(format!("{}: {e}", e.kind())),
                result: None,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GainSection {
    /// Frequency-domain closed-loop norm, held to `gamma_design`.
    #[serde(flatten)]
    pub frequency_domain: GainEstimate,
    pub gamma_used: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical: Option<GainEstimate>,
    /// Empirical gain within 2% of the norm (linear runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_sound: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub empirical_error: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub scenario_hash: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthesis: Option<Check<RiccatiReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gain: Option<Check<GainSection>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decrement: Option<Check<DecrementOrder>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Check<Certificate>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basin: Option<Check<BasinReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saddle_cost: Option<Check<SaddleCostReport>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hj: Option<Check<HjSlopeReport>>,
    pub pass: bool,
}

impl VerifyReport {
    fn compute_pass(&mut self) {
        let flags = [
            self.synthesis.as_ref().map(|c| c.pass),
            self.gain.as_ref().map(|c| c.pass),
            self.decrement.as_ref().map(|c| c.pass),
            self.certificate.as_ref().map(|c| c.pass),
            self.basin.as_ref().map(|c| c.pass),
            self.saddle_cost.as_ref().map(|c| c.pass),
            self.hj.as_ref().map(|c| c.pass),
        ];
        self.pass = flags.iter().flatten().all(|p| *p);
    }
}

struct VerifyData {
    frequencies: Vec<(f64, f64)>,
    ensemble: Vec<EnsembleSample>,
    gamma_design: f64,
}

fn decay_rate(scenario: &Scenario, rs: &RiccatiSolution) -> f64 {
    (-rs.closed_loop_abscissa).max(1e-6) + 0.0 * scenario.plant.params.growth
}

fn run_gain(
    scenario: &Scenario,
    rs: &RiccatiSolution,
    data: &mut VerifyData,
) -> Result<(GainSection, bool)> {
    let cfg = &scenario.config;
    let sys = &scenario.plant.sys;
    let mut freq = closed_loop_hinf_norm(sys, rs)?;
    freq.gamma_design = data.gamma_design;
    let a = decay_rate(scenario, rs);
    let rho = rs.closed_loop_drift(sys).norm().max(a);
    let grid: Vec<f64> = (0..200)
        .map(|k| a / 100.0 * (1e4 * rho / a).powf(k as f64 / 199.0))
        .collect();
    data.frequencies = grid.iter().copied().zip(frequency_response(sys, rs, &grid)?).collect();

    let ens_cfg = &cfg.verify.ensemble;
    let dt = scenario.dt();
    let freqs = default_frequencies(sys, rs, dt, ens_cfg.frequencies)?;
    let ensemble = default_ensemble(
        &freqs,
        ens_cfg.noise,
        ens_cfg.amplitude * scenario.plant.params.saturation,
        ens_cfg.bandwidth.unwrap_or(a),
        cfg.sim.seed.wrapping_add(1000),
    );
    let kind = match cfg.controller {
        ControllerKind::None => ControllerKind::Linear,
        k => k,
    };
    let mut opts = SimOptions::new(ens_cfg.t_final.unwrap_or(20.0 / a), dt, cfg.sim.scheme);
    opts.linear_only = cfg.sim.linear_only;
    let empirical = scenario
        .controller(kind, Some(rs))
        .and_then(|ctrl| empirical_l2_gain(&scenario.plant, &ctrl, &ensemble, &opts, Some(rs), data.gamma_design));
    let mut section = GainSection {
        frequency_domain: freq.clone(),
        gamma_used: rs.gamma_used,
        empirical: None,
        empirical_sound: None,
        empirical_error: None,
    };
    let mut pass = freq.below_design();
    match empirical {
        Ok(emp) => {
            pass &= emp.estimate.below_design();
            if cfg.sim.linear_only {
                let sound = emp.estimate.value <= freq.value * 1.02;
                pass &= sound;
                section.empirical_sound = Some(sound);
            }
            data.ensemble = emp.samples;
            section.empirical = Some(emp.estimate);
        }
        Err(e) => {
            pass = false;
            section.empirical_error = Some(format!("{}: {e}", e.kind()));
        }
    }
    Ok((section, pass))
}

fn run_decrement(scenario: &Scenario, rs: &RiccatiSolution) -> Result<(DecrementOrder, bool)> {
    let plant = &scenario.plant;
    let s0 = scenario.probe_state();
    let t_final = 5.0 / decay_rate(scenario, rs);
    let dt = scenario.dt();
    let report = |step: f64| -> Result<_> {
        let mut opts = SimOptions::new(t_final, step, crate::dynamics::Scheme::ImexEuler);
        opts.linear_only = true;
        let mut w = DisturbanceSignal::zero(plant.sys.b1.ncols());
        let traj = simulate(plant, &s0, &Controller::linear(rs), &mut w, &opts, Some(rs))?;
        lyapunov_decrement_check(&traj, &plant.sys, rs)
    };
    let order = decrement_order(report(dt)?, report(dt / 2.0)?);
    let pass = order.passed;
    Ok((order, pass))
}

fn default_amplitudes(threshold: Option<f64>, saturation: f64) -> Vec<f64> {
    match threshold {
        Some(t) => [0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 4.0].iter().map(|k| k * t).collect(),
        None => [0.01, 0.1, 0.5].iter().map(|k| k * saturation).collect(),
    }
}

/// Runs every enabled check. The returned artifacts include `verify.json`.
pub fn verify_artifacts(scenario: &Scenario, timestamp: Option<u64>) -> (VerifyReport, Vec<Artifact>) {
    let cfg = &scenario.config;
    let v = &cfg.verify;
    let mut report = VerifyReport {
        scenario_hash: cfg.scenario_hash(),
        ..Default::default()
    };
    let mut files = Vec::new();
    if !v.any_enabled() {
        report.compute_pass();
        files.insert(0, Artifact::json("verify.json", &report));
        return (report, files);
    }
    let rs = match scenario.synthesize() {
        Ok(rs) => {
            let ok = rs.residual_norm <= 1e-8;
            report.synthesis = Some(Check::from(Ok((rs.report(), ok))));
            rs
        }
        Err(e) => {
            report.synthesis = Some(Check::from(Err(e)));
            report.compute_pass();
            files.insert(0, Artifact::json("verify.json", &report));
            return (report, files);
        }
    };
    let plant = &scenario.plant;
    let sys = &plant.sys;
    let mut data = VerifyData {
        frequencies: Vec::new(),
        ensemble: Vec::new(),
        gamma_design: v.gamma_claim.unwrap_or(rs.gamma_used),
    };

    if v.run_gain {
        report.gain = Some(Check::from(run_gain(scenario, &rs, &mut data)));
        let mut csv = String::from("omega,sigma_max\n");
        for (w, s) in &data.frequencies {
            let _ = writeln!(csv, "{w},{s}");
        }
        files.push(Artifact::new("gain_frequency.csv", csv));
        let mut ens = String::from("index,label,frequency,input_energy,output_energy,ratio\n");
        for s in &data.ensemble {
            let f = s.frequency.map_or(String::new(), |f| f.to_string());
            let _ = writeln!(ens, "{},{},{},{},{},{}", s.index, s.label, f, s.input_energy, s.output_energy, s.ratio);
        }
        files.push(Artifact::new("gain_ensemble.csv", ens));
        let plot = LinePlot {
            title: "Closed-loop gain versus frequency",
            x_label: "omega",
            y_label: "gain",
            x_scale: Scale::Log,
            y_scale: Scale::Linear,
            series: vec![
                Series {
                    label: "sigma_max",
                    points: data.frequencies.clone(),
                    markers: false,
                },
                Series {
                    label: "sinusoid ensemble",
                    points: data.ensemble.iter().filter_map(|s| Some((s.frequency?, s.ratio))).collect(),
                    markers: true,
                },
            ],
            reference: Some((data.gamma_design, "gamma")),
        };
        files.push(Artifact::new("gain.svg", plot.render(timestamp)));
    }

    if v.run_decrement {
        report.decrement = Some(Check::from(run_decrement(scenario, &rs)));
    }

    let s0_norm = sys.weights.state.norm(&scenario.initial_state());
    let certificate = contraction_certificate(sys, &plant.params, &rs, s0_norm);
    if v.run_certificate {
        report.certificate = Some(Check::from(certificate.clone().map(|c| {
            let ok = c.a > 0.0 && c.kappa >= 1.0 && c.consistent;
            (c, ok)
        })));
    }

    if v.run_basin {
        let outcome = (|| -> Result<(BasinReport, bool)> {
            let cert = certificate.clone()?;
            let amplitudes = v
                .amplitudes
                .clone()
                .unwrap_or_else(|| default_amplitudes(cert.s0_threshold, plant.params.saturation));
            let controller = scenario.controller(cfg.controller, Some(&rs))?;
            let opts = BasinOptions {
                t_final: 20.0 / cert.a,
                dt: scenario.dt(),
                scheme: cfg.sim.scheme,
                tol_rel: 1e-6,
            };
            let shape = cfg.sim.initial.shape_field(&scenario.disc);
            let rep = basin_sweep(plant, &controller, &shape, &amplitudes, &opts, cert.s0_threshold)?;
            let ok = rep.conservative;
            Ok((rep, ok))
        })();
        if let Ok((rep, _)) = &outcome {
            let mut csv = String::from("amplitude,verdict,final_norm,max_sup_norm\n");
            let mut cells = Vec::new();
            for p in &rep.points {
                let label = verdict_label(p.verdict);
                let _ = writeln!(csv, "{},{},{},{}", p.amplitude, label, p.final_norm, p.max_sup_norm);
                cells.push((p.amplitude, label));
            }
            files.push(Artifact::new("basin.csv", csv));
            files.push(Artifact::new("basin.svg", verdict_strip("Basin verdicts by amplitude", &cells, timestamp)));
        }
        report.basin = Some(Check::from(outcome));
    }

    if v.run_saddle {
        let s0 = scenario.probe_state();
        let t_final = 20.0 / (-rs.saddle_abscissa).max(1e-6);
        let list = [DVector::zeros(s0.len()), s0.clone(), s0 * 2.0];
        report.saddle_cost = Some(Check::from(
            saddle_cost_check(sys, &rs, &list, t_final, scenario.dt()).map(|r| {
                let ok = r.passed;
                (r, ok)
            }),
        ));
    }

    if v.run_hj {
        let outcome = if sys.state_dim() > MAX_HJ_STATES {
            Err(Error::InvalidParams(format!("hj check supports at most {MAX_HJ_STATES} states")))
        } else {
            let shape = scenario.probe_state();
            let unit = &shape / sys.weights.state.norm(&shape);
            hj_slope_check(sys, &plant.params, &rs, &unit, &default_scales()).map(|r| {
                let ok = r.passed;
                (r, ok)
            })
        };
        if let Ok((rep, _)) = &outcome {
            let mut csv = String::from("scale,residual_linear,residual_corrected\n");
            for ((a, r1), r2) in rep.linear.scales.iter().zip(&rep.linear.residuals).zip(&rep.corrected.residuals) {
                let _ = writeln!(csv, "{a},{r1},{r2}");
            }
            files.push(Artifact::new("hj_ladder.csv", csv));
            let abs = |r: &[f64]| rep.linear.scales.iter().copied().zip(r.iter().map(|x| x.abs())).collect();
            let plot = LinePlot {
                title: "Hamilton-Jacobi residual ladder",
                x_label: "state scale",
                y_label: "|residual|",
                x_scale: Scale::Log,
                y_scale: Scale::Log,
                series: vec![
                    Series {
                        label: "G = P s",
                        points: abs(&rep.linear.residuals),
                        markers: false,
                    },
                    Series {
                        label: "G = P s + G2(s)",
                        points: abs(&rep.corrected.residuals),
                        markers: false,
                    },
                ],
                reference: None,
            };
            files.push(Artifact::new("hj.svg", plot.render(timestamp)));
        }
        report.hj = Some(Check::from(outcome));
    }

    report.compute_pass();
    files.insert(0, Artifact::json("verify.json", &report));
    (report, files)
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::Converged => "CONVERGED",
        Verdict::Diverged => "DIVERGED",
        Verdict::Inconclusive => "INCONCLUSIVE",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Gamma,
    Amplitude,
    Grid,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gamma" => Ok(SweepAxis::Gamma),
            "amplitude" => Ok(SweepAxis::Amplitude),
            "grid" => Ok(SweepAxis::Grid),
            other => Err(Error::InvalidParams(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub verdict: String,
    pub exit_code: i32,
    /// Axis-specific metric: `||P||_F` (gamma), final norm (amplitude) or
    /// closed-loop norm (grid).
    pub metric: f64,
    pub gamma_used: f64,
    pub closed_loop_abscissa: f64,
}

fn failed_row(value: f64, err: &Error) -> SweepRow {
    SweepRow {
        value,
        verdict: err.kind().to_string(),
        exit_code: exit_code(err),
        metric: f64::NAN,
        gamma_used: f64::NAN,
        closed_loop_abscissa: f64::NAN,
    }
}

fn synth_row(config: ScenarioConfig, value: f64, metric_is_norm: bool) -> SweepRow {
    let outcome = Scenario::new(config).and_then(|s| {
        let rs = s.synthesize()?;
        let metric = if metric_is_norm {
            closed_loop_hinf_norm(&s.plant.sys, &rs)?.value
        } else {
            rs.p_folded.norm()
        };
        Ok((rs, metric))
    });
    match outcome {
        Ok((rs, metric)) => SweepRow {
            value,
            verdict: "feasible".into(),
            exit_code: 0,
            metric,
            gamma_used: rs.gamma_used,
            closed_loop_abscissa: rs.closed_loop_abscissa,
        },
        Err(e) => failed_row(value, &e),
    }
}

/// One sub-run per value, evaluated in parallel and reported in input order.
pub fn sweep_artifacts(
    config: &ScenarioConfig,
    axis: SweepAxis,
    values: &[f64],
    timestamp: Option<u64>,
) -> Result<(Vec<SweepRow>, Vec<Artifact>)> {
    if values.is_empty() {
        return Err(Error::InvalidParams("sweep needs at least one value".into()));
    }
    let rows: Vec<SweepRow> = match axis {
        SweepAxis::Gamma => values
            .par_iter()
            .map(|&g| {
                let mut c = config.clone();
                c.gamma = GammaSetting::Fixed(g);
                synth_row(c, g, false)
            })
            .collect(),
        SweepAxis::Grid => values
            .par_iter()
            .map(|&n| {
                let mut c = config.clone();
                if n.fract() != 0.0 || n < 2.0 {
                    return failed_row(n, &Error::InvalidGrid(format!("nodes_per_axis must be an integer >= 2, got {n}")));
                }
                c.grid.nodes_per_axis = n as usize;
                synth_row(c, n, true)
            })
            .collect(),
        SweepAxis::Amplitude => {
            let scenario = Scenario::new(config.clone())?;
            let rs = scenario.synthesize()?;
            let cert = contraction_certificate(&scenario.plant.sys, &scenario.plant.params, &rs, 0.0)?;
            let controller = scenario.controller(config.controller, Some(&rs))?;
            let opts = BasinOptions {
                t_final: 20.0 / cert.a,
                dt: scenario.dt(),
                scheme: config.sim.scheme,
                tol_rel: 1e-6,
            };
            let shape = config.sim.initial.shape_field(&scenario.disc);
            values
                .par_iter()
                .map(|&amp| {
                    match basin_sweep(&scenario.plant, &controller, &shape, &[amp], &opts, None) {
                        Ok(rep) => SweepRow {
                            value: amp,
                            verdict: verdict_label(rep.points[0].verdict).into(),
                            exit_code: 0,
                            metric: rep.points[0].final_norm,
                            gamma_used: rs.gamma_used,
                            closed_loop_abscissa: rs.closed_loop_abscissa,
                        },
                        Err(e) => failed_row(amp, &e),
                    }
                })
                .collect()
        }
    };
    let mut csv = String::from("value,verdict,exit_code,metric,gamma_used,closed_loop_abscissa\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.value, r.verdict, r.exit_code, r.metric, r.gamma_used, r.closed_loop_abscissa
        );
    }
    let (title, y_label, y_scale) = match axis {
        SweepAxis::Gamma => ("Riccati solution size versus gamma", "||P||_F", Scale::Linear),
        SweepAxis::Amplitude => ("Final state norm versus amplitude", "|s(T)|", Scale::Log),
        SweepAxis::Grid => ("Closed-loop norm versus grid size", "gain", Scale::Linear),
    };
    let plot = LinePlot {
        title,
        x_label: "value",
        y_label,
        x_scale: Scale::Linear,
        y_scale,
        series: vec![Series {
            label: "sub-runs",
            points: rows.iter().map(|r| (r.value, r.metric)).collect(),
            markers: true,
        }],
        reference: None,
    };
    Ok((
        rows,
        vec![Artifact::new("sweep.csv", csv), Artifact::new("sweep.svg", plot.render(timestamp))],
    ))
}
