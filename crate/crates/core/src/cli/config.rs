//! Scenario files: strict TOML with one section per concern.
//!
//! ```toml
//! gamma = 2.0              # or "auto"
//! controller = "linear"    # none | linear | hj
//!
//! [grid]
//! dimension = 1
//! extent = 1.0             # L, per axis
//! nodes_per_axis = 33
//!
//! [model]
//! diffusion = 0.1          # D_s, length^2 / time
//! growth = 1.0             # c2, 1 / time
//! saturation = 1.0         # S, distress units
//!
//! [io]
//! mode = "identity"
//! ```

use std::path::Path;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{DisturbanceKind, DisturbanceSpec, ModelParams, Scheme};
use crate::error::{Error, Result};
use crate::spatial::{Discretization, GridSpec, IoLayout};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GammaSetting {
    Fixed(f64),
    Auto(AutoKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoKeyword {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    None,
    Linear,
    Hj,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub dimension: usize,
    pub extent: f64,
    pub nodes_per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub diffusion: f64,
    pub growth: f64,
    pub saturation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialShape {
    /// Constant field.
    Uniform,
    /// Gaussian bump with peak 1.
    Bump,
    /// `cos(k pi x / L)` along the first axis.
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub shape: InitialShape,
    /// Peak value of the field.
    pub amplitude: f64,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub width: Option<f64>,
    #[serde(default)]
    pub mode: Option<u32>,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            shape: InitialShape::Uniform,
            amplitude: 0.1,
            center: None,
            width: None,
            mode: None,
        }
    }
}

impl InitialSection {
    /// The field with unit peak.
    pub fn shape_field(&self, disc: &Discretization) -> DVector<f64> {
        let extent = disc.spec.extent;
        match self.shape {
            InitialShape::Uniform => disc.constant(1.0),
            InitialShape::Bump => {
                let center = self
                    .center
                    .clone()
                    .unwrap_or_else(|| vec![0.5 * extent; disc.spec.dimension]);
                let width = self.width.unwrap_or(0.1 * extent);
                disc.sample(|x| {
                    let r2: f64 = x.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-r2 / (2.0 * width * width)).exp()
                })
            }
            InitialShape::Cosine => {
                let k = self.mode.unwrap_or(1) as f64;
                disc.sample(|x| (k * std::f64::consts::PI * x[0] / extent).cos())
            }
        }
    }

    pub fn field(&self, disc: &Discretization) -> DVector<f64> {
        self.shape_field(disc) * self.amplitude
    }
}

fn default_stride() -> usize {
    1
}

fn default_scheme() -> Scheme {
    Scheme::ImexEuler
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    /// Final time.
    pub t_final: f64,
    /// Step; defaults to `min(1e-3, 0.5 / stiffness)`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_stride")]
    pub sample_stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub linear_only: bool,
    #[serde(default)]
    pub state_dump: bool,
    #[serde(default)]
    pub initial: InitialSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceSection {
    pub kind: DisturbanceKind,
    #[serde(default)]
    pub amplitude: f64,
    /// Angular frequency.
    #[serde(default)]
    pub frequency: f64,
    #[serde(default)]
    pub bandwidth: f64,
    #[serde(default)]
    pub duration: Option<f64>,
}

impl Default for DisturbanceSection {
    fn default() -> Self {
        Self {
            kind: DisturbanceKind::None,
            amplitude: 0.0,
            frequency: 0.0,
            bandwidth: 0.0,
            duration: None,
        }
    }
}

impl DisturbanceSection {
    pub fn spec(&self, seed: u64) -> DisturbanceSpec {
        DisturbanceSpec {
            kind: self.kind,
            amplitude: self.amplitude,
            frequency: self.frequency,
            bandwidth: self.bandwidth,
            seed,
            duration: self.duration,
        }
    }
}

fn default_frequencies() -> usize {
    30
}

fn default_noise() -> usize {
    10
}

fn default_ensemble_amplitude() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "default_frequencies")]
    pub frequencies: usize,
    #[serde(default = "default_noise")]
    pub noise: usize,
    /// Disturbance amplitude, as a fraction of `S`.
    #[serde(default = "default_ensemble_amplitude")]
    pub amplitude: f64,
    /// Noise corner frequency; defaults to the closed-loop decay rate.
    #[serde(default)]
    pub bandwidth: Option<f64>,
    /// Horizon per member; defaults to `20 / a`.
    #[serde(default)]
    pub t_final: Option<f64>,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            frequencies: default_frequencies(),
            noise: default_noise(),
            amplitude: default_ensemble_amplitude(),
            bandwidth: None,
            t_final: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default)]
    pub run_gain: bool,
    #[serde(default)]
    pub run_decrement: bool,
    #[serde(default)]
    pub run_certificate: bool,
    #[serde(default)]
    pub run_basin: bool,
    #[serde(default)]
    pub run_saddle: bool,
    #[serde(default)]
    pub run_hj: bool,
    /// Basin amplitudes (weighted norm of the initial state); defaults to
    /// multiples of the certified threshold.
    #[serde(default)]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    /// Gain level the checks are held to; defaults to the design gamma.
    #[serde(default)]
    pub gamma_claim: Option<f64>,
}

impl VerifySection {
    pub fn any_enabled(&self) -> bool {
        self.run_gain || self.run_decrement || self.run_certificate || self.run_basin || self.run_saddle || self.run_hj
    }
}

fn default_margin() -> f64 {
    1.1
}

fn default_controller() -> ControllerKind {
    ControllerKind::Linear
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub gamma: GammaSetting,
    /// Factor applied to the minimal gamma when `gamma = "auto"`.
    #[serde(default = "default_margin")]
    pub gamma_margin: f64,
    #[serde(default = "default_controller")]
    pub controller: ControllerKind,
    pub grid: GridSection,
    pub model: ModelSection,
    pub io: IoLayout,
    pub sim: SimSection,
    #[serde(default)]
    pub disturbance: DisturbanceSection,
    #[serde(default)]
    pub verify: VerifySection,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidParams(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dimension, self.grid.extent, self.grid.nodes_per_axis)
    }

    /// Model parameters with the configured gamma, or `fallback` under `auto`.
    pub fn model_params(&self, fallback_gamma: f64) -> Result<ModelParams> {
        let gamma = match self.gamma {
            GammaSetting::Fixed(g) => g,
            GammaSetting::Auto(_) => fallback_gamma,
        };
        ModelParams::new(self.model.diffusion, self.model.growth, self.model.saturation, gamma)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid_spec()?;
        self.model_params(1.0)?;
        match self.gamma {
            GammaSetting::Fixed(g) if !(g > 0.0 && g.is_finite()) => {
                return Err(Error::InvalidParams(format!("gamma must be positive, got {g}")))
            }
            _ => {}
        }
        if !(self.gamma_margin >= 1.0 && self.gamma_margin.is_finite()) {
            return Err(Error::InvalidParams("gamma_margin must be at least 1".into()));
        }
        let sim = &self.sim;
        if !(sim.t_final > 0.0 && sim.t_final.is_finite()) {
            return Err(Error::InvalidParams("sim.t_final must be positive".into()));
        }
        if sim.dt.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidParams("sim.dt must be positive".into()));
        }
        if sim.sample_stride == 0 {
            return Err(Error::InvalidParams("sim.sample_stride must be at least 1".into()));
        }
        let init = &sim.initial;
        if !init.amplitude.is_finite() || init.width.is_some_and(|w| !(w > 0.0)) {
            return Err(Error::InvalidParams("sim.initial needs a finite amplitude and positive width".into()));
        }
        if init.center.as_ref().is_some_and(|c| c.len() != self.grid.dimension) {
            return Err(Error::InvalidParams("sim.initial.center must match the grid dimension".into()));
        }
        let d = &self.disturbance;
        if !d.amplitude.is_finite() || d.frequency < 0.0 || d.bandwidth < 0.0 {
            return Err(Error::InvalidParams("disturbance fields must be finite and nonnegative".into()));
        }
        if d.kind == DisturbanceKind::FilteredNoise && !(d.bandwidth > 0.0) {
            return Err(Error::InvalidParams("filtered_noise needs a positive bandwidth".into()));
        }
        let v = &self.verify;
        if let Some(a) = &v.amplitudes {
            if a.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || a.windows(2).any(|p| p[1] < p[0]) {
                return Err(Error::InvalidParams("verify.amplitudes must be nonnegative and ascending".into()));
            }
        }
        if v.gamma_claim.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::InvalidParams("verify.gamma_claim must be positive".into()));
        }
        if !(v.ensemble.amplitude >= 0.0) || v.ensemble.t_final.is_some_and(|t| !(t > 0.0)) {
            return Err(Error::InvalidParams("verify.ensemble fields must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the key-sorted JSON rendering of the resolved config.
    pub fn scenario_hash(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}
