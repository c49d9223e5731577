use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthesis::{LinearSystem, RiccatiSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisturbanceKind {
    None,
    Sinusoid,
    FilteredNoise,
    WorstCaseLinear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    pub amplitude: f64,
    /// Angular frequency of the sinusoid.
    pub frequency: f64,
    /// Corner frequency of the low-pass filter for noise.
    pub bandwidth: f64,
    pub seed: u64,
    /// The signal is switched off after this time, when set.
    pub duration: Option<f64>,
}

impl DisturbanceSpec {
    pub fn none() -> Self {
        Self {
            kind: DisturbanceKind::None,
            amplitude: 0.0,
            frequency: 0.0,
            bandwidth: 0.0,
            seed: 0,
            duration: None,
        }
    }

    pub fn sinusoid(amplitude: f64, frequency: f64) -> Self {
        Self {
            kind: DisturbanceKind::Sinusoid,
            amplitude,
            frequency,
            ..Self::none()
        }
    }

    pub fn noise(amplitude: f64, bandwidth: f64, seed: u64) -> Self {
        Self {
            kind: DisturbanceKind::FilteredNoise,
            amplitude,
            bandwidth,
            seed,
            ..Self::none()
        }
    }

    pub fn worst_case() -> Self {
        Self {
            kind: DisturbanceKind::WorstCaseLinear,
            ..Self::none()
        }
    }
}

#[derive(Debug, Clone)]
enum Source {
    Zero,
    Sinusoid {
        amplitude: f64,
        frequency: f64,
    },
    Noise {
        alpha: f64,
        gain: f64,
        hold: f64,
        rng: Box<ChaCha8Rng>,
        samples: Vec<DVector<f64>>,
    },
    Feedback {
        gain: DMatrix<f64>,
    },
}

/// Time-indexed disturbance generator. Noise is sampled every `hold` time
/// units, generated lazily in index order, and interpolated linearly between
/// samples.
#[derive(Debug, Clone)]
pub struct DisturbanceSignal {
    channels: usize,
    duration: Option<f64>,
    source: Source,
}

impl DisturbanceSignal {
    pub fn zero(channels: usize) -> Self {
        Self {
            channels,
            duration: None,
            source: Source::Zero,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.source, Source::Zero)
    }

    pub fn value(&mut self, t: f64, s: &DVector<f64>) -> DVector<f64> {
        if self.duration.is_some_and(|d| t > d) {
            return DVector::zeros(self.channels);
        }
        let m = self.channels;
        match &mut self.source {
            Source::Zero => DVector::zeros(m),
            Source::Sinusoid {
                amplitude,
                frequency,
            } => DVector::from_element(m, *amplitude * (*frequency * t).sin()),
            Source::Noise {
                alpha,
                gain,
                hold,
                rng,
                samples,
            } => {
                let x = (t / *hold).max(0.0);
                let k = x.floor() as usize;
                while samples.len() <= k + 1 {
                    let prev = samples.last().cloned().unwrap_or_else(|| DVector::zeros(m));
                    let xi = DVector::from_fn(m, |_, _| StandardNormal.sample(rng));
                    samples.push(prev * *alpha + xi * *gain);
                }
                let frac = x - k as f64;
                &samples[k] * (1.0 - frac) + &samples[k + 1] * frac
            }
            Source::Feedback { gain } => &*gain * s,
        }
    }
}

/// Builds the generator for `spec`.
///
/// Noise is unit-bandwidth-normalized first-order low-pass noise with
/// stationary standard deviation `amplitude`; `hold` is its sample interval.
pub fn make_disturbance(
    spec: &DisturbanceSpec,
    sys: &LinearSystem,
    riccati: Option<&RiccatiSolution>,
    hold: f64,
) -> Result<DisturbanceSignal> {
    let channels = sys.b1.ncols();
    let source = match spec.kind {
        DisturbanceKind::None => Source::Zero,
        DisturbanceKind::Sinusoid => Source::Sinusoid {
            amplitude: spec.amplitude,
            frequency: spec.frequency,
        },
        DisturbanceKind::FilteredNoise => {
            if !(hold > 0.0) || !(spec.bandwidth > 0.0) {
                return Err(Error::InvalidParams(
                    "filtered noise needs positive bandwidth and hold".into(),
                ));
            }
            let alpha = (-spec.bandwidth * hold).exp();
            Source::Noise {
                alpha,
                gain: spec.amplitude * (1.0 - alpha * alpha).sqrt(),
                hold,
                rng: Box::new(ChaCha8Rng::seed_from_u64(spec.seed)),
                samples: Vec::new(),
            }
        }
        DisturbanceKind::WorstCaseLinear => {
            let rs = riccati.ok_or(Error::MissingRiccati)?;
            Source::Feedback {
                gain: rs.worst_case_gain(sys),
            }
        }
    };
    Ok(DisturbanceSignal {
        channels,
        duration: spec.duration,
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{scalar_test_system, solve_h_infinity_riccati};

    #[test]
    fn none_is_zero() {
        let sys = scalar_test_system(2.0);
        let mut d = make_disturbance(&DisturbanceSpec::none(), &sys, None, 1e-3).unwrap();
        assert_eq!(d.value(1.3, &DVector::from_element(1, 5.0))[0], 0.0);
    }

    #[test]
    fn sinusoid_peak_is_amplitude() {
        let sys = scalar_test_system(2.0);
        let mut d = make_disturbance(&DisturbanceSpec::sinusoid(1.0, 3.0), &sys, None, 1e-3).unwrap();
        let s = DVector::zeros(1);
        let peak = (0..10_000)
            .map(|k| d.value(k as f64 * 1e-3, &s)[0].abs())
            .fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-5);
        let t = 0.37;
        assert!((d.value(t, &s)[0] - (3.0 * t).sin()).abs() < 1e-15);
    }

    #[test]
    fn worst_case_requires_riccati() {
        let sys = scalar_test_system(2.0);
        assert_eq!(
            make_disturbance(&DisturbanceSpec::worst_case(), &sys, None, 1e-3).unwrap_err(),
            Error::MissingRiccati
        );
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let mut d = make_disturbance(&DisturbanceSpec::worst_case(), &sys, Some(&rs), 1e-3).unwrap();
        let w = d.value(0.0, &DVector::from_element(1, 2.0));
        let p = (2.0 + 7f64.sqrt()) / 1.5;
        assert!((w[0] - 0.25 * p * 2.0).abs() < 1e-9);
    }

    #[test]
    fn noise_is_deterministic_per_seed() {
        let sys = scalar_test_system(2.0);
        let spec = DisturbanceSpec::noise(1.0, 5.0, 42);
        let s = DVector::zeros(1);
        let mut a = make_disturbance(&spec, &sys, None, 1e-2).unwrap();
        let mut b = make_disturbance(&spec, &sys, None, 1e-2).unwrap();
        // out-of-order queries see the same samples
        let late = b.value(0.5, &s);
        let series: Vec<f64> = (0..100).map(|k| a.value(k as f64 * 1e-2, &s)[0]).collect();
        assert!((late[0] - series[50]).abs() < 1e-12);
        let other = DisturbanceSpec::noise(1.0, 5.0, 43);
        let mut c = make_disturbance(&other, &sys, None, 1e-2).unwrap();
        assert_ne!(c.value(0.5, &s)[0], late[0]);
    }

    #[test]
    fn duration_switches_signal_off() {
        let sys = scalar_test_system(2.0);
        let mut spec = DisturbanceSpec::sinusoid(1.0, 1.0);
        spec.duration = Some(1.0);
        let mut d = make_disturbance(&spec, &sys, None, 1e-3).unwrap();
        assert_eq!(d.value(2.0, &DVector::zeros(1))[0], 0.0);
    }
}
