use nalgebra::{DMatrix, LU};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    make_disturbance, simulate, Controller, DisturbanceKind, DisturbanceSpec, Plant, SimOptions,
};
use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, singular_values_complex, spectral_abscissa, C64};
use crate::synthesis::{LinearSystem, RiccatiSolution};

/// Relative gap between the lower and upper level in the norm iteration.
const LEVEL_TOL: f64 = 1e-6;
const MAX_LEVEL_ITERS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainMethod {
    FrequencyDomain,
    EmpiricalEnsemble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainEstimate {
    pub method: GainMethod,
    pub value: f64,
    pub gamma_design: f64,
    /// Frequency of the peak, or the label of the worst ensemble member.
    pub worst_input: String,
    pub ensemble_size: usize,
}

impl GainEstimate {
    pub fn below_design(&self) -> bool {
        self.value < self.gamma_design
    }
}

/// Closed loop `(A_cl, B1, [C; -K])` with folded (Euclidean) operators.
struct ClosedLoop {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
}

impl ClosedLoop {
    fn new(sys: &LinearSystem, rs: &RiccatiSolution) -> Self {
        let f = sys.folded();
        let k = f.b2.transpose() * &rs.p_folded;
        let a = &f.a - &f.b2 * &k;
        let (p, n) = (f.c.nrows(), f.c.ncols());
        let mut c = DMatrix::zeros(p + k.nrows(), n);
        c.view_mut((0, 0), (p, n)).copy_from(&f.c);
        c.view_mut((p, 0), (k.nrows(), n)).copy_from(&(-k));
        Self { a, b: f.b1, c }
    }

    fn is_trivial(&self) -> bool {
        self.b.amax() == 0.0 || self.c.amax() == 0.0
    }

    /// Largest singular value of `C (i w I - A)^{-1} B`.
    fn sigma_max(&self, omega: f64) -> Result<f64> {
        let n = self.a.nrows();
        let m = DMatrix::from_fn(n, n, |i, j| {
            let diag = if i == j { C64::new(0.0, omega) } else { C64::new(0.0, 0.0) };
            diag - C64::new(self.a[(i, j)], 0.0)
        });
        let rhs = self.b.map(|x| C64::new(x, 0.0));
        let x = LU::new(m)
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical(format!("resolvent singular at omega = {omega}")))?;
        let g = self.c.map(|x| C64::new(x, 0.0)) * x;
        Ok(singular_values_complex(&g).iter().copied().fold(0.0, f64::max))
    }

    /// Nonnegative frequencies where `level` is a singular value of the
    /// transfer function, read off the level-set Hamiltonian.
    fn crossings(&self, level: f64) -> Result<Vec<f64>> {
        let n = self.a.nrows();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        h.view_mut((0, 0), (n, n)).copy_from(&self.a);
        h.view_mut((0, n), (n, n))
            .copy_from(&(&self.b * self.b.transpose() / (level * level)));
        h.view_mut((n, 0), (n, n)).copy_from(&(-(self.c.transpose() * &self.c)));
        h.view_mut((n, n), (n, n)).copy_from(&(-self.a.transpose()));
        let spectrum = eigenvalues(&h)?;
        let radius = spectrum.iter().map(|l| l.norm()).fold(1.0, f64::max);
        let mut omegas: Vec<f64> = spectrum
            .iter()
            .filter(|l| l.re.abs() <= 1e-8 * radius && l.im >= 0.0)
            .map(|l| l.im)
            .collect();
        omegas.sort_by(f64::total_cmp);
        omegas.dedup_by(|a, b| (*a - *b).abs() <= 1e-10 * radius);
        Ok(omegas)
    }

    fn hinf_norm(&self) -> Result<(f64, f64)> {
        let mut best = (self.sigma_max(0.0)?, 0.0);
        for l in eigenvalues(&self.a)? {
            for w in [l.im.abs(), l.norm()] {
                let s = self.sigma_max(w)?;
                if s > best.0 {
                    best = (s, w);
                }
            }
        }
        if best.0 == 0.0 {
            return Ok(best);
        }
        for _ in 0..MAX_LEVEL_ITERS {
            let level = best.0 * (1.0 + 2.0 * LEVEL_TOL);
            let omegas = self.crossings(level)?;
            if omegas.is_empty() {
                return Ok(best);
            }
            let mut probes = vec![0.0];
            probes.extend(omegas.windows(2).map(|p| 0.5 * (p[0] + p[1])));
            probes.extend(omegas.iter().copied());
            let before = best.0;
            for w in probes {
                let s = self.sigma_max(w)?;
                if s > best.0 {
                    best = (s, w);
                }
            }
            if best.0 <= before * (1.0 + 1e-12) {
                return self.bisect_levels(best);
            }
        }
        self.bisect_levels(best)
    }

    /// Plain bisection on the level, used when the midpoint step stalls.
    fn bisect_levels(&self, lower: (f64, f64)) -> Result<(f64, f64)> {
        let mut lo = lower.0;
        let mut hi = 2.0 * lo;
        while !self.crossings(hi)?.is_empty() {
            lo = hi;
            hi *= 2.0;
        }
        let mut peak = lower.1;
        while hi - lo > 1e-5 * hi {
            let mid = 0.5 * (lo + hi);
            match self.crossings(mid)?.first() {
                Some(w) => {
                    lo = mid;
                    peak = *w;
                }
                None => hi = mid,
            }
        }
        Ok((0.5 * (lo + hi), peak))
    }
}

fn require_stable(sys: &LinearSystem, rs: &RiccatiSolution) -> Result<()> {
    let abscissa = spectral_abscissa(&rs.closed_loop_drift(sys))?;
    if abscissa >= 0.0 {
        return Err(Error::UnstableClosedLoop(abscissa));
    }
    Ok(())
}

/// `|| [C; -K] (sI - A_cl)^{-1} B1 ||_inf` for the closed loop `A_cl = A_d - B2 K`.
pub fn closed_loop_hinf_norm(sys: &LinearSystem, rs: &RiccatiSolution) -> Result<GainEstimate> {
    require_stable(sys, rs)?;
    let cl = ClosedLoop::new(sys, rs);
    let (value, omega) = if cl.is_trivial() {
        (0.0, 0.0)
    } else {
        cl.hinf_norm()?
    };
    Ok(GainEstimate {
        method: GainMethod::FrequencyDomain,
        value,
        gamma_design: rs.gamma_used,
        worst_input: format!("omega={omega}"),
        ensemble_size: 0,
    })
}

/// Largest singular value of the closed-loop transfer function at each frequency.
pub fn frequency_response(sys: &LinearSystem, rs: &RiccatiSolution, omegas: &[f64]) -> Result<Vec<f64>> {
    require_stable(sys, rs)?;
    let cl = ClosedLoop::new(sys, rs);
    omegas.iter().map(|w| cl.sigma_max(*w)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSample {
    pub index: usize,
    pub label: String,
    pub frequency: Option<f64>,
    pub output_energy: f64,
    pub input_energy: f64,
    pub ratio: f64,
    pub max_sup_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalGain {
    pub estimate: GainEstimate,
    pub samples: Vec<EnsembleSample>,
}

fn describe(spec: &DisturbanceSpec) -> (String, Option<f64>) {
    match spec.kind {
        DisturbanceKind::Sinusoid => (format!("sinusoid omega={}", spec.frequency), Some(spec.frequency)),
        DisturbanceKind::FilteredNoise => (format!("noise seed={}", spec.seed), None),
        DisturbanceKind::WorstCaseLinear => ("worst_case_linear".into(), None),
        DisturbanceKind::None => ("none".into(), None),
    }
}

/// Log-spaced sinusoid frequencies over `[a/10, 10 rho]`, where `a` is the
/// closed-loop decay rate and `rho` the closed-loop spectral radius. The top is
/// capped at `pi / (20 dt)` so every period spans at least 40 steps.
pub fn default_frequencies(sys: &LinearSystem, rs: &RiccatiSolution, dt: f64, count: usize) -> Result<Vec<f64>> {
    let spectrum = eigenvalues(&rs.closed_loop_drift(sys))?;
    let a = -spectrum.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    if !(a > 0.0) {
        return Err(Error::UnstableClosedLoop(-a));
    }
    let rho = spectrum.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let lo = a / 10.0;
    let hi = (10.0 * rho).min(std::f64::consts::PI / (20.0 * dt)).max(lo * 10.0);
    Ok(match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo * (hi / lo).powf(k as f64 / (count - 1) as f64))
            .collect(),
    })
}

/// Sinusoids at `frequencies` followed by `noise_count` seeded low-pass noise
/// signals (seeds `seed, seed+1, ...`), all of the given amplitude.
pub fn default_ensemble(
    frequencies: &[f64],
    noise_count: usize,
    amplitude: f64,
    noise_bandwidth: f64,
    seed: u64,
) -> Vec<DisturbanceSpec> {
    let mut out: Vec<DisturbanceSpec> = frequencies
        .iter()
        .map(|w| DisturbanceSpec::sinusoid(amplitude, *w))
        .collect();
    out.extend((0..noise_count as u64).map(|k| DisturbanceSpec::noise(amplitude, noise_bandwidth, seed.wrapping_add(k))));
    out
}

/// Largest `sqrt(int |Cs|^2 + |u|^2) / sqrt(int |w|^2)` over the ensemble,
/// simulated from `s0 = 0`. Members run in parallel and are reduced in index
/// order.
pub fn empirical_l2_gain(
    plant: &Plant,
    controller: &Controller,
    ensemble: &[DisturbanceSpec],
    opts: &SimOptions,
    riccati: Option<&RiccatiSolution>,
    gamma_design: f64,
) -> Result<EmpiricalGain> {
    if ensemble.is_empty() {
        return Err(Error::ZeroInputEnergy);
    }
    let mut run_opts = opts.clone();
    run_opts.record_states = false;
    let s0 = nalgebra::DVector::zeros(plant.state_dim());
    let samples: Vec<EnsembleSample> = ensemble
        .par_iter()
        .enumerate()
        .map(|(index, spec)| {
            let mut w = make_disturbance(spec, &plant.sys, riccati, opts.dt)?;
            let traj = simulate(plant, &s0, controller, &mut w, &run_opts, riccati)?;
            let input_energy = traj.input_energy();
            if !(input_energy > 0.0) {
                return Err(Error::ZeroInputEnergy);
            }
            let output_energy = traj.output_energy();
            let (label, frequency) = describe(spec);
            Ok(EnsembleSample {
                index,
                label,
                frequency,
                output_energy,
                input_energy,
                ratio: (output_energy / input_energy).sqrt(),
                max_sup_norm: traj.max_sup_norm,
            })
        })
        .collect::<Result<_>>()?;
    let worst = samples
        .iter()
        .fold(&samples[0], |best, s| if s.ratio > best.ratio { s } else { best });
    Ok(EmpiricalGain {
        estimate: GainEstimate {
            method: GainMethod::EmpiricalEnsemble,
            value: worst.ratio,
            gamma_design,
            worst_input: worst.label.clone(),
            ensemble_size: samples.len(),
        },
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ModelParams, Scheme};
    use crate::synthesis::{scalar_test_system, solve_h_infinity_riccati};

    fn scalar_oracle() -> f64 {
        let p = (2.0 + 7f64.sqrt()) / 1.5;
        (1.0 + p * p).sqrt() / (p - 1.0)
    }

    #[test]
    fn scalar_norm_matches_single_pole_formula() {
        let sys = scalar_test_system(2.0);
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let g = closed_loop_hinf_norm(&sys, &rs).unwrap();
        assert!((g.value - scalar_oracle()).abs() < 1e-6, "{}", g.value);
        assert!((g.value - 1.5518).abs() < 2e-4);
        assert!(g.below_design());
    }

    #[test]
    fn no_disturbance_path_gives_zero() {
        let mut sys = scalar_test_system(2.0);
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        sys.b1 = DMatrix::zeros(1, 1);
        assert_eq!(closed_loop_hinf_norm(&sys, &rs).unwrap().value, 0.0);
    }

    #[test]
    fn zero_output_gives_zero() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let sys = LinearSystem::euclidean(-&one, one.clone(), one.clone(), DMatrix::zeros(1, 1), 2.0).unwrap();
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        assert!(rs.gain.amax() < 1e-12);
        assert_eq!(closed_loop_hinf_norm(&sys, &rs).unwrap().value, 0.0);
    }

    #[test]
    fn unstable_loop_rejected() {
        let sys = scalar_test_system(2.0);
        let mut rs = solve_h_infinity_riccati(&sys).unwrap();
        rs.gain = DMatrix::zeros(1, 1);
        rs.p_folded = DMatrix::zeros(1, 1);
        assert!(matches!(closed_loop_hinf_norm(&sys, &rs), Err(Error::UnstableClosedLoop(_))));
    }

    #[test]
    fn two_mode_system_peak_away_from_zero() {
        // lightly damped oscillator under weak feedback: the peak sits near the resonance
        let a = DMatrix::from_row_slice(2, 2, &[-0.05, 1.0, -1.0, -0.05]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let sys = LinearSystem::euclidean(a, b.clone(), b, c, 50.0).unwrap();
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let g = closed_loop_hinf_norm(&sys, &rs).unwrap();
        let grid: Vec<f64> = (0..20_000).map(|k| k as f64 * 2e-4).collect();
        let dense = frequency_response(&sys, &rs, &grid).unwrap().into_iter().fold(0.0, f64::max);
        assert!(g.value >= dense * (1.0 - 1e-9));
        assert!(g.value <= dense * (1.0 + 1e-4), "{} vs {}", g.value, dense);
    }

    #[test]
    fn empirical_gain_below_norm_on_scalar_loop() {
        let sys = scalar_test_system(2.0);
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let plant = Plant::new(sys.clone(), ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap());
        let norm = closed_loop_hinf_norm(&sys, &rs).unwrap().value;
        let mut opts = SimOptions::new(20.0, 1e-3, Scheme::Rk4Explicit);
        opts.linear_only = true;
        let freqs = default_frequencies(&sys, &rs, opts.dt, 6).unwrap();
        let ens = default_ensemble(&freqs, 2, 1.0, 5.0, 3);
        let est = empirical_l2_gain(&plant, &Controller::linear(&rs), &ens, &opts, Some(&rs), 2.0).unwrap();
        assert_eq!(est.estimate.ensemble_size, 8);
        assert!(est.estimate.value <= norm * 1.02);
        // the lowest frequency sits near the zero-frequency peak
        assert!(est.samples[0].ratio > 0.9 * norm);
    }

    #[test]
    fn zero_amplitude_ensemble_rejected() {
        let sys = scalar_test_system(2.0);
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let plant = Plant::new(sys, ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap());
        let ens = default_ensemble(&[1.0, 2.0], 0, 0.0, 1.0, 0);
        let opts = SimOptions::new(1.0, 1e-2, Scheme::ImexEuler);
        assert_eq!(
            empirical_l2_gain(&plant, &Controller::linear(&rs), &ens, &opts, Some(&rs), 2.0).unwrap_err(),
            Error::ZeroInputEnergy
        );
    }
}
