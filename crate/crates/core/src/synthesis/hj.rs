//! Hamilton-Jacobi machinery: the residual of the value-gradient equation and
//! its order-two power-series correction.
//!
//! With `G(s) = P s` the quadratic part of the residual vanishes by the
//! Riccati equation and the residual is cubic. The correction `G2` is the
//! gradient of a cubic form chosen to cancel the cubic terms, which leaves a
//! quartic residual.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LinearSystem, RiccatiSolution};
use crate::dynamics::ModelParams;
use crate::error::{check_len, Error, Result};
use crate::linalg::{complex_schur, C64};
use crate::spatial::Weights;

const RESONANCE_TOL: f64 = 1e-10;
/// The dense cubic tensor has `n^3` entries.
pub const MAX_HJ_STATES: usize = 160;

/// Symmetric 3-tensor in folded coordinates, flat index `(i * n + j) * n + k`.
#[derive(Debug, Clone)]
struct CubicTensor {
    n: usize,
    data: Vec<f64>,
}

impl CubicTensor {
    /// `out_i = sum_{jk} T_ijk z_j z_k`.
    fn contract(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut outer = vec![0.0; n * n];
        for j in 0..n {
            for k in 0..n {
                outer[j * n + k] = z[j] * z[k];
            }
        }
        DVector::from_fn(n, |i, _| {
            self.data[i * n * n..(i + 1) * n * n]
                .iter()
                .zip(&outer)
                .map(|(t, o)| t * o)
                .sum()
        })
    }
}

/// Candidate solution `G(s) = P s + G2(s)` of the Hamilton-Jacobi equation.
#[derive(Debug, Clone)]
pub struct HjRepresentation {
    pub p: DMatrix<f64>,
    weights: Weights,
    g2: Option<CubicTensor>,
}

impl HjRepresentation {
    /// Linear term only.
    pub fn linear(sys: &LinearSystem, rs: &RiccatiSolution) -> Self {
        Self {
            p: rs.p.clone(),
            weights: sys.weights.state.clone(),
            g2: None,
        }
    }

    pub fn has_quadratic_term(&self) -> bool {
        self.g2.is_some()
    }

    pub fn quadratic_part(&self, s: &DVector<f64>) -> DVector<f64> {
        match &self.g2 {
            None => DVector::zeros(s.len()),
            Some(t) => self.weights.unfold(&t.contract(&self.weights.fold(s))),
        }
    }

    pub fn eval(&self, s: &DVector<f64>) -> DVector<f64> {
        &self.p * s + self.quadratic_part(s)
    }

    /// Jacobian of `G` at `s` by central differences; equals `P` at zero.
    pub fn jacobian_fd(&self, s: &DVector<f64>, h: f64) -> DMatrix<f64> {
        let n = s.len();
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut plus = s.clone();
            let mut minus = s.clone();
            plus[j] += h;
            minus[j] -= h;
            jac.set_column(j, &((self.eval(&plus) - self.eval(&minus)) / (2.0 * h)));
        }
        jac
    }

    /// Largest absolute entry of the folded quadratic tensor.
    pub fn quadratic_magnitude(&self) -> f64 {
        self.g2
            .as_ref()
            .map_or(0.0, |t| t.data.iter().fold(0.0, |m, x| f64::max(m, x.abs())))
    }
}

/// `<D_s A s + F(s), G(s)> - |B1* G|^2 / (2 gamma^2) + |B2* G|^2 / 2 - |C s|^2 / 2`.
pub fn hj_residual(
    sys: &LinearSystem,
    params: &ModelParams,
    g: &HjRepresentation,
    s: &DVector<f64>,
) -> Result<f64> {
    let n = sys.state_dim();
    check_len(n, s.len(), "hj residual state")?;
    check_len(n, g.p.nrows(), "hj representation")?;
    let w = &sys.weights;
    let gs = g.eval(s);
    let kappa = params.nonlinear_coefficient();
    let operator = -(&sys.drift * s) + s.map(|x| kappa * x * x);
    let b1g = sys.b1_adjoint() * &gs;
    let b2g = sys.b2_adjoint() * &gs;
    let cs = &sys.c * s;
    let gamma2 = sys.gamma * sys.gamma;
    Ok(w.state.inner_unchecked(&operator, &gs) - w.disturbance.norm_sq(&b1g) / (2.0 * gamma2)
        + 0.5 * w.control.norm_sq(&b2g)
        - 0.5 * w.output.norm_sq(&cs))
}

fn mode_product(t: &[C64], n: usize, mode: usize, m: &DMatrix<C64>) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n * n * n];
    let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    for i in 0..n {
        for d in 0..n {
            let coef = m[(i, d)];
            if coef == C64::new(0.0, 0.0) {
                continue;
            }
            for x in 0..n {
                for y in 0..n {
                    let (dst, src) = match mode {
                        0 => (idx(i, x, y), idx(d, x, y)),
                        1 => (idx(x, i, y), idx(x, d, y)),
                        _ => (idx(x, y, i), idx(x, y, d)),
                    };
                    out[dst] += coef * t[src];
                }
            }
        }
    }
    out
}

/// Order-two correction cancelling the cubic terms of the residual.
///
/// Writes `G2 = grad(T(z,z,z)) / 3` for a symmetric tensor `T` and solves the
/// tensor Sylvester equation `T(A_s z, z, z) = <F_N(s), P s>` mode by mode in
/// the Schur basis of the saddle drift `A_s`.
pub fn hj_quadratic_correction(
    sys: &LinearSystem,
    params: &ModelParams,
    rs: &RiccatiSolution,
) -> Result<HjRepresentation> {
    if !(rs.saddle_abscissa < 0.0) {
        return Err(Error::SaddleUnstable(rs.saddle_abscissa));
    }
    let n = sys.state_dim();
    if n > MAX_HJ_STATES {
        return Err(Error::InvalidParams(format!(
            "quadratic correction supports at most {MAX_HJ_STATES} states, got {n}"
        )));
    }
    let w = &sys.weights.state;
    let kappa = params.nonlinear_coefficient();
    let mut base = HjRepresentation::linear(sys, rs);
    if kappa == 0.0 {
        base.g2 = Some(CubicTensor {
            n,
            data: vec![0.0; n * n * n],
        });
        return Ok(base);
    }

    let pf = &rs.p_folded;
    let nu: Vec<f64> = w.sqrt().iter().map(|r| kappa / r).collect();
    let idx = |a: usize, b: usize, c: usize| (a * n + b) * n + c;
    // rhs = 3 * sym(E), E_{iij} = nu_i P_ij; the factor 3 cancels the 1/3 of sym.
    let mut rhs = vec![C64::new(0.0, 0.0); n * n * n];
    for a in 0..n {
        for b in 0..n {
            rhs[idx(a, a, b)] += C64::new(nu[a] * pf[(a, b)], 0.0);
            rhs[idx(a, b, a)] += C64::new(nu[a] * pf[(a, b)], 0.0);
            rhs[idx(b, a, a)] += C64::new(nu[a] * pf[(a, b)], 0.0);
        }
    }

    let saddle_folded = crate::spatial::fold_operator(&rs.saddle_drift(sys), w, w);
    let (u, tm) = complex_schur(&saddle_folded.transpose())?;
    let uh = u.adjoint();
    let mut y = rhs;
    for mode in 0..3 {
        y = mode_product(&y, n, mode, &uh);
    }
    let scale = (0..n).map(|i| tm[(i, i)].norm()).fold(1.0, f64::max);
    for a in (0..n).rev() {
        for b in (0..n).rev() {
            for c in (0..n).rev() {
                let mut acc = y[idx(a, b, c)];
                for d in (a + 1)..n {
                    acc -= tm[(a, d)] * y[idx(d, b, c)];
                }
                for d in (b + 1)..n {
                    acc -= tm[(b, d)] * y[idx(a, d, c)];
                }
                for d in (c + 1)..n {
                    acc -= tm[(c, d)] * y[idx(a, b, d)];
                }
                let denom = tm[(a, a)] + tm[(b, b)] + tm[(c, c)];
                if denom.norm() < RESONANCE_TOL * scale {
                    return Err(Error::ResonantModes(denom.norm()));
                }
                y[idx(a, b, c)] = acc / denom;
            }
        }
    }
    for mode in 0..3 {
        y = mode_product(&y, n, mode, &u);
    }
    let mut data = vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let perms = [
                    idx(a, b, c),
                    idx(a, c, b),
                    idx(b, a, c),
                    idx(b, c, a),
                    idx(c, a, b),
                    idx(c, b, a),
                ];
                data[idx(a, b, c)] = perms.iter().map(|&k| y[k].re).sum::<f64>() / 6.0;
            }
        }
    }
    base.g2 = Some(CubicTensor { n, data });
    Ok(base)
}

/// Residual evaluated along `alpha * s0` with its log-log slope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualLadder {
    pub scales: Vec<f64>,
    pub residuals: Vec<f64>,
    pub slope: f64,
}

pub fn residual_ladder(
    sys: &LinearSystem,
    params: &ModelParams,
    g: &HjRepresentation,
    s0: &DVector<f64>,
    scales: &[f64],
) -> Result<ResidualLadder> {
    let residuals = scales
        .iter()
        .map(|&a| hj_residual(sys, params, g, &(s0 * a)))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = scales
        .iter()
        .zip(&residuals)
        .map(|(a, r)| (a.ln(), r.abs().max(f64::MIN_POSITIVE).ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(ResidualLadder {
        scales: scales.to_vec(),
        residuals,
        slope: sxy / sxx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{scalar_test_system, solve_h_infinity_riccati};

    fn ladder() -> Vec<f64> {
        (1..=4).map(|k| 10f64.powi(-k)).collect()
    }

    #[test]
    fn residual_vanishes_at_zero() {
        let sys = scalar_test_system(2.0);
        let params = ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let g = hj_quadratic_correction(&sys, &params, &rs).unwrap();
        assert_eq!(hj_residual(&sys, &params, &g, &DVector::zeros(1)).unwrap(), 0.0);
        assert_eq!(g.eval(&DVector::zeros(1))[0], 0.0);
    }

    #[test]
    fn scalar_correction_closed_form() {
        let sys = scalar_test_system(2.0);
        let params = ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let g = hj_quadratic_correction(&sys, &params, &rs).unwrap();
        // P s^3 - a_s T s^3 = 0  =>  T = P / a_s
        let p = rs.p[(0, 0)];
        let t = p / rs.saddle_abscissa;
        let q = g.quadratic_part(&DVector::from_element(1, 1.0))[0];
        assert!((q - t).abs() < 1e-12, "{q} vs {t}");
        let s0 = DVector::from_element(1, 1.0);
        let lin = residual_ladder(&sys, &params, &HjRepresentation::linear(&sys, &rs), &s0, &ladder()).unwrap();
        let quad = residual_ladder(&sys, &params, &g, &s0, &ladder()).unwrap();
        assert!((lin.slope - 3.0).abs() < 0.1, "{}", lin.slope);
        assert!((quad.slope - 4.0).abs() < 0.15, "{}", quad.slope);
        // G = P s leaves exactly <F_N(s), P s>
        for (a, r) in lin.scales.iter().zip(&lin.residuals) {
            assert!((r / a.powi(3) - p).abs() < 1e-8 * p);
        }
    }

    #[test]
    fn vanishing_nonlinearity_gives_zero_correction() {
        let sys = scalar_test_system(2.0);
        let params = ModelParams::new(1.0, 0.0, 1.0, 2.0).unwrap();
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let g = hj_quadratic_correction(&sys, &params, &rs).unwrap();
        assert_eq!(g.quadratic_magnitude(), 0.0);
    }

    #[test]
    fn gradient_at_zero_is_p() {
        let sys = scalar_test_system(3.0);
        let params = ModelParams::new(1.0, 2.0, 0.5, 3.0).unwrap();
        let rs = solve_h_infinity_riccati(&sys).unwrap();
        let g = hj_quadratic_correction(&sys, &params, &rs).unwrap();
        let jac = g.jacobian_fd(&DVector::zeros(1), 1e-6);
        assert!((jac[(0, 0)] - rs.p[(0, 0)]).abs() < 1e-8);
    }

    #[test]
    fn rejects_unstable_saddle() {
        let sys = scalar_test_system(2.0);
        let params = ModelParams::new(1.0, 1.0, 1.0, 2.0).unwrap();
        let mut rs = solve_h_infinity_riccati(&sys).unwrap();
        rs.saddle_abscissa = 0.1;
        assert!(matches!(
            hj_quadratic_correction(&sys, &params, &rs),
            Err(Error::SaddleUnstable(_))
        ));
    }
}
