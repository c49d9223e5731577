use super::riccati::solve_unchecked;
use super::{check_stabilizability_detectability, LinearSystem};
use crate::error::{Error, Result};

/// Upper endpoint beyond which the bisection gives up.
pub const GAMMA_CEILING: f64 = 1e6;
const RELATIVE_WIDTH: f64 = 1e-4;

/// Smallest feasible attenuation level by bisection, to relative width 1e-4.
///
/// Returns the feasible (upper) bracket endpoint, or `lo` itself when `lo` is
/// already feasible. `hi` is doubled until feasible.
pub fn minimal_gamma(sys: &LinearSystem, lo: f64, hi: f64) -> Result<f64> {
    check_stabilizability_detectability(sys)?.into_result()?;
    let feasible = |g: f64| solve_unchecked(&sys.with_gamma(g)).is_ok();
    let mut lo = lo.max(f64::MIN_POSITIVE);
    if feasible(lo) {
        return Ok(lo);
    }
    let mut hi = hi.max(2.0 * lo);
    while !feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > GAMMA_CEILING {
            return Err(Error::NoFeasibleGammaFound(GAMMA_CEILING));
        }
    }
    while (hi - lo) > RELATIVE_WIDTH * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
