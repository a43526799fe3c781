use crate::error::Result;
use crate::simulator::dynamics::Dynamics;

/// `||f(x, r)||_inf`.
pub fn rhs_norm<D: Dynamics + ?Sized>(sys: &D, x: &[f64], load: &[f64]) -> Result<f64> {
    let mut dx = vec![0.0; sys.dim()];
    sys.rhs(x, load, &mut dx)?;
    Ok(dx.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Earliest sample time from which the residual stays below `tol` until the
/// end of the trajectory, provided that stretch spans at least `window`
/// seconds. A quiet spell that is followed by a disturbance does not count.
pub fn detect_steady_state(times: &[f64], residuals: &[f64], tol: f64, window: f64) -> Option<f64> {
    let quiet = residuals.iter().rev().take_while(|&&r| r < tol).count();
    let first = times.len().checked_sub(quiet)?;
    let (&start, &end) = (times.get(first)?, times.last()?);
    (end - start >= window - 1e-12).then_some(start)
}
