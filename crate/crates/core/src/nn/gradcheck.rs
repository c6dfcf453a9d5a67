//! Central finite-difference gradient checking.

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Coordinate with the largest relative error.
    pub worst_index: usize,
    pub pass: bool,
}

/// Compares `analytic` with central differences of `f` at `params`.
///
/// Relative error per coordinate is `|a - n| / max(|a|, |n|, 1e-8)`; the
/// check passes when every coordinate is below `tol`.
pub fn grad_check<F>(mut f: F, params: &[f64], analytic: &[f64], h: f64, tol: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    check_len("analytic gradient", params.len(), analytic.len())?;
    let mut probe = params.to_vec();
    let mut worst = (0.0f64, 0usize);
    for i in 0..params.len() {
        probe[i] = params[i] + h;
        let up = f(&probe)?;
        probe[i] = params[i] - h;
        let down = f(&probe)?;
        probe[i] = params[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::numeric(format!("objective is not finite around coordinate {i}")));
        }
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst.0,
        worst_index: worst.1,
        pass: worst.0 < tol,
    })
}
