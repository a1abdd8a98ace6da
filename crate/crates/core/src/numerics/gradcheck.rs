//! Central finite-difference oracle for tape gradients. It only ever
//! evaluates the forward loss, so it stays independent of the backward
//! rules it is used to check.

use super::Tensor;
use crate::error::Result;

/// Step used by the gradient suites.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for the relative error. Central differences at
/// [`FD_STEP`] carry round-off of roughly `1e-16 * |loss| / FD_STEP`, about
/// 1e-10 for summed sequence losses near 10, so gradient entries below the
/// floor are compared absolutely (at `1e-9` for a `1e-6` tolerance).
pub const REL_FLOOR: f64 = 1e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central differences of `loss` with respect to every entry of every
/// tensor in `params`.
pub fn numeric_gradients<F>(params: &[Tensor], h: f64, mut loss: F) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&[Tensor]) -> Result<f64>,
{
    let mut work: Vec<Tensor> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut g = Vec::with_capacity(params[p].len());
        for j in 0..params[p].len() {
            let orig = params[p].data()[j];
            work[p].data_mut()[j] = orig + h;
            let plus = loss(&work)?;
            work[p].data_mut()[j] = orig - h;
            let minus = loss(&work)?;
            work[p].data_mut()[j] = orig;
            g.push((plus - minus) / (2.0 * h));
        }
        out.push(g);
    }
    Ok(out)
}

/// Largest [`relative_error`] between matching entries.
pub fn max_relative_error(analytic: &[Vec<f64>], numeric: &[Vec<f64>]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .flat_map(|(a, n)| {
            assert_eq!(a.len(), n.len());
            a.iter().zip(n).map(|(&x, &y)| relative_error(x, y))
        })
        .fold(0.0, f64::max)
}
