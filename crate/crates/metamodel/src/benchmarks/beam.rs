//! Simply-supported beam with a rectangular cross-section under a midpoint
//! load. Inputs are {b, h, L, E, P}: cross-section width and height [m],
//! span [m], Young's modulus [MPa], load [MN]; the response is the mid-span
//! deflection [m].

use super::BenchmarkError;
use crate::input::{marginal_from_moments, InputError, InputModel, MarginalFamily};

/// u = P L³ / (4 E b h³).
pub fn beam_deflection(x: &[f64]) -> Result<f64, BenchmarkError> {
    if x.len() != 5 {
        return Err(BenchmarkError::DimensionMismatch {
            expected: 5,
            got: x.len(),
        });
    }
    for (i, &v) in x.iter().enumerate() {
        if !(v > 0.0) {
            return Err(BenchmarkError::NonPositiveInput { index: i, value: v });
        }
    }
    let (b, h, l, e, p) = (x[0], x[1], x[2], x[3], x[4]);
    Ok(p * l.powi(3) / (4.0 * e * b * h.powi(3)))
}

/// Independent lognormal marginals for {b, h, L, E, P}.
pub fn beam_input_model() -> Result<InputModel, InputError> {
    let spec = [
        ("b", 0.15, 0.05),
        ("h", 0.3, 0.05),
        ("L", 5.0, 0.01),
        ("E", 30_000.0, 0.15),
        ("P", 0.01, 0.20),
    ];
    let marginals = spec
        .iter()
        .map(|&(label, mean, cov)| {
            marginal_from_moments(MarginalFamily::Lognormal, mean, cov)
                .map(|m| m.with_label(label))
        })
        .collect::<Result<Vec<_>, _>>()?;
    InputModel::independent(marginals)
}
