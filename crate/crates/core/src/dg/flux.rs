use crate::error::ModelError;
use crate::geometry::GeometryDerivatives;
use crate::model::{eigenvalues, flux, ConservedState, Correction, PhysicalParams};

/// Local Lax-Friedrichs flux `{F} - (1/2) max|lambda| (U_right - U_left)`.
///
/// `left` is the trace from `z_i - 0`, `right` the trace from `z_i + 0`.
#[inline]
pub fn llf_flux(
    left: &ConservedState,
    right: &ConservedState,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
    correction: Correction,
) -> Result<[f64; 2], ModelError> {
    let fl = flux(left, g, params, correction)?;
    let fr = flux(right, g, params, correction)?;
    let (l1, l2) = eigenvalues(left, g, params, correction)?;
    let (r1, r2) = eigenvalues(right, g, params, correction)?;
    let speed = l1.abs().max(l2.abs()).max(r1.abs()).max(r2.abs());
    Ok([
        0.5 * (fl[0] + fr[0]) - 0.5 * speed * (right.a - left.a),
        0.5 * (fl[1] + fr[1]) - 0.5 * speed * (right.q - left.q),
    ])
}
