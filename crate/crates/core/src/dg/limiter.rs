//! TVB minmod slope limiter applied to characteristic variables.

use crate::geometry::GeometryDerivatives;
use crate::model::{eigenvalues, ConservedState, Correction, PhysicalParams};

use super::basis::Basis;
use super::field::{Mesh1D, StateField};

fn minmod(a: f64, b: f64, c: f64) -> f64 {
    if a > 0.0 && b > 0.0 && c > 0.0 {
        a.min(b).min(c)
    } else if a < 0.0 && b < 0.0 && c < 0.0 {
        a.max(b).max(c)
    } else {
        0.0
    }
}

/// Minmod with the TVB bound `|a| <= M dz^2` left untouched.
fn minmod_tvb(a: f64, b: f64, c: f64, bound: f64) -> f64 {
    if a.abs() <= bound {
        a
    } else {
        minmod(a, b, c)
    }
}

/// Row-major 2 x 2 matrix.
type Matrix2 = [[f64; 2]; 2];

/// Left and right eigenvector matrices `(L, R)` at `state`, rows/columns in
/// characteristic order. `R = [[1, 1], [l1, l2]]`.
fn eigenvectors(
    state: &ConservedState,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
    correction: Correction,
) -> Option<(Matrix2, Matrix2)> {
    let (l1, l2) = eigenvalues(state, g, params, correction).ok()?;
    let gap = l2 - l1;
    if !(gap > 0.0) {
        return None;
    }
    let right = [[1.0, 1.0], [l1, l2]];
    let left = [[l2 / gap, -1.0 / gap], [-l1 / gap, 1.0 / gap]];
    Some((left, right))
}

fn apply(m: &[[f64; 2]; 2], v: [f64; 2]) -> [f64; 2] {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

/// Limits every element in place; returns the number of elements modified.
///
/// `geom` holds the geometry at element centres.
#[allow(clippy::too_many_arguments)]
pub fn limit_tvb(
    field: &mut StateField,
    basis: &Basis,
    mesh: &Mesh1D,
    geom: &[GeometryDerivatives],
    params: &PhysicalParams,
    correction: Correction,
    tvb_m: f64,
) -> usize {
    let m = basis.n_modes();
    if m < 2 {
        return 0;
    }
    let n = mesh.n_elements();
    let bound = tvb_m * mesh.dz() * mesh.dz();
    let avg: Vec<[f64; 2]> = (0..n).map(|e| [field.a(e)[0], field.q(e)[0]]).collect();
    let sqrt3 = 3f64.sqrt();
    let mut modified = 0;
    for e in 0..n {
        let mean = avg[e];
        let right_trace = field.combine(e, basis.phi_right());
        let left_trace = field.combine(e, basis.phi_left());
        // A missing neighbour mirrors the available one-sided difference.
        let next = if e + 1 < n {
            avg[e + 1]
        } else if e > 0 {
            [2.0 * mean[0] - avg[e - 1][0], 2.0 * mean[1] - avg[e - 1][1]]
        } else {
            mean
        };
        let prev = if e > 0 {
            avg[e - 1]
        } else {
            [2.0 * mean[0] - next[0], 2.0 * mean[1] - next[1]]
        };
        let state = ConservedState { a: mean[0], q: mean[1] };
        let Some((left, right)) = eigenvectors(&state, &geom[e], params, correction) else {
            continue;
        };
        let dr = apply(&left, [right_trace.a - mean[0], right_trace.q - mean[1]]);
        let dl = apply(&left, [mean[0] - left_trace.a, mean[1] - left_trace.q]);
        let df = apply(&left, [next[0] - mean[0], next[1] - mean[1]]);
        let db = apply(&left, [mean[0] - prev[0], mean[1] - prev[1]]);

        let mut changed = false;
        let mut slope = [0.0; 2];
        for c in 0..2 {
            let r = minmod_tvb(dr[c], df[c], db[c], bound);
            let l = minmod_tvb(dl[c], df[c], db[c], bound);
            if r != dr[c] || l != dl[c] {
                changed = true;
            }
            slope[c] = minmod(0.5 * (dr[c] + dl[c]), df[c], db[c]);
        }
        if !changed {
            continue;
        }
        modified += 1;
        // Half-jump across the element in physical variables; linear mode 1
        // satisfies u(1) - mean = sqrt(3) c_1.
        let half_jump = apply(&right, slope);
        let a = field.a_mut(e);
        a[1] = half_jump[0] / sqrt3;
        a[2..].iter_mut().for_each(|v| *v = 0.0);
        let q = field.q_mut(e);
        q[1] = half_jump[1] / sqrt3;
        q[2..].iter_mut().for_each(|v| *v = 0.0);
    }
    modified
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dg::field::project_initial;

    fn setup(n: usize, k: usize) -> (Mesh1D, Basis, Vec<GeometryDerivatives>, PhysicalParams) {
        let mesh = Mesh1D::new(n, 6.0, k).unwrap();
        let geom = vec![GeometryDerivatives::straight(0.18); n];
        (mesh, Basis::new(k), geom, PhysicalParams::default())
    }

    #[test]
    fn smooth_linear_data_is_untouched() {
        let (mesh, basis, geom, p) = setup(20, 2);
        let mut f = project_initial(&mesh, |z| 0.03 + 1e-4 * z, |z| 0.5 + 0.01 * z).unwrap();
        let before = f.clone();
        let n = limit_tvb(&mut f, &basis, &mesh, &geom, &p, Correction::Extended, 0.0);
        assert_eq!(n, 0);
        assert_eq!(f, before);
    }

    #[test]
    fn step_is_flattened_at_the_jump() {
        let (mesh, basis, geom, p) = setup(20, 2);
        let step = |z: f64| if z < 3.05 { 0.032 } else { 0.030 };
        let mut f = project_initial(&mesh, step, |_| 0.0).unwrap();
        let before = f.clone();
        let n = limit_tvb(&mut f, &basis, &mesh, &geom, &p, Correction::Extended, 0.0);
        assert!(n >= 1);
        // Cell averages are preserved.
        for e in 0..20 {
            assert_eq!(f.a(e)[0], before.a(e)[0]);
            assert_eq!(f.q(e)[0], before.q(e)[0]);
        }
        // No new extrema at the traces of the jump cell.
        let (e, _) = mesh.locate(3.05);
        assert!(f.a(e)[2].abs() < 1e-15);
        for phi in [basis.phi_left(), basis.phi_right()] {
            let a = f.combine(e, phi).a;
            assert!((0.030 - 1e-15..=0.032 + 1e-15).contains(&a), "{a}");
        }
    }

    #[test]
    fn large_tvb_constant_disables_limiting() {
        let (mesh, basis, geom, p) = setup(20, 1);
        let step = |z: f64| if z < 3.05 { 0.032 } else { 0.030 };
        let mut f = project_initial(&mesh, step, |_| 0.0).unwrap();
        let before = f.clone();
        limit_tvb(&mut f, &basis, &mesh, &geom, &p, Correction::Classical, 1e12);
        assert_eq!(f, before);
    }
}
