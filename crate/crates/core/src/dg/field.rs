use crate::error::SolverError;
use crate::model::ConservedState;

use super::basis::{gauss_legendre, Basis};

/// Uniform partition of `[0, L]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    n_elements: usize,
    length: f64,
    degree: usize,
}

impl Mesh1D {
    pub fn new(n_elements: usize, length: f64, degree: usize) -> Result<Self, SolverError> {
        if n_elements == 0 {
            return Err(SolverError::InvalidSetting {
                name: "n_elements",
                reason: "need at least one element".into(),
            });
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SolverError::InvalidSetting {
                name: "length",
                reason: format!("must be positive, got {length}"),
            });
        }
        Ok(Self {
            n_elements,
            length,
            degree,
        })
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dz(&self) -> f64 {
        self.length / self.n_elements as f64
    }

    /// Left end of element `e`; `node(N) = L`.
    pub fn node(&self, i: usize) -> f64 {
        if i == self.n_elements {
            self.length
        } else {
            i as f64 * self.dz()
        }
    }

    /// Physical coordinate of reference point `xi` in element `e`.
    #[inline]
    pub fn to_physical(&self, e: usize, xi: f64) -> f64 {
        let dz = self.dz();
        (e as f64 + 0.5 * (xi + 1.0)) * dz
    }

    /// Element and reference coordinate containing `z`; interface points go right.
    pub fn locate(&self, z: f64) -> (usize, f64) {
        let dz = self.dz();
        let e = ((z / dz).floor().max(0.0) as usize).min(self.n_elements - 1);
        let xi = 2.0 * (z - e as f64 * dz) / dz - 1.0;
        (e, xi.clamp(-1.0, 1.0))
    }
}

/// Modal coefficients of `(A, Q)`. Layout: all `A` coefficients element by
/// element, then all `Q` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct StateField {
    n_elements: usize,
    n_modes: usize,
    pub coeffs: Vec<f64>,
    pub t: f64,
}

impl StateField {
    pub fn zeros(n_elements: usize, n_modes: usize) -> Self {
        Self {
            n_elements,
            n_modes,
            coeffs: vec![0.0; 2 * n_elements * n_modes],
            t: 0.0,
        }
    }

    pub fn n_elements(&self) -> usize {
        self.n_elements
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    #[inline]
    pub fn a(&self, e: usize) -> &[f64] {
        let m = self.n_modes;
        &self.coeffs[e * m..(e + 1) * m]
    }

    #[inline]
    pub fn q(&self, e: usize) -> &[f64] {
        let m = self.n_modes;
        let off = self.n_elements * m;
        &self.coeffs[off + e * m..off + (e + 1) * m]
    }

    pub fn a_mut(&mut self, e: usize) -> &mut [f64] {
        let m = self.n_modes;
        &mut self.coeffs[e * m..(e + 1) * m]
    }

    pub fn q_mut(&mut self, e: usize) -> &mut [f64] {
        let m = self.n_modes;
        let off = self.n_elements * m;
        &mut self.coeffs[off + e * m..off + (e + 1) * m]
    }

    /// State from basis values `phi` in element `e`.
    #[inline]
    pub fn combine(&self, e: usize, phi: &[f64]) -> ConservedState {
        ConservedState {
            a: dot(self.a(e), phi),
            q: dot(self.q(e), phi),
        }
    }

    pub fn eval(&self, basis: &Basis, e: usize, xi: f64) -> ConservedState {
        let (phi, _) = basis.eval_at(xi);
        self.combine(e, &phi)
    }

    /// `(dA/dz, dQ/dz)` at `xi` in element `e`.
    pub fn slopes(&self, basis: &Basis, mesh: &Mesh1D, e: usize, xi: f64) -> (f64, f64) {
        let (_, dphi) = basis.eval_at(xi);
        let j = 2.0 / mesh.dz();
        (j * dot(self.a(e), &dphi), j * dot(self.q(e), &dphi))
    }

    /// `sum_e int_{I_e} A dz`.
    pub fn total_area_integral(&self, mesh: &Mesh1D) -> f64 {
        let dz = mesh.dz();
        (0..self.n_elements).map(|e| self.a(e)[0] * dz).sum()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Local L2 projection of `a0`, `q0` onto the degree-`k` space, using a
/// `k + 3` point rule per element.
pub fn project_initial(
    mesh: &Mesh1D,
    a0: impl Fn(f64) -> f64,
    q0: impl Fn(f64) -> f64,
) -> Result<StateField, SolverError> {
    let k = mesh.degree();
    let basis = Basis::with_quadrature(k, k + 3);
    let m = basis.n_modes();
    let mut field = StateField::zeros(mesh.n_elements(), m);
    let (nodes, _) = gauss_legendre(k + 3);
    for e in 0..mesh.n_elements() {
        let mut ca = vec![0.0; m];
        let mut cq = vec![0.0; m];
        for (qi, &xi) in nodes.iter().enumerate() {
            let z = mesh.to_physical(e, xi);
            let a = a0(z);
            if !(a > 0.0) || !a.is_finite() {
                return Err(SolverError::InvalidInitialization(format!(
                    "A(z = {z}) = {a} is not positive"
                )));
            }
            let q = q0(z);
            if !q.is_finite() {
                return Err(SolverError::InvalidInitialization(format!(
                    "Q(z = {z}) = {q} is not finite"
                )));
            }
            let w = basis.weights()[qi];
            let phi = basis.phi_at_node(qi);
            for j in 0..m {
                // (1/dz) int a phi_j dz = (1/2) sum w a phi_j
                ca[j] += 0.5 * w * a * phi[j];
                cq[j] += 0.5 * w * q * phi[j];
            }
        }
        field.a_mut(e).copy_from_slice(&ca);
        field.q_mut(e).copy_from_slice(&cq);
    }
    Ok(field)
}
