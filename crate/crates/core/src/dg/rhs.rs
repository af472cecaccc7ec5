//! Semi-discrete DG operator.
//!
//! Per element `I_e` and test function `phi_j`:
//!
//! ```text
//! dz dU_j/dt = int F(U) dphi_j/dz + int S(U) phi_j - F*(z_{e+1}) phi_j(1) + F*(z_e) phi_j(-1)
//! ```

use crate::error::SolverError;
use crate::geometry::{GeometryDerivatives, VesselGeometry};
use crate::model::{ConservedState, Correction, PhysicalParams};

use super::basis::Basis;
use super::boundary::{boundary_trace, BoundarySpec, FrozenInvariants, Side};
use super::field::{dot, project_initial, Mesh1D, StateField};
use super::kernel::PointModel;

/// Boundary interface fluxes of one operator evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryFluxes {
    /// Numerical flux at `z = 0`.
    pub inlet: [f64; 2],
    /// Numerical flux at `z = L`.
    pub outlet: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct Discretization {
    mesh: Mesh1D,
    basis: Basis,
    params: PhysicalParams,
    correction: Correction,
    spec: BoundarySpec,
    frozen: FrozenInvariants,
    iface_geom: Vec<GeometryDerivatives>,
    quad_model: Vec<PointModel>,
    iface_model: Vec<PointModel>,
    /// Discrete residual of the projected rest state, subtracted when present.
    rest_residual: Option<Vec<f64>>,
}

/// Ghost handling used by the operator.
#[derive(Clone, Copy)]
enum Ghosts {
    /// Characteristic boundary conditions at time `t`.
    Physical(f64),
    /// Ghost equals the interior trace.
    Transparent,
}

impl Discretization {
    pub fn new(
        geometry: &VesselGeometry,
        mesh: Mesh1D,
        params: PhysicalParams,
        correction: Correction,
        spec: BoundarySpec,
    ) -> Result<Self, SolverError> {
        params.validate().map_err(|e| SolverError::InvalidSetting {
            name: "params",
            reason: e.to_string(),
        })?;
        if (mesh.length() - geometry.length()).abs() > 1e-12 * geometry.length() {
            return Err(SolverError::InvalidSetting {
                name: "length",
                reason: format!(
                    "mesh length {} differs from vessel length {}",
                    mesh.length(),
                    geometry.length()
                ),
            });
        }
        let basis = Basis::new(mesh.degree());
        let mut quad_model = Vec::with_capacity(mesh.n_elements() * basis.n_quad());
        for e in 0..mesh.n_elements() {
            for &xi in basis.nodes() {
                let g = geometry.derivatives_at(mesh.to_physical(e, xi))?;
                quad_model.push(PointModel::new(&g, &params, correction));
            }
        }
        let iface_geom = (0..=mesh.n_elements())
            .map(|i| geometry.derivatives_at(mesh.node(i)))
            .collect::<Result<Vec<_>, _>>()?;
        let iface_model = iface_geom
            .iter()
            .map(|g| PointModel::new(g, &params, correction))
            .collect();
        // Replaced by `freeze_invariants` once the initial state is known.
        let frozen = FrozenInvariants {
            inlet_w1: 0.0,
            outlet_w2: 0.0,
        };
        Ok(Self {
            mesh,
            basis,
            params,
            correction,
            spec,
            frozen,
            iface_geom,
            quad_model,
            iface_model,
            rest_residual: None,
        })
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn correction(&self) -> Correction {
        self.correction
    }

    pub fn boundary_spec(&self) -> &BoundarySpec {
        &self.spec
    }

    pub fn frozen_invariants(&self) -> &FrozenInvariants {
        &self.frozen
    }

    pub fn inlet_geometry(&self) -> &GeometryDerivatives {
        &self.iface_geom[0]
    }

    pub fn outlet_geometry(&self) -> &GeometryDerivatives {
        &self.iface_geom[self.mesh.n_elements()]
    }

    pub fn is_well_balanced(&self) -> bool {
        self.rest_residual.is_some()
    }

    /// Captures the incoming invariants from the initial traces.
    pub fn freeze_invariants(&mut self, initial: &StateField) -> Result<(), SolverError> {
        let n = self.mesh.n_elements();
        let inlet = initial.combine(0, self.basis.phi_left());
        let outlet = initial.combine(n - 1, self.basis.phi_right());
        self.frozen =
            FrozenInvariants::capture(&inlet, &self.iface_geom[0], &outlet, &self.iface_geom[n], &self.params)
                .map_err(|reason| SolverError::Boundary {
                    side: "inlet/outlet",
                    t: initial.t,
                    reason,
                })?;
        Ok(())
    }

    /// Projected rest state `A = R0^2`, `Q = 0`.
    pub fn rest_state(&self, geometry: &VesselGeometry) -> Result<StateField, SolverError> {
        project_initial(&self.mesh, |z| geometry.radius(z).powi(2), |_| 0.0)
    }

    /// Subtracts the discrete residual of the projected rest state from every
    /// evaluation, so that `A = R0^2, Q = 0` is preserved to round-off.
    pub fn enable_well_balancing(&mut self, geometry: &VesselGeometry) -> Result<(), SolverError> {
        let rest = self.rest_state(geometry)?;
        self.rest_residual = None;
        let mut out = vec![0.0; rest.coeffs.len()];
        self.evaluate(&rest, Ghosts::Transparent, &mut out)?;
        self.rest_residual = Some(out);
        Ok(())
    }

    /// Raw operator (no rest-state subtraction) with transparent boundaries.
    pub fn unbalanced_rest_residual(&self, geometry: &VesselGeometry) -> Result<Vec<f64>, SolverError> {
        let rest = self.rest_state(geometry)?;
        let mut out = vec![0.0; rest.coeffs.len()];
        self.evaluate(&rest, Ghosts::Transparent, &mut out)?;
        Ok(out)
    }

    /// `M^{-1} RHS(U)` into `out`, returning the boundary fluxes used.
    pub fn rhs(&self, field: &StateField, t: f64, out: &mut [f64]) -> Result<BoundaryFluxes, SolverError> {
        let fluxes = self.evaluate(field, Ghosts::Physical(t), out)?;
        if let Some(rest) = &self.rest_residual {
            for (o, r) in out.iter_mut().zip(rest) {
                *o -= r;
            }
        }
        Ok(fluxes)
    }

    fn element_error(&self, e: usize, source: crate::error::ModelError) -> SolverError {
        SolverError::Element {
            element: e,
            z: self.mesh.to_physical(e, 0.0),
            source,
        }
    }

    fn ghost(&self, interior: &ConservedState, side: Side, ghosts: Ghosts) -> Result<ConservedState, SolverError> {
        match ghosts {
            Ghosts::Transparent => Ok(*interior),
            Ghosts::Physical(t) => {
                let g = match side {
                    Side::Inlet => self.inlet_geometry(),
                    Side::Outlet => self.outlet_geometry(),
                };
                boundary_trace(interior, side, t, &self.spec, &self.frozen, g, &self.params).map_err(|reason| {
                    SolverError::Boundary {
                        side: side.name(),
                        t,
                        reason,
                    }
                })
            }
        }
    }

    fn evaluate(&self, field: &StateField, ghosts: Ghosts, out: &mut [f64]) -> Result<BoundaryFluxes, SolverError> {
        match self.basis.n_modes() {
            2 => self.evaluate_with::<2>(field, ghosts, out),
            3 => self.evaluate_with::<3>(field, ghosts, out),
            4 => self.evaluate_with::<4>(field, ghosts, out),
            _ => self.evaluate_with::<0>(field, ghosts, out),
        }
    }

    /// Mode count `M` as a compile-time constant, so the short inner loops
    /// unroll; `M = 0` reads it from the basis.
    #[inline(always)]
    fn modes<const M: usize>(&self) -> usize {
        if M == 0 {
            self.basis.n_modes()
        } else {
            M
        }
    }

    /// State in element `e` from the first `m` basis values.
    #[inline(always)]
    fn trace(m: usize, field: &StateField, e: usize, phi: &[f64]) -> ConservedState {
        ConservedState {
            a: dot(&field.a(e)[..m], &phi[..m]),
            q: dot(&field.q(e)[..m], &phi[..m]),
        }
    }

    fn evaluate_with<const M: usize>(
        &self,
        field: &StateField,
        ghosts: Ghosts,
        out: &mut [f64],
    ) -> Result<BoundaryFluxes, SolverError> {
        let m = self.modes::<M>();
        let n = self.mesh.n_elements();
        let nq = self.basis.n_quad();
        let dz = self.mesh.dz();
        let jac = 2.0 / dz;
        debug_assert_eq!(out.len(), field.coeffs.len());
        let (out_a, out_q) = out.split_at_mut(n * m);

        // Interface fluxes F*_i, i = 0..=N.
        let mut iface = vec![[0.0; 2]; n + 1];
        let mut right_of_prev = ConservedState::default();
        #[allow(clippy::needless_range_loop)]
        for i in 0..=n {
            let left = if i == 0 {
                let interior = Self::trace(m, field, 0, self.basis.phi_left());
                interior.check().map_err(|err| self.element_error(0, err))?;
                self.ghost(&interior, Side::Inlet, ghosts)?
            } else {
                right_of_prev
            };
            let right = if i == n {
                self.ghost(&right_of_prev, Side::Outlet, ghosts)?
            } else {
                Self::trace(m, field, i, self.basis.phi_left())
            };
            if i < n {
                right_of_prev = Self::trace(m, field, i, self.basis.phi_right());
            }
            let elem = i.min(n - 1);
            iface[i] = self
                .interface_flux(i, &left, &right)
                .map_err(|err| self.element_error(elem, err))?;
        }

        for e in 0..n {
            let ca = &field.a(e)[..m];
            let cq = &field.q(e)[..m];
            let ra = &mut out_a[e * m..(e + 1) * m];
            let rq = &mut out_q[e * m..(e + 1) * m];
            ra.iter_mut().for_each(|v| *v = 0.0);
            rq.iter_mut().for_each(|v| *v = 0.0);
            for qi in 0..nq {
                let phi = &self.basis.phi_at_node(qi)[..m];
                let dphi = &self.basis.dphi_at_node(qi)[..m];
                let w = self.basis.weights()[qi];
                let s = ConservedState {
                    a: dot(ca, phi),
                    q: dot(cq, phi),
                };
                let da = jac * dot(ca, dphi);
                let dq = jac * dot(cq, dphi);
                let (f, src) = self.quad_model[e * nq + qi]
                    .flux_and_source(&s, da, dq)
                    .map_err(|err| self.element_error(e, err))?;
                // int F dphi/dz dz = int F dphi/dxi dxi; int S phi dz = (dz/2) sum w S phi.
                let half = 0.5 * dz * w;
                for j in 0..m {
                    ra[j] += w * f[0] * dphi[j];
                    rq[j] += w * f[1] * dphi[j] + half * src * phi[j];
                }
            }
            let (fl, fr) = (iface[e], iface[e + 1]);
            let pl = &self.basis.phi_left()[..m];
            let pr = &self.basis.phi_right()[..m];
            for j in 0..m {
                ra[j] += fl[0] * pl[j] - fr[0] * pr[j];
                rq[j] += fl[1] * pl[j] - fr[1] * pr[j];
                ra[j] /= dz;
                rq[j] /= dz;
            }
        }
        Ok(BoundaryFluxes {
            inlet: iface[0],
            outlet: iface[n],
        })
    }

    /// Largest `|lambda|` over all quadrature and trace points.
    pub fn max_wave_speed(&self, field: &StateField) -> Result<f64, SolverError> {
        match self.basis.n_modes() {
            2 => self.max_wave_speed_with::<2>(field),
            3 => self.max_wave_speed_with::<3>(field),
            4 => self.max_wave_speed_with::<4>(field),
            _ => self.max_wave_speed_with::<0>(field),
        }
    }

    fn max_wave_speed_with<const M: usize>(&self, field: &StateField) -> Result<f64, SolverError> {
        let m = self.modes::<M>();
        let n = self.mesh.n_elements();
        let nq = self.basis.n_quad();
        let mut speed: f64 = 0.0;
        for e in 0..n {
            let mut probe = |s: ConservedState, k: &PointModel| -> Result<(), SolverError> {
                speed = speed.max(k.max_speed(&s).map_err(|err| self.element_error(e, err))?);
                Ok(())
            };
            for qi in 0..nq {
                probe(
                    Self::trace(m, field, e, self.basis.phi_at_node(qi)),
                    &self.quad_model[e * nq + qi],
                )?;
            }
            probe(Self::trace(m, field, e, self.basis.phi_left()), &self.iface_model[e])?;
            probe(
                Self::trace(m, field, e, self.basis.phi_right()),
                &self.iface_model[e + 1],
            )?;
        }
        Ok(speed)
    }

    /// Local Lax-Friedrichs flux `{F} - (1/2) max|lambda| (U_right - U_left)` at interface `i`.
    fn interface_flux(
        &self,
        i: usize,
        left: &ConservedState,
        right: &ConservedState,
    ) -> Result<[f64; 2], crate::error::ModelError> {
        let k = &self.iface_model[i];
        let (fl, sl) = k.flux_and_speed(left)?;
        let (fr, sr) = k.flux_and_speed(right)?;
        let speed = sl.max(sr);
        Ok([
            0.5 * (fl[0] + fr[0]) - 0.5 * speed * (right.a - left.a),
            0.5 * (fl[1] + fr[1]) - 0.5 * speed * (right.q - left.q),
        ])
    }

    /// First non-positive `A` among quadrature and trace points, as `(element, z, A)`.
    pub fn find_non_positive(&self, field: &StateField) -> Option<(usize, f64, f64)> {
        match self.basis.n_modes() {
            2 => self.find_non_positive_with::<2>(field),
            3 => self.find_non_positive_with::<3>(field),
            4 => self.find_non_positive_with::<4>(field),
            _ => self.find_non_positive_with::<0>(field),
        }
    }

    fn find_non_positive_with<const M: usize>(&self, field: &StateField) -> Option<(usize, f64, f64)> {
        let m = self.modes::<M>();
        let n = self.mesh.n_elements();
        let nq = self.basis.n_quad();
        for e in 0..n {
            for qi in 0..nq {
                let a = dot(&field.a(e)[..m], &self.basis.phi_at_node(qi)[..m]);
                if !(a > 0.0) {
                    return Some((e, self.mesh.to_physical(e, self.basis.nodes()[qi]), a));
                }
            }
            for (phi, xi) in [(self.basis.phi_left(), -1.0), (self.basis.phi_right(), 1.0)] {
                let a = dot(&field.a(e)[..m], &phi[..m]);
                if !(a > 0.0) {
                    return Some((e, self.mesh.to_physical(e, xi), a));
                }
            }
        }
        None
    }
}

/// Free-function form of [`Discretization::rhs`].
pub fn semidiscrete_rhs(
    disc: &Discretization,
    field: &StateField,
    t: f64,
) -> Result<(Vec<f64>, BoundaryFluxes), SolverError> {
    let mut out = vec![0.0; field.coeffs.len()];
    let fluxes = disc.rhs(field, t, &mut out)?;
    Ok((out, fluxes))
}
