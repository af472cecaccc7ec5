//! Pointwise reconstruction from `(A, Q)` solutions: the axial velocity
//! profile, the radial velocity from the radial momentum balance, and a
//! tensor-product `(r, z)` field.
//!
//! The radial velocity solves, for `r` in `(0, R]`,
//!
//! ```text
//! r u'' + (R0 - u r Re/U_r) u' + (4 U_z r/R - 2 u r Re U_z/(R0 U_r) (1 - r^2/R^2)) dR0/dz + R0 u/r = 0
//! u(0) = 0,  u(R) = dR/dt
//! ```
//!
//! with coefficients evaluated as written. Near the axis `u = c r` on
//! `[0, r1]`, `r1 = R / (4 n)`, joined with continuous value and slope; the
//! remaining interval is discretized by Chebyshev collocation in `ln r`.
//! The nonlinear system has several roots at strong forcing; continuation in
//! the Reynolds number from the linear problem selects one consistently.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dg::basis::gauss_legendre;
use crate::error::PostprocessError;
use crate::geometry::{GeometryDerivatives, VesselGeometry};
use crate::model::{total_pressure, ConservedState, Correction, PhysicalParams};
use crate::record::SolutionRecord;

/// `u_z(r) = ((gamma + 2)/gamma) U (1 - (r/R)^gamma)`.
pub fn axial_velocity_profile(
    mean_velocity: f64,
    r: f64,
    wall_radius: f64,
    gamma: f64,
) -> Result<f64, PostprocessError> {
    if !(wall_radius > 0.0) {
        return Err(PostprocessError::InvalidInput(format!(
            "wall radius must be positive, got {wall_radius}"
        )));
    }
    if !(0.0..=wall_radius).contains(&r) {
        return Err(PostprocessError::RadiusOutOfRange { r, wall_radius });
    }
    if !(gamma > 0.0) {
        return Err(PostprocessError::InvalidInput(format!(
            "profile exponent must be positive, got {gamma}"
        )));
    }
    Ok((gamma + 2.0) / gamma * mean_velocity * (1.0 - (r / wall_radius).powf(gamma)))
}

/// Gauss-Legendre rule with `n` points mapped to `[0, b]`.
fn quadrature(n: usize, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (x, w) = gauss_legendre(n);
    x.into_iter()
        .zip(w)
        .map(move |(x, w)| (0.5 * b * (x + 1.0), 0.5 * b * w))
}

/// `int_0^R u_z (2r/R^2) dr`, which recovers the mean velocity.
pub fn profile_mean(mean_velocity: f64, wall_radius: f64, gamma: f64, n_quad: usize) -> Result<f64, PostprocessError> {
    let mut sum = 0.0;
    for (r, w) in quadrature(n_quad, wall_radius) {
        sum += w * axial_velocity_profile(mean_velocity, r, wall_radius, gamma)? * 2.0 * r;
    }
    Ok(sum / (wall_radius * wall_radius))
}

/// `(2/(R^2 U^2)) int_0^R r u_z^2 dr`; equals `(gamma + 2)/(gamma + 1)`.
pub fn coriolis_integral(gamma: f64, n_quad: usize) -> Result<f64, PostprocessError> {
    let (u, big_r) = (1.0, 1.0);
    let mut sum = 0.0;
    for (r, w) in quadrature(n_quad, big_r) {
        let uz = axial_velocity_profile(u, r, big_r, gamma)?;
        sum += w * r * uz * uz;
    }
    Ok(2.0 / (big_r * big_r * u * u) * sum)
}

/// Velocity and length scales of the radial balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicScales {
    /// Axial velocity scale `U_z`, cm/s.
    pub u_z_scale: f64,
    /// Axial length scale `L`, cm.
    pub length_scale: f64,
}

impl CharacteristicScales {
    pub fn new(u_z_scale: f64, length_scale: f64) -> Result<Self, PostprocessError> {
        if !(u_z_scale > 0.0 && length_scale > 0.0) {
            return Err(PostprocessError::InvalidInput(format!(
                "scales must be positive, got U_z = {u_z_scale}, L = {length_scale}"
            )));
        }
        Ok(Self {
            u_z_scale,
            length_scale,
        })
    }

    /// `U_r = r0 U_z / L`.
    pub fn u_r_scale(&self, r0: f64) -> f64 {
        r0 * self.u_z_scale / self.length_scale
    }

    /// `Re = rho_f U_z r0^2 / (mu_f L)`.
    pub fn reynolds(&self, r0: f64, params: &PhysicalParams) -> f64 {
        params.rho_f * self.u_z_scale * r0 * r0 / (params.mu_f * self.length_scale)
    }
}

/// Cross-section data at one axial position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceData {
    pub z: f64,
    pub a: f64,
    pub q: f64,
    /// `dA/dt`, cm^2/s.
    pub da_dt: f64,
    /// Wall radius `sqrt(A)`.
    pub r: f64,
    pub geom: GeometryDerivatives,
}

impl SliceData {
    pub fn new(z: f64, a: f64, q: f64, da_dt: f64, geom: GeometryDerivatives) -> Result<Self, PostprocessError> {
        ConservedState::new(a, q)?;
        if !da_dt.is_finite() {
            return Err(PostprocessError::InvalidInput(format!("dA/dt = {da_dt}")));
        }
        Ok(Self {
            z,
            a,
            q,
            da_dt,
            r: a.sqrt(),
            geom,
        })
    }

    /// `dR/dt = (dA/dt) / (2 sqrt(A))`.
    pub fn dr_dt(&self) -> f64 {
        self.da_dt / (2.0 * self.r)
    }

    pub fn mean_velocity(&self) -> f64 {
        self.q / self.a
    }
}

/// Coefficients of the radial ODE at one slice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialOde {
    pub r0: f64,
    pub dr0_dz: f64,
    pub wall_radius: f64,
    pub u_z: f64,
    pub u_r: f64,
    pub reynolds: f64,
}

impl RadialOde {
    pub fn new(slice: &SliceData, scales: &CharacteristicScales, params: &PhysicalParams) -> Self {
        let r0 = slice.geom.r0;
        Self {
            r0,
            dr0_dz: slice.geom.dr0_dz,
            wall_radius: slice.r,
            u_z: scales.u_z_scale,
            u_r: scales.u_r_scale(r0),
            reynolds: scales.reynolds(r0, params),
        }
    }

    /// The four additive terms of the equation at `r`.
    pub fn terms(&self, r: f64, u: f64, du: f64, d2u: f64) -> [f64; 4] {
        self.scaled_terms(r, u, du, d2u, 1.0)
    }

    /// The terms for `u = scale * v`, divided by `scale`. Keeps full relative
    /// precision when the forcing, and with it `u`, is tiny.
    pub fn scaled_terms(&self, r: f64, v: f64, dv: f64, d2v: f64, scale: f64) -> [f64; 4] {
        let k = self.reynolds / self.u_r;
        let rr = r / self.wall_radius;
        let u = scale * v;
        [
            r * d2v,
            (self.r0 - u * r * k) * dv,
            4.0 * self.u_z * rr * (self.dr0_dz / scale)
                - 2.0 * v * r * k * self.u_z / self.r0 * (1.0 - rr * rr) * self.dr0_dz,
            self.r0 * v / r,
        ]
    }

    pub fn residual(&self, r: f64, u: f64, du: f64, d2u: f64) -> f64 {
        self.terms(r, u, du, d2u).iter().sum()
    }

    /// Partial derivatives of the scaled residual with respect to `(v, v', v'')`.
    fn linearization(&self, r: f64, v: f64, dv: f64, scale: f64) -> (f64, f64, f64) {
        let k = self.reynolds / self.u_r;
        let rr = r / self.wall_radius;
        let d_v = -scale * r * k * dv - 2.0 * r * k * self.u_z / self.r0 * (1.0 - rr * rr) * self.dr0_dz + self.r0 / r;
        let d_dv = self.r0 - scale * v * r * k;
        (d_v, d_dv, r)
    }

    /// Natural size of `u`: the wall velocity or the geometric forcing.
    fn forcing_scale(&self, wall_velocity: f64) -> f64 {
        wall_velocity
            .abs()
            .max(4.0 * self.u_z * self.dr0_dz.abs() * self.wall_radius)
    }
}

/// Chebyshev-Lobatto nodes on `[-1, 1]` (descending) and the differentiation matrix.
fn chebyshev(n: usize) -> (Vec<f64>, DMatrix<f64>) {
    let x: Vec<f64> = (0..=n)
        .map(|j| (std::f64::consts::PI * j as f64 / n as f64).cos())
        .collect();
    let c = |j: usize| {
        let e = if j == 0 || j == n { 2.0 } else { 1.0 };
        if j.is_multiple_of(2) {
            e
        } else {
            -e
        }
    };
    let mut d = DMatrix::zeros(n + 1, n + 1);
    for i in 0..=n {
        for j in 0..=n {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
    }
    for i in 0..=n {
        let s: f64 = (0..=n).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (x, d)
}

/// Radial velocity on one slice.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub ode: RadialOde,
    /// Collocation radii, ascending, from `r1` to `R`.
    pub r: Vec<f64>,
    pub u_r: Vec<f64>,
    /// Slope `c` of the axis segment `u = c r`.
    pub axis_slope: f64,
    /// `u = scale * v`; the solve works on `v`.
    pub scale: f64,
    pub iterations: usize,
    /// Accepted continuation steps in the Reynolds number.
    pub continuation_steps: usize,
    /// Max-norm scaled residual before each Newton step and at exit.
    pub residual_history: Vec<f64>,
    /// Nodal `v`, `dv/ds`, `d2v/ds2` with `s = ln r`.
    v: Vec<f64>,
    v_s: Vec<f64>,
    v_ss: Vec<f64>,
    s_range: (f64, f64),
}

impl RadialProfile {
    pub fn wall_radius(&self) -> f64 {
        self.ode.wall_radius
    }

    /// Barycentric interpolation of nodal data in the Chebyshev variable of `ln r`.
    fn interpolate(&self, values: &[f64], r: f64) -> f64 {
        let (sa, sb) = self.s_range;
        let x = 2.0 * (r.ln() - sa) / (sb - sa) - 1.0;
        let n = values.len() - 1;
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &u) in values.iter().enumerate() {
            // Ascending index i corresponds to descending Chebyshev index n - i.
            let j = n - i;
            let xj = (std::f64::consts::PI * j as f64 / n as f64).cos();
            let diff = x - xj;
            if diff == 0.0 {
                return u;
            }
            let mut w = if j.is_multiple_of(2) { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            num += w / diff * u;
            den += w / diff;
        }
        num / den
    }

    /// `(v, dv/dr, d2v/dr2)` of the scaled solution, exact for the interpolant.
    pub fn normalized(&self, r: f64) -> (f64, f64, f64) {
        if r <= self.r[0] {
            let c = self.axis_slope / self.scale;
            return (c * r, c, 0.0);
        }
        let v = self.interpolate(&self.v, r);
        let v_s = self.interpolate(&self.v_s, r);
        let v_ss = self.interpolate(&self.v_ss, r);
        (v, v_s / r, (v_ss - v_s) / (r * r))
    }

    /// `(u, du/dr, d2u/dr2)` anywhere in `[0, R]`.
    pub fn derivatives(&self, r: f64) -> (f64, f64, f64) {
        let (v, dv, d2v) = self.normalized(r);
        (self.scale * v, self.scale * dv, self.scale * d2v)
    }

    /// Interpolated `u_r` anywhere in `[0, R]`.
    pub fn eval(&self, r: f64) -> f64 {
        if r <= self.r[0] {
            return self.axis_slope * r;
        }
        self.scale * self.interpolate(&self.v, r)
    }

    pub fn max_abs(&self) -> f64 {
        self.u_r.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

const NEWTON_MAX_ITER: usize = 50;
const NEWTON_MAX_HALVINGS: usize = 20;
/// Converged residual, relative to the largest ODE term.
const NEWTON_TOL: f64 = 1e-12;
/// Stagnation below this relative residual is accepted as round-off.
const NEWTON_FLOOR: f64 = 1e-9;
/// Continuation in the Reynolds number: first increment, growth after a
/// success, and the smallest increment before giving up.
const CONTINUATION_FIRST_STEP: f64 = 0.05;
const CONTINUATION_GROWTH: f64 = 1.2;
const CONTINUATION_MIN_STEP: f64 = 1.0 / 4096.0;

/// Chebyshev collocation in `s = ln r` on `[r1, R]`, ascending in `r`.
struct Collocation {
    r: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    s_range: (f64, f64),
}

impl Collocation {
    fn new(r1: f64, big_r: f64, n: usize) -> Self {
        let (sa, sb) = (r1.ln(), big_r.ln());
        let (xc, dx) = chebyshev(n);
        let perm: Vec<usize> = (0..=n).rev().collect();
        let ds = 2.0 / (sb - sa);
        let mut d1 = DMatrix::zeros(n + 1, n + 1);
        for i in 0..=n {
            for j in 0..=n {
                d1[(i, j)] = ds * dx[(perm[i], perm[j])];
            }
        }
        let d2 = &d1 * &d1;
        let r = perm
            .iter()
            .map(|&j| (sa + 0.5 * (xc[j] + 1.0) * (sb - sa)).exp())
            .collect();
        Self {
            r,
            d1,
            d2,
            s_range: (sa, sb),
        }
    }

    fn len(&self) -> usize {
        self.r.len()
    }

    /// `(dv/dr, d2v/dr2)` at the nodes: `d/dr = (1/r) d/ds`, `d2/dr2 = (1/r^2)(d2/ds2 - d/ds)`.
    fn derivs(&self, v: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let vs = &self.d1 * v;
        let vss = &self.d2 * v;
        let r = &self.r;
        let dv = (0..v.len()).map(|i| vs[i] / r[i]).collect();
        let d2v = (0..v.len()).map(|i| (vss[i] - vs[i]) / (r[i] * r[i])).collect();
        (dv, d2v)
    }
}

/// Converged iterate, iteration count and residual history.
type NewtonSuccess = (DVector<f64>, usize, Vec<f64>);
/// Iteration count and residual history of a failed solve.
type NewtonFailure = (usize, Vec<f64>);

/// Scaled collocation system for one Reynolds number.
struct ScaledProblem<'a> {
    ode: RadialOde,
    col: &'a Collocation,
    scale: f64,
    wall: f64,
}

impl ScaledProblem<'_> {
    fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let (dv, d2v) = self.col.derivs(v);
        let r = &self.col.r;
        let n = v.len() - 1;
        let mut f = DVector::zeros(n + 1);
        // Slope continuity with u = c r at r1: r1 u'(r1) - u(r1) = 0.
        f[0] = r[0] * dv[0] - v[0];
        for i in 1..n {
            f[i] = self
                .ode
                .scaled_terms(r[i], v[i], dv[i], d2v[i], self.scale)
                .iter()
                .sum();
        }
        f[n] = v[n] - self.wall;
        f
    }

    /// Magnitude of the largest individual term, the reference for convergence.
    fn term_scale(&self, v: &DVector<f64>) -> f64 {
        let (dv, d2v) = self.col.derivs(v);
        let r = &self.col.r;
        let mut m = self.wall.abs();
        for i in 1..v.len() - 1 {
            for t in self.ode.scaled_terms(r[i], v[i], dv[i], d2v[i], self.scale) {
                m = m.max(t.abs());
            }
        }
        m
    }

    fn jacobian(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let (dv, _) = self.col.derivs(v);
        let (r, d1, d2) = (&self.col.r, &self.col.d1, &self.col.d2);
        let n = v.len() - 1;
        let mut jac = DMatrix::zeros(n + 1, n + 1);
        for j in 0..=n {
            jac[(0, j)] = d1[(0, j)];
        }
        jac[(0, 0)] -= 1.0;
        for i in 1..n {
            let (a0, a1, a2) = self.ode.linearization(r[i], v[i], dv[i], self.scale);
            let ri = r[i];
            for j in 0..=n {
                let dr_ij = d1[(i, j)] / ri;
                let d2r_ij = (d2[(i, j)] - d1[(i, j)]) / (ri * ri);
                jac[(i, j)] = a1 * dr_ij + a2 * d2r_ij;
            }
            jac[(i, i)] += a0;
        }
        jac[(n, n)] = 1.0;
        jac
    }

    /// Damped Newton from `v`. Returns the iterate, the iteration count and the
    /// residual history; on failure only the count and history.
    fn newton(&self, mut v: DVector<f64>) -> Result<NewtonSuccess, NewtonFailure> {
        let mut f = self.residual(&v);
        let mut history = vec![f.amax()];
        let mut iterations = 0;
        loop {
            let scale = self.term_scale(&v);
            if f.amax() <= NEWTON_TOL * scale {
                return Ok((v, iterations, history));
            }
            if iterations == NEWTON_MAX_ITER {
                return Err((iterations, history));
            }
            let Some(step) = self.jacobian(&v).lu().solve(&(-&f)) else {
                return Err((iterations, history));
            };
            let current = f.amax();
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..=NEWTON_MAX_HALVINGS {
                let trial = &v + lambda * &step;
                let ft = self.residual(&trial);
                if ft.amax() < current {
                    v = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            iterations += 1;
            if !accepted {
                // No decrease possible: accept only at the round-off floor.
                if current <= NEWTON_FLOOR * scale {
                    return Ok((v, iterations, history));
                }
                return Err((iterations, history));
            }
            history.push(f.amax());
        }
    }
}

/// Solves the radial BVP by damped Newton on `n_points` collocation nodes.
/// The Reynolds number is ramped from zero with adaptive steps, each solve
/// starting from the previous one, so the result lies on the branch that
/// connects to the linear problem.
pub fn radial_velocity_solve(
    slice: &SliceData,
    scales: &CharacteristicScales,
    params: &PhysicalParams,
    n_points: usize,
) -> Result<RadialProfile, PostprocessError> {
    if n_points < 16 {
        return Err(PostprocessError::InvalidInput(format!(
            "need at least 16 collocation points, got {n_points}"
        )));
    }
    let ode = RadialOde::new(slice, scales, params);
    let big_r = slice.r;
    let wall_velocity = slice.dr_dt();
    let col = Collocation::new(big_r / (4.0 * n_points as f64), big_r, n_points - 1);
    let n = col.len();
    let scale = ode.forcing_scale(wall_velocity);
    let finish = |v: DVector<f64>, scale: f64, iterations, continuation_steps, residual_history| {
        let v_s = (&col.d1 * &v).iter().copied().collect();
        let v_ss = (&col.d2 * &v).iter().copied().collect();
        let v: Vec<f64> = v.iter().copied().collect();
        RadialProfile {
            ode,
            r: col.r.clone(),
            u_r: v.iter().map(|x| scale * x).collect(),
            axis_slope: scale * v[0] / col.r[0],
            scale,
            iterations,
            continuation_steps,
            residual_history,
            v,
            v_s,
            v_ss,
            s_range: col.s_range,
        }
    };
    if scale == 0.0 {
        return Ok(finish(DVector::zeros(n), 1.0, 0, 0, vec![0.0]));
    }
    let problem = |reynolds: f64| ScaledProblem {
        ode: RadialOde { reynolds, ..ode },
        col: &col,
        scale,
        wall: wall_velocity / scale,
    };
    let linear = DVector::from_iterator(n, col.r.iter().map(|&ri| wall_velocity / scale * ri / big_r));
    let failed = |iterations, history| PostprocessError::NewtonFailed { iterations, history };
    let (mut v, mut iterations, mut history) = problem(0.0).newton(linear).map_err(|(it, h)| failed(it, h))?;
    let (mut fraction, mut step, mut steps) = (0.0f64, CONTINUATION_FIRST_STEP, 0);
    while fraction < 1.0 {
        let target = (fraction + step).min(1.0);
        match problem(target * ode.reynolds).newton(v.clone()) {
            Ok((next, it, h)) => {
                iterations += it;
                steps += 1;
                v = next;
                fraction = target;
                history = h;
                step *= CONTINUATION_GROWTH;
            }
            Err((it, h)) => {
                iterations += it;
                step *= 0.5;
                if step < CONTINUATION_MIN_STEP {
                    return Err(failed(iterations, h));
                }
            }
        }
    }
    Ok(finish(v, scale, iterations, steps, history))
}

/// One grid point of the reconstructed field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldPoint {
    pub z: f64,
    pub r: f64,
    pub u_r: f64,
    pub u_z: f64,
    pub p: f64,
}

/// Axial sample of the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FieldSlice {
    pub z: f64,
    pub wall_radius: f64,
    pub mean_velocity: f64,
    pub eta_r: f64,
    pub dr_dt: f64,
    pub newton_iterations: usize,
}

/// Tensor-product `(r/R, z)` reconstruction.
#[derive(Debug, Clone)]
pub struct Field2D {
    pub t: f64,
    pub n_r: usize,
    pub n_z: usize,
    pub steady: bool,
    pub scales: CharacteristicScales,
    pub gamma: f64,
    pub collocation_points: usize,
    /// `n_z * n_r` points, z-major.
    pub points: Vec<FieldPoint>,
    pub slices: Vec<FieldSlice>,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    t: f64,
    n_r: usize,
    n_z: usize,
    steady: bool,
    gamma: f64,
    collocation_points: usize,
    scales: &'a CharacteristicScales,
    columns: [&'static str; 5],
    slices: &'a [FieldSlice],
}

impl Field2D {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        for p in &self.points {
            out.serialize(p)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn sidecar_json(&self) -> serde_json::Value {
        serde_json::to_value(Sidecar {
            t: self.t,
            n_r: self.n_r,
            n_z: self.n_z,
            steady: self.steady,
            gamma: self.gamma,
            collocation_points: self.collocation_points,
            scales: &self.scales,
            columns: ["z", "r", "u_r", "u_z", "p"],
            slices: &self.slices,
        })
        .expect("sidecar serializes")
    }
}

/// Options of [`reconstruct_2d_field`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions {
    pub n_r: usize,
    pub n_z: usize,
    /// Treat the last record as steady (`dR/dt = 0`).
    pub steady: bool,
    pub collocation_points: usize,
    pub correction: Correction,
}

/// Rebuilds `(u_r, u_z, p)` on an `n_r x n_z` grid from the last record.
/// `dA/dt` comes from a backward difference of the last two records unless
/// `steady` is set.
pub fn reconstruct_2d_field(
    records: &[SolutionRecord],
    geometry: &VesselGeometry,
    params: &PhysicalParams,
    scales: &CharacteristicScales,
    opts: &ReconstructOptions,
) -> Result<Field2D, PostprocessError> {
    let last = records
        .last()
        .ok_or_else(|| PostprocessError::InvalidInput("no records".into()))?;
    last.validate().map_err(PostprocessError::InvalidInput)?;
    if opts.n_r < 2 || opts.n_z < 2 {
        return Err(PostprocessError::InvalidInput(format!(
            "grid needs at least 2 x 2 points, got {} x {}",
            opts.n_r, opts.n_z
        )));
    }
    let prev = if opts.steady {
        None
    } else {
        let p = records.len().checked_sub(2).map(|i| &records[i]).ok_or_else(|| {
            PostprocessError::InvalidInput("unsteady reconstruction needs at least two records".into())
        })?;
        if !(last.t > p.t) || p.z != last.z {
            return Err(PostprocessError::InvalidInput(
                "last two records must share the z-grid and increase in time".into(),
            ));
        }
        Some(p)
    };
    let gamma = params.gamma();
    let length = geometry.length();
    let mut points = Vec::with_capacity(opts.n_r * opts.n_z);
    let mut slices = Vec::with_capacity(opts.n_z);
    for j in 0..opts.n_z {
        let z = length * j as f64 / (opts.n_z - 1) as f64;
        let tag = |source: PostprocessError| PostprocessError::Slice {
            z,
            source: Box::new(source),
        };
        let a = last.interpolate(&last.a, z);
        let q = last.interpolate(&last.q, z);
        let da_dt = match prev {
            None => 0.0,
            Some(p) => (a - p.interpolate(&p.a, z)) / (last.t - p.t),
        };
        let geom = geometry.derivatives_at(z).map_err(|e| tag(e.into()))?;
        let slice = SliceData::new(z, a, q, da_dt, geom).map_err(tag)?;
        let state = ConservedState { a, q };
        let p = total_pressure(&state, &geom, params, opts.correction).map_err(|e| tag(e.into()))?;
        let profile = radial_velocity_solve(&slice, scales, params, opts.collocation_points).map_err(tag)?;
        let big_r = slice.r;
        let mean = slice.mean_velocity();
        for i in 0..opts.n_r {
            let r = if i + 1 == opts.n_r {
                big_r
            } else {
                big_r * i as f64 / (opts.n_r - 1) as f64
            };
            points.push(FieldPoint {
                z,
                r,
                u_r: profile.eval(r),
                u_z: axial_velocity_profile(mean, r, big_r, gamma).map_err(tag)?,
                p,
            });
        }
        slices.push(FieldSlice {
            z,
            wall_radius: big_r,
            mean_velocity: mean,
            eta_r: big_r - geom.r0,
            dr_dt: slice.dr_dt(),
            newton_iterations: profile.iterations,
        });
    }
    Ok(Field2D {
        t: last.t,
        n_r: opts.n_r,
        n_z: opts.n_z,
        steady: opts.steady,
        scales: *scales,
        gamma,
        collocation_points: opts.collocation_points,
        points,
        slices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Severity;
    use proptest::prelude::*;

    fn scales() -> CharacteristicScales {
        CharacteristicScales::new(22.5, 6.0).unwrap()
    }

    #[test]
    fn profile_hand_values() {
        assert_eq!(axial_velocity_profile(10.0, 0.18, 0.18, 9.0).unwrap(), 0.0);
        let centre = axial_velocity_profile(9.0, 0.0, 0.18, 9.0).unwrap();
        assert!((centre - 11.0).abs() < 1e-12);
        assert!(matches!(
            axial_velocity_profile(1.0, 0.2, 0.18, 9.0),
            Err(PostprocessError::RadiusOutOfRange { .. })
        ));
    }

    #[test]
    fn coriolis_integral_for_gamma_nine() {
        let alpha = coriolis_integral(9.0, 16).unwrap();
        assert!((alpha - 1.1).abs() < 1e-12, "{alpha}");
    }

    proptest! {
        #[test]
        fn profile_mean_recovers_velocity(u in -50.0f64..100.0, r in 0.05f64..0.3, gamma in 1.0f64..20.0) {
            let mean = profile_mean(u, r, gamma, 64).unwrap();
            prop_assert!((mean - u).abs() <= 1e-10 * u.abs().max(1.0));
        }

        #[test]
        fn coriolis_matches_closed_form(gamma in 1.0f64..20.0) {
            let alpha = coriolis_integral(gamma, 64).unwrap();
            prop_assert!((alpha - (gamma + 2.0) / (gamma + 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn scales_reduce_as_expected() {
        let p = PhysicalParams::default();
        let s = scales();
        let r0 = 0.12;
        // U_r / Re = nu / r0
        let lhs = s.u_r_scale(r0) / s.reynolds(r0, &p);
        assert!((lhs - p.nu() / r0).abs() < 1e-14);
    }

    #[test]
    fn straight_rigid_slice_is_zero() {
        let g = GeometryDerivatives::straight(0.18);
        let slice = SliceData::new(3.0, 0.0324, 0.729, 0.0, g).unwrap();
        let prof = radial_velocity_solve(&slice, &scales(), &PhysicalParams::default(), 32).unwrap();
        assert_eq!(prof.max_abs(), 0.0);
        assert_eq!(prof.iterations, 0);
    }

    fn stenotic_slice(z: f64, da_dt: f64) -> SliceData {
        let geom = VesselGeometry::stenosis(Severity::S50, 0.18, 0.1394).unwrap();
        let g = geom.derivatives_at(z).unwrap();
        let a = g.r0 * g.r0 * 1.002;
        SliceData::new(z, a, 0.75, da_dt, g).unwrap()
    }

    #[test]
    fn boundary_conditions_hold_on_a_stenotic_slice() {
        let p = PhysicalParams::default();
        for z in [2.0, 2.3, 2.6, 2.9] {
            let slice = stenotic_slice(z, 0.01);
            let prof = radial_velocity_solve(&slice, &scales(), &p, 48).unwrap();
            assert_eq!(prof.eval(0.0), 0.0);
            let wall = prof.eval(slice.r);
            assert!((wall - slice.dr_dt()).abs() <= 1e-8 * slice.dr_dt().abs().max(1.0));
        }
    }

    #[test]
    fn interpolant_reproduces_nodes() {
        let slice = stenotic_slice(2.3, 0.0);
        let prof = radial_velocity_solve(&slice, &scales(), &PhysicalParams::default(), 32).unwrap();
        for (r, u) in prof.r.iter().zip(&prof.u_r) {
            assert!((prof.eval(*r) - u).abs() <= 1e-12 * prof.max_abs().max(1e-300));
        }
        // Continuity at the axis junction.
        let r1 = prof.r[0];
        assert!((prof.eval(r1 * (1.0 - 1e-12)) - prof.u_r[0]).abs() <= 1e-9 * prof.max_abs());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let slice = stenotic_slice(2.3, 0.0);
        let prof = radial_velocity_solve(&slice, &scales(), &PhysicalParams::default(), 32).unwrap();
        for r in [0.02, 0.07, 0.11] {
            let h = 1e-3 * r;
            let e = |k: f64| prof.eval(r + k * h);
            let du = (e(-2.0) - 8.0 * e(-1.0) + 8.0 * e(1.0) - e(2.0)) / (12.0 * h);
            let d2u = (-e(-2.0) + 16.0 * e(-1.0) - 30.0 * e(0.0) + 16.0 * e(1.0) - e(2.0)) / (12.0 * h * h);
            let (u, du_exact, d2u_exact) = prof.derivatives(r);
            assert_eq!(u, prof.eval(r));
            assert!(
                (du - du_exact).abs() <= 1e-7 * du_exact.abs().max(1.0),
                "{du} vs {du_exact}"
            );
            assert!(
                (d2u - d2u_exact).abs() <= 1e-5 * d2u_exact.abs().max(1.0),
                "{d2u} vs {d2u_exact}"
            );
        }
    }

    #[test]
    fn tiny_forcing_keeps_relative_precision() {
        let p = PhysicalParams::default();
        let mut g = GeometryDerivatives::straight(0.18);
        g.dr0_dz = 1e-310;
        let slice = SliceData::new(1.0, 0.0324, 0.729, 0.0, g).unwrap();
        let prof = radial_velocity_solve(&slice, &scales(), &p, 32).unwrap();
        assert!(prof.scale > 0.0 && prof.scale < 1e-300);
        let (v, dv, d2v) = prof.normalized(0.1);
        let t = prof.ode.scaled_terms(0.1, v, dv, d2v, prof.scale);
        let largest = t.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(largest > 1e-3);
        assert!(t.iter().sum::<f64>().abs() <= 1e-9 * largest);
    }

    #[test]
    fn continuation_reaches_the_strongly_forced_throat_shoulder() {
        let p = PhysicalParams::default();
        for z in [2.08, 2.1, 2.14] {
            let prof = radial_velocity_solve(&stenotic_slice(z, 0.0), &scales(), &p, 64).unwrap();
            assert!(prof.continuation_steps > 0);
            assert!(prof.max_abs() > 1.0, "z = {z}: {}", prof.max_abs());
        }
    }

    #[test]
    fn too_few_points_is_rejected() {
        let slice = stenotic_slice(2.3, 0.0);
        assert!(radial_velocity_solve(&slice, &scales(), &PhysicalParams::default(), 8).is_err());
    }
}
