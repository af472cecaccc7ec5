//! Pointwise physics of the classical and extended `(A, Q)` systems.
//!
//! Conventions: `A = R^2` (no factor pi), `Q = A U`, CGS units. The physical
//! volumetric flow rate is `pi * Q`.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::geometry::GeometryDerivatives;

/// Which radius enters the wall stiffness `C0 = hE / (D^2 (1 - sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum C0Variant {
    /// `D = R0(z)`.
    Variable,
    /// `D = R0*`, a fixed reference radius.
    Constant,
}

/// Momentum-equation correction for the axially varying radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Correction {
    /// No Coriolis correction and no viscous pressure term `p2`.
    Classical,
    /// `alpha + alpha_c` in the flux, `(Q^2/A) d(alpha_c)/dz` in the source, plus `p2`.
    Extended,
    /// Classical flux; `(4/35)(R0')^2 (1/R0) d/dz(Q^2/sqrt(A))` in the source, plus `p2`.
    AppendixB,
}

impl Correction {
    pub const ALL: [Correction; 3] = [Correction::Classical, Correction::Extended, Correction::AppendixB];

    pub fn name(self) -> &'static str {
        match self {
            Correction::Classical => "classical",
            Correction::Extended => "extended",
            Correction::AppendixB => "appendix-b",
        }
    }

    pub(crate) fn includes_p2(self) -> bool {
        !matches!(self, Correction::Classical)
    }
}

impl std::str::FromStr for Correction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "classical" => Ok(Correction::Classical),
            "extended" => Ok(Correction::Extended),
            "appendix-b" | "appendix_b" => Ok(Correction::AppendixB),
            other => Err(format!(
                "unknown variant `{other}` (expected classical, extended or appendix-b)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicalParams {
    /// Blood density, g/cm^3.
    pub rho_f: f64,
    /// Dynamic viscosity, g/(cm s).
    pub mu_f: f64,
    /// Wall thickness, cm.
    pub h: f64,
    /// Young's modulus, dyn/cm^2.
    pub young: f64,
    /// Poisson ratio of the wall.
    pub sigma: f64,
    /// External pressure, dyn/cm^2.
    pub p_ext: f64,
    /// Coriolis coefficient.
    pub alpha: f64,
    pub c0_variant: C0Variant,
    /// Fixed stiffness radius used by [`C0Variant::Constant`], cm.
    pub r0_star: f64,
}

impl Default for PhysicalParams {
    /// Coronary benchmark values: `rho_f = 1.055`, `mu_f = 0.04`, `h = 0.06`,
    /// `E = 5.02e6`, `sigma = 0.5`, `alpha = 1.1` (so `gamma = 9`),
    /// constant stiffness with `R0* = R_max = 0.18`.
    fn default() -> Self {
        Self {
            rho_f: 1.055,
            mu_f: 0.04,
            h: 0.06,
            young: 5.02e6,
            sigma: 0.5,
            p_ext: 0.0,
            alpha: 1.1,
            c0_variant: C0Variant::Constant,
            r0_star: 0.18,
        }
    }
}

fn invalid(name: &'static str, reason: String) -> ModelError {
    ModelError::InvalidParameter { name, reason }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("rho_f", self.rho_f),
            ("mu_f", self.mu_f),
            ("h", self.h),
            ("young", self.young),
            ("r0_star", self.r0_star),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.sigma) {
            return Err(invalid("sigma", format!("must lie in [0, 1), got {}", self.sigma)));
        }
        if !(self.alpha > 1.0 && self.alpha <= 2.0) {
            return Err(invalid("alpha", format!("must lie in (1, 2], got {}", self.alpha)));
        }
        if !self.p_ext.is_finite() {
            return Err(invalid("p_ext", "must be finite".into()));
        }
        Ok(())
    }

    /// Kinematic viscosity `mu_f / rho_f`.
    pub fn nu(&self) -> f64 {
        self.mu_f / self.rho_f
    }

    /// Velocity-profile exponent `(2 - alpha) / (alpha - 1)`.
    pub fn gamma(&self) -> f64 {
        (2.0 - self.alpha) / (self.alpha - 1.0)
    }

    /// Radius in the stiffness coefficient.
    #[inline]
    pub fn stiffness_radius(&self, g: &GeometryDerivatives) -> f64 {
        match self.c0_variant {
            C0Variant::Variable => g.r0,
            C0Variant::Constant => self.r0_star,
        }
    }

    /// `hE / (1 - sigma^2)`.
    #[inline]
    fn wall_modulus(&self) -> f64 {
        self.h * self.young / (1.0 - self.sigma * self.sigma)
    }

    /// `C0 = hE / (D^2 (1 - sigma^2))`, dyn/cm^3.
    #[inline]
    pub fn c0(&self, g: &GeometryDerivatives) -> f64 {
        let d = self.stiffness_radius(g);
        self.wall_modulus() / (d * d)
    }

    /// `beta = hE / (2 rho_f (1 - sigma^2) D^2)`; the wave speed at rest is `sqrt(beta sqrt(A))`.
    #[inline]
    pub fn beta(&self, g: &GeometryDerivatives) -> f64 {
        0.5 * self.c0(g) / self.rho_f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConservedState {
    pub a: f64,
    pub q: f64,
}

impl ConservedState {
    pub fn new(a: f64, q: f64) -> Result<Self, ModelError> {
        let s = Self { a, q };
        s.check()?;
        Ok(s)
    }

    #[inline]
    pub fn check(&self) -> Result<(), ModelError> {
        if self.a > 0.0 {
            Ok(())
        } else {
            Err(ModelError::NonPositiveArea { a: self.a })
        }
    }

    /// Mean velocity `Q / A`.
    #[inline]
    pub fn velocity(&self) -> f64 {
        self.q / self.a
    }

    /// Wall radius `sqrt(A)`.
    #[inline]
    pub fn radius(&self) -> f64 {
        self.a.sqrt()
    }
}

#[inline]
fn effective_alpha(g: &GeometryDerivatives, params: &PhysicalParams, correction: Correction) -> f64 {
    match correction {
        Correction::Extended => params.alpha + g.alpha_c,
        Correction::Classical | Correction::AppendixB => params.alpha,
    }
}

/// Elastic membrane pressure `p_ext + C0 (sqrt(A) - R0)`.
pub fn pressure_p1(
    state: &ConservedState,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
) -> Result<f64, ModelError> {
    state.check()?;
    Ok(params.p_ext + params.c0(g) * (state.radius() - g.r0))
}

/// Viscous geometric pressure `(gamma + 2) rho_f nu (Q/A) d(ln R0)/dz`.
pub fn pressure_p2(
    state: &ConservedState,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
) -> Result<f64, ModelError> {
    state.check()?;
    Ok((params.gamma() + 2.0) * params.rho_f * params.nu() * state.velocity() * g.dlnr0_dz)
}

pub fn total_pressure(
    state: &ConservedState,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
    correction: Correction,
) -> Result<f64, ModelError> {
    let p1 = pressure_p1(state, g, params)?;
    if correction.includes_p2() {
        Ok(p1 + pressure_p2(state, g, params)?)
    } else {
        Ok(p1)
    }
}

/// Physical flux `[Q, alpha_eff Q^2/A + hE A^{3/2} / (3 rho_f (1 - sigma^2) D^2)]`.
#[inline]
pub fn flux(
    state: &ConservedState,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
    correction: Correction,
) -> Result<[f64; 2], ModelError> {
    state.check()?;
    let alpha = effective_alpha(g, params, correction);
    let elastic = (2.0 / 3.0) * params.beta(g) * state.a * state.a.sqrt();
    Ok([state.q, alpha * state.q * state.q / state.a + elastic])
}

/// `(A / rho_f) d(p2)/dz` for the local fields, moved to the right-hand side.
#[inline]
pub fn p2_transport(
    state: &ConservedState,
    da_dz: f64,
    dq_dz: f64,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
) -> f64 {
    let u = state.velocity();
    (params.gamma() + 2.0) * params.nu() * ((dq_dz - u * da_dz) * g.dlnr0_dz + state.q * g.d2lnr0_dz2)
}

/// `(4/35) R0'^2 / R0 * d/dz(Q^2 / sqrt(A))` with the derivative expanded.
#[inline]
pub fn appendix_b_tail(state: &ConservedState, da_dz: f64, dq_dz: f64, g: &GeometryDerivatives) -> f64 {
    let (a, q) = (state.a, state.q);
    let sqrt_a = a.sqrt();
    let d_q2_over_sqrt_a = 2.0 * q * dq_dz / sqrt_a - q * q * da_dz / (2.0 * a * sqrt_a);
    (4.0 / 35.0) * g.dr0_dz * g.dr0_dz / g.r0 * d_q2_over_sqrt_a
}

/// Source `[0, S_q]` given the local slopes `dA/dz`, `dQ/dz`.
#[inline]
pub fn source(
    state: &ConservedState,
    da_dz: f64,
    dq_dz: f64,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
    correction: Correction,
) -> Result<[f64; 2], ModelError> {
    state.check()?;
    let (a, q) = (state.a, state.q);
    let gamma = params.gamma();
    let friction = -2.0 * (gamma + 2.0) * params.nu() * q / a;

    let k = params.wall_modulus() / params.rho_f;
    let elastic = match params.c0_variant {
        C0Variant::Variable => {
            let r0 = g.r0;
            (4.0 / 3.0) * k * a * a.sqrt() / (r0 * r0 * r0) * g.dr0_dz - k * a / (r0 * r0) * g.dr0_dz
        }
        C0Variant::Constant => {
            let d = params.r0_star;
            k * a / (d * d) * g.dr0_dz
        }
    };

    let mut sq = friction + elastic;
    match correction {
        Correction::Classical => {}
        Correction::Extended => {
            sq -= p2_transport(state, da_dz, dq_dz, g, params);
            sq += q * q / a * g.dalpha_c_dz;
        }
        Correction::AppendixB => {
            sq -= p2_transport(state, da_dz, dq_dz, g, params);
            sq += appendix_b_tail(state, da_dz, dq_dz, g);
        }
    }
    Ok([0.0, sq])
}

/// Characteristic speeds `lambda1 <= lambda2` of the flux Jacobian.
#[inline]
pub fn eigenvalues(
    state: &ConservedState,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
    correction: Correction,
) -> Result<(f64, f64), ModelError> {
    state.check()?;
    let alpha = effective_alpha(g, params, correction);
    let u = state.velocity();
    let c2 = params.beta(g) * state.a.sqrt();
    let advective = alpha * u;
    let discriminant = advective * advective - alpha * u * u + c2;
    if discriminant < 0.0 || discriminant.is_nan() {
        return Err(ModelError::HyperbolicityLoss {
            discriminant,
            a: state.a,
            q: state.q,
        });
    }
    let root = discriminant.sqrt();
    Ok((advective - root, advective + root))
}

/// Riemann invariants of the flat-profile (`alpha = 1`) system,
/// `w1,2 = -Q/A -/+ 4 sqrt(beta sqrt(A))`.
///
/// `w1` travels with the right-going speed `U + c`, `w2` with `U - c`.
pub fn riemann_invariants(
    state: &ConservedState,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
) -> Result<(f64, f64), ModelError> {
    state.check()?;
    let u = state.velocity();
    let c4 = 4.0 * (params.beta(g) * state.a.sqrt()).sqrt();
    Ok((-u - c4, -u + c4))
}

pub fn state_from_invariants(
    w1: f64,
    w2: f64,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
) -> Result<ConservedState, ModelError> {
    if !(w2 > w1) {
        return Err(ModelError::InvalidInvariants { w1, w2 });
    }
    let root = (w2 - w1) / (8.0 * params.beta(g).sqrt());
    let a = root.powi(4);
    let u = -0.5 * (w1 + w2);
    ConservedState::new(a, a * u)
}
