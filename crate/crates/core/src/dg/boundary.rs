//! Characteristic boundary treatment.
//!
//! The invariants `w1 = -U - 4c` (carried by `U + c`) and `w2 = -U + 4c`
//! (carried by `U - c`) of the flat-profile system are used at both ends,
//! where the vessel is straight. At the inlet `w2` leaves the domain, at the
//! outlet `w1` does. The ghost state supplies whatever enters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::GeometryDerivatives;
use crate::model::{riemann_invariants, state_from_invariants, ConservedState, PhysicalParams};

/// Prescribed mean inlet velocity, eased in with a half-cosine ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waveform {
    /// Plateau mean velocity, cm/s.
    pub velocity: f64,
    /// Ramp duration, s. Zero gives a constant waveform.
    pub ramp_time: f64,
}

impl Waveform {
    pub fn constant(velocity: f64) -> Self {
        Self {
            velocity,
            ramp_time: 0.0,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        if self.ramp_time <= 0.0 || t >= self.ramp_time {
            self.velocity
        } else if t <= 0.0 {
            0.0
        } else {
            0.5 * self.velocity * (1.0 - (PI * t / self.ramp_time).cos())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InletCondition {
    Velocity(Waveform),
    /// Incoming invariant frozen at its initial value.
    NonReflecting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum OutletCondition {
    NonReflecting,
    /// Prescribed total pressure, dyn/cm^2.
    Pressure {
        pressure: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundarySpec {
    pub inlet: InletCondition,
    pub outlet: OutletCondition,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::benchmark()
    }
}

impl BoundarySpec {
    /// Mean of a parabolic profile peaking at 45 cm/s, ramped over 50 ms.
    pub fn benchmark() -> Self {
        Self {
            inlet: InletCondition::Velocity(Waveform {
                velocity: 22.5,
                ramp_time: 0.05,
            }),
            outlet: OutletCondition::NonReflecting,
        }
    }

    pub fn non_reflecting() -> Self {
        Self {
            inlet: InletCondition::NonReflecting,
            outlet: OutletCondition::NonReflecting,
        }
    }

    pub fn no_inflow() -> Self {
        Self {
            inlet: InletCondition::Velocity(Waveform::constant(0.0)),
            outlet: OutletCondition::NonReflecting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Inlet,
    Outlet,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Inlet => "inlet",
            Side::Outlet => "outlet",
        }
    }
}

/// Incoming invariants captured from the initial traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrozenInvariants {
    pub inlet_w1: f64,
    pub outlet_w2: f64,
}

impl FrozenInvariants {
    pub fn capture(
        inlet_trace: &ConservedState,
        inlet_geom: &GeometryDerivatives,
        outlet_trace: &ConservedState,
        outlet_geom: &GeometryDerivatives,
        params: &PhysicalParams,
    ) -> Result<Self, String> {
        let (w1, _) = riemann_invariants(inlet_trace, inlet_geom, params).map_err(|e| e.to_string())?;
        let (_, w2) = riemann_invariants(outlet_trace, outlet_geom, params).map_err(|e| e.to_string())?;
        Ok(Self {
            inlet_w1: w1,
            outlet_w2: w2,
        })
    }
}

/// Exterior ghost state for the boundary at `side`, given the interior trace.
pub fn boundary_trace(
    interior: &ConservedState,
    side: Side,
    t: f64,
    spec: &BoundarySpec,
    frozen: &FrozenInvariants,
    g: &GeometryDerivatives,
    params: &PhysicalParams,
) -> Result<ConservedState, String> {
    let (w1, w2) = riemann_invariants(interior, g, params).map_err(|e| e.to_string())?;
    match side {
        Side::Inlet => match spec.inlet {
            InletCondition::Velocity(waveform) => {
                // w2(A_g, U_in) = -U_in + 4 sqrt(beta) A_g^{1/4} = w2 has a closed-form root.
                let u_in = waveform.value(t);
                let root = (w2 + u_in) / (4.0 * params.beta(g).sqrt());
                if !(root > 0.0) {
                    return Err(format!(
                        "no admissible ghost area: w2 = {w2}, U_in = {u_in} (inflow exceeds the characteristic bound)"
                    ));
                }
                let a = root.powi(4);
                Ok(ConservedState { a, q: a * u_in })
            }
            InletCondition::NonReflecting => {
                state_from_invariants(frozen.inlet_w1, w2, g, params).map_err(|e| e.to_string())
            }
        },
        Side::Outlet => match spec.outlet {
            OutletCondition::NonReflecting => {
                state_from_invariants(w1, frozen.outlet_w2, g, params).map_err(|e| e.to_string())
            }
            OutletCondition::Pressure { pressure } => {
                let r = g.r0 + (pressure - params.p_ext) / params.c0(g);
                if !(r > 0.0) {
                    return Err(format!("prescribed pressure {pressure} collapses the vessel"));
                }
                let a = r * r;
                let u = -w1 - 4.0 * (params.beta(g) * r).sqrt();
                Ok(ConservedState { a, q: a * u })
            }
        },
    }
}
