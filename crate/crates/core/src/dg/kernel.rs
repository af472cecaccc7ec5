//! Pointwise model evaluation with the geometry and parameter factors frozen.
//!
//! The operator evaluates flux, source and wave speed at the same fixed points
//! millions of times. Folding every factor that depends only on `R0(z)` and the
//! parameters into one coefficient set leaves one square root and one division
//! per point. The results agree with [`crate::model`] to round-off.

use crate::error::ModelError;
use crate::geometry::GeometryDerivatives;
use crate::model::{ConservedState, Correction, PhysicalParams};
use crate::C0Variant;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct PointModel {
    /// Effective Coriolis coefficient.
    alpha: f64,
    /// `beta`, so that `c^2 = beta sqrt(A)`.
    beta: f64,
    /// `(2/3) beta`, the elastic flux factor of `A^{3/2}`.
    elastic_flux: f64,
    /// Friction factor of `U`.
    friction: f64,
    /// Elastic source factors of `A` and `A^{3/2}`.
    elastic_a: f64,
    elastic_a32: f64,
    /// `p2` transport factors of `dQ/dz - U dA/dz` and `Q`.
    p2_slope: f64,
    p2_q: f64,
    /// Factor of `Q^2 / A`.
    convective: f64,
    /// Factor of `d/dz(Q^2 / sqrt(A))`.
    tail: f64,
}

impl PointModel {
    pub(crate) fn new(g: &GeometryDerivatives, params: &PhysicalParams, correction: Correction) -> Self {
        let beta = params.beta(g);
        let (elastic_a, elastic_a32) = match params.c0_variant {
            // k A^{3/2} (4/3) R0' / R0^3 - k A R0' / R0^2 with k / R0^2 = 2 beta.
            C0Variant::Variable => (-2.0 * beta * g.dr0_dz, (8.0 / 3.0) * beta * g.dr0_dz / g.r0),
            C0Variant::Constant => (2.0 * beta * g.dr0_dz, 0.0),
        };
        let viscous = (params.gamma() + 2.0) * params.nu();
        let (p2_slope, p2_q) = if correction.includes_p2() {
            (viscous * g.dlnr0_dz, viscous * g.d2lnr0_dz2)
        } else {
            (0.0, 0.0)
        };
        let (alpha, convective, tail) = match correction {
            Correction::Classical => (params.alpha, 0.0, 0.0),
            Correction::Extended => (params.alpha + g.alpha_c, g.dalpha_c_dz, 0.0),
            Correction::AppendixB => (params.alpha, 0.0, (4.0 / 35.0) * g.dr0_dz * g.dr0_dz / g.r0),
        };
        Self {
            alpha,
            beta,
            elastic_flux: (2.0 / 3.0) * beta,
            friction: -2.0 * viscous,
            elastic_a,
            elastic_a32,
            p2_slope,
            p2_q,
            convective,
            tail,
        }
    }

    #[inline]
    fn positive(s: &ConservedState) -> Result<(), ModelError> {
        if s.a > 0.0 {
            Ok(())
        } else {
            Err(ModelError::NonPositiveArea { a: s.a })
        }
    }

    /// Physical flux and largest `|lambda|`.
    #[inline]
    pub(crate) fn flux_and_speed(&self, s: &ConservedState) -> Result<([f64; 2], f64), ModelError> {
        Self::positive(s)?;
        let sqrt_a = s.a.sqrt();
        let u = s.q / s.a;
        let a32 = s.a * sqrt_a;
        let flux = [s.q, self.alpha * s.q * u + self.elastic_flux * a32];
        Ok((flux, self.speed(s, u, sqrt_a)?))
    }

    /// Largest `|lambda|`.
    #[inline]
    pub(crate) fn max_speed(&self, s: &ConservedState) -> Result<f64, ModelError> {
        Self::positive(s)?;
        self.speed(s, s.q / s.a, s.a.sqrt())
    }

    #[inline]
    fn speed(&self, s: &ConservedState, u: f64, sqrt_a: f64) -> Result<f64, ModelError> {
        let advective = self.alpha * u;
        let discriminant = advective * advective - self.alpha * u * u + self.beta * sqrt_a;
        if discriminant < 0.0 || discriminant.is_nan() {
            return Err(ModelError::HyperbolicityLoss {
                discriminant,
                a: s.a,
                q: s.q,
            });
        }
        Ok(advective.abs() + discriminant.sqrt())
    }

    /// Physical flux and the momentum source given the local slopes.
    #[inline]
    pub(crate) fn flux_and_source(
        &self,
        s: &ConservedState,
        da_dz: f64,
        dq_dz: f64,
    ) -> Result<([f64; 2], f64), ModelError> {
        Self::positive(s)?;
        let (a, q) = (s.a, s.q);
        let sqrt_a = a.sqrt();
        let u = q / a;
        let a32 = a * sqrt_a;
        let flux = [q, self.alpha * q * u + self.elastic_flux * a32];
        let mut sq = self.friction * u + self.elastic_a * a + self.elastic_a32 * a32;
        sq -= self.p2_slope * (dq_dz - u * da_dz) + self.p2_q * q;
        sq += self.convective * q * u;
        sq += self.tail * (2.0 * q * dq_dz - 0.5 * q * u * da_dz) / sqrt_a;
        Ok((flux, sq))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{eigenvalues, flux, source};
    use proptest::prelude::*;

    fn close(x: f64, y: f64, scale: f64) -> bool {
        (x - y).abs() <= 1e-12 * scale.max(x.abs()).max(y.abs())
    }

    proptest! {
        #[test]
        fn agrees_with_the_model_functions(
            a in 0.005f64..0.06,
            u in -100.0f64..100.0,
            da in -0.5f64..0.5,
            dq in -20.0f64..20.0,
            r0 in 0.12f64..0.2,
            d1 in -0.5f64..0.5,
            d2 in -5.0f64..5.0,
            variable in any::<bool>(),
        ) {
            let g = GeometryDerivatives::from_radius(r0, d1, d2);
            let params = PhysicalParams {
                c0_variant: if variable { C0Variant::Variable } else { C0Variant::Constant },
                ..PhysicalParams::default()
            };
            let s = ConservedState::new(a, a * u).unwrap();
            for c in Correction::ALL {
                let k = PointModel::new(&g, &params, c);
                let f = flux(&s, &g, &params, c).unwrap();
                let src = source(&s, da, dq, &g, &params, c).unwrap();
                let (l1, l2) = eigenvalues(&s, &g, &params, c).unwrap();
                let (kf, ksrc) = k.flux_and_source(&s, da, dq).unwrap();
                let (kf2, speed) = k.flux_and_speed(&s).unwrap();
                prop_assert_eq!(kf, kf2);
                prop_assert!(close(kf[0], f[0], 0.0) && close(kf[1], f[1], 0.0), "{c:?}: {kf:?} vs {f:?}");
                // Terms of the source cancel; judge against the largest one.
                let scale = (params.beta(&g) * a * d1).abs() + (u * params.nu() * 22.0).abs() + (u * u * a);
                prop_assert!(close(ksrc, src[1], scale), "{c:?}: {ksrc} vs {}", src[1]);
                prop_assert!(close(speed, l1.abs().max(l2.abs()), 0.0));
                prop_assert_eq!(k.max_speed(&s).unwrap(), speed);
            }
        }
    }

    #[test]
    fn rejects_non_positive_area_and_nan() {
        let k = PointModel::new(
            &GeometryDerivatives::straight(0.18),
            &PhysicalParams::default(),
            Correction::Extended,
        );
        for a in [0.0, -1e-3, f64::NAN] {
            let s = ConservedState { a, q: 0.1 };
            assert!(matches!(
                k.flux_and_source(&s, 0.0, 0.0),
                Err(ModelError::NonPositiveArea { .. })
            ));
            assert!(matches!(k.max_speed(&s), Err(ModelError::NonPositiveArea { .. })));
        }
    }
}
