//! Reference vessel radius `R0(z)` and the spatial derivatives the model needs.
//!
//! All derivatives are analytic (chain rule on the closed-form profile or on
//! the spline pieces). Finite differences only appear in tests.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::GeometryError;

/// Axial length of the stenosis test vessels, cm.
pub const STENOSIS_LENGTH: f64 = 6.0;

/// Stenosis severity of the three benchmark vessels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum Severity {
    /// Depth set by `r_max - r_min`.
    S23,
    S40,
    S50,
}

impl Severity {
    pub const ALL: [Severity; 3] = [Severity::S23, Severity::S40, Severity::S50];

    pub fn percent(self) -> u32 {
        match self {
            Severity::S23 => 23,
            Severity::S40 => 40,
            Severity::S50 => 50,
        }
    }
}

impl TryFrom<u32> for Severity {
    type Error = String;

    fn try_from(value: u32) -> Result<Self, Self::Error> {
        match value {
            23 => Ok(Severity::S23),
            40 => Ok(Severity::S40),
            50 => Ok(Severity::S50),
            other => Err(format!("unsupported severity {other} (expected 23, 40 or 50)")),
        }
    }
}

impl From<Severity> for u32 {
    fn from(s: Severity) -> u32 {
        s.percent()
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.percent())
    }
}

/// Natural cubic spline through `(z_i, r_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    z: Vec<f64>,
    r: Vec<f64>,
    /// Second derivatives at the knots.
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(z: Vec<f64>, r: Vec<f64>) -> Result<Self, GeometryError> {
        let n = z.len();
        if n != r.len() {
            return Err(GeometryError::Table("column lengths differ".into()));
        }
        if n < 3 {
            return Err(GeometryError::Table("need at least 3 rows".into()));
        }
        if z.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GeometryError::Table("z must be strictly increasing".into()));
        }
        if let Some(bad) = r.iter().find(|v| !(**v > 0.0)) {
            return Err(GeometryError::InvalidParameter {
                name: "r0",
                reason: format!("tabulated radius must be positive, got {bad}"),
            });
        }

        // Tridiagonal system for interior second derivatives, m_0 = m_{n-1} = 0.
        let mut m = vec![0.0; n];
        let interior = n - 2;
        let mut diag = vec![0.0; interior];
        let mut upper = vec![0.0; interior];
        let mut rhs = vec![0.0; interior];
        for i in 1..n - 1 {
            let h0 = z[i] - z[i - 1];
            let h1 = z[i + 1] - z[i];
            diag[i - 1] = 2.0 * (h0 + h1);
            upper[i - 1] = h1;
            rhs[i - 1] = 6.0 * ((r[i + 1] - r[i]) / h1 - (r[i] - r[i - 1]) / h0);
        }
        // Thomas algorithm; the sub-diagonal entry of row i is h_{i-1} = upper[i-1].
        for i in 1..interior {
            let sub = z[i + 1] - z[i];
            let w = sub / diag[i - 1];
            diag[i] -= w * upper[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (0..interior).rev() {
            let next = if i + 1 < interior { m[i + 2] } else { 0.0 };
            m[i + 1] = (rhs[i] - upper[i] * next) / diag[i];
        }
        Ok(Self { z, r, m })
    }

    fn segment(&self, z: f64) -> usize {
        match self.z.binary_search_by(|k| k.partial_cmp(&z).unwrap()) {
            Ok(i) => i.min(self.z.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.z.len() - 2),
        }
    }

    /// Value, first and second derivative at `z`.
    pub fn eval(&self, z: f64) -> (f64, f64, f64) {
        let i = self.segment(z);
        let h = self.z[i + 1] - self.z[i];
        let a = (self.z[i + 1] - z) / h;
        let b = (z - self.z[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let (r0, r1) = (self.r[i], self.r[i + 1]);
        let value = a * r0 + b * r1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let first = (r1 - r0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let second = a * m0 + b * m1;
        (value, first, second)
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.z, &self.r)
    }
}

/// Analytic radius law.
#[derive(Debug, Clone, PartialEq)]
pub enum Profile {
    Straight {
        radius: f64,
    },
    /// `R0 = r_max - depth * exp(-50 s^4)`, `s = z - 3.4 + 0.95 exp(-0.5 (z - 2.5)^2)`.
    Stenosis {
        severity: Severity,
        r_max: f64,
        depth: f64,
    },
    Tabulated(CubicSpline),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VesselGeometry {
    length: f64,
    profile: Profile,
}

/// Everything the model evaluates from the reference geometry at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeometryDerivatives {
    pub r0: f64,
    pub dr0_dz: f64,
    pub d2r0_dz2: f64,
    pub dlnr0_dz: f64,
    pub d2lnr0_dz2: f64,
    /// Stenosis correction to the Coriolis coefficient, `-(2/35) (dR0/dz)^2`.
    pub alpha_c: f64,
    pub dalpha_c_dz: f64,
}

impl GeometryDerivatives {
    /// Assembles the log-derivative and Coriolis-correction terms from `R0`, `R0'`, `R0''`.
    pub fn from_radius(r0: f64, dr0_dz: f64, d2r0_dz2: f64) -> Self {
        let dlnr0_dz = dr0_dz / r0;
        Self {
            r0,
            dr0_dz,
            d2r0_dz2,
            dlnr0_dz,
            d2lnr0_dz2: d2r0_dz2 / r0 - dlnr0_dz * dlnr0_dz,
            alpha_c: -(2.0 / 35.0) * dr0_dz * dr0_dz,
            dalpha_c_dz: -(4.0 / 35.0) * dr0_dz * d2r0_dz2,
        }
    }

    /// Straight vessel of radius `r0`: every derivative is exactly zero.
    pub fn straight(r0: f64) -> Self {
        Self { r0, ..Self::default() }
    }
}

fn check_radius(name: &'static str, value: f64) -> Result<(), GeometryError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(GeometryError::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

impl VesselGeometry {
    pub fn straight(length: f64, radius: f64) -> Result<Self, GeometryError> {
        check_radius("length", length)?;
        check_radius("r_max", radius)?;
        Ok(Self {
            length,
            profile: Profile::Straight { radius },
        })
    }

    /// One of the three benchmark stenoses on `[0, 6]` cm.
    ///
    /// `r_min` is only used by the 23% case, whose depth is `r_max - r_min`;
    /// the 40% and 50% cases remove that fraction of `r_max`.
    pub fn stenosis(severity: Severity, r_max: f64, r_min: f64) -> Result<Self, GeometryError> {
        check_radius("r_max", r_max)?;
        let depth = match severity {
            Severity::S23 => {
                check_radius("r_min", r_min)?;
                if r_min >= r_max {
                    return Err(GeometryError::InvalidParameter {
                        name: "r_min",
                        reason: format!("must be below r_max = {r_max}, got {r_min}"),
                    });
                }
                r_max - r_min
            }
            Severity::S40 => 0.4 * r_max,
            Severity::S50 => 0.5 * r_max,
        };
        Ok(Self {
            length: STENOSIS_LENGTH,
            profile: Profile::Stenosis { severity, r_max, depth },
        })
    }

    pub fn tabulated(spline: CubicSpline) -> Result<Self, GeometryError> {
        let (z, _) = spline.knots();
        if z[0] != 0.0 {
            return Err(GeometryError::Table(format!("first z must be 0, got {}", z[0])));
        }
        let length = *z.last().unwrap();
        let geometry = Self {
            length,
            profile: Profile::Tabulated(spline),
        };
        // Natural splines may undershoot between knots.
        let n = 4096;
        for i in 0..=n {
            let z = length * i as f64 / n as f64;
            let r = geometry.radius(z);
            if !(r > 0.0) {
                return Err(GeometryError::InvalidParameter {
                    name: "r0",
                    reason: format!("interpolated radius {r} is not positive at z = {z}"),
                });
            }
        }
        Ok(geometry)
    }

    /// Reads a CSV whose first two columns are `z,r0`; further columns,
    /// such as the derivative columns of a written profile, are ignored.
    pub fn from_csv(path: &Path) -> Result<Self, GeometryError> {
        let text = std::fs::read_to_string(path).map_err(|e| GeometryError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_csv_str(&text)
    }

    pub fn from_csv_str(text: &str) -> Result<Self, GeometryError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let table_error = |e: csv::Error| GeometryError::Table(e.to_string());
        let header = reader.headers().map_err(table_error)?.clone();
        if header.len() < 2 || &header[0] != "z" || &header[1] != "r0" {
            return Err(GeometryError::Table(format!(
                "expected header starting with `z,r0`, got `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut z = Vec::new();
        let mut r = Vec::new();
        for (row, record) in reader.records().enumerate() {
            let record = record.map_err(table_error)?;
            let parse = |col: usize| -> Result<f64, GeometryError> {
                record[col]
                    .parse::<f64>()
                    .map_err(|e| GeometryError::Table(format!("row {}: {e}", row + 2)))
            };
            z.push(parse(0)?);
            r.push(parse(1)?);
        }
        if z.is_empty() {
            return Err(GeometryError::Table("no data rows".into()));
        }
        Self::tabulated(CubicSpline::natural(z, r)?)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn is_straight(&self) -> bool {
        matches!(self.profile, Profile::Straight { .. })
    }

    /// Largest reference radius: the far-field value for analytic profiles.
    pub fn r_max(&self) -> f64 {
        match &self.profile {
            Profile::Straight { radius } => *radius,
            Profile::Stenosis { r_max, .. } => *r_max,
            Profile::Tabulated(s) => s.knots().1.iter().cloned().fold(f64::MIN, f64::max),
        }
    }

    /// `R0(z)` without domain checks.
    pub fn radius(&self, z: f64) -> f64 {
        self.radius_and_derivatives(z).0
    }

    /// Location and value of the narrowest point, sampled on a fine grid and
    /// polished by golden-section search.
    pub fn throat(&self) -> (f64, f64) {
        let n = 6000;
        let h = self.length / n as f64;
        let mut best = 0;
        for i in 1..=n {
            if self.radius(i as f64 * h) < self.radius(best as f64 * h) {
                best = i;
            }
        }
        let (mut lo, mut hi) = (
            (best as f64 - 1.0).max(0.0) * h,
            ((best + 1) as f64 * h).min(self.length),
        );
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..100 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if self.radius(a) < self.radius(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let z = 0.5 * (lo + hi);
        (z, self.radius(z))
    }

    fn radius_and_derivatives(&self, z: f64) -> (f64, f64, f64) {
        match &self.profile {
            Profile::Straight { radius } => (*radius, 0.0, 0.0),
            Profile::Stenosis { r_max, depth, .. } => {
                let d = z - 2.5;
                let bump = 0.95 * (-0.5 * d * d).exp();
                let s = z - 3.4 + bump;
                let ds = 1.0 - d * bump;
                let d2s = bump * (d * d - 1.0);
                let g = -50.0 * s.powi(4);
                let dg = -200.0 * s.powi(3) * ds;
                let d2g = -600.0 * s * s * ds * ds - 200.0 * s.powi(3) * d2s;
                let e = g.exp();
                (r_max - depth * e, -depth * e * dg, -depth * e * (dg * dg + d2g))
            }
            Profile::Tabulated(spline) => spline.eval(z),
        }
    }

    /// Geometry terms at `z`, which must lie in `[0, L]`.
    pub fn derivatives_at(&self, z: f64) -> Result<GeometryDerivatives, GeometryError> {
        if !(0.0..=self.length).contains(&z) {
            return Err(GeometryError::OutOfDomain { z, length: self.length });
        }
        if let Profile::Straight { radius } = self.profile {
            return Ok(GeometryDerivatives::straight(radius));
        }
        let (r0, d1, d2) = self.radius_and_derivatives(z);
        Ok(GeometryDerivatives::from_radius(r0, d1, d2))
    }

    /// `n` uniform samples of `(z, R0)` including both ends.
    pub fn sample(&self, n: usize) -> Vec<(f64, f64)> {
        let n = n.max(2);
        (0..n)
            .map(|i| {
                let z = self.length * i as f64 / (n - 1) as f64;
                (z, self.radius(z))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd4(f: impl Fn(f64) -> f64, z: f64, h: f64) -> f64 {
        (-f(z + 2.0 * h) + 8.0 * f(z + h) - 8.0 * f(z - h) + f(z - 2.0 * h)) / (12.0 * h)
    }

    #[test]
    fn far_field_radius_is_r_max() {
        let g = VesselGeometry::stenosis(Severity::S50, 0.18, 0.1394).unwrap();
        assert!((g.radius(0.0) - 0.18).abs() < 1e-12);
        assert!((g.radius(6.0) - 0.18).abs() < 1e-12);
    }

    #[test]
    fn throat_radius_matches_table_values() {
        let g23 = VesselGeometry::stenosis(Severity::S23, 0.18, 0.1394).unwrap();
        assert!((g23.throat().1 - 0.1394).abs() < 1e-4);
        for (sev, frac) in [(Severity::S40, 0.6), (Severity::S50, 0.5)] {
            let g = VesselGeometry::stenosis(sev, 0.18, 0.1394).unwrap();
            let (_, r) = g.throat();
            assert!((r / (0.18 * frac) - 1.0).abs() < 1e-6, "{sev}: {r}");
        }
    }

    #[test]
    fn straight_profile_has_zero_derivatives() {
        let g = VesselGeometry::straight(6.0, 0.18).unwrap();
        for z in [0.0, 1.3, 6.0] {
            let d = g.derivatives_at(z).unwrap();
            assert_eq!(d.r0, 0.18);
            assert_eq!(d.dr0_dz, 0.0);
            assert_eq!(d.alpha_c, 0.0);
            assert_eq!(d.dalpha_c_dz, 0.0);
            assert_eq!(d.d2lnr0_dz2, 0.0);
        }
    }

    #[test]
    fn derivatives_match_finite_differences_at_z3() {
        let g = VesselGeometry::stenosis(Severity::S50, 0.18, 0.1394).unwrap();
        let d = g.derivatives_at(3.0).unwrap();
        let h = 1e-5;
        let fd = (g.radius(3.0 + h) - g.radius(3.0 - h)) / (2.0 * h);
        assert!((d.dr0_dz - fd).abs() <= 1e-6 * fd.abs(), "{} vs {fd}", d.dr0_dz);

        let alpha_c = |z: f64| g.derivatives_at(z).unwrap().alpha_c;
        let fd_a = (alpha_c(3.0 + h) - alpha_c(3.0 - h)) / (2.0 * h);
        assert!((d.dalpha_c_dz - fd_a).abs() <= 1e-5 * fd_a.abs());
    }

    #[test]
    fn out_of_domain_is_rejected() {
        let g = VesselGeometry::stenosis(Severity::S40, 0.18, 0.1394).unwrap();
        assert!(matches!(
            g.derivatives_at(-1e-9),
            Err(GeometryError::OutOfDomain { .. })
        ));
        assert!(g.derivatives_at(6.0 + 1e-9).is_err());
    }

    #[test]
    fn invalid_radii_are_rejected() {
        assert!(VesselGeometry::stenosis(Severity::S23, 0.18, 0.2).is_err());
        assert!(VesselGeometry::stenosis(Severity::S50, -0.18, 0.1).is_err());
        assert!(VesselGeometry::straight(6.0, 0.0).is_err());
    }

    #[test]
    fn spline_reproduces_cubic_interior_and_linear_exactly() {
        let z: Vec<f64> = (0..=20).map(|i| i as f64 * 0.3).collect();
        let r: Vec<f64> = z.iter().map(|z| 0.2 + 0.01 * z).collect();
        let s = CubicSpline::natural(z, r).unwrap();
        let (v, d1, d2) = s.eval(2.05);
        assert!((v - (0.2 + 0.0205)).abs() < 1e-14);
        assert!((d1 - 0.01).abs() < 1e-13);
        assert!(d2.abs() < 1e-12);
    }

    #[test]
    fn tabulated_csv_follows_analytic_profile() {
        let analytic = VesselGeometry::stenosis(Severity::S50, 0.18, 0.1394).unwrap();
        let mut csv = String::from("z,r0\n");
        for (z, r) in analytic.sample(1201) {
            csv.push_str(&format!("{z:?},{r:?}\n"));
        }
        let tab = VesselGeometry::from_csv_str(&csv).unwrap();
        assert_eq!(tab.length(), 6.0);
        for z in [0.7, 2.2, 2.71, 3.3] {
            let a = analytic.derivatives_at(z).unwrap();
            let t = tab.derivatives_at(z).unwrap();
            assert!((a.r0 - t.r0).abs() < 1e-7);
            assert!((a.dr0_dz - t.dr0_dz).abs() < 1e-4);
        }
    }

    #[test]
    fn csv_header_is_enforced() {
        assert!(VesselGeometry::from_csv_str("x,y\n0,1\n1,1\n2,1\n").is_err());
        assert!(VesselGeometry::from_csv_str("z,r0\n0,1\n1,-1\n2,1\n").is_err());
    }

    #[test]
    fn fourth_order_fd_agrees_on_all_profiles() {
        // Deterministic pseudo-random sample points.
        let mut x: u64 = 0x9E3779B97F4A7C15;
        let mut next = || {
            x ^= x << 13;
            x ^= x >> 7;
            x ^= x << 17;
            (x >> 11) as f64 / (1u64 << 53) as f64
        };
        for sev in Severity::ALL {
            let g = VesselGeometry::stenosis(sev, 0.18, 0.1394).unwrap();
            for _ in 0..1000 {
                let z = 0.01 + 5.98 * next();
                let d = g.derivatives_at(z).unwrap();
                let h = 1e-3;
                let fd1 = fd4(|z| g.radius(z), z, h);
                let fd2 = fd4(|z| g.derivatives_at(z).unwrap().dlnr0_dz, z, h);
                let scale1 = d.dr0_dz.abs().max(1e-3);
                let scale2 = d.d2lnr0_dz2.abs().max(1e-1);
                assert!((d.dr0_dz - fd1).abs() <= 1e-6 * scale1, "{sev} z={z}");
                assert!((d.d2lnr0_dz2 - fd2).abs() <= 1e-6 * scale2, "{sev} z={z}");
                assert!(d.alpha_c <= 0.0);
                assert!((d.dlnr0_dz * d.r0 - d.dr0_dz).abs() <= 1e-14 * d.dr0_dz.abs().max(1e-300));
            }
        }
    }
}
