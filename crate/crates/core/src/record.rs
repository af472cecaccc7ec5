//! Time-stamped nodal profiles and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

/// Profiles of one output time on a common z-grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolutionRecord {
    /// Time, s.
    pub t: f64,
    pub z: Vec<f64>,
    pub a: Vec<f64>,
    pub q: Vec<f64>,
    /// Mean velocity `Q / A`, cm/s.
    pub u: Vec<f64>,
    /// Total pressure, dyn/cm^2.
    pub p: Vec<f64>,
    /// Wall radius `sqrt(A)`, cm.
    pub r: Vec<f64>,
    /// Wall displacement `R - R0`, cm.
    pub eta_r: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    z: f64,
    a: f64,
    q: f64,
    u: f64,
    p: f64,
    r: f64,
    eta_r: f64,
}

impl SolutionRecord {
    pub fn with_capacity(t: f64, n: usize) -> Self {
        let v = || Vec::with_capacity(n);
        Self {
            t,
            z: v(),
            a: v(),
            q: v(),
            u: v(),
            p: v(),
            r: v(),
            eta_r: v(),
        }
    }

    /// Appends a sample; derived columns are computed from `a`, `q` and `r0`.
    pub fn push(&mut self, z: f64, a: f64, q: f64, p: f64, r0: f64) {
        let r = a.sqrt();
        self.z.push(z);
        self.a.push(a);
        self.q.push(q);
        self.u.push(q / a);
        self.p.push(p);
        self.r.push(r);
        self.eta_r.push(r - r0);
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// Checks column lengths and `A > 0`.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.z.len();
        for (name, col) in [
            ("a", &self.a),
            ("q", &self.q),
            ("u", &self.u),
            ("p", &self.p),
            ("r", &self.r),
            ("eta_r", &self.eta_r),
        ] {
            if col.len() != n {
                return Err(format!("column {name} has {} rows, z has {n}", col.len()));
            }
        }
        if let Some((i, a)) = self.a.iter().enumerate().find(|(_, a)| !(**a > 0.0)) {
            return Err(format!("A = {a} at row {i} (z = {})", self.z[i]));
        }
        Ok(())
    }

    /// Writes `z,a,q,u,p,r,eta_r` with shortest round-trip floats.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        for i in 0..self.len() {
            out.serialize(Row {
                z: self.z[i],
                a: self.a[i],
                q: self.q[i],
                u: self.u[i],
                p: self.p[i],
                r: self.r[i],
                eta_r: self.eta_r[i],
            })?;
        }
        out.flush()?;
        Ok(())
    }

    /// Reads the format of [`SolutionRecord::write_csv`]; the time is not stored in the file.
    pub fn read_csv<R: Read>(t: f64, r: R) -> Result<Self, csv::Error> {
        let mut rec = Self::with_capacity(t, 0);
        for row in csv::Reader::from_reader(r).deserialize() {
            let row: Row = row?;
            rec.z.push(row.z);
            rec.a.push(row.a);
            rec.q.push(row.q);
            rec.u.push(row.u);
            rec.p.push(row.p);
            rec.r.push(row.r);
            rec.eta_r.push(row.eta_r);
        }
        Ok(rec)
    }

    /// Linear interpolation of column `col` at `z`.
    pub fn interpolate(&self, col: &[f64], z: f64) -> f64 {
        let n = self.z.len();
        if z <= self.z[0] {
            return col[0];
        }
        if z >= self.z[n - 1] {
            return col[n - 1];
        }
        let i = self.z.partition_point(|&v| v <= z).clamp(1, n - 1);
        let (z0, z1) = (self.z[i - 1], self.z[i]);
        let w = (z - z0) / (z1 - z0);
        col[i - 1] * (1.0 - w) + col[i] * w
    }
}
