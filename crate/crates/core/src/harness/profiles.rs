use std::path::{Path, PathBuf};

use crate::geometry::{Severity, VesselGeometry};

use super::config::{GeometrySpec, RunConfig};
use super::{write_file, HarnessError};

/// CSV `z,r0,dr0_dz,d2r0_dz2,alpha_c` on `n` uniform points.
pub fn geometry_table(geometry: &VesselGeometry, n: usize) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| HarnessError::Io {
        path: "<geometry table>".into(),
        reason: e.to_string(),
    };
    w.write_record(["z", "r0", "dr0_dz", "d2r0_dz2", "alpha_c"])
        .map_err(io)?;
    for (z, _) in geometry.sample(n) {
        let d = geometry.derivatives_at(z)?;
        w.write_record([z, d.r0, d.dr0_dz, d.d2r0_dz2, d.alpha_c].map(|v| format!("{v:?}")))
            .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Io {
        path: "<geometry table>".into(),
        reason: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes one table per severity for the stenosis geometry, or a single
/// `profile.csv` otherwise. Returns the written paths.
pub fn write_profiles(
    cfg: &RunConfig,
    severities: &[Severity],
    n: usize,
    out: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut written = Vec::new();
    match &cfg.geometry {
        GeometrySpec::Stenosis { .. } => {
            for &s in severities {
                let mut case = cfg.clone();
                case.severity = s;
                let path = out.join(format!("profile_{}.csv", s.percent()));
                write_file(&path, geometry_table(&case.geometry()?, n)?.as_bytes())?;
                written.push(path);
            }
        }
        _ => {
            let path = out.join("profile.csv");
            write_file(&path, geometry_table(&cfg.geometry()?, n)?.as_bytes())?;
            written.push(path);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_header_and_endpoints() {
        let g = VesselGeometry::stenosis(Severity::S50, 0.18, 0.1394).unwrap();
        let text = geometry_table(&g, 7).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "z,r0,dr0_dz,d2r0_dz2,alpha_c");
        assert_eq!(lines.len(), 8);
        assert!(lines[1].starts_with("0.0,"));
        assert!(lines[7].starts_with("6.0,"));
    }

    #[test]
    fn one_file_per_severity() {
        let dir = tempfile::tempdir().unwrap();
        let paths = write_profiles(&RunConfig::default(), &Severity::ALL, 11, dir.path()).unwrap();
        assert_eq!(paths.len(), 3);
        assert!(dir.path().join("profile_23.csv").is_file());
    }
}
