use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dg::{RunOutcome, Solver};
use crate::model::{C0Variant, Correction};
use crate::postprocess::{reconstruct_2d_field, CharacteristicScales, Field2D, ReconstructOptions};
use crate::record::SolutionRecord;

use super::config::RunConfig;
use super::{write_file, write_json, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub file: String,
    pub t: f64,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config_hash: String,
    pub geometry: String,
    pub correction: Correction,
    pub c0_variant: C0Variant,
    /// `ok` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub exit_code: i32,
    pub n_elements: usize,
    pub degree: usize,
    pub cfl: f64,
    pub steady_tol: f64,
    pub steady_window: usize,
    pub steps: usize,
    pub final_time: f64,
    pub steady_time: Option<f64>,
    pub steady_residual: Option<f64>,
    pub min_a: Option<f64>,
    pub max_a: Option<f64>,
    pub peak_u: Option<f64>,
    pub peak_u_z: Option<f64>,
    pub wall_clock_s: f64,
    pub records: Vec<RecordEntry>,
}

#[derive(Debug, Clone)]
pub struct CaseReport {
    pub outcome: Option<RunOutcome>,
    pub summary: Summary,
}

impl CaseReport {
    pub fn last_record(&self) -> Option<&SolutionRecord> {
        self.outcome.as_ref().and_then(|o| o.records.last())
    }
}

fn geometry_label(cfg: &RunConfig) -> String {
    match &cfg.geometry {
        super::GeometrySpec::Stenosis { .. } => format!("stenosis {}", cfg.severity),
        super::GeometrySpec::Straight { .. } => "straight".into(),
        super::GeometrySpec::Table { path } => format!("table {}", path.display()),
    }
}

/// Runs one configured case. Solver failures are reported in the summary
/// (status `failed`, exit code 3) rather than as an `Err`; the summary and
/// records are written under `out` when given.
pub fn run_case(cfg: &RunConfig, out: Option<&Path>) -> Result<CaseReport, HarnessError> {
    cfg.validate()?;
    let geometry = cfg.geometry()?;
    let started = Instant::now();
    let result = Solver::new(&geometry, cfg.physics, cfg.boundary, cfg.solver, cfg.initial).and_then(|mut s| s.run());
    let wall = started.elapsed().as_secs_f64();

    let mut summary = Summary {
        config_hash: cfg.hash(),
        geometry: geometry_label(cfg),
        correction: cfg.solver.correction,
        c0_variant: cfg.physics.c0_variant,
        status: "ok".into(),
        error: None,
        exit_code: 0,
        n_elements: cfg.solver.n_elements,
        degree: cfg.solver.degree,
        cfl: cfg.solver.cfl,
        steady_tol: cfg.solver.steady_tol,
        steady_window: cfg.solver.steady_window,
        steps: 0,
        final_time: 0.0,
        steady_time: None,
        steady_residual: None,
        min_a: None,
        max_a: None,
        peak_u: None,
        peak_u_z: None,
        wall_clock_s: wall,
        records: Vec::new(),
    };
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            summary.status = "failed".into();
            summary.error = Some(e.to_string());
            summary.exit_code = 3;
            if let Some(dir) = out {
                write_json(&dir.join("summary.json"), &summary)?;
            }
            return Ok(CaseReport { outcome: None, summary });
        }
    };
    summary.steps = outcome.steps;
    summary.final_time = outcome.final_time;
    summary.steady_time = outcome.steady_time;
    summary.steady_residual = Some(outcome.final_residual).filter(|r| r.is_finite());
    let mut min_a = f64::INFINITY;
    let mut max_a = f64::NEG_INFINITY;
    for rec in &outcome.records {
        for &a in &rec.a {
            min_a = min_a.min(a);
            max_a = max_a.max(a);
        }
    }
    summary.min_a = Some(min_a);
    summary.max_a = Some(max_a);
    if let Some(last) = outcome.records.last() {
        let (i, u) = last.u.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &u)| if u > best.1 { (i, u) } else { best },
        );
        summary.peak_u = Some(u);
        summary.peak_u_z = Some(last.z[i]);
    }
    for (i, rec) in outcome.records.iter().enumerate() {
        summary.records.push(RecordEntry {
            file: format!("record_{i:04}.csv"),
            t: rec.t,
        });
    }
    if let Some(dir) = out {
        if cfg.output.records {
            for (entry, rec) in summary.records.iter().zip(&outcome.records) {
                let mut buf = Vec::new();
                rec.write_csv(&mut buf)
                    .map_err(|e| HarnessError::io(&dir.join(&entry.file), e))?;
                write_file(&dir.join(&entry.file), &buf)?;
            }
        }
        write_file(&dir.join("effective_config.toml"), cfg.effective_toml().as_bytes())?;
        write_json(&dir.join("summary.json"), &summary)?;
    }
    Ok(CaseReport {
        outcome: Some(outcome),
        summary,
    })
}

/// Reads the records of a finished run directory.
pub fn read_records(dir: &Path) -> Result<(Summary, Vec<SolutionRecord>), HarnessError> {
    let path = dir.join("summary.json");
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    let summary: Summary = serde_json::from_str(&text).map_err(|e| HarnessError::io(&path, e))?;
    let mut records = Vec::with_capacity(summary.records.len());
    for entry in &summary.records {
        let p = dir.join(&entry.file);
        let file = std::fs::File::open(&p).map_err(|e| HarnessError::io(&p, e))?;
        records.push(SolutionRecord::read_csv(entry.t, file).map_err(|e| HarnessError::io(&p, e))?);
    }
    Ok((summary, records))
}

/// Reconstructs the 2D field from the records in `dir` and writes
/// `field2d.csv` and `field2d.json` there.
pub fn postprocess_case(cfg: &RunConfig, dir: &Path, steady: bool) -> Result<Field2D, HarnessError> {
    let (_, records) = read_records(dir)
        .map_err(|e| crate::error::PostprocessError::InvalidInput(format!("cannot read run directory: {e}")))?;
    let geometry = cfg.geometry()?;
    let u_z = if cfg.postprocess.u_z_scale > 0.0 {
        cfg.postprocess.u_z_scale
    } else {
        cfg.inlet_velocity().filter(|v| *v > 0.0).ok_or_else(|| {
            HarnessError::Config(super::ConfigError::Invalid {
                key: "postprocess.u_z_scale".into(),
                reason: "required when the inlet has no positive plateau velocity".into(),
            })
        })?
    };
    let scales = CharacteristicScales::new(u_z, geometry.length())?;
    let opts = ReconstructOptions {
        n_r: cfg.postprocess.n_r,
        n_z: cfg.postprocess.n_z,
        steady,
        collocation_points: cfg.postprocess.collocation_points,
        correction: cfg.solver.correction,
    };
    let field = reconstruct_2d_field(&records, &geometry, &cfg.physics, &scales, &opts)?;
    let mut buf = Vec::new();
    field
        .write_csv(&mut buf)
        .map_err(|e| HarnessError::io(&dir.join("field2d.csv"), e))?;
    write_file(&dir.join("field2d.csv"), &buf)?;
    write_json(&dir.join("field2d.json"), &field.sidecar_json())?;
    Ok(field)
}
