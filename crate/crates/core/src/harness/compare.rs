use std::path::Path;

use serde::Serialize;

use crate::model::Correction;
use crate::record::SolutionRecord;

use super::config::RunConfig;
use super::run::run_case;
use super::{write_file, write_json, HarnessError};

#[derive(Debug, Clone, Serialize)]
pub struct VariantResult {
    pub correction: Correction,
    /// `ok` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub steady_time: Option<f64>,
    pub steady_residual: Option<f64>,
    pub peak_u: Option<f64>,
    pub peak_u_z: Option<f64>,
    #[serde(skip)]
    pub record: Option<SolutionRecord>,
}

/// Differences of `U` between two variants over the stenotic region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairMetrics {
    pub first: Correction,
    pub second: Correction,
    /// `max |U_1 - U_2| / |U_2|`.
    pub max_relative: f64,
    /// `||U_1 - U_2||_2 / ||U_2||_2`.
    pub l2_relative: f64,
    /// `max U_1 - max U_2` over the region, cm/s.
    pub peak_difference: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub config_hash: String,
    /// All variants coincide by construction (straight vessel).
    pub degenerate: bool,
    /// `[z_start, z_end]` where `R0 < 0.99 R_max`; the whole vessel when degenerate.
    pub region: (f64, f64),
    pub variants: Vec<VariantResult>,
    pub pairs: Vec<PairMetrics>,
}

impl ComparisonReport {
    pub fn variant(&self, c: Correction) -> Option<&VariantResult> {
        self.variants.iter().find(|v| v.correction == c)
    }

    pub fn pair(&self, first: Correction, second: Correction) -> Option<&PairMetrics> {
        self.pairs.iter().find(|p| p.first == first && p.second == second)
    }
}

fn pair_metrics(
    first: Correction,
    a: &SolutionRecord,
    second: Correction,
    b: &SolutionRecord,
    in_region: &[bool],
) -> PairMetrics {
    let mut max_rel: f64 = 0.0;
    let (mut num, mut den) = (0.0, 0.0);
    let (mut peak_a, mut peak_b) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in (0..a.len()).filter(|&i| in_region[i]) {
        let d = a.u[i] - b.u[i];
        max_rel = max_rel.max(d.abs() / b.u[i].abs());
        num += d * d;
        den += b.u[i] * b.u[i];
        peak_a = peak_a.max(a.u[i]);
        peak_b = peak_b.max(b.u[i]);
    }
    PairMetrics {
        first,
        second,
        max_relative: max_rel,
        l2_relative: (num / den).sqrt(),
        peak_difference: peak_a - peak_b,
    }
}

/// Runs the classical, extended and appendix-b variants of `cfg` on the same
/// grid and boundary data and compares the final mean velocities. The three
/// cases run concurrently.
pub fn compare_models(cfg: &RunConfig, out: Option<&Path>) -> Result<ComparisonReport, HarnessError> {
    cfg.validate()?;
    let geometry = cfg.geometry()?;
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = Correction::ALL
            .iter()
            .map(|&c| {
                let mut case = cfg.clone();
                case.solver.correction = c;
                let dir = out.map(|d| d.join(c.name()));
                scope.spawn(move || (c, run_case(&case, dir.as_deref())))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("comparison worker panicked"))
            .collect()
    });

    let mut variants = Vec::new();
    for (c, res) in results {
        let report = res?;
        let s = &report.summary;
        variants.push(VariantResult {
            correction: c,
            status: s.status.clone(),
            error: s.error.clone(),
            steady_time: s.steady_time,
            steady_residual: s.steady_residual,
            peak_u: s.peak_u,
            peak_u_z: s.peak_u_z,
            record: report.last_record().cloned(),
        });
    }

    let degenerate = geometry.is_straight();
    let z: Vec<f64> = variants
        .iter()
        .find_map(|v| v.record.as_ref().map(|r| r.z.clone()))
        .unwrap_or_default();
    let threshold = 0.99 * geometry.r_max();
    let mut in_region: Vec<bool> = z
        .iter()
        .map(|&z| degenerate || geometry.radius(z) < threshold)
        .collect();
    if !in_region.iter().any(|&b| b) {
        in_region.iter_mut().for_each(|b| *b = true);
    }
    let region = z
        .iter()
        .zip(&in_region)
        .filter(|(_, &b)| b)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&z, _)| {
            (lo.min(z), hi.max(z))
        });

    let mut pairs = Vec::new();
    for (first, second) in [
        (Correction::Extended, Correction::Classical),
        (Correction::Extended, Correction::AppendixB),
        (Correction::AppendixB, Correction::Classical),
    ] {
        let rec = |c: Correction| {
            variants
                .iter()
                .find(|v| v.correction == c)
                .and_then(|v| v.record.as_ref())
        };
        if let (Some(a), Some(b)) = (rec(first), rec(second)) {
            pairs.push(pair_metrics(first, a, second, b, &in_region));
        }
    }

    let report = ComparisonReport {
        config_hash: cfg.hash(),
        degenerate,
        region,
        variants,
        pairs,
    };
    if let Some(dir) = out {
        write_file(&dir.join("comparison.csv"), aligned_csv(&report, &z).as_bytes())?;
        write_json(&dir.join("comparison.json"), &report)?;
    }
    Ok(report)
}

/// `z,u_<variant>...,p_<variant>...`; columns of failed variants are empty.
fn aligned_csv(report: &ComparisonReport, z: &[f64]) -> String {
    let mut out = String::from("z");
    for q in ["u", "p"] {
        for c in Correction::ALL {
            out.push_str(&format!(",{q}_{}", c.name().replace('-', "_")));
        }
    }
    out.push('\n');
    for (i, z) in z.iter().enumerate() {
        out.push_str(&format!("{z:?}"));
        for col in 0..2 {
            for c in Correction::ALL {
                out.push(',');
                if let Some(r) = report.variant(c).and_then(|v| v.record.as_ref()) {
                    let v = if col == 0 { r.u[i] } else { r.p[i] };
                    out.push_str(&format!("{v:?}"));
                }
            }
        }
        out.push('\n');
    }
    out
}
