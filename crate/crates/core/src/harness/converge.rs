use std::path::Path;

use serde::Serialize;

use crate::dg::basis::gauss_legendre;
use crate::dg::{Basis, BoundarySpec, InitialCondition, Mesh1D, Solver, SolverConfig, StateField};
use crate::error::SolverError;
use crate::geometry::VesselGeometry;
use crate::model::{Correction, PhysicalParams};

use super::config::RunConfig;
use super::{write_file, write_json, HarnessError};

/// Smooth pressure pulse in a straight tube with non-reflecting ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseProblem {
    pub length: f64,
    pub radius: f64,
    pub amplitude: f64,
    pub width: f64,
    pub t_end: f64,
    pub correction: Correction,
}

impl PulseProblem {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            length: 6.0,
            radius: 0.18,
            amplitude: cfg.convergence.amplitude,
            width: cfg.convergence.width,
            t_end: cfg.convergence.t_end,
            correction: cfg.solver.correction,
        }
    }

    fn solve(&self, params: &PhysicalParams, n: usize, degree: usize) -> Result<(Mesh1D, StateField), SolverError> {
        let geometry = VesselGeometry::straight(self.length, self.radius)?;
        let config = SolverConfig {
            n_elements: n,
            degree,
            t_end: self.t_end,
            correction: self.correction,
            output_interval: 0.0,
            output_samples: 2,
            ..SolverConfig::default()
        };
        let initial = InitialCondition::Pulse {
            amplitude: self.amplitude,
            centre: 0.5 * self.length,
            width: self.width,
        };
        let mut solver = Solver::new(&geometry, *params, BoundarySpec::non_reflecting(), config, initial)?;
        solver.run()?;
        let mesh = *solver.discretization().mesh();
        Ok((mesh, solver.field().clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n_elements: usize,
    /// `||A_N - A_next||_2` against the next mesh in the list.
    pub error_a: f64,
    pub error_q: f64,
    /// Observed order from this row to the next.
    pub rate_a: Option<f64>,
    pub rate_q: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub degree: usize,
    pub t_end: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `-ln e` against `ln N`.
    pub fitted_rate_a: f64,
    pub fitted_rate_q: f64,
    /// Errors decrease strictly along the list.
    pub monotone: bool,
}

impl ConvergenceTable {
    /// Monotone, with both fitted rates within `tol` of `degree + 1`.
    pub fn passes(&self, tol: f64) -> bool {
        let order = self.degree as f64 + 1.0;
        self.monotone && (self.fitted_rate_a - order).abs() <= tol && (self.fitted_rate_q - order).abs() <= tol
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_elements,error_a,error_q,rate_a,rate_q\n");
        let opt = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:?},{:?},{},{}\n",
                r.n_elements,
                r.error_a,
                r.error_q,
                opt(r.rate_a),
                opt(r.rate_q)
            ));
        }
        out
    }
}

/// L2 distance of `(A, Q)` between two fields, integrated on the finer mesh.
fn l2_difference(coarse: (&Mesh1D, &StateField), fine: (&Mesh1D, &StateField)) -> (f64, f64) {
    let (cm, cf) = coarse;
    let (fm, ff) = fine;
    let cb = Basis::new(cm.degree());
    let fb = Basis::new(fm.degree());
    let (nodes, weights) = gauss_legendre(fm.degree() + 4);
    let (mut ea, mut eq) = (0.0, 0.0);
    for e in 0..fm.n_elements() {
        for (&xi, &w) in nodes.iter().zip(&weights) {
            let z = fm.to_physical(e, xi);
            let f = ff.eval(&fb, e, xi);
            let (ce, cxi) = cm.locate(z);
            let c = cf.eval(&cb, ce, cxi);
            let jw = 0.5 * fm.dz() * w;
            ea += jw * (f.a - c.a).powi(2);
            eq += jw * (f.q - c.q).powi(2);
        }
    }
    (ea.sqrt(), eq.sqrt())
}

fn fitted_slope(n: &[usize], e: &[f64]) -> f64 {
    let x: Vec<f64> = n.iter().map(|&v| (v as f64).ln()).collect();
    let y: Vec<f64> = e.iter().map(|v| v.ln()).collect();
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    -sxy / sxx
}

/// Self-convergence of the pulse problem over `n_list` (ascending). The
/// error of each mesh is measured against the next one, so the table has
/// one row fewer than `n_list`.
pub fn convergence_study(
    problem: &PulseProblem,
    params: &PhysicalParams,
    degree: usize,
    n_list: &[usize],
) -> Result<ConvergenceTable, SolverError> {
    if n_list.len() < 3 || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolverError::InvalidSetting {
            name: "n_list",
            reason: format!("need at least 3 strictly increasing sizes, got {n_list:?}"),
        });
    }
    let solutions = std::thread::scope(|scope| {
        let handles: Vec<_> = n_list
            .iter()
            .map(|&n| scope.spawn(move || problem.solve(params, n, degree)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("convergence worker panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let mut rows = Vec::new();
    for i in 0..solutions.len() - 1 {
        let (cm, cf) = &solutions[i];
        let (fm, ff) = &solutions[i + 1];
        let (ea, eq) = l2_difference((cm, cf), (fm, ff));
        rows.push(ConvergenceRow {
            n_elements: n_list[i],
            error_a: ea,
            error_q: eq,
            rate_a: None,
            rate_q: None,
        });
    }
    for i in 0..rows.len() - 1 {
        let ratio = (n_list[i + 1] as f64 / n_list[i] as f64).ln();
        rows[i].rate_a = Some((rows[i].error_a / rows[i + 1].error_a).ln() / ratio);
        rows[i].rate_q = Some((rows[i].error_q / rows[i + 1].error_q).ln() / ratio);
    }
    let ns: Vec<usize> = rows.iter().map(|r| r.n_elements).collect();
    let ea: Vec<f64> = rows.iter().map(|r| r.error_a).collect();
    let eq: Vec<f64> = rows.iter().map(|r| r.error_q).collect();
    let q_is_zero = eq.iter().all(|&e| e == 0.0);
    let monotone = rows
        .windows(2)
        .all(|w| w[1].error_a < w[0].error_a && (q_is_zero || w[1].error_q < w[0].error_q));
    Ok(ConvergenceTable {
        degree,
        t_end: problem.t_end,
        rows,
        fitted_rate_a: fitted_slope(&ns, &ea),
        fitted_rate_q: if q_is_zero {
            f64::INFINITY
        } else {
            fitted_slope(&ns, &eq)
        },
        monotone,
    })
}

/// Runs the configured study for every degree and writes
/// `convergence_k<degree>.csv` plus `convergence.json` under `out`.
pub fn convergence_from_config(cfg: &RunConfig, out: Option<&Path>) -> Result<Vec<ConvergenceTable>, HarnessError> {
    cfg.validate()?;
    let problem = PulseProblem::from_config(cfg);
    let mut tables = Vec::new();
    for &k in &cfg.convergence.degrees {
        tables.push(convergence_study(&problem, &cfg.physics, k, &cfg.convergence.n_list)?);
    }
    if let Some(dir) = out {
        for t in &tables {
            write_file(
                &dir.join(format!("convergence_k{}.csv", t.degree)),
                t.to_csv().as_bytes(),
            )?;
        }
        write_json(&dir.join("convergence.json"), &tables)?;
    }
    Ok(tables)
}
