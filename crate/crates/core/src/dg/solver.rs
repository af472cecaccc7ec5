//! Time integration driver: CFL-controlled SSP-RK3 steps, positivity checks,
//! optional limiting, steady-state detection and output sampling.

use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::geometry::{GeometryDerivatives, VesselGeometry};
use crate::model::{total_pressure, Correction, PhysicalParams};
use crate::record::SolutionRecord;

use super::boundary::BoundarySpec;
use super::field::{project_initial, Mesh1D, StateField};
use super::limiter::limit_tvb;
use super::rhs::Discretization;
use super::timestep::{cfl_dt, ssp_rk3_step, SSP_RK3_NODES, SSP_RK3_WEIGHTS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub n_elements: usize,
    pub degree: usize,
    pub cfl: f64,
    /// Final time, s.
    pub t_end: f64,
    pub correction: Correction,
    pub limiter: bool,
    /// TVB constant `M` of the limiter.
    pub tvb_m: f64,
    /// Subtract the discrete residual of the rest state from the operator.
    pub well_balanced: bool,
    /// Record spacing in s; zero records only the initial and final states.
    pub output_interval: f64,
    /// Uniform z-samples per record.
    pub output_samples: usize,
    /// Relative residual threshold for steady detection, 1/s.
    pub steady_tol: f64,
    /// Consecutive steps below `steady_tol` required.
    pub steady_window: usize,
    /// Stop as soon as steady state is detected.
    pub stop_at_steady: bool,
    /// Halvings of `dt` attempted after a positivity failure.
    pub max_retries: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_elements: 200,
            degree: 2,
            cfl: 0.3,
            t_end: 1.0,
            correction: Correction::Extended,
            limiter: false,
            tvb_m: 50.0,
            well_balanced: true,
            output_interval: 0.1,
            output_samples: 512,
            steady_tol: 1e-6,
            steady_window: 100,
            stop_at_steady: false,
            max_retries: 4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |name: &'static str, reason: String| Err(SolverError::InvalidSetting { name, reason });
        if self.n_elements == 0 {
            return bad("n_elements", "must be at least 1".into());
        }
        if self.degree > 8 {
            return bad("degree", format!("at most 8 supported, got {}", self.degree));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl", format!("must lie in (0, 1], got {}", self.cfl));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return bad("t_end", format!("must be non-negative, got {}", self.t_end));
        }
        if !(self.output_interval.is_finite() && self.output_interval >= 0.0) {
            return bad(
                "output_interval",
                format!("must be non-negative, got {}", self.output_interval),
            );
        }
        if self.output_samples < 2 {
            return bad("output_samples", "need at least 2 samples".into());
        }
        if !(self.steady_tol > 0.0) {
            return bad("steady_tol", format!("must be positive, got {}", self.steady_tol));
        }
        if self.steady_window == 0 {
            return bad("steady_window", "must be at least 1".into());
        }
        if !(self.tvb_m >= 0.0) {
            return bad("tvb_m", format!("must be non-negative, got {}", self.tvb_m));
        }
        Ok(())
    }
}

/// Initial data for a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialCondition {
    /// `A = R0^2`, `Q = 0`.
    #[default]
    Rest,
    /// `A = R0^2 (1 + amplitude exp(-((z - centre)/width)^2))`, `Q = 0`.
    Pulse { amplitude: f64, centre: f64, width: f64 },
}

impl InitialCondition {
    pub fn project(&self, geometry: &VesselGeometry, mesh: &Mesh1D) -> Result<StateField, SolverError> {
        match *self {
            InitialCondition::Rest => project_initial(mesh, |z| geometry.radius(z).powi(2), |_| 0.0),
            InitialCondition::Pulse {
                amplitude,
                centre,
                width,
            } => {
                if !(width > 0.0) {
                    return Err(SolverError::InvalidInitialization(format!(
                        "pulse width must be positive, got {width}"
                    )));
                }
                project_initial(
                    mesh,
                    |z| {
                        let s = (z - centre) / width;
                        geometry.radius(z).powi(2) * (1.0 + amplitude * (-s * s).exp())
                    },
                    |_| 0.0,
                )
            }
        }
    }
}

/// Diagnostics of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Time step actually taken, s.
    pub dt: f64,
    /// `dt * sum_s w_s (F_A(0) - F_A(L))` over the RK stages, cm^3.
    pub net_boundary_area_flux: f64,
    /// `||U^{n+1} - U^n|| / (dt ||U^n||)`, 1/s.
    pub residual: f64,
    /// Elements modified by the limiter over all stages.
    pub limited: usize,
    /// Rejected attempts (dt halvings) before acceptance.
    pub retries: usize,
}

/// Result of [`Solver::run`].
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<SolutionRecord>,
    pub steps: usize,
    pub final_time: f64,
    pub final_residual: f64,
    /// Time at which the steady window was first completed.
    pub steady_time: Option<f64>,
    pub retries: usize,
}

pub struct Solver {
    geometry: VesselGeometry,
    disc: Discretization,
    config: SolverConfig,
    field: StateField,
    centre_geom: Vec<GeometryDerivatives>,
    steps: usize,
    below_tol: usize,
    steady_time: Option<f64>,
    last_residual: f64,
    retries: usize,
    scratch: StateField,
    stage_field: StateField,
}

impl Solver {
    pub fn new(
        geometry: &VesselGeometry,
        params: PhysicalParams,
        spec: BoundarySpec,
        config: SolverConfig,
        initial: InitialCondition,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        let mesh = Mesh1D::new(config.n_elements, geometry.length(), config.degree)?;
        let field = initial.project(geometry, &mesh)?;
        Self::from_field(geometry, params, spec, config, field)
    }

    /// Starts from projected coefficients on the mesh implied by `config`.
    pub fn from_field(
        geometry: &VesselGeometry,
        params: PhysicalParams,
        spec: BoundarySpec,
        config: SolverConfig,
        field: StateField,
    ) -> Result<Self, SolverError> {
        config.validate()?;
        let mesh = Mesh1D::new(config.n_elements, geometry.length(), config.degree)?;
        if field.n_elements() != mesh.n_elements() || field.n_modes() != config.degree + 1 {
            return Err(SolverError::InvalidInitialization(format!(
                "field has {} elements x {} modes, config expects {} x {}",
                field.n_elements(),
                field.n_modes(),
                mesh.n_elements(),
                config.degree + 1
            )));
        }
        let mut disc = Discretization::new(geometry, mesh, params, config.correction, spec)?;
        if let Some((element, z, a)) = disc.find_non_positive(&field) {
            return Err(SolverError::Positivity {
                t: field.t,
                element,
                z,
                a,
            });
        }
        disc.freeze_invariants(&field)?;
        if config.well_balanced {
            disc.enable_well_balancing(geometry)?;
        }
        let centre_geom = (0..mesh.n_elements())
            .map(|e| geometry.derivatives_at(mesh.to_physical(e, 0.0)))
            .collect::<Result<Vec<_>, _>>()?;
        let scratch = field.clone();
        let stage_field = field.clone();
        Ok(Self {
            geometry: geometry.clone(),
            disc,
            config,
            field,
            centre_geom,
            steps: 0,
            below_tol: 0,
            steady_time: None,
            last_residual: f64::INFINITY,
            retries: 0,
            scratch,
            stage_field,
        })
    }

    pub fn field(&self) -> &StateField {
        &self.field
    }

    pub fn time(&self) -> f64 {
        self.field.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn geometry(&self) -> &VesselGeometry {
        &self.geometry
    }

    pub fn last_residual(&self) -> f64 {
        self.last_residual
    }

    pub fn steady_time(&self) -> Option<f64> {
        self.steady_time
    }

    /// CFL-limited step for the current state.
    pub fn stable_dt(&self) -> Result<f64, SolverError> {
        let speed = self.disc.max_wave_speed(&self.field)?;
        let mesh = self.disc.mesh();
        Ok(cfl_dt(self.config.cfl, mesh.dz(), mesh.degree(), speed))
    }

    /// Advances by `dt`, halving on positivity failure up to `max_retries` times.
    pub fn step(&mut self, dt: f64) -> Result<StepInfo, SolverError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::InvalidSetting {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        let mut trial = dt;
        let mut retries = 0;
        loop {
            match self.try_step(trial) {
                Ok(mut info) => {
                    info.retries = retries;
                    self.retries += retries;
                    return Ok(info);
                }
                Err(err @ SolverError::Positivity { .. }) if retries < self.config.max_retries => {
                    let _ = err;
                    retries += 1;
                    trial *= 0.5;
                }
                Err(err) => {
                    return Err(SolverError::Step {
                        t: self.field.t,
                        dt: trial,
                        source: Box::new(err),
                    })
                }
            }
        }
    }

    fn try_step(&mut self, dt: f64) -> Result<StepInfo, SolverError> {
        let t0 = self.field.t;
        let mut u = self.field.coeffs.clone();
        let mut net = 0.0;
        let mut limited = 0;
        let disc = &self.disc;
        let scratch = &mut self.scratch;
        let stage_field = &mut self.stage_field;
        let config = &self.config;
        let centre_geom = &self.centre_geom;
        ssp_rk3_step(
            &mut u,
            dt,
            |stage, x, out| {
                scratch.coeffs.copy_from_slice(x);
                let t = t0 + SSP_RK3_NODES[stage] * dt;
                scratch.t = t;
                let fluxes = disc.rhs(scratch, t, out)?;
                net += SSP_RK3_WEIGHTS[stage] * (fluxes.inlet[0] - fluxes.outlet[0]);
                Ok(())
            },
            |stage, x| {
                stage_field.coeffs.copy_from_slice(x);
                if config.limiter {
                    limited += limit_tvb(
                        stage_field,
                        disc.basis(),
                        disc.mesh(),
                        centre_geom,
                        disc.params(),
                        config.correction,
                        config.tvb_m,
                    );
                    x.copy_from_slice(&stage_field.coeffs);
                }
                if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
                    return Err(SolverError::InvalidSetting {
                        name: "state",
                        reason: format!("non-finite coefficient {bad} after stage {stage}"),
                    });
                }
                if let Some((element, z, a)) = disc.find_non_positive(stage_field) {
                    return Err(SolverError::Positivity {
                        t: t0 + dt,
                        element,
                        z,
                        a,
                    });
                }
                Ok(())
            },
        )?;

        let mut diff = 0.0;
        let mut norm = 0.0;
        for (new, old) in u.iter().zip(&self.field.coeffs) {
            diff += (new - old) * (new - old);
            norm += old * old;
        }
        let residual = diff.sqrt() / (dt * norm.sqrt());
        self.field.coeffs = u;
        self.field.t = t0 + dt;
        self.steps += 1;
        self.last_residual = residual;
        if residual < self.config.steady_tol {
            self.below_tol += 1;
            if self.below_tol >= self.config.steady_window && self.steady_time.is_none() {
                self.steady_time = Some(self.field.t);
            }
        } else {
            self.below_tol = 0;
        }
        Ok(StepInfo {
            dt,
            net_boundary_area_flux: dt * net,
            residual,
            limited,
            retries: 0,
        })
    }

    /// True once the residual has stayed below tolerance for the full window.
    pub fn is_steady(&self) -> bool {
        self.below_tol >= self.config.steady_window
    }

    /// Runs to `t_end` (or steady state if requested), recording at the
    /// configured cadence. Steps are shortened to land on output times.
    pub fn run(&mut self) -> Result<RunOutcome, SolverError> {
        self.run_with(|_, _| {})
    }

    /// As [`Solver::run`], calling `observer` after each accepted step.
    pub fn run_with(&mut self, mut observer: impl FnMut(&Solver, &StepInfo)) -> Result<RunOutcome, SolverError> {
        let t_end = self.config.t_end;
        let interval = self.config.output_interval;
        let mut records = vec![self.sample()?];
        let mut next_output = if interval > 0.0 { interval } else { t_end };
        let eps = 1e-12 * t_end.max(1.0);
        while self.field.t < t_end - eps {
            let target = next_output.min(t_end);
            let mut dt = self.stable_dt()?;
            if self.field.t + dt > target - eps {
                dt = target - self.field.t;
            }
            let info = self.step(dt)?;
            observer(self, &info);
            if self.field.t >= target - eps {
                if (self.field.t - target).abs() <= eps {
                    self.field.t = target;
                }
                if target < t_end {
                    records.push(self.sample()?);
                }
                next_output += interval;
            }
            if self.config.stop_at_steady && self.is_steady() {
                break;
            }
        }
        if records.last().map(|r| r.t) != Some(self.field.t) {
            records.push(self.sample()?);
        }
        Ok(RunOutcome {
            records,
            steps: self.steps,
            final_time: self.field.t,
            final_residual: self.last_residual,
            steady_time: self.steady_time,
            retries: self.retries,
        })
    }

    /// Current solution on `output_samples` uniform points over `[0, L]`.
    pub fn sample(&self) -> Result<SolutionRecord, SolverError> {
        self.sample_at(self.config.output_samples)
    }

    pub fn sample_at(&self, n: usize) -> Result<SolutionRecord, SolverError> {
        let mesh = self.disc.mesh();
        let basis = self.disc.basis();
        let params = self.disc.params();
        let length = mesh.length();
        let mut rec = SolutionRecord::with_capacity(self.field.t, n);
        for i in 0..n {
            let z = length * i as f64 / (n - 1) as f64;
            let (e, xi) = mesh.locate(z);
            let s = self.field.eval(basis, e, xi);
            let g = self.geometry.derivatives_at(z)?;
            let p = total_pressure(&s, &g, params, self.config.correction).map_err(|source| SolverError::Element {
                element: e,
                z,
                source,
            })?;
            rec.push(z, s.a, s.q, p, g.r0);
        }
        Ok(rec)
    }
}

/// Builds a solver and runs it to completion.
pub fn run(
    geometry: &VesselGeometry,
    params: PhysicalParams,
    spec: BoundarySpec,
    config: SolverConfig,
    initial: InitialCondition,
) -> Result<RunOutcome, SolverError> {
    Solver::new(geometry, params, spec, config, initial)?.run()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight() -> VesselGeometry {
        VesselGeometry::straight(6.0, 0.18).unwrap()
    }

    fn quick(n: usize, t_end: f64) -> SolverConfig {
        SolverConfig {
            n_elements: n,
            t_end,
            output_samples: 33,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn zero_end_time_returns_the_projection() {
        let g = straight();
        let cfg = quick(20, 0.0);
        let pulse = InitialCondition::Pulse {
            amplitude: 0.01,
            centre: 3.0,
            width: 0.5,
        };
        let mut s = Solver::new(
            &g,
            PhysicalParams::default(),
            BoundarySpec::non_reflecting(),
            cfg,
            pulse,
        )
        .unwrap();
        let before = s.field().clone();
        let out = s.run().unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(out.records.len(), 1);
        assert_eq!(s.field(), &before);
    }

    #[test]
    fn stable_dt_matches_formula_at_rest() {
        let g = straight();
        let s = Solver::new(
            &g,
            PhysicalParams::default(),
            BoundarySpec::no_inflow(),
            quick(200, 1.0),
            InitialCondition::Rest,
        )
        .unwrap();
        let c = 1028.2989015156763;
        let expected = 0.3 * 0.03 / (5.0 * c);
        assert!((s.stable_dt().unwrap() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn records_land_on_output_times() {
        let g = straight();
        let cfg = SolverConfig {
            output_interval: 1e-4,
            ..quick(20, 3e-4)
        };
        let out = run(
            &g,
            PhysicalParams::default(),
            BoundarySpec::benchmark(),
            cfg,
            InitialCondition::Rest,
        )
        .unwrap();
        let times: Vec<f64> = out.records.iter().map(|r| r.t).collect();
        assert_eq!(times.len(), 4);
        for (t, want) in times.iter().zip([0.0, 1e-4, 2e-4, 3e-4]) {
            assert!((t - want).abs() < 1e-15, "{t} vs {want}");
        }
    }

    #[test]
    fn mismatched_field_is_rejected() {
        let g = straight();
        let field = StateField::zeros(10, 3);
        let err = Solver::from_field(
            &g,
            PhysicalParams::default(),
            BoundarySpec::no_inflow(),
            quick(20, 1.0),
            field,
        );
        assert!(matches!(err, Err(SolverError::InvalidInitialization(_))));
    }

    #[test]
    fn collapsed_initial_state_is_reported() {
        let g = straight();
        let mesh = Mesh1D::new(4, 6.0, 1).unwrap();
        let mut field = project_initial(&mesh, |_| 0.03, |_| 0.0).unwrap();
        field.a_mut(2)[1] = 0.1;
        let cfg = SolverConfig {
            degree: 1,
            ..quick(4, 1.0)
        };
        let err = Solver::from_field(&g, PhysicalParams::default(), BoundarySpec::no_inflow(), cfg, field);
        assert!(matches!(err, Err(SolverError::Positivity { element: 2, .. })));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            SolverConfig {
                cfl: 0.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                cfl: 1.5,
                ..SolverConfig::default()
            },
            SolverConfig {
                t_end: -1.0,
                ..SolverConfig::default()
            },
            SolverConfig {
                n_elements: 0,
                ..SolverConfig::default()
            },
            SolverConfig {
                output_samples: 1,
                ..SolverConfig::default()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
