//! Modal discontinuous Galerkin discretization of the `(A, Q)` system.

pub mod basis;
pub mod boundary;
pub mod field;
pub mod flux;
mod kernel;
pub mod limiter;
pub mod rhs;
pub mod solver;
pub mod timestep;

pub use basis::Basis;
pub use boundary::{boundary_trace, BoundarySpec, InletCondition, OutletCondition, Side, Waveform};
pub use field::{project_initial, Mesh1D, StateField};
pub use flux::llf_flux;
pub use rhs::{semidiscrete_rhs, BoundaryFluxes, Discretization};
pub use solver::{run, InitialCondition, RunOutcome, Solver, SolverConfig, StepInfo};
pub use timestep::{cfl_dt, ssp_rk3_step};
