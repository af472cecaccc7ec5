use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid geometry parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("z = {z} lies outside the vessel [0, {length}]")]
    OutOfDomain { z: f64, length: f64 },
    #[error("radius table: {0}")]
    Table(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid physical parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("non-positive cross-section A = {a}")]
    NonPositiveArea { a: f64 },
    #[error("hyperbolicity lost: discriminant {discriminant} < 0 (A = {a}, Q = {q})")]
    HyperbolicityLoss { discriminant: f64, a: f64, q: f64 },
    #[error("invalid Riemann invariants: w2 = {w2} must exceed w1 = {w1}")]
    InvalidInvariants { w1: f64, w2: f64 },
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid solver setting `{name}`: {reason}")]
    InvalidSetting { name: &'static str, reason: String },
    #[error("initial condition: {0}")]
    InvalidInitialization(String),
    #[error("element {element} (z = {z:.6} cm): {source}")]
    Element {
        element: usize,
        z: f64,
        #[source]
        source: ModelError,
    },
    #[error("{side} boundary at t = {t:.6e} s: {reason}")]
    Boundary { side: &'static str, t: f64, reason: String },
    #[error("positivity lost at t = {t:.6e} s: A = {a:.6e} in element {element} (z = {z:.6} cm)")]
    Positivity { t: f64, element: usize, z: f64, a: f64 },
    #[error("step failed at t = {t:.6e} s (dt = {dt:.3e} s): {source}")]
    Step {
        t: f64,
        dt: f64,
        #[source]
        source: Box<SolverError>,
    },
}

#[derive(Debug, Error)]
pub enum PostprocessError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("r = {r} outside [0, {wall_radius}]")]
    RadiusOutOfRange { r: f64, wall_radius: f64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("radial BVP did not converge after {iterations} Newton iterations; residual history {history:?}")]
    NewtonFailed { iterations: usize, history: Vec<f64> },
    #[error("slice z = {z:.6} cm: {source}")]
    Slice {
        z: f64,
        #[source]
        source: Box<PostprocessError>,
    },
}
