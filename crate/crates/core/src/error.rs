use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown catalog entry `{0}`")]
    UnknownEntry(String),

    #[error("region has no usable probes: {0}")]
    EmptyProbeSet(String),

    #[error("unbounded Laplacian growth: ratio climbs from {first:.4e} to {last:.4e} across probe shells")]
    UnboundedGrowth { first: f64, last: f64 },

    #[error("embedding violation: {0}")]
    Embedding(String),

    #[error("tube radius {radius} exceeds the reach bound {reach}")]
    ReachViolation { radius: f64, reach: f64 },

    #[error("normal offset {norm} lies outside the tube of radius {radius}")]
    OutsideTube { norm: f64, radius: f64 },

    #[error("second fundamental form is not symmetric (asymmetry {0:.3e})")]
    Asymmetric(f64),

    #[error("chart is degenerate at {0:?}")]
    ChartDegenerate(Vec<f64>),

    #[error("chart coordinates are not orthogonal (off-diagonal metric {0:.3e})")]
    NonOrthogonalChart(f64),

    #[error("quadrature did not converge: {coarse} vs {fine}")]
    Quadrature { coarse: f64, fine: f64 },

    #[error("grid mask is disconnected ({0} components)")]
    DisconnectedMask(usize),

    #[error("domain does not cover the Gibbs measure: V - V* = {excess:.3e} (< {required:.3e}) at boundary cell {cell:?}")]
    Coverage {
        cell: Vec<f64>,
        excess: f64,
        required: f64,
    },

    #[error("zero vector after projecting out the constant mode")]
    ZeroProjection,

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("certificate failed: {0}")]
    CertificateFailed(String),

    #[error("simulation diverged: {fraction:.3} of trajectories left the box")]
    Diverged { fraction: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(x: &[f64], what: &str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} = {x:?}")))
    }
}
