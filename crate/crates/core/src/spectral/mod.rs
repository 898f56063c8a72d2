//! Discrete operators and their low spectrum.
//!
//! Every operator here has the form `A = M^{-1} K`: a symmetric stiffness
//! `K` and a positive diagonal mass `M`. The Neumann Laplacian, the
//! Laplace–Beltrami operator on a chart and the negated Langevin generator
//! all fit this shape, so one eigensolver serves them all.

mod assemble;
mod chart;
mod eigen;
mod grid;
mod operator;
mod radial;
mod report;
mod stability;

pub use assemble::{
    assemble_neumann_laplacian, assemble_weighted_generator, covering_box, covering_grid, generator_spectrum,
    generator_spectrum_on, GeneratorSpectrum, COVER_LEVEL, COVER_REQUIRED, MASK_LEVEL,
};
pub use chart::{
    chart_grid, laplace_beltrami_gap, laplace_beltrami_operator, tube_coordinate_operator, CHART_CLUSTER_TOL,
    DEFAULT_CHART_CELLS,
};
pub use radial::{radial_generator_gap, RadialSpectrum, RADIAL_CELLS};
pub use stability::{
    linear_fit, tube_neumann_spectrum, tube_stability_report, TubeResolution, TubeRoute, TubeSample,
    TubeStabilityReport,
};
pub use eigen::{cluster, smallest_eigenvalues, SpectrumResult, DEFAULT_CLUSTER_TOL, DEFAULT_TOL, DENSE_LIMIT};
pub use grid::{BoundaryKind, CutCells, GridDomain, MaskRle};
pub use operator::{rayleigh_quotient, DiscreteOperator, RayleighWitness, ZERO_MODE_TOL};
pub use report::{config_hash, to_csv, SpectrumRow};

use crate::error::{Error, Result};

/// Gap of a product space from the gaps of its factors.
pub fn tensor_gap(a: f64, b: f64) -> Result<f64> {
    if !(a >= 0.0 && b >= 0.0) {
        return Err(Error::InvalidArgument(format!("factor gaps must be nonnegative, got {a} and {b}")));
    }
    Ok(a.min(b))
}

/// Second-order Richardson extrapolation from spacings `h` and `h/2`.
pub fn richardson(coarse: f64, fine: f64) -> f64 {
    (4.0 * fine - coarse) / 3.0
}
