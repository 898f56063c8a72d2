use serde::{Deserialize, Serialize};

use super::grid::assemble_fv;
use super::{smallest_eigenvalues, BoundaryKind, DiscreteOperator, GridDomain, SpectrumResult};
use crate::error::{Error, Result};
use crate::potential::ScalarField;

/// Sublevel `V <= V* + COVER_LEVEL * eps` enclosed by a covering box.
pub const COVER_LEVEL: f64 = 40.0;

/// Boundary cells must satisfy `V - V* >= COVER_REQUIRED * eps`.
pub const COVER_REQUIRED: f64 = 20.0;

/// Cells with `V - V_min > MASK_LEVEL * eps` carry negligible Gibbs mass and
/// are dropped.
pub const MASK_LEVEL: f64 = 250.0;

/// Neumann Laplacian on the active cells, with cut-cell apertures when the
/// grid carries them.
pub fn assemble_neumann_laplacian(domain: &GridDomain) -> Result<DiscreteOperator> {
    assemble_fv(domain, "neumann_laplacian", |_| 1.0, |_, _| 1.0)
}

/// `-L = -eps e^{V/eps} div(e^{-V/eps} grad)` in finite-volume form.
///
/// Weights are `e^{-(V - V_min)/eps}` times the cell volume, with `V_min` the
/// smallest value over the grid, so nothing underflows for small `eps`.
/// Cells above `V_min + MASK_LEVEL eps` are dropped.
pub fn assemble_weighted_generator(field: &dyn ScalarField, eps: f64, domain: &GridDomain) -> Result<DiscreteOperator> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if domain.dim() != field.dim() {
        return Err(Error::InvalidArgument(format!(
            "{}-dimensional grid for a {}-dimensional potential",
            domain.dim(),
            field.dim()
        )));
    }
    let vstar = field.global_min();
    for i in (0..domain.len()).filter(|&i| domain.mask[i] && domain.on_box_boundary(i)) {
        let c = domain.centre(i);
        let excess = field.value(&c) - vstar;
        if excess < COVER_REQUIRED * eps {
            return Err(Error::Coverage {
                cell: c,
                excess,
                required: COVER_REQUIRED * eps,
            });
        }
    }
    let vmin = (0..domain.len())
        .filter(|&i| domain.mask[i])
        .map(|i| field.value(&domain.centre(i)))
        .fold(f64::INFINITY, f64::min);
    let trimmed = domain.clone().masked_with(|x, keep| keep && field.value(x) - vmin <= MASK_LEVEL * eps);
    assemble_fv(
        &trimmed,
        &format!("generator:{}:eps={eps}", field.name()),
        |x| (-(field.value(x) - vmin) / eps).exp(),
        |_, f| eps * (-(field.value(f) - vmin) / eps).exp(),
    )
}

/// Box enclosing `{V <= V* + COVER_LEVEL eps}` with a margin, gridded at
/// spacing at most `h`.
pub fn covering_grid(field: &dyn ScalarField, eps: f64, h: f64) -> Result<GridDomain> {
    let (lo, hi) = covering_box(field, eps)?;
    GridDomain::with_spacing(&lo, &hi, h, BoundaryKind::Truncation)
}

/// Axis-aligned box around `{V <= V* + COVER_LEVEL eps}`.
///
/// A cube around the origin is doubled until its surface lies above the
/// level, then shrunk to the sampled extent of the sublevel set plus a
/// margin of 10% of its width.
pub fn covering_box(field: &dyn ScalarField, eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = field.dim();
    let level = field.global_min() + COVER_LEVEL * eps;
    let per_axis = match d {
        1 => 4001,
        2 => 401,
        _ => 81,
    };
    let mut half = 1.0;
    for _ in 0..40 {
        let pts = crate::potential::lattice_points(&vec![-half; d], &vec![half; d], per_axis);
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        let mut touches = false;
        for p in &pts {
            if field.value(p) <= level {
                for k in 0..d {
                    lo[k] = lo[k].min(p[k]);
                    hi[k] = hi[k].max(p[k]);
                }
                if p.iter().any(|x| x.abs() >= half) {
                    touches = true;
                }
            }
        }
        if !lo[0].is_finite() {
            return Err(Error::Precondition(format!(
                "no lattice point of the cube of half-width {half} reaches V* + {COVER_LEVEL} eps"
            )));
        }
        if !touches {
            let step = 2.0 * half / (per_axis - 1) as f64;
            for k in 0..d {
                let pad = 0.1 * (hi[k] - lo[k]) + 2.0 * step;
                lo[k] = (lo[k] - pad).max(-half);
                hi[k] = (hi[k] + pad).min(half);
            }
            return Ok((lo, hi));
        }
        half *= 2.0;
    }
    Err(Error::Precondition("sublevel set is unbounded".into()))
}

/// Low spectrum of the generator with the Poincaré constant read off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpectrum {
    pub potential: String,
    pub eps: f64,
    /// First nonzero eigenvalue of `-L`.
    pub gap: f64,
    /// Poincaré constant `gap / eps`.
    pub rho: f64,
    pub spectrum: SpectrumResult,
}

/// Generator spectrum on the covering box at spacing `h`.
pub fn generator_spectrum(field: &dyn ScalarField, eps: f64, h: f64, m: usize) -> Result<GeneratorSpectrum> {
    let grid = covering_grid(field, eps, h)?;
    generator_spectrum_on(field, eps, &grid, m)
}

pub fn generator_spectrum_on(
    field: &dyn ScalarField,
    eps: f64,
    grid: &GridDomain,
    m: usize,
) -> Result<GeneratorSpectrum> {
    let op = assemble_weighted_generator(field, eps, grid)?;
    let mut spectrum = smallest_eigenvalues(&op, m.max(2), super::DEFAULT_TOL)?;
    spectrum.h = Some(grid.max_spacing());
    let gap = spectrum.lambda1();
    Ok(GeneratorSpectrum {
        potential: field.name().to_owned(),
        eps,
        gap,
        rho: gap / eps,
        spectrum,
    })
}
