//! Generator gaps of rotationally symmetric potentials by separation of
//! variables. A mode `f(r) Y_l` sees the one-dimensional operator with
//! weight `r^{d-1} e^{-V/eps}` and the extra potential `eps l(l+d-2)/r^2`,
//! so tiny `eps` costs a fine radial grid rather than a fine ambient one.

use serde::{Deserialize, Serialize};

use super::{smallest_eigenvalues, DiscreteOperator, COVER_LEVEL, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::potential::{Potential, ScalarField};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialSpectrum {
    pub potential: String,
    pub eps: f64,
    /// First nonzero eigenvalue of the purely radial family.
    pub radial_gap: f64,
    /// Lowest eigenvalue of the first angular family.
    pub angular_gap: f64,
    /// `min(radial_gap, angular_gap)`.
    pub gap: f64,
    pub rho: f64,
    pub r_lo: f64,
    pub r_hi: f64,
    pub cells: usize,
    pub max_residual: f64,
}

/// Default radial cells.
pub const RADIAL_CELLS: usize = 4000;

/// Gap of `-L` for a radial catalog potential in dimension `d >= 2`.
pub fn radial_generator_gap(potential: &Potential, eps: f64, cells: usize) -> Result<RadialSpectrum> {
    let (profile, dim) = match potential {
        Potential::Radial { profile, dim, .. } if *dim >= 2 => (*profile, *dim),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "`{}` is not a radial potential in two or more dimensions",
                potential.name()
            )))
        }
    };
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    let vstar = potential.global_min();
    let level = COVER_LEVEL * eps;
    let r0 = profile.optimal_radius();
    let excess = |r: f64| profile.value(r) - vstar;
    let mut r_hi = r0.max(1e-3);
    while excess(r_hi) < level {
        r_hi *= 1.5;
    }
    r_hi = bisect(&excess, r0, r_hi, level);
    let r_lo = if r0 > 0.0 && excess(0.0) > level {
        bisect(&excess, r0, 0.0, level)
    } else {
        0.0
    };
    let pad_hi = 0.1 * (r_hi - r_lo);
    let r_hi = r_hi + pad_hi;
    let r_lo = if r_lo > 0.0 { (r_lo - pad_hi).max(0.0) } else { 0.0 };

    let n = cells.max(16);
    let h = (r_hi - r_lo) / n as f64;
    let vmin = (0..n)
        .map(|i| excess(r_lo + (i as f64 + 0.5) * h))
        .fold(f64::INFINITY, f64::min);
    let weight = |r: f64| r.powi(dim as i32 - 1) * (-(excess(r) - vmin) / eps).exp();
    let centres: Vec<f64> = (0..n).map(|i| r_lo + (i as f64 + 0.5) * h).collect();
    let mass: Vec<f64> = centres.iter().map(|&r| weight(r) * h).collect();
    let couplings: Vec<(usize, usize, f64)> = (0..n - 1)
        .map(|i| (i, i + 1, eps * weight(r_lo + (i + 1) as f64 * h) / h))
        .filter(|c| c.2 > 0.0)
        .collect();
    let points: Vec<Vec<f64>> = centres.iter().map(|r| vec![*r]).collect();

    let radial = DiscreteOperator::from_couplings("radial:l=0", mass.clone(), &couplings, None)?.with_points(points.clone());
    let l0 = smallest_eigenvalues(&radial, 2, DEFAULT_TOL)?;
    let angular_term = (dim - 1) as f64;
    let extra: Vec<f64> = centres
        .iter()
        .zip(&mass)
        .map(|(r, m)| eps * angular_term * m / (r * r))
        .collect();
    let angular = DiscreteOperator::from_couplings("radial:l=1", mass, &couplings, Some(&extra))?.with_points(points);
    let l1 = smallest_eigenvalues(&angular, 1, DEFAULT_TOL)?;

    let radial_gap = l0.lambda1();
    let angular_gap = l1.eigenvalues[0];
    let gap = radial_gap.min(angular_gap);
    Ok(RadialSpectrum {
        potential: potential.name().to_owned(),
        eps,
        radial_gap,
        angular_gap,
        gap,
        rho: gap / eps,
        r_lo,
        r_hi,
        cells: n,
        max_residual: l0.max_residual().max(l1.max_residual()),
    })
}

/// Root of `f(r) = level` between `inside` (below) and `outside` (above).
fn bisect(f: &impl Fn(f64) -> f64, mut inside: f64, mut outside: f64, level: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (inside + outside);
        if f(mid) < level {
            inside = mid;
        } else {
            outside = mid;
        }
    }
    outside
}
