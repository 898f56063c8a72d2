use serde::{Deserialize, Serialize};

use super::chart::{chart_grid, laplace_beltrami_operator, tube_coordinate_operator, CHART_CLUSTER_TOL};
use super::{assemble_neumann_laplacian, cluster, smallest_eigenvalues, BoundaryKind, GridDomain, SpectrumResult, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::manifold::{reach_estimate, ChartedManifold, ReachProbe};

/// How the tube domain is discretized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TubeRoute {
    /// Chart grid times a normal interval, tube metric pulled back.
    TubeCoordinates,
    /// Cut-cell ambient grid of `{dist(y, S) <= radius}`.
    AmbientGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TubeResolution {
    /// Cells on the longest chart coordinate.
    pub tangential: usize,
    /// Cells across the tube in tube coordinates.
    pub normal: usize,
    /// Ambient cells across the tube diameter on the ambient route.
    pub ambient_across: usize,
    /// Sub-samples per axis for cut-cell fractions.
    pub cut_samples: usize,
}

impl Default for TubeResolution {
    fn default() -> Self {
        Self {
            tangential: 512,
            normal: 16,
            ambient_across: 24,
            cut_samples: 8,
        }
    }
}

/// First Neumann eigenvalues of the tube of half-width `radius`.
pub fn tube_neumann_spectrum<M: ChartedManifold + ?Sized>(
    manifold: &M,
    radius: f64,
    route: TubeRoute,
    res: TubeResolution,
) -> Result<SpectrumResult> {
    let m = manifold.intrinsic_dim() + 3;
    match route {
        TubeRoute::TubeCoordinates => {
            let (op, grid) = tube_coordinate_operator(manifold, radius, res.tangential, res.normal)?;
            let mut s = smallest_eigenvalues(&op, m, DEFAULT_TOL)?;
            s.h = Some(grid.max_spacing());
            s.multiplicities = cluster(&s.eigenvalues, CHART_CLUSTER_TOL);
            Ok(s)
        }
        TubeRoute::AmbientGrid => {
            let probe = manifold.embed(&vec![0.0; manifold.intrinsic_dim()]);
            if manifold.distance(&probe).is_none() {
                return Err(Error::InvalidArgument(format!(
                    "`{}` has no distance function for the ambient route",
                    manifold.name()
                )));
            }
            let (lo, hi) = ambient_box(manifold, radius)?;
            let h = 2.0 * radius / res.ambient_across as f64;
            let grid = GridDomain::with_spacing(&lo, &hi, h, BoundaryKind::Neumann)?
                .cut_by(|y| manifold.distance(y).unwrap() - radius, res.cut_samples);
            let op = assemble_neumann_laplacian(&grid)?;
            let mut s = smallest_eigenvalues(&op, m, DEFAULT_TOL)?;
            s.h = Some(h);
            s.multiplicities = cluster(&s.eigenvalues, CHART_CLUSTER_TOL);
            Ok(s)
        }
    }
}

/// Bounding box of the tube from the embedded chart grid, padded by the
/// radius and two cells.
fn ambient_box<M: ChartedManifold + ?Sized>(manifold: &M, radius: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = chart_grid(manifold, 256)?;
    let d = manifold.ambient_dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for i in 0..grid.len() {
        let y = manifold.embed(&grid.centre(i));
        for k in 0..d {
            lo[k] = lo[k].min(y[k]);
            hi[k] = hi[k].max(y[k]);
        }
    }
    let pad = 1.1 * radius + 0.02;
    Ok((lo.iter().map(|x| x - pad).collect(), hi.iter().map(|x| x + pad).collect()))
}

/// One tube radius of a stability sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeSample {
    pub radius: f64,
    pub lambda1: f64,
    /// `|lambda1 - lambda_S|`.
    pub deviation: f64,
    /// `deviation / (radius lambda_S)`.
    pub ratio: f64,
    pub residual: f64,
}

/// Linear stability of the first Neumann eigenvalue of shrinking tubes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeStabilityReport {
    pub manifold: String,
    pub route: TubeRoute,
    pub reach: f64,
    /// First nonzero Laplace–Beltrami eigenvalue on the matching chart grid.
    pub base_gap: f64,
    pub samples: Vec<TubeSample>,
    /// Smallest `B` with `|lambda1 - lambda_S| <= B radius lambda_S` on
    /// every sample.
    pub b_min: f64,
    /// Least-squares line of the deviation against the radius.
    pub deviation_slope: f64,
    pub deviation_intercept: f64,
    pub r_squared: f64,
    /// Intercept of the least-squares line of `lambda1` against the radius.
    pub limit: f64,
    /// Ratio of the largest to the smallest radius.
    pub span: f64,
    /// Deviations fail to decrease with the radius.
    pub non_monotone: bool,
}

/// Deviations below this count as grid noise in the monotonicity check.
const MONOTONE_SLACK: f64 = 1e-7;

/// Tube eigenvalues across `radii` against the Laplace–Beltrami gap, with
/// the linear fit of the deviations.
pub fn tube_stability_report<M: ChartedManifold + ?Sized>(
    manifold: &M,
    radii: &[f64],
    route: TubeRoute,
    res: TubeResolution,
) -> Result<TubeStabilityReport> {
    if radii.len() < 2 {
        return Err(Error::InvalidArgument("need at least two tube radii".into()));
    }
    let reach = reach_estimate(manifold, &ReachProbe::default())?;
    if let Some(&bad) = radii.iter().find(|r| !(**r > 0.0 && **r < reach)) {
        return Err(Error::ReachViolation { radius: bad, reach });
    }
    let (lb, _) = laplace_beltrami_operator(manifold, res.tangential)?;
    let base_gap = smallest_eigenvalues(&lb, 2, DEFAULT_TOL)?.lambda1();

    let mut sorted = radii.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut samples = Vec::with_capacity(sorted.len());
    for &radius in &sorted {
        let s = tube_neumann_spectrum(manifold, radius, route, res)?;
        let lambda1 = s.lambda1();
        let deviation = (lambda1 - base_gap).abs();
        samples.push(TubeSample {
            radius,
            lambda1,
            deviation,
            ratio: deviation / (radius * base_gap),
            residual: s.max_residual(),
        });
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.radius).collect();
    let devs: Vec<f64> = samples.iter().map(|s| s.deviation).collect();
    let lams: Vec<f64> = samples.iter().map(|s| s.lambda1).collect();
    let (deviation_slope, deviation_intercept, r_squared) = linear_fit(&xs, &devs);
    let (_, limit, _) = linear_fit(&xs, &lams);
    let non_monotone = devs.windows(2).any(|w| w[1] + MONOTONE_SLACK < w[0]);
    Ok(TubeStabilityReport {
        manifold: manifold.name().to_owned(),
        route,
        reach,
        base_gap,
        b_min: samples.iter().map(|s| s.ratio).fold(0.0, f64::max),
        samples,
        deviation_slope,
        deviation_intercept,
        r_squared,
        limit,
        span: sorted[sorted.len() - 1] / sorted[0],
        non_monotone,
    })
}

/// Least squares `y = a x + b`; returns `(a, b, R^2)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, my - slope * mx, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_a_line() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v - 1.0).collect();
        let (a, b, r2) = linear_fit(&x, &y);
        assert!((a - 2.0).abs() < 1e-12 && (b + 1.0).abs() < 1e-12 && (r2 - 1.0).abs() < 1e-12);
    }
}
