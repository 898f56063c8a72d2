//! Operators assembled on a chart grid: the Laplace–Beltrami operator of a
//! closed manifold, and the Neumann Laplacian of its tube in `(u, r)`
//! coordinates.

use super::grid::assemble_fv;
use super::{cluster, smallest_eigenvalues, BoundaryKind, DiscreteOperator, GridDomain, SpectrumResult, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::manifold::{metric_at, second_fundamental_at, shape_matrix, ChartedManifold};

/// Cells on the longest chart coordinate when no resolution is given.
pub const DEFAULT_CHART_CELLS: usize = 256;

/// Relative gap below which chart eigenvalues are clustered. Coarser than
/// the generic default: a latitude-longitude grid splits the sphere's
/// degree-one triplet at the 1e-4 level.
pub const CHART_CLUSTER_TOL: f64 = 1e-3;

/// Largest relative off-diagonal metric entry accepted as orthogonal.
const ORTHO_TOL: f64 = 1e-8;

/// Cell-centred grid over the chart domain, `cells` on the longest
/// coordinate and proportionally fewer on the others.
pub fn chart_grid<M: ChartedManifold + ?Sized>(manifold: &M, cells: usize) -> Result<GridDomain> {
    let dom = manifold.domain();
    let longest = dom.iter().map(|c| c.length()).fold(0.0, f64::max);
    let counts: Vec<usize> = dom
        .iter()
        .map(|c| ((cells as f64 * c.length() / longest).round() as usize).max(4))
        .collect();
    let lo: Vec<f64> = dom.iter().map(|c| c.lo).collect();
    let hi: Vec<f64> = dom.iter().map(|c| c.hi).collect();
    let periodic: Vec<bool> = dom.iter().map(|c| c.periodic).collect();
    Ok(GridDomain::new(&lo, &hi, &counts, BoundaryKind::Neumann)?.with_periodic(&periodic))
}

/// Rejects charts with a genuine boundary: every non-periodic coordinate
/// must end where the volume factor vanishes, as at the poles of a sphere.
fn ensure_closed<M: ChartedManifold + ?Sized>(manifold: &M, grid: &GridDomain) -> Result<()> {
    let dom = manifold.domain();
    let mid: Vec<f64> = dom.iter().map(|c| 0.5 * (c.lo + c.hi)).collect();
    let scale = metric_at(manifold, &mid)?.volume_factor();
    for (axis, c) in dom.iter().enumerate() {
        if c.periodic {
            continue;
        }
        for end in [c.lo, c.hi] {
            let mut u = mid.clone();
            u[axis] = end;
            if let Ok(m) = metric_at(manifold, &u) {
                if m.volume_factor() > 1e-6 * scale {
                    return Err(Error::Precondition(format!(
                        "`{}` has boundary at coordinate {axis} = {end}",
                        manifold.name()
                    )));
                }
            }
        }
    }
    // orthogonality over the cell centres
    for i in 0..grid.len() {
        let m = metric_at(manifold, &grid.centre(i))?;
        if m.off_diagonal() > ORTHO_TOL {
            return Err(Error::NonOrthogonalChart(m.off_diagonal()));
        }
    }
    Ok(())
}

/// `-(1/sqrt(det g)) d_i (sqrt(det g) g^{ii} d_i)` on a chart grid.
pub fn laplace_beltrami_operator<M: ChartedManifold + ?Sized>(manifold: &M, cells: usize) -> Result<(DiscreteOperator, GridDomain)> {
    let grid = chart_grid(manifold, cells)?;
    ensure_closed(manifold, &grid)?;
    let vol = |u: &[f64]| metric_at(manifold, u).map_or(f64::NAN, |m| m.volume_factor());
    let cond = |axis: usize, u: &[f64]| {
        metric_at(manifold, u).map_or(f64::NAN, |m| {
            let k = m.dim();
            m.volume_factor() * m.g_inv[axis * k + axis]
        })
    };
    let op = assemble_fv(&grid, &format!("laplace_beltrami:{}", manifold.name()), vol, cond)?;
    Ok((op, grid))
}

/// First eigenvalues of the Laplace–Beltrami operator of a closed manifold.
/// `cells` defaults to [`DEFAULT_CHART_CELLS`].
pub fn laplace_beltrami_gap<M: ChartedManifold + ?Sized>(manifold: &M, cells: Option<usize>) -> Result<SpectrumResult> {
    let (op, grid) = laplace_beltrami_operator(manifold, cells.unwrap_or(DEFAULT_CHART_CELLS))?;
    let m = (manifold.intrinsic_dim() + 3).min(op.len());
    let mut s = smallest_eigenvalues(&op, m, DEFAULT_TOL)?;
    s.h = Some(grid.max_spacing());
    s.multiplicities = cluster(&s.eigenvalues, CHART_CLUSTER_TOL);
    Ok(s)
}

/// Neumann Laplacian of the tube of half-width `radius` around a
/// hypersurface, in coordinates `(u, r)` with `y = M(u) + r N(u)`.
///
/// The pulled-back metric is `(I + r S)^T g (I + r S)` on the chart block
/// and 1 in `r`, with `S` the shape operator; the chart must keep it
/// diagonal. `normal_cells` cells span `[-radius, radius]`.
pub fn tube_coordinate_operator<M: ChartedManifold + ?Sized>(
    manifold: &M,
    radius: f64,
    cells: usize,
    normal_cells: usize,
) -> Result<(DiscreteOperator, GridDomain)> {
    let k = manifold.intrinsic_dim();
    if manifold.ambient_dim() != k + 1 {
        return Err(Error::InvalidArgument(format!(
            "tube coordinates need a hypersurface; `{}` has codimension {}",
            manifold.name(),
            manifold.ambient_dim() - k
        )));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("tube radius must be positive, got {radius}")));
    }
    let chart = chart_grid(manifold, cells)?;
    ensure_closed(manifold, &chart)?;
    let mut lo = chart.lo.clone();
    let mut hi = chart.hi.clone();
    let mut counts = chart.cells.clone();
    let mut periodic = chart.periodic.clone();
    lo.push(-radius);
    hi.push(radius);
    counts.push(normal_cells.max(2));
    periodic.push(false);
    let grid = GridDomain::new(&lo, &hi, &counts, BoundaryKind::Neumann)?.with_periodic(&periodic);

    // (volume factor, diagonal of the pulled-back metric) at (u, r)
    let geometry = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
        let (u, r) = x.split_at(k);
        let metric = metric_at(manifold, u)?;
        let sff = second_fundamental_at(manifold, u)?;
        let a = shape_matrix(&sff, r, k);
        let det_a = match k {
            1 => a[0],
            2 => a[0] * a[3] - a[1] * a[2],
            _ => return Err(Error::InvalidArgument("tube coordinates support k <= 2".into())),
        };
        if !(det_a > 0.0) {
            return Err(Error::ReachViolation {
                radius,
                reach: 1.0 / sff.sup_norm,
            });
        }
        // H = A^T g A
        let mut h = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                h[i * k + j] = (0..k)
                    .flat_map(|p| (0..k).map(move |q| (p, q)))
                    .map(|(p, q)| a[p * k + i] * metric.g[p * k + q] * a[q * k + j])
                    .sum();
            }
        }
        for i in 0..k {
            for j in 0..k {
                if i != j && h[i * k + j].abs() > ORTHO_TOL * (h[i * k + i] * h[j * k + j]).sqrt() {
                    return Err(Error::NonOrthogonalChart(h[i * k + j]));
                }
            }
        }
        Ok((metric.volume_factor() * det_a, (0..k).map(|i| h[i * k + i]).collect()))
    };
    // surface the first geometric failure before assembling
    for i in 0..grid.len() {
        geometry(&grid.centre(i))?;
    }
    let mass = |x: &[f64]| geometry(x).map_or(f64::NAN, |g| g.0);
    let cond = |axis: usize, x: &[f64]| {
        geometry(x).map_or(f64::NAN, |(vol, diag)| if axis < k { vol / diag[axis] } else { vol })
    };
    let op = assemble_fv(&grid, &format!("tube:{}:radius={radius}", manifold.name()), mass, cond)?;
    Ok((op, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::Manifold;

    #[test]
    fn circle_spectrum() {
        let s = laplace_beltrami_gap(&Manifold::circle(1.0), None).unwrap();
        assert!((s.lambda1() - 1.0).abs() < 1e-3);
        assert_eq!(s.multiplicities[1], 2);
        let s = laplace_beltrami_gap(&Manifold::circle(2.0), None).unwrap();
        assert!((s.lambda1() / 0.25 - 1.0).abs() < 1e-3);
    }

    #[test]
    fn segment_is_rejected() {
        assert!(matches!(
            laplace_beltrami_gap(&Manifold::segment(1.0), None),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn circle_tube_is_the_polar_annulus() {
        let (op, _) = tube_coordinate_operator(&Manifold::circle(1.0), 0.1, 128, 8).unwrap();
        assert!(op.symmetry_defect(4, 2) < 1e-10);
        assert!(op.zero_mode_residual() < 1e-10);
        assert!(tube_coordinate_operator(&Manifold::circle(1.0), 1.5, 64, 4).is_err());
    }
}
