use std::collections::VecDeque;

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::region::linspace;
use super::{distance_to_optimal_set, dot, norm, sub, ProbePlan, RegionSpec, ScalarField};
use crate::error::{Error, Result};

/// Gradient norm below which a refined point counts as stationary.
pub const STATIONARITY_TOL: f64 = 1e-8;

/// Relative size below which a Hessian eigenvalue counts as zero.
const EIGEN_TOL: f64 = 1e-6;

/// Vertex-centred lattice over the bounding box of a region.
///
/// The region also selects where `g0` is measured: a complement region
/// removes the excluded neighbourhoods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub region: RegionSpec,
    pub per_axis: usize,
}

impl LatticeSpec {
    pub fn new(region: RegionSpec, per_axis: usize) -> Self {
        Self { region, per_axis }
    }

    fn axes(&self) -> Result<Vec<Vec<f64>>> {
        self.region.validate()?;
        if self.per_axis < 3 {
            return Err(Error::InvalidArgument("lattice needs per_axis >= 3".into()));
        }
        let (lo, hi) = self.region.bounding_box();
        Ok(lo.iter().zip(&hi).map(|(a, b)| linspace(*a, *b, self.per_axis)).collect())
    }

    fn spacing(&self) -> f64 {
        let (lo, hi) = self.region.bounding_box();
        lo.iter()
            .zip(&hi)
            .map(|(a, b)| (b - a) / (self.per_axis - 1) as f64)
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Min,
    Max,
    Saddle,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub location: Vec<f64>,
    pub grad_norm: f64,
    pub kind: CriticalKind,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    /// Critical points off a positive-dimensional optimal set.
    pub points: Vec<CriticalPoint>,
    /// Refined points that landed on a positive-dimensional optimal set.
    pub optimal_set_hits: usize,
    /// Smallest gradient norm over the lattice and boundary probes of the
    /// region.
    pub g0: f64,
    pub g0_point: Vec<f64>,
}

impl CriticalPointReport {
    pub fn count(&self, kind: CriticalKind) -> usize {
        self.points.iter().filter(|p| p.kind == kind).count()
    }

    /// No saddles or degenerate points outside the optimal set.
    pub fn is_pl_compatible(&self) -> bool {
        self.count(CriticalKind::Saddle) == 0 && self.count(CriticalKind::Degenerate) == 0
    }
}

/// Smallest and largest Hessian eigenvalue at `x`.
pub fn hessian_extremes(field: &dyn ScalarField, x: &[f64]) -> (f64, f64) {
    let eig = hessian_eigenvalues(field, x);
    (eig[0], eig[eig.len() - 1])
}

pub(crate) fn hessian_eigenvalues(field: &dyn ScalarField, x: &[f64]) -> Vec<f64> {
    let d = field.dim();
    let h = field.hessian(x);
    let m = Mat::<f64>::from_fn(d, d, |i, j| 0.5 * (h[i * d + j] + h[j * d + i]));
    let mut eig = m
        .self_adjoint_eigenvalues(Side::Lower)
        .unwrap_or_else(|_| vec![f64::NAN; d]);
    eig.sort_by(f64::total_cmp);
    eig
}

/// Finds and classifies the stationary points of `field` on the lattice
/// bounding box, and measures `g0` on the region itself.
pub fn locate_critical_points(field: &dyn ScalarField, lattice: &LatticeSpec) -> Result<CriticalPointReport> {
    let axes = lattice.axes()?;
    if axes.len() != field.dim() {
        return Err(Error::InvalidArgument(format!(
            "lattice of dimension {} for a field on R^{}",
            axes.len(),
            field.dim()
        )));
    }
    let n = lattice.per_axis;
    let d = axes.len();
    let total = n.pow(d as u32);
    let point = |idx: usize| index_point(&axes, idx);
    let gnorm: Vec<f64> = (0..total).into_par_iter().map(|i| norm(&field.gradient(&point(i)))).collect();

    let candidates: Vec<usize> = (0..total)
        .into_par_iter()
        .filter(|&i| neighbours(i, n, d).all(|j| gnorm[i] <= gnorm[j]))
        .collect();

    let h = lattice.spacing();
    let (lo, hi) = lattice.region.bounding_box();
    let refined: Vec<Vec<f64>> = candidates
        .par_iter()
        .filter_map(|&i| refine(field, &point(i)))
        .filter(|x| x.iter().zip(lo.iter().zip(&hi)).all(|(v, (a, b))| *v >= a - h && *v <= b + h))
        .collect();

    let k = field.optimal_set_dim();
    let mut points: Vec<CriticalPoint> = Vec::new();
    let mut hits = 0;
    for x in refined {
        let on_s = on_optimal_set(field, &x);
        if on_s && k.is_some_and(|k| k >= 1) {
            hits += 1;
            continue;
        }
        if points.iter().any(|p| norm(&sub(&p.location, &x)) <= h) {
            continue;
        }
        let eig = hessian_eigenvalues(field, &x);
        let (lmin, lmax) = (eig[0], eig[eig.len() - 1]);
        let tol = EIGEN_TOL * lmin.abs().max(lmax.abs()).max(1.0);
        let kind = if eig.iter().any(|e| e.abs() < tol) {
            if on_s {
                CriticalKind::Min
            } else {
                CriticalKind::Degenerate
            }
        } else if lmin > 0.0 {
            CriticalKind::Min
        } else if lmax < 0.0 {
            CriticalKind::Max
        } else {
            CriticalKind::Saddle
        };
        points.push(CriticalPoint {
            grad_norm: norm(&field.gradient(&x)),
            location: x,
            kind,
            min_eigenvalue: lmin,
            max_eigenvalue: lmax,
        });
    }
    points.sort_by(|a, b| a.location.partial_cmp(&b.location).unwrap_or(std::cmp::Ordering::Equal));

    let probes = ProbePlan::grid(n).probes(&lattice.region)?;
    let (gi, g0) = probes
        .par_iter()
        .map(|x| norm(&field.gradient(x)))
        .enumerate()
        .reduce(|| (0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    Ok(CriticalPointReport {
        points,
        optimal_set_hits: hits,
        g0,
        g0_point: probes[gi].clone(),
    })
}

fn on_optimal_set(field: &dyn ScalarField, x: &[f64]) -> bool {
    match field.distance_to_optimal_set(x) {
        Some(dist) => dist <= 1e-6,
        None => field.value(x) - field.global_min() <= 1e-10 && distance_to_optimal_set(field, x) <= 1e-6,
    }
}

/// Levenberg–Marquardt on `|grad V|^2 / 2`; `None` if it stalls above the
/// stationarity tolerance.
fn refine(field: &dyn ScalarField, x0: &[f64]) -> Option<Vec<f64>> {
    let d = x0.len();
    let mut x = x0.to_vec();
    let mut g = field.gradient(&x);
    let mut phi = dot(&g, &g);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        if phi.sqrt() <= STATIONARITY_TOL * 1e-2 {
            break;
        }
        let hess = field.hessian(&x);
        let hm = Mat::<f64>::from_fn(d, d, |i, j| hess[i * d + j]);
        let jtj = hm.transpose() * &hm;
        let gv = Mat::<f64>::from_fn(d, 1, |i, _| g[i]);
        let rhs = hm.transpose() * &gv;
        let mut accepted = false;
        for _ in 0..40 {
            let scale = (0..d).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(1e-300);
            let sys = Mat::<f64>::from_fn(d, d, |i, j| jtj[(i, j)] + if i == j { lambda * scale } else { 0.0 });
            let step = sys.partial_piv_lu().solve(&rhs);
            let trial: Vec<f64> = (0..d).map(|i| x[i] - step[(i, 0)]).collect();
            if trial.iter().any(|v| !v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let gt = field.gradient(&trial);
            let pt = dot(&gt, &gt);
            if pt < phi {
                x = trial;
                g = gt;
                phi = pt;
                lambda = (lambda * 0.1).max(1e-15);
                accepted = true;
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            break;
        }
    }
    (phi.sqrt() <= STATIONARITY_TOL).then_some(x)
}

/// Number of face-connected components of the lattice nodes in the region
/// with `V <= level`.
pub fn connectivity_probe(field: &dyn ScalarField, level: f64, lattice: &LatticeSpec) -> Result<usize> {
    if !(level > field.global_min()) {
        return Err(Error::InvalidArgument(format!(
            "level {level} must exceed the minimum {}",
            field.global_min()
        )));
    }
    let axes = lattice.axes()?;
    let n = lattice.per_axis;
    let d = axes.len();
    let total = n.pow(d as u32);
    let inside: Vec<bool> = (0..total)
        .into_par_iter()
        .map(|i| {
            let x = index_point(&axes, i);
            lattice.region.contains(&x) && field.value(&x) <= level
        })
        .collect();
    let mut seen = vec![false; total];
    let mut components = 0;
    let mut queue = VecDeque::new();
    for start in 0..total {
        if !inside[start] || seen[start] {
            continue;
        }
        components += 1;
        seen[start] = true;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for j in neighbours(i, n, d) {
                if inside[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(components)
}

fn index_point(axes: &[Vec<f64>], mut idx: usize) -> Vec<f64> {
    let n = axes[0].len();
    let mut p = vec![0.0; axes.len()];
    for k in (0..axes.len()).rev() {
        p[k] = axes[k][idx % n];
        idx /= n;
    }
    p
}

/// Face neighbours of a flat lattice index, row-major with the last axis
/// fastest.
fn neighbours(i: usize, n: usize, d: usize) -> impl Iterator<Item = usize> {
    (0..d).flat_map(move |k| {
        let stride = n.pow((d - 1 - k) as u32);
        let c = (i / stride) % n;
        let down = (c > 0).then(|| i - stride);
        let up = (c + 1 < n).then(|| i + stride);
        down.into_iter().chain(up)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    fn circle_lattice() -> LatticeSpec {
        let region = RegionSpec::boxed(&[-3.0, -3.0], &[3.0, 3.0]).without(vec![
            RegionSpec::annulus(&[0.0, 0.0], 0.75, 1.25),
            RegionSpec::ball(&[0.0, 0.0], 0.25),
        ]);
        LatticeSpec::new(region, 121)
    }

    #[test]
    fn circle_has_one_maximum_and_g0() {
        let oracle = (0..=275_000)
            .map(|i| 0.25 + i as f64 * 1e-5)
            .filter(|r| *r <= 0.75 || *r >= 1.25)
            .map(|r| r * (r - 1.0).abs())
            .fold(f64::INFINITY, f64::min);
        assert!((oracle - 0.1875).abs() < 1e-12);

        let rep = locate_critical_points(&Potential::circle2d(), &circle_lattice()).unwrap();
        assert_eq!(rep.points.len(), 1, "{:?}", rep.points);
        let p = &rep.points[0];
        assert_eq!(p.kind, CriticalKind::Max);
        assert!(norm(&p.location) < 1e-8);
        assert!((p.min_eigenvalue + 1.0).abs() < 1e-6 && (p.max_eigenvalue + 1.0).abs() < 1e-6);
        assert!(rep.optimal_set_hits > 0);
        assert!((rep.g0 - oracle).abs() < 1e-9, "{}", rep.g0);
        assert!(rep.is_pl_compatible());
    }

    #[test]
    fn double_well_stationary_points() {
        let v = Potential::double_well();
        let rep = locate_critical_points(&v, &LatticeSpec::new(RegionSpec::boxed(&[-2.0], &[2.0]), 401)).unwrap();
        let kinds: Vec<_> = rep.points.iter().map(|p| (p.location[0], p.kind, p.min_eigenvalue)).collect();
        assert_eq!(kinds.len(), 3, "{kinds:?}");
        assert!((kinds[0].0 + 1.0).abs() < 1e-8 && kinds[0].1 == CriticalKind::Min);
        assert!((kinds[0].2 - 2.0).abs() < 1e-6);
        assert!(kinds[1].0.abs() < 1e-8 && kinds[1].1 == CriticalKind::Max);
        assert!((kinds[1].2 + 1.0).abs() < 1e-6);
        assert!((kinds[2].0 - 1.0).abs() < 1e-8 && kinds[2].1 == CriticalKind::Min);
    }

    #[test]
    fn quadratic_has_a_single_minimum() {
        let rep = locate_critical_points(
            &Potential::quadratic(2),
            &LatticeSpec::new(RegionSpec::boxed(&[-3.0, -3.0], &[3.0, 3.0]), 41),
        )
        .unwrap();
        assert_eq!(rep.points.len(), 1);
        assert_eq!(rep.points[0].kind, CriticalKind::Min);
        assert_eq!(rep.count(CriticalKind::Max), 0);
        for p in &rep.points {
            assert!(p.grad_norm <= STATIONARITY_TOL);
        }
    }

    #[test]
    fn torus_shows_a_degenerate_critical_circle() {
        let v = Potential::by_name("torus3d").unwrap();
        let b = 2.0 + 2.0 * 0.5;
        let rep = locate_critical_points(&v, &LatticeSpec::new(RegionSpec::boxed(&[-b; 3], &[b; 3]), 31)).unwrap();
        assert!(!rep.is_pl_compatible(), "{:?}", rep.points);
    }

    #[test]
    fn connectivity_examples() {
        let circle = Potential::circle2d();
        let box2 = LatticeSpec::new(RegionSpec::boxed(&[-3.0, -3.0], &[3.0, 3.0]), 201);
        assert_eq!(connectivity_probe(&circle, 0.01, &box2).unwrap(), 1);
        let dw = Potential::double_well();
        let line = LatticeSpec::new(RegionSpec::boxed(&[-2.0], &[2.0]), 401);
        assert_eq!(connectivity_probe(&dw, 0.1, &line).unwrap(), 2);
        assert_eq!(connectivity_probe(&dw, 0.2499, &line).unwrap(), 2);
        assert_eq!(connectivity_probe(&dw, 0.2501, &line).unwrap(), 1);
        let q = Potential::quadratic(2);
        assert_eq!(connectivity_probe(&q, 0.5, &box2).unwrap(), 1);
        assert!(connectivity_probe(&q, 0.0, &box2).is_err());
    }

    #[test]
    fn neighbour_indexing() {
        let n: Vec<usize> = neighbours(4, 3, 2).collect();
        assert_eq!(n, vec![1, 7, 3, 5]);
        let corner: Vec<usize> = neighbours(0, 3, 2).collect();
        assert_eq!(corner, vec![3, 1]);
    }
}
