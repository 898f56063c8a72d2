use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Regions of the ambient space on which constants are certified.
///
/// Complement-intersections are closed: points on the boundary of an
/// excluded part still belong to the region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionSpec {
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// Spherical shell `inner <= |x - center| <= outer`.
    Annulus {
        center: Vec<f64>,
        inner: f64,
        outer: f64,
    },
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    ComplementIntersection {
        base: Box<RegionSpec>,
        excluded: Vec<RegionSpec>,
    },
}

const BOUNDARY_SLACK: f64 = 1e-12;

impl RegionSpec {
    pub fn ball(center: &[f64], radius: f64) -> Self {
        RegionSpec::Ball {
            center: center.to_vec(),
            radius,
        }
    }

    pub fn annulus(center: &[f64], inner: f64, outer: f64) -> Self {
        RegionSpec::Annulus {
            center: center.to_vec(),
            inner,
            outer,
        }
    }

    pub fn boxed(lo: &[f64], hi: &[f64]) -> Self {
        RegionSpec::Box {
            lo: lo.to_vec(),
            hi: hi.to_vec(),
        }
    }

    pub fn without(self, excluded: Vec<RegionSpec>) -> Self {
        RegionSpec::ComplementIntersection {
            base: Box::new(self),
            excluded,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            RegionSpec::Ball { center, .. } | RegionSpec::Annulus { center, .. } => center.len(),
            RegionSpec::Box { lo, .. } => lo.len(),
            RegionSpec::ComplementIntersection { base, .. } => base.dim(),
        }
    }

    /// Checks the parameters describe a region of positive volume.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            RegionSpec::Ball { center, radius } => {
                if center.is_empty() || !(*radius > 0.0) {
                    return bad(format!("ball needs a positive radius, got {radius}"));
                }
            }
            RegionSpec::Annulus {
                center,
                inner,
                outer,
            } => {
                if center.is_empty() || !(*inner >= 0.0 && outer > inner) {
                    return bad(format!("annulus needs 0 <= inner < outer, got [{inner}, {outer}]"));
                }
            }
            RegionSpec::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(b > a)) {
                    return bad(format!("box needs lo < hi on every axis, got {lo:?} {hi:?}"));
                }
            }
            RegionSpec::ComplementIntersection { base, excluded } => {
                base.validate()?;
                for e in excluded {
                    e.validate()?;
                    if e.dim() != base.dim() {
                        return bad("excluded region has a different dimension".into());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            RegionSpec::Ball { center, radius } => dist(x, center) <= radius * (1.0 + BOUNDARY_SLACK),
            RegionSpec::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(x, center);
                r >= inner * (1.0 - BOUNDARY_SLACK) && r <= outer * (1.0 + BOUNDARY_SLACK)
            }
            RegionSpec::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v >= a - BOUNDARY_SLACK * a.abs().max(1.0) && *v <= b + BOUNDARY_SLACK * b.abs().max(1.0)),
            RegionSpec::ComplementIntersection { base, excluded } => {
                base.contains(x) && !excluded.iter().any(|e| e.interior_contains(x))
            }
        }
    }

    fn interior_contains(&self, x: &[f64]) -> bool {
        match self {
            RegionSpec::Ball { center, radius } => dist(x, center) < radius * (1.0 - BOUNDARY_SLACK),
            RegionSpec::Annulus {
                center,
                inner,
                outer,
            } => {
                let r = dist(x, center);
                r > inner * (1.0 + BOUNDARY_SLACK) && r < outer * (1.0 - BOUNDARY_SLACK)
            }
            RegionSpec::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (a, b))| *v > a + BOUNDARY_SLACK * a.abs().max(1.0) && *v < b - BOUNDARY_SLACK * b.abs().max(1.0)),
            RegionSpec::ComplementIntersection { base, excluded } => {
                base.interior_contains(x) && !excluded.iter().any(|e| e.contains(x))
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            RegionSpec::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
            RegionSpec::Annulus { center, outer, .. } => (
                center.iter().map(|c| c - outer).collect(),
                center.iter().map(|c| c + outer).collect(),
            ),
            RegionSpec::Box { lo, hi } => (lo.clone(), hi.clone()),
            RegionSpec::ComplementIntersection { base, .. } => base.bounding_box(),
        }
    }

    /// Points on the boundary of the region, `resolution` samples per unit
    /// of angle or edge subdivision.
    pub fn boundary_samples(&self, resolution: usize) -> Vec<Vec<f64>> {
        let resolution = resolution.max(4);
        match self {
            RegionSpec::Ball { center, radius } => sphere_points(center, *radius, resolution),
            RegionSpec::Annulus {
                center,
                inner,
                outer,
            } => {
                let mut pts = sphere_points(center, *outer, resolution);
                if *inner > 0.0 {
                    pts.extend(sphere_points(center, *inner, resolution));
                }
                pts
            }
            RegionSpec::Box { lo, hi } => box_faces(lo, hi, resolution),
            RegionSpec::ComplementIntersection { base, excluded } => {
                let mut pts: Vec<Vec<f64>> = base
                    .boundary_samples(resolution)
                    .into_iter()
                    .filter(|p| self.contains(p))
                    .collect();
                for e in excluded {
                    pts.extend(
                        e.boundary_samples(resolution)
                            .into_iter()
                            .filter(|p| self.contains(p)),
                    );
                }
                pts
            }
        }
    }

    /// Vertex-centred lattice over the bounding box restricted to the region.
    pub fn lattice(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let (lo, hi) = self.bounding_box();
        lattice_points(&lo, &hi, per_axis)
            .into_iter()
            .filter(|p| self.contains(p))
            .collect()
    }
}

/// How a region is probed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbePlan {
    /// Vertex-centred lattice with `per_axis` nodes per bounding-box axis,
    /// plus `4 * per_axis` boundary samples per unit sphere angle.
    Grid { per_axis: usize },
    /// Uniform samples in the bounding box (kept if inside), plus boundary
    /// samples at resolution `boundary`.
    Sample { count: usize, seed: u64, boundary: usize },
}

impl ProbePlan {
    pub fn grid(per_axis: usize) -> Self {
        ProbePlan::Grid { per_axis }
    }

    pub fn probes(&self, region: &RegionSpec) -> Result<Vec<Vec<f64>>> {
        region.validate()?;
        let mut pts = match *self {
            ProbePlan::Grid { per_axis } => {
                if per_axis < 2 {
                    return Err(Error::InvalidArgument("grid probes need per_axis >= 2".into()));
                }
                let mut p = region.lattice(per_axis);
                p.extend(region.boundary_samples(4 * per_axis));
                p
            }
            ProbePlan::Sample {
                count,
                seed,
                boundary,
            } => {
                use rand::{Rng, SeedableRng};
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                let (lo, hi) = region.bounding_box();
                let mut p: Vec<Vec<f64>> = (0..count)
                    .map(|_| lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..=*b)).collect())
                    .filter(|x: &Vec<f64>| region.contains(x))
                    .collect();
                p.extend(region.boundary_samples(boundary));
                p
            }
        };
        pts.retain(|p| p.iter().all(|v| v.is_finite()));
        if pts.is_empty() {
            return Err(Error::EmptyProbeSet(format!("{region:?}")));
        }
        Ok(pts)
    }
}

pub(crate) fn lattice_points(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let n = per_axis.max(2);
    let axes: Vec<Vec<f64>> = (0..d).map(|k| linspace(lo[k], hi[k], n)).collect();
    let total = n.pow(d as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; d];
            for k in (0..d).rev() {
                p[k] = axes[k][idx % n];
                idx /= n;
            }
            p
        })
        .collect()
}

/// `n` equally spaced points with exact endpoints and exact midpoint when
/// `n` is odd.
pub(crate) fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let t = i as f64 / m;
            if i == n - 1 {
                b
            } else {
                a * (1.0 - t) + b * t
            }
        })
        .collect()
}

fn sphere_points(center: &[f64], radius: f64, resolution: usize) -> Vec<Vec<f64>> {
    let d = center.len();
    let shift = |dir: &[f64]| -> Vec<f64> {
        center.iter().zip(dir).map(|(c, u)| c + radius * u).collect()
    };
    match d {
        1 => vec![shift(&[-1.0]), shift(&[1.0])],
        2 => {
            let n = resolution * 2;
            (0..n)
                .map(|i| {
                    let t = std::f64::consts::TAU * i as f64 / n as f64;
                    shift(&[t.cos(), t.sin()])
                })
                .collect()
        }
        3 => {
            let nt = resolution;
            let np = 2 * resolution;
            let mut pts = vec![shift(&[0.0, 0.0, 1.0]), shift(&[0.0, 0.0, -1.0])];
            for i in 1..nt {
                let th = std::f64::consts::PI * i as f64 / nt as f64;
                for j in 0..np {
                    let ph = std::f64::consts::TAU * j as f64 / np as f64;
                    pts.push(shift(&[th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()]));
                }
            }
            pts
        }
        _ => {
            // coordinate directions only; higher dimensions are out of scope
            let mut pts = Vec::new();
            for k in 0..d {
                for s in [-1.0, 1.0] {
                    let mut u = vec![0.0; d];
                    u[k] = s;
                    pts.push(shift(&u));
                }
            }
            pts
        }
    }
}

fn box_faces(lo: &[f64], hi: &[f64], resolution: usize) -> Vec<Vec<f64>> {
    let d = lo.len();
    let mut pts = Vec::new();
    for k in 0..d {
        for side in [lo[k], hi[k]] {
            let (mut flo, mut fhi) = (lo.to_vec(), hi.to_vec());
            flo[k] = side;
            fhi[k] = side;
            let face = if d == 1 {
                vec![flo.clone()]
            } else {
                lattice_points(&flo, &fhi, resolution)
            };
            pts.extend(face);
        }
    }
    pts
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn membership_and_validation() {
        let a = RegionSpec::annulus(&[0.0, 0.0], 0.5, 1.5);
        assert!(a.validate().is_ok());
        assert!(a.contains(&[1.0, 0.0]));
        assert!(a.contains(&[0.5, 0.0]));
        assert!(!a.contains(&[0.2, 0.0]));
        assert!(RegionSpec::annulus(&[0.0], 1.0, 1.0).validate().is_err());
        assert!(RegionSpec::ball(&[0.0], 0.0).validate().is_err());
        assert!(RegionSpec::boxed(&[0.0, 1.0], &[1.0, 1.0]).validate().is_err());
    }

    #[test]
    fn complement_keeps_excluded_boundary() {
        let r = RegionSpec::boxed(&[-3.0, -3.0], &[3.0, 3.0]).without(vec![
            RegionSpec::annulus(&[0.0, 0.0], 0.75, 1.25),
            RegionSpec::ball(&[0.0, 0.0], 0.25),
        ]);
        assert!(r.contains(&[0.25, 0.0]));
        assert!(r.contains(&[0.75, 0.0]));
        assert!(!r.contains(&[1.0, 0.0]));
        assert!(!r.contains(&[0.0, 0.1]));
        assert!(r.contains(&[2.0, 2.0]));
        for p in r.boundary_samples(16) {
            assert!(r.contains(&p));
        }
    }

    #[test]
    fn linspace_hits_the_midpoint() {
        let v = linspace(-2.0, 2.0, 401);
        assert_eq!(v[200], 0.0);
        assert_eq!(v[400], 2.0);
    }

    #[test]
    fn one_dimensional_annulus_is_two_intervals() {
        let a = RegionSpec::annulus(&[0.0], 0.5, 1.5);
        assert!(a.contains(&[-1.0]));
        assert!(a.contains(&[1.0]));
        assert!(!a.contains(&[0.0]));
        assert_eq!(a.boundary_samples(8).len(), 4);
    }
}
