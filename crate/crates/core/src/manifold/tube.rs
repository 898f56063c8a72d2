use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::quadrature::{gauss_legendre, rule};
use super::{dot, metric_at, second_fundamental_at, shape_matrix, weyl_from, ChartedManifold};
use crate::error::{Error, Result};

/// The tube `T(radius) = {M(u) + sum_l r_l N_l(u) : |r| <= radius}`.
#[derive(Debug, Clone)]
pub struct TubularNeighborhood<M> {
    base: M,
    radius: f64,
    reach: f64,
}

impl<M: ChartedManifold> TubularNeighborhood<M> {
    /// Builds the tube after estimating the reach; radii at or beyond the
    /// reach are rejected.
    pub fn new(base: M, radius: f64) -> Result<Self> {
        let reach = reach_estimate(&base, &ReachProbe::default())?;
        Self::with_reach(base, radius, reach)
    }

    /// Builds the tube against a known lower bound on the reach.
    pub fn with_reach(base: M, radius: f64, reach: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("tube radius must be positive, got {radius}")));
        }
        if radius >= reach {
            return Err(Error::ReachViolation { radius, reach });
        }
        Ok(Self { base, radius, reach })
    }

    pub fn base(&self) -> &M {
        &self.base
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn reach(&self) -> f64 {
        self.reach
    }

    pub fn codim(&self) -> usize {
        self.base.ambient_dim() - self.base.intrinsic_dim()
    }

    /// `y(u, r) = M(u) + sum_l r_l N_l(u)`.
    pub fn tube_point(&self, u: &[f64], r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.codim() {
            return Err(Error::InvalidArgument(format!(
                "normal offset has {} components, codimension is {}",
                r.len(),
                self.codim()
            )));
        }
        let rn = dot(r, r).sqrt();
        if rn > self.radius * (1.0 + 1e-12) {
            return Err(Error::OutsideTube { norm: rn, radius: self.radius });
        }
        Ok(offset(&self.base, u, r))
    }
}

fn offset<M: ChartedManifold + ?Sized>(m: &M, u: &[f64], r: &[f64]) -> Vec<f64> {
    let mut y = m.embed(u);
    for (n, rl) in m.normals(u).iter().zip(r) {
        y.iter_mut().zip(n).for_each(|(a, b)| *a += rl * b);
    }
    y
}

/// Tensor quadrature sizes: `tangential` nodes per chart coordinate and
/// `normal` Gauss–Legendre nodes across the tube. The integral is repeated
/// at double resolution and must agree to `rel_tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub tangential: usize,
    pub normal: usize,
    pub rel_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            tangential: 256,
            normal: 32,
            rel_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TubeIntegral {
    pub manifold: String,
    pub radius: f64,
    pub integrand: String,
    pub value: f64,
    pub refinement_delta: f64,
}

/// `int_S int_{|r| <= radius} phi(y(u, r)) |det(I + r G~)| dr dM`.
pub fn tube_integrate<M: ChartedManifold>(
    tube: &TubularNeighborhood<M>,
    phi: &(dyn Fn(&[f64]) -> f64 + Sync),
    label: &str,
    quad: &QuadratureSpec,
) -> Result<TubeIntegral> {
    if tube.codim() != 1 {
        return Err(Error::InvalidArgument(
            "tube quadrature supports hypersurfaces only".into(),
        ));
    }
    let coarse = integrate_once(tube, phi, quad.tangential, quad.normal)?;
    let fine = integrate_once(tube, phi, 2 * quad.tangential, 2 * quad.normal)?;
    let delta = (fine - coarse).abs();
    if delta > quad.rel_tol * fine.abs().max(1e-300) {
        return Err(Error::Quadrature { coarse, fine });
    }
    Ok(TubeIntegral {
        manifold: tube.base.name().to_string(),
        radius: tube.radius,
        integrand: label.to_string(),
        value: fine,
        refinement_delta: delta,
    })
}

fn integrate_once<M: ChartedManifold>(
    tube: &TubularNeighborhood<M>,
    phi: &(dyn Fn(&[f64]) -> f64 + Sync),
    n_t: usize,
    n_r: usize,
) -> Result<f64> {
    let m = &tube.base;
    let k = m.intrinsic_dim();
    let rules: Vec<(Vec<f64>, Vec<f64>)> = m.domain().iter().map(|c| rule(c, n_t)).collect();
    let (rn, rw) = gauss_legendre(n_r, -tube.radius, tube.radius);
    let total = n_t.pow(k as u32);
    (0..total)
        .into_par_iter()
        .map(|mut idx| -> Result<f64> {
            let mut u = vec![0.0; k];
            let mut w = 1.0;
            for c in (0..k).rev() {
                let i = idx % n_t;
                idx /= n_t;
                u[c] = rules[c].0[i];
                w *= rules[c].1[i];
            }
            let vol = metric_at(m, &u)?.volume_factor();
            let sff = second_fundamental_at(m, &u)?;
            let base = m.embed(&u);
            let n = &m.normals(&u)[0];
            let mut acc = 0.0;
            for (r, wr) in rn.iter().zip(&rw) {
                let y: Vec<f64> = base.iter().zip(n).map(|(a, b)| a + r * b).collect();
                acc += wr * weyl_from(&sff, &[*r], k)? * phi(&y);
            }
            Ok(w * vol * acc)
        })
        .try_reduce(|| 0.0, |a, b| Ok(a + b))
}

/// Gradient of `phi(y(u, r))` in tube coordinates from the ambient gradient:
/// `grad_y phi . [dM/du, N] . blockdiag(I + sum_l r_l G~(l), I)`.
pub fn pushforward_gradient<M: ChartedManifold>(
    tube: &TubularNeighborhood<M>,
    grad_phi: &dyn Fn(&[f64]) -> Vec<f64>,
    u: &[f64],
    r: &[f64],
) -> Result<Vec<f64>> {
    let y = tube.tube_point(u, r)?;
    let g = grad_phi(&y);
    crate::error::ensure_finite(&g, "ambient gradient")?;
    let m = &tube.base;
    let k = m.intrinsic_dim();
    let t = m.tangents(u);
    let a = shape_matrix(&second_fundamental_at(m, u)?, r, k);
    let along: Vec<f64> = t.iter().map(|ti| dot(&g, ti)).collect();
    let mut out: Vec<f64> = (0..k).map(|i| (0..k).map(|j| along[j] * a[j * k + i]).sum()).collect();
    out.extend(m.normals(u).iter().map(|n| dot(&g, n)));
    Ok(out)
}

/// Probe lattice for reach estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachProbe {
    /// Lattice nodes per chart coordinate.
    pub per_axis: usize,
    /// Candidate double-normal chords refined per estimate.
    pub refine: usize,
}

impl Default for ReachProbe {
    fn default() -> Self {
        Self { per_axis: 64, refine: 32 }
    }
}

/// Lower bound on the reach: the smaller of the focal distance
/// `1 / sup |kappa|` and half the shortest double-normal chord. Chart points
/// far apart in parameters that map to the same ambient point signal a
/// failed embedding.
pub fn reach_estimate<M: ChartedManifold + ?Sized>(m: &M, probe: &ReachProbe) -> Result<f64> {
    let dom = m.domain();
    let k = m.intrinsic_dim();
    let n = probe.per_axis.max(4);
    let axes: Vec<Vec<f64>> = dom
        .iter()
        .map(|c| {
            let h = c.length() / n as f64;
            let shift = if c.periodic { 0.0 } else { 0.5 };
            (0..n).map(|i| c.lo + (i as f64 + shift) * h).collect()
        })
        .collect();
    let total = n.pow(k as u32);
    let index = |mut idx: usize| -> Vec<usize> {
        let mut out = vec![0; k];
        for c in (0..k).rev() {
            out[c] = idx % n;
            idx /= n;
        }
        out
    };
    let params: Vec<Vec<f64>> = (0..total)
        .map(|i| index(i).iter().enumerate().map(|(c, j)| axes[c][*j]).collect())
        .collect();

    let curvature = params
        .par_iter()
        .map(|u| second_fundamental_at(m, u).map(|s| s.sup_norm))
        .try_reduce(|| 0.0, |a, b| Ok(a.max(b)))?;

    let points: Vec<Vec<f64>> = params.par_iter().map(|u| m.embed(u)).collect();
    let frames: Vec<Vec<Vec<f64>>> = params.par_iter().map(|u| unit_tangents(m, u)).collect();
    let diam = points
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |a, b| a.max(b.abs()))
        .max(1e-300);

    let separation = |i: usize, j: usize| -> usize {
        let (a, b) = (index(i), index(j));
        (0..k)
            .map(|c| {
                let d = a[c].abs_diff(b[c]);
                if dom[c].periodic {
                    d.min(n - d)
                } else {
                    d
                }
            })
            .max()
            .unwrap_or(0)
    };

    let tol = 4.0 / n as f64;
    let mut candidates: Vec<(f64, usize, usize)> = (0..total)
        .into_par_iter()
        .flat_map_iter(|i| {
            let points = &points;
            let frames = &frames;
            (i + 1..total).filter_map(move |j| {
                let c: Vec<f64> = points[j].iter().zip(&points[i]).map(|(a, b)| a - b).collect();
                let len = dot(&c, &c).sqrt();
                if len < 1e-9 * diam {
                    return Some((len, i, j));
                }
                let normal_at = |f: &Vec<Vec<f64>>| f.iter().all(|t| dot(t, &c).abs() <= tol * len);
                (normal_at(&frames[i]) && normal_at(&frames[j])).then_some((len, i, j))
            })
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));

    for &(len, i, j) in &candidates {
        if len >= 1e-9 * diam {
            break;
        }
        if separation(i, j) > 1 {
            return Err(Error::Embedding(format!(
                "chart points {:?} and {:?} share the image {:?}",
                params[i], params[j], points[i]
            )));
        }
    }

    let mut bottleneck = f64::INFINITY;
    for &(len, i, j) in candidates.iter().filter(|c| separation(c.1, c.2) > 1).take(probe.refine) {
        let refined = refine_chord(m, &params[i], &params[j]).unwrap_or(len);
        bottleneck = bottleneck.min(refined);
    }
    let focal = if curvature > 0.0 { 1.0 / curvature } else { f64::INFINITY };
    Ok(focal.min(0.5 * bottleneck))
}

fn unit_tangents<M: ChartedManifold + ?Sized>(m: &M, u: &[f64]) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for t in m.tangents(u) {
        let mut w = t.clone();
        for b in &basis {
            let c = dot(&w, b);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let nrm = dot(&w, &w).sqrt();
        if nrm > 0.0 {
            w.iter_mut().for_each(|x| *x /= nrm);
            basis.push(w);
        }
    }
    basis
}

/// Damped Newton on `(T(p) . c, T(q) . c) = 0` with `c = M(q) - M(p)`;
/// returns the converged chord length.
fn refine_chord<M: ChartedManifold + ?Sized>(m: &M, p0: &[f64], q0: &[f64]) -> Option<f64> {
    let k = p0.len();
    let dom = m.domain();
    let wrap = |z: &mut [f64]| {
        for (c, v) in dom.iter().zip(z.iter_mut()) {
            if c.periodic {
                *v = c.lo + (*v - c.lo).rem_euclid(c.length());
            } else {
                *v = v.clamp(c.lo, c.hi);
            }
        }
    };
    let residual = |p: &[f64], q: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let (mp, mq) = (m.embed(p), m.embed(q));
        let c: Vec<f64> = mq.iter().zip(&mp).map(|(a, b)| a - b).collect();
        let mut f: Vec<f64> = m.tangents(p).iter().map(|t| dot(t, &c)).collect();
        f.extend(m.tangents(q).iter().map(|t| dot(t, &c)));
        (f, c)
    };
    let (mut p, mut q) = (p0.to_vec(), q0.to_vec());
    let (mut f, mut c) = residual(&p, &q);
    let mut lambda = 1e-6;
    for _ in 0..100 {
        let fn2 = dot(&f, &f);
        if fn2.sqrt() <= 1e-13 * dot(&c, &c).max(1.0) {
            return Some(dot(&c, &c).sqrt());
        }
        let (tp, tq) = (m.tangents(&p), m.tangents(&q));
        let jac = Mat::<f64>::from_fn(2 * k, 2 * k, |r, s| {
            let (ri, si) = (r % k, s % k);
            match (r < k, s < k) {
                (true, true) => dot(&m.second_derivative(&p, ri, si), &c) - dot(&tp[ri], &tp[si]),
                (true, false) => dot(&tp[ri], &tq[si]),
                (false, true) => -dot(&tq[ri], &tp[si]),
                (false, false) => dot(&m.second_derivative(&q, ri, si), &c) + dot(&tq[ri], &tq[si]),
            }
        });
        let jtj = jac.transpose() * &jac;
        let fv = Mat::<f64>::from_fn(2 * k, 1, |i, _| f[i]);
        let rhs = jac.transpose() * &fv;
        let scale = (0..2 * k).map(|i| jtj[(i, i)]).fold(0.0, f64::max).max(1e-300);
        let mut moved = false;
        for _ in 0..30 {
            let sys = Mat::<f64>::from_fn(2 * k, 2 * k, |i, j| jtj[(i, j)] + if i == j { lambda * scale } else { 0.0 });
            let step = sys.partial_piv_lu().solve(&rhs);
            let mut pt: Vec<f64> = (0..k).map(|i| p[i] - step[(i, 0)]).collect();
            let mut qt: Vec<f64> = (0..k).map(|i| q[i] - step[(k + i, 0)]).collect();
            wrap(&mut pt);
            wrap(&mut qt);
            let (ft, ct) = residual(&pt, &qt);
            if dot(&ft, &ft) < fn2 {
                (p, q, f, c) = (pt, qt, ft, ct);
                lambda = (lambda * 0.1).max(1e-15);
                moved = true;
                break;
            }
            lambda *= 10.0;
        }
        if !moved {
            break;
        }
    }
    None
}
