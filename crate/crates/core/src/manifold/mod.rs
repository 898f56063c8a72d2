//! Charted embedded submanifolds and the geometry of their tubular
//! neighbourhoods: first and second fundamental forms, tube coordinates,
//! the Weyl volume factor, and the pushforward of gradients.
//!
//! Charts are single and may have periodic coordinates. Catalog manifolds
//! supply tangents, second derivatives and normals analytically; other
//! implementations fall back to central differences and a deterministic
//! Gram–Schmidt completion of the tangent space.

mod catalog;
mod quadrature;
mod small;
mod tube;

pub use catalog::Manifold;
pub use quadrature::{gauss_legendre, shell_quadrature};
pub use tube::{
    pushforward_gradient, reach_estimate, tube_integrate, QuadratureSpec, ReachProbe, TubeIntegral,
    TubularNeighborhood,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step for central differences of the embedding.
pub const FD_STEP: f64 = 1e-5;

/// One parameter coordinate of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub lo: f64,
    pub hi: f64,
    pub periodic: bool,
}

impl Coordinate {
    pub fn periodic(lo: f64, hi: f64) -> Self {
        Self { lo, hi, periodic: true }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        Self { lo, hi, periodic: false }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A `k`-dimensional submanifold of `R^d` covered by one chart `M(u)`.
pub trait ChartedManifold: Send + Sync {
    fn name(&self) -> &str;

    fn intrinsic_dim(&self) -> usize;

    fn ambient_dim(&self) -> usize;

    fn domain(&self) -> Vec<Coordinate>;

    fn embed(&self, u: &[f64]) -> Vec<f64>;

    /// `dM/du^i` for `i < k`.
    fn tangents(&self, u: &[f64]) -> Vec<Vec<f64>> {
        fd_tangents(self, u, FD_STEP)
    }

    /// `d^2 M / du^i du^j`.
    fn second_derivative(&self, u: &[f64], i: usize, j: usize) -> Vec<f64> {
        let mut up = u.to_vec();
        let mut dn = u.to_vec();
        up[j] += FD_STEP;
        dn[j] -= FD_STEP;
        let a = &self.tangents(&up)[i];
        let b = &self.tangents(&dn)[i];
        a.iter().zip(b).map(|(x, y)| (x - y) / (2.0 * FD_STEP)).collect()
    }

    /// Orthonormal frame of the normal space, `d - k` vectors.
    fn normals(&self, u: &[f64]) -> Vec<Vec<f64>> {
        complete_frame(&self.tangents(u), self.ambient_dim())
    }

    /// Euclidean distance from an ambient point to the manifold, when known
    /// in closed form.
    fn distance(&self, _y: &[f64]) -> Option<f64> {
        None
    }
}

/// Central-difference tangents, independent of any analytic override.
pub fn fd_tangents<M: ChartedManifold + ?Sized>(m: &M, u: &[f64], h: f64) -> Vec<Vec<f64>> {
    (0..m.intrinsic_dim())
        .map(|i| {
            let mut up = u.to_vec();
            let mut dn = u.to_vec();
            up[i] += h;
            dn[i] -= h;
            let a = m.embed(&up);
            let b = m.embed(&dn);
            a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()
        })
        .collect()
}

/// Gram–Schmidt of the tangents followed by the coordinate axes in order;
/// the axes that survive form the normal frame.
fn complete_frame(tangents: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut normals = Vec::new();
    let push = |v: &[f64], basis: &mut Vec<Vec<f64>>| -> Option<Vec<f64>> {
        let mut w = v.to_vec();
        for _ in 0..2 {
            for b in basis.iter() {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = dot(&w, &w).sqrt();
        if n < 1e-6 {
            return None;
        }
        w.iter_mut().for_each(|x| *x /= n);
        basis.push(w.clone());
        Some(w)
    };
    for t in tangents {
        push(t, &mut basis);
    }
    for axis in 0..d {
        if basis.len() == d {
            break;
        }
        let mut e = vec![0.0; d];
        e[axis] = 1.0;
        if let Some(n) = push(&e, &mut basis) {
            normals.push(n);
        }
    }
    normals
}

/// First fundamental form at a chart point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricData {
    /// Row-major `k x k`.
    pub g: Vec<f64>,
    pub det_g: f64,
    pub g_inv: Vec<f64>,
}

impl MetricData {
    pub fn from_tangents(t: &[Vec<f64>]) -> Result<Self> {
        let k = t.len();
        let g: Vec<f64> = (0..k * k).map(|ij| dot(&t[ij / k], &t[ij % k])).collect();
        let scale = (0..k).map(|i| g[i * k + i]).fold(0.0, f64::max);
        let det_g = small::det(&g, k);
        if !(det_g > 1e-12 * scale.powi(k as i32)) {
            return Err(Error::ChartDegenerate(g));
        }
        let g_inv = small::inverse(&g, k);
        Ok(Self { g, det_g, g_inv })
    }

    pub fn dim(&self) -> usize {
        (self.g.len() as f64).sqrt().round() as usize
    }

    pub fn volume_factor(&self) -> f64 {
        self.det_g.sqrt()
    }

    /// Largest off-diagonal entry relative to the diagonal.
    pub fn off_diagonal(&self) -> f64 {
        let k = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    let s = (self.g[i * k + i] * self.g[j * k + j]).sqrt();
                    worst = worst.max(self.g[i * k + j].abs() / s);
                }
            }
        }
        worst
    }
}

pub fn metric_at<M: ChartedManifold + ?Sized>(m: &M, u: &[f64]) -> Result<MetricData> {
    check_chart_point(m, u)?;
    MetricData::from_tangents(&m.tangents(u))
}

/// Metric from central differences of the embedding alone.
pub fn metric_fd<M: ChartedManifold + ?Sized>(m: &M, u: &[f64]) -> Result<MetricData> {
    check_chart_point(m, u)?;
    MetricData::from_tangents(&fd_tangents(m, u, FD_STEP))
}

/// Second fundamental form, one `k x k` block per normal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SecondFundamental {
    /// `G_ij(l) = -d^2M/du^i du^j . N_l`, row-major per `l`.
    pub forms: Vec<Vec<f64>>,
    /// Mixed form `g^{-1} G(l)`, row-major per `l`.
    pub mixed: Vec<Vec<f64>>,
    /// Principal curvatures per normal, ascending.
    pub principal: Vec<Vec<f64>>,
    /// `sqrt(sum_l max|kappa(l)|^2)`: the largest principal curvature for
    /// hypersurfaces, an upper bound on the norm of the second fundamental
    /// form otherwise.
    pub sup_norm: f64,
}

/// Relative asymmetry of `G(l)` tolerated from differenced second derivatives.
const SYMMETRY_TOL: f64 = 1e-6;

pub fn second_fundamental_at<M: ChartedManifold + ?Sized>(m: &M, u: &[f64]) -> Result<SecondFundamental> {
    let metric = metric_at(m, u)?;
    let k = m.intrinsic_dim();
    let normals = m.normals(u);
    let mut hess = vec![Vec::new(); k * k];
    for i in 0..k {
        for j in 0..k {
            hess[i * k + j] = m.second_derivative(u, i, j);
        }
    }
    let mut forms = Vec::with_capacity(normals.len());
    let mut mixed = Vec::with_capacity(normals.len());
    let mut principal = Vec::with_capacity(normals.len());
    let mut sup: f64 = 0.0;
    for n in &normals {
        let raw: Vec<f64> = hess.iter().map(|h| -dot(h, n)).collect();
        let scale = raw.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        for i in 0..k {
            for j in 0..i {
                let asym = (raw[i * k + j] - raw[j * k + i]).abs();
                if asym > SYMMETRY_TOL * scale {
                    return Err(Error::Asymmetric(asym));
                }
            }
        }
        let form: Vec<f64> = (0..k * k).map(|ij| 0.5 * (raw[ij] + raw[(ij % k) * k + ij / k])).collect();
        let mix = small::matmul(&metric.g_inv, &form, k);
        let eig = small::generalized_eigenvalues(&metric.g, &form, &mix, k);
        let top = eig.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        sup += top * top;
        forms.push(form);
        mixed.push(mix);
        principal.push(eig);
    }
    Ok(SecondFundamental {
        forms,
        mixed,
        principal,
        sup_norm: sup.sqrt(),
    })
}

/// `|det(I + sum_l r_l G~(l))|`, the Weyl volume factor of tube coordinates.
pub fn weyl_density<M: ChartedManifold + ?Sized>(m: &M, u: &[f64], r: &[f64]) -> Result<f64> {
    if r.iter().all(|x| *x == 0.0) {
        return Ok(1.0);
    }
    let sff = second_fundamental_at(m, u)?;
    weyl_from(&sff, r, m.intrinsic_dim())
}

/// `I + sum_l r_l G~(l)`, row-major.
pub(crate) fn shape_matrix(sff: &SecondFundamental, r: &[f64], k: usize) -> Vec<f64> {
    (0..k * k)
        .map(|ij| {
            let id = if ij / k == ij % k { 1.0 } else { 0.0 };
            id + sff.mixed.iter().zip(r).map(|(g, rl)| rl * g[ij]).sum::<f64>()
        })
        .collect()
}

pub(crate) fn weyl_from(sff: &SecondFundamental, r: &[f64], k: usize) -> Result<f64> {
    let det = small::det(&shape_matrix(sff, r, k), k);
    if !(det > 0.0) {
        let rn = dot(r, r).sqrt();
        return Err(Error::ReachViolation {
            radius: rn,
            reach: if sff.sup_norm > 0.0 { 1.0 / sff.sup_norm } else { f64::INFINITY },
        });
    }
    Ok(det)
}

fn check_chart_point<M: ChartedManifold + ?Sized>(m: &M, u: &[f64]) -> Result<()> {
    if u.len() != m.intrinsic_dim() {
        return Err(Error::InvalidArgument(format!(
            "chart point has {} coordinates, `{}` has {}",
            u.len(),
            m.name(),
            m.intrinsic_dim()
        )));
    }
    crate::error::ensure_finite(u, "u")
}

/// Orthogonality and orthonormality residuals of the frame at `u`:
/// `(max |dM/du^i . N_l| / |dM/du^i|, max |N_i . N_j - delta_ij|)`.
pub fn frame_residuals<M: ChartedManifold + ?Sized>(m: &M, u: &[f64]) -> (f64, f64) {
    let t = m.tangents(u);
    let n = m.normals(u);
    let mut tangential: f64 = 0.0;
    for ti in &t {
        let tn = dot(ti, ti).sqrt();
        for nl in &n {
            tangential = tangential.max(dot(ti, nl).abs() / tn);
        }
    }
    let mut ortho: f64 = 0.0;
    for (i, a) in n.iter().enumerate() {
        for (j, b) in n.iter().enumerate() {
            let target = if i == j { 1.0 } else { 0.0 };
            ortho = ortho.max((dot(a, b) - target).abs());
        }
    }
    (tangential, ortho)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn metric_examples() {
        let g = metric_at(&Manifold::circle(1.0), &[0.3]).unwrap();
        assert!((g.g[0] - 1.0).abs() < 1e-14);
        let g = metric_at(&Manifold::circle(2.0), &[1.1]).unwrap();
        assert!((g.g[0] - 4.0).abs() < 1e-14);
        let (theta, phi) = (0.7, 2.1);
        let g = metric_at(&Manifold::sphere(), &[theta, phi]).unwrap();
        let sin2 = theta.sin().powi(2);
        assert!((g.g[0] - 1.0).abs() < 1e-14 && (g.g[3] - sin2).abs() < 1e-14);
        assert!(g.g[1].abs() < 1e-14 && g.g[2].abs() < 1e-14);
        assert!((g.det_g - sin2).abs() < 1e-14);
    }

    #[test]
    fn analytic_and_difference_metrics_agree() {
        for m in Manifold::catalog() {
            let dom = m.domain();
            for s in [0.17, 0.43, 0.71] {
                let u: Vec<f64> = dom.iter().map(|c| c.lo + s * c.length()).collect();
                let a = metric_at(&m, &u).unwrap();
                let b = metric_fd(&m, &u).unwrap();
                for (x, y) in a.g.iter().zip(&b.g) {
                    assert!((x - y).abs() <= 1e-6 * x.abs().max(1.0), "{}: {x} vs {y}", m.name());
                }
            }
        }
    }

    #[test]
    fn inverse_is_an_inverse() {
        let g = metric_at(&Manifold::torus(2.0, 0.5), &[0.4, 1.3]).unwrap();
        let k = 2;
        for i in 0..k {
            for j in 0..k {
                let s: f64 = (0..k).map(|l| g.g[i * k + l] * g.g_inv[l * k + j]).sum();
                let id = if i == j { 1.0 } else { 0.0 };
                assert!((s - id).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pole_is_degenerate() {
        assert!(matches!(metric_at(&Manifold::sphere(), &[0.0, 1.0]), Err(Error::ChartDegenerate(_))));
    }

    #[test]
    fn second_fundamental_examples() {
        let s = second_fundamental_at(&Manifold::circle(2.0), &[0.9]).unwrap();
        assert!((s.mixed[0][0] - 0.5).abs() < 1e-14);
        let s = second_fundamental_at(&Manifold::sphere(), &[1.0, 0.2]).unwrap();
        let m = &s.mixed[0];
        assert!((m[0] - 1.0).abs() < 1e-12 && (m[3] - 1.0).abs() < 1e-12);
        assert!(m[1].abs() < 1e-12 && m[2].abs() < 1e-12);
        let s = second_fundamental_at(&Manifold::segment(1.0), &[0.5]).unwrap();
        assert_eq!(s.mixed[0][0], 0.0);
        assert_eq!(s.sup_norm, 0.0);
    }

    #[test]
    fn torus_principal_curvatures() {
        let (big, small) = (2.0, 0.5);
        let v = 2.3;
        let s = second_fundamental_at(&Manifold::torus(big, small), &[0.1, v]).unwrap();
        let mut expect = [v.cos() / (big + small * v.cos()), 1.0 / small];
        expect.sort_by(f64::total_cmp);
        for (a, b) in s.principal[0].iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn weyl_examples() {
        assert_eq!(weyl_density(&Manifold::circle(1.0), &[1.0], &[0.0]).unwrap(), 1.0);
        let w = weyl_density(&Manifold::circle(1.0), &[1.0], &[0.3]).unwrap();
        assert!((w - 1.3).abs() < 1e-14);
        let w = weyl_density(&Manifold::sphere(), &[1.0, 0.5], &[-0.2]).unwrap();
        assert!((w - 0.64).abs() < 1e-12);
        let w = weyl_density(&Manifold::segment(1.0), &[0.2], &[0.4]).unwrap();
        assert_eq!(w, 1.0);
        assert!(matches!(
            weyl_density(&Manifold::circle(1.0), &[0.0], &[-1.5]),
            Err(Error::ReachViolation { .. })
        ));
    }

    #[test]
    fn generic_frame_completion_is_orthonormal() {
        struct Helix;
        impl ChartedManifold for Helix {
            fn name(&self) -> &str {
                "helix"
            }
            fn intrinsic_dim(&self) -> usize {
                1
            }
            fn ambient_dim(&self) -> usize {
                3
            }
            fn domain(&self) -> Vec<Coordinate> {
                vec![Coordinate::interval(0.0, 4.0 * PI)]
            }
            fn embed(&self, u: &[f64]) -> Vec<f64> {
                vec![u[0].cos(), u[0].sin(), 0.3 * u[0]]
            }
        }
        for i in 0..50 {
            let u = [0.25 * i as f64];
            let (t, o) = frame_residuals(&Helix, &u);
            assert!(t < 1e-9 && o < 1e-12, "{t} {o}");
            assert_eq!(Helix.normals(&u).len(), 2);
        }
        let s = second_fundamental_at(&Helix, &[1.0]).unwrap();
        // curvature of a helix with radius 1 and pitch 0.3
        let kappa = 1.0 / (1.0 + 0.09);
        assert!((s.sup_norm - kappa).abs() < 1e-5, "{}", s.sup_norm);
    }
}
