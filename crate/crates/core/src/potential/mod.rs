//! Potentials `V`, their catalog, and probe-based certificates of the
//! structural conditions (local PL, error bound, Laplacian growth, no saddles).

pub mod catalog;
mod certify;
mod critical;
mod region;

pub use catalog::{Declared, Potential, RadialProfile};
pub use certify::{
    certify_error_bound, certify_growth, certify_pl, CertificateRecord, ErrorBoundCertificate,
    GrowthCertificate, PLCertificate,
};
pub use critical::{
    connectivity_probe, hessian_extremes, locate_critical_points, CriticalKind, CriticalPoint,
    CriticalPointReport, LatticeSpec, STATIONARITY_TOL,
};
pub use region::{ProbePlan, RegionSpec};
pub(crate) use critical::hessian_eigenvalues;
pub(crate) use region::lattice_points;

use crate::error::{ensure_finite, Result};

/// A twice differentiable potential on `R^d`.
///
/// Implementations are pure: every evaluator may be called concurrently.
pub trait ScalarField: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient_into(&self, x: &[f64], out: &mut [f64]);

    fn hessian_apply(&self, x: &[f64], v: &[f64]) -> Vec<f64>;

    fn laplacian(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut e = vec![0.0; d];
        let mut tr = 0.0;
        for i in 0..d {
            e[i] = 1.0;
            tr += self.hessian_apply(x, &e)[i];
            e[i] = 0.0;
        }
        tr
    }

    /// `V* = min V`. Catalog entries are shifted so that this is zero.
    fn global_min(&self) -> f64;

    /// Analytic `dist(x, S)` where `S = argmin V`, if known.
    fn distance_to_optimal_set(&self, _x: &[f64]) -> Option<f64> {
        None
    }

    /// Dimension `k` of the optimal set, if known (0 for isolated minima).
    fn optimal_set_dim(&self) -> Option<usize> {
        None
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    /// Dense Hessian, row-major `d x d`.
    fn hessian(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim();
        let mut h = vec![0.0; d * d];
        let mut e = vec![0.0; d];
        for j in 0..d {
            e[j] = 1.0;
            let col = self.hessian_apply(x, &e);
            for i in 0..d {
                h[i * d + j] = col[i];
            }
            e[j] = 0.0;
        }
        h
    }
}

/// Value, gradient and Laplacian at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalBundle {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub laplacian: f64,
}

pub fn eval_bundle(field: &dyn ScalarField, x: &[f64]) -> Result<EvalBundle> {
    if x.len() != field.dim() {
        return Err(crate::Error::InvalidArgument(format!(
            "point has dimension {} but `{}` lives in R^{}",
            x.len(),
            field.name(),
            field.dim()
        )));
    }
    ensure_finite(x, "x")?;
    Ok(EvalBundle {
        value: field.value(x),
        gradient: field.gradient(x),
        laplacian: field.laplacian(x),
    })
}

/// Tolerance on `V - V*` at which numeric projection onto `S` stops.
pub const PROJECTION_TOL: f64 = 1e-14;

/// `dist(x, S)`: the analytic oracle when the field has one, otherwise the
/// displacement of a backtracking gradient descent run until
/// `V - V* <= PROJECTION_TOL`. The descent endpoint lies on `S`, so the
/// numeric value is an upper bound on the true distance.
pub fn distance_to_optimal_set(field: &dyn ScalarField, x: &[f64]) -> f64 {
    if let Some(d) = field.distance_to_optimal_set(x) {
        return d;
    }
    let end = descend(field, x, PROJECTION_TOL, 20_000);
    norm(&sub(&end, x))
}

/// Backtracking gradient descent towards a minimizer.
pub(crate) fn descend(field: &dyn ScalarField, x0: &[f64], tol: f64, max_iter: usize) -> Vec<f64> {
    let vstar = field.global_min();
    let mut x = x0.to_vec();
    let mut v = field.value(&x);
    let mut step = 1.0;
    let mut g = vec![0.0; x.len()];
    for _ in 0..max_iter {
        if v - vstar <= tol {
            break;
        }
        field.gradient_into(&x, &mut g);
        let gg = dot(&g, &g);
        if gg == 0.0 {
            break;
        }
        loop {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let vt = field.value(&trial);
            if vt <= v - 0.5 * step * gg {
                x = trial;
                v = vt;
                step *= 2.0;
                break;
            }
            step *= 0.5;
            if step < 1e-300 {
                return x;
            }
        }
    }
    x
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
