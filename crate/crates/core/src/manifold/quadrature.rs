use std::f64::consts::FRAC_PI_2;

use faer::{Mat, Side};
use rayon::prelude::*;

use super::Manifold;
use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on `[a, b]` by the Golub–Welsch
/// eigenvalue method.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let jacobi = Mat::<f64>::from_fn(n, n, |i, j| {
        let k = i.max(j) as f64;
        if i.abs_diff(j) == 1 {
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let evd = jacobi.self_adjoint_eigen(Side::Lower).expect("Jacobi matrix eigendecomposition");
    let u = evd.U();
    let s = evd.S().column_vector();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (mid + half * s[i], 2.0 * half * u[(0, i)] * u[(0, i)]))
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    pairs.into_iter().unzip()
}

/// Nodes and weights of a tensor factor: trapezoid for periodic
/// coordinates, Gauss–Legendre otherwise.
pub(crate) fn rule(c: &super::Coordinate, n: usize) -> (Vec<f64>, Vec<f64>) {
    if c.periodic {
        let h = c.length() / n as f64;
        ((0..n).map(|i| c.lo + i as f64 * h).collect(), vec![h; n])
    } else {
        gauss_legendre(n, c.lo, c.hi)
    }
}

/// Gauss–Legendre over `[lo, hi]` after the substitution `x = c sin t`,
/// which removes square-root behaviour where `|x| = |c|`.
fn sine_rule(c: f64, t_lo: f64, t_hi: f64, nodes: &(Vec<f64>, Vec<f64>)) -> Vec<(f64, f64)> {
    nodes
        .0
        .iter()
        .zip(&nodes.1)
        .map(|(s, w)| {
            let t = t_lo + (t_hi - t_lo) * s;
            (c * t.sin(), w * c * t.cos() * (t_hi - t_lo))
        })
        .collect()
}

/// `int f` over the planar annulus `a <= |(x, y)| <= b` (a disk if `a = 0`).
fn annulus_integral(f: &dyn Fn(f64, f64) -> f64, a: f64, b: f64, unit: &(Vec<f64>, Vec<f64>)) -> f64 {
    let segment = |x: f64, lo: f64, hi: f64| -> f64 {
        unit.0.iter().zip(&unit.1).map(|(s, w)| w * (hi - lo) * f(x, lo + s * (hi - lo))).sum::<f64>()
    };
    let mut total = 0.0;
    if a > 0.0 {
        for (x, w) in sine_rule(a, -FRAC_PI_2, FRAC_PI_2, unit) {
            let lo = (a * a - x * x).max(0.0).sqrt();
            let hi = (b * b - x * x).max(0.0).sqrt();
            total += w * (segment(x, lo, hi) + segment(x, -hi, -lo));
        }
    }
    let t0 = (a / b).asin();
    for sign in [-1.0, 1.0] {
        for (x, w) in sine_rule(b, t0, FRAC_PI_2, unit) {
            let hi = (b * b - x * x).max(0.0).sqrt();
            total += w * segment(sign * x, -hi, hi);
        }
    }
    total
}

/// Cartesian quadrature of `phi` over `{y : | |y| - R | <= radius}` for a
/// catalog circle or sphere of radius `R`, independent of tube coordinates.
/// `nodes` Gauss points per one-dimensional piece.
pub fn shell_quadrature(manifold: &Manifold, radius: f64, phi: &(dyn Fn(&[f64]) -> f64 + Sync), nodes: usize) -> Result<f64> {
    let big = match *manifold {
        Manifold::Circle { radius } | Manifold::Sphere { radius } => radius,
        other => {
            return Err(Error::InvalidArgument(format!(
                "shell quadrature covers circles and spheres, not {other:?}"
            )))
        }
    };
    if !(radius > 0.0 && radius < big) {
        return Err(Error::ReachViolation { radius, reach: big });
    }
    let (a, b) = (big - radius, big + radius);
    let unit = gauss_legendre(nodes, 0.0, 1.0);
    Ok(match manifold {
        Manifold::Circle { .. } => annulus_integral(&|x, y| phi(&[x, y]), a, b, &unit),
        _ => {
            // slices x = const are planar annuli or disks
            let slice = |x: f64| {
                let inner = (a * a - x * x).max(0.0).sqrt();
                let outer = (b * b - x * x).max(0.0).sqrt();
                annulus_integral(&|y, z| phi(&[x, y, z]), inner, outer, &unit)
            };
            let mut pieces = sine_rule(a, -FRAC_PI_2, FRAC_PI_2, &unit);
            let t0 = (a / b).asin();
            for sign in [-1.0, 1.0] {
                pieces.extend(sine_rule(b, t0, FRAC_PI_2, &unit).into_iter().map(|(x, w)| (sign * x, w)));
            }
            pieces.par_iter().map(|&(x, w)| w * slice(x)).sum()
        }
    })
}
