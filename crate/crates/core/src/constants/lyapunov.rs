use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ledger::{ConstantsLedger, SigmaB};
use crate::error::{Error, Result};
use crate::potential::{distance_to_optimal_set, ScalarField};

/// Vertex lattice `h Z^d` restricted to `|x| <= radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovGrid {
    pub radius: f64,
    pub h: f64,
}

impl Default for LyapunovGrid {
    fn default() -> Self {
        Self { radius: 8.0, h: 0.01 }
    }
}

/// A lattice point where `LV/(2 eps) - |grad V|^2/(4 eps^2) <= -sigma + b 1_U`
/// fails by more than roundoff.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovViolation {
    pub x: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub in_tube: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCheckReport {
    pub potential: String,
    pub eps: f64,
    pub sigma: f64,
    pub b: f64,
    /// Radius `sqrt(C eps)` of the tube `U` around the optimal set.
    pub tube_radius: f64,
    pub grid: LyapunovGrid,
    pub points: usize,
    pub violations: Vec<LyapunovViolation>,
    /// Largest `lhs - rhs` over the lattice.
    pub max_excess: f64,
    pub worst_point: Vec<f64>,
}

impl LyapunovCheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violations_csv(&self) -> String {
        let mut out = String::from("x,lhs,rhs,in_tube\n");
        for v in &self.violations {
            let x: Vec<String> = v.x.iter().map(|c| format!("{c:.6}")).collect();
            out.push_str(&format!("\"{}\",{:.9e},{:.9e},{}\n", x.join(" "), v.lhs, v.rhs, v.in_tube));
        }
        out
    }
}

/// Relative slack for equality cases such as the local maximum itself.
const ROUNDOFF: f64 = 1e-9;

/// Checks the drift inequality with the ledger's `sigma`, `b` and tube `U`
/// on every lattice point.
pub fn verify_lyapunov(
    field: &dyn ScalarField,
    ledger: &ConstantsLedger,
    eps: f64,
    grid: LyapunovGrid,
) -> Result<LyapunovCheckReport> {
    if !(grid.h > 0.0 && grid.radius > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid lattice {grid:?}")));
    }
    if field.dim() != ledger.inputs.d {
        return Err(Error::InvalidArgument(format!(
            "field dimension {} does not match the ledger's {}",
            field.dim(),
            ledger.inputs.d
        )));
    }
    let SigmaB { sigma, b, .. } = super::sigma_b(ledger, eps)?;
    let tube_radius = (ledger.derived.c * eps).sqrt();
    let d = field.dim();
    let per_axis = (grid.radius / grid.h).floor() as i64;
    let side = (2 * per_axis + 1) as usize;
    let total = side.pow(d as u32);

    let point = |mut idx: usize| {
        let mut x = vec![0.0; d];
        for c in x.iter_mut() {
            *c = ((idx % side) as i64 - per_axis) as f64 * grid.h;
            idx /= side;
        }
        x
    };
    // (points, max excess, its index, violations)
    type Acc = (usize, f64, usize, Vec<LyapunovViolation>);
    let merge = |mut a: Acc, b: Acc| -> Acc {
        a.0 += b.0;
        if b.1 > a.1 {
            a.1 = b.1;
            a.2 = b.2;
        }
        a.3.extend(b.3);
        a
    };
    let empty = || (0, f64::NEG_INFINITY, 0, Vec::new());
    let (points, max_excess, worst, violations) = (0..total)
        .into_par_iter()
        .fold(empty, |mut acc: Acc, idx| {
            let x = point(idx);
            if x.iter().map(|c| c * c).sum::<f64>() > grid.radius * grid.radius {
                return acc;
            }
            let g2: f64 = field.gradient(&x).iter().map(|c| c * c).sum();
            let lhs = field.laplacian(&x) / (2.0 * eps) - g2 / (4.0 * eps * eps);
            let in_tube = distance_to_optimal_set(field, &x) <= tube_radius;
            let rhs = -sigma + if in_tube { b } else { 0.0 };
            let excess = lhs - rhs;
            acc.0 += 1;
            if excess > acc.1 {
                acc.1 = excess;
                acc.2 = idx;
            }
            if excess > ROUNDOFF * lhs.abs().max(rhs.abs()).max(1.0) {
                acc.3.push(LyapunovViolation { x, lhs, rhs, in_tube });
            }
            acc
        })
        .reduce(empty, merge);
    let worst_point = point(worst);
    Ok(LyapunovCheckReport {
        potential: field.name().to_owned(),
        eps,
        sigma,
        b,
        tube_radius,
        grid,
        points,
        violations,
        max_excess,
        worst_point,
    })
}
