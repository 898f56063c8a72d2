use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{distance_to_optimal_set, dot, norm, ProbePlan, RegionSpec, ScalarField};
use crate::error::{Error, Result};

/// Probes whose excess `V - min_region V` is at most this are skipped.
pub const EXCESS_FLOOR: f64 = 1e-12;

/// Certified local PL constant `nu` on a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PLCertificate {
    pub region: RegionSpec,
    /// Zero signals failure.
    pub nu_hat: f64,
    pub worst_point: Vec<f64>,
    pub sample_count: usize,
    pub region_min: f64,
    /// Set when descent from the best probe found a markedly lower minimum
    /// than any probe.
    pub low_confidence: bool,
}

impl PLCertificate {
    pub fn passed(&self) -> bool {
        self.nu_hat > 0.0 && !self.low_confidence
    }
}

/// Certified error-bound constant `nu_eb`: `|grad V| >= nu_eb dist(x, S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundCertificate {
    pub region: RegionSpec,
    pub nu_eb_hat: f64,
    pub worst_point: Vec<f64>,
    pub sample_count: usize,
}

/// Laplacian growth constant: `|Lap V(x)| <= C_g |x|^2` for `|x| >= R0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    pub r0: f64,
    pub c_g: f64,
    pub worst_point: Vec<f64>,
    /// Largest ratio on each probe shell, innermost first.
    pub shell_max: Vec<(f64, f64)>,
    pub sample_count: usize,
}

/// Flat JSON record shared by every certificate kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateRecord {
    pub potential: String,
    pub region: Option<RegionSpec>,
    pub constant_name: String,
    pub value: f64,
    pub worst_point: Vec<f64>,
    pub probes: usize,
}

impl PLCertificate {
    pub fn record(&self, potential: &str) -> CertificateRecord {
        CertificateRecord {
            potential: potential.into(),
            region: Some(self.region.clone()),
            constant_name: "nu".into(),
            value: self.nu_hat,
            worst_point: self.worst_point.clone(),
            probes: self.sample_count,
        }
    }
}

impl ErrorBoundCertificate {
    pub fn record(&self, potential: &str) -> CertificateRecord {
        CertificateRecord {
            potential: potential.into(),
            region: Some(self.region.clone()),
            constant_name: "nu_eb".into(),
            value: self.nu_eb_hat,
            worst_point: self.worst_point.clone(),
            probes: self.sample_count,
        }
    }
}

impl GrowthCertificate {
    pub fn record(&self, potential: &str) -> CertificateRecord {
        CertificateRecord {
            potential: potential.into(),
            region: None,
            constant_name: "C_g".into(),
            value: self.c_g,
            worst_point: self.worst_point.clone(),
            probes: self.sample_count,
        }
    }
}

/// `nu_hat = inf |grad V|^2 / (V - min_region V)` over the probes.
pub fn certify_pl(field: &dyn ScalarField, region: &RegionSpec, plan: &ProbePlan) -> Result<PLCertificate> {
    check_dim(field, region)?;
    let probes = plan.probes(region)?;
    let values: Vec<f64> = probes.par_iter().map(|x| field.value(x)).collect();
    let (best, probe_min) = argmin(&values);
    let refined = descend_within(field, region, &probes[best]);
    let region_min = probe_min.min(field.value(&refined));
    let spread = values.iter().cloned().fold(f64::MIN, f64::max) - region_min;
    let low_confidence = probe_min - region_min > 1e-3 * spread.max(f64::MIN_POSITIVE);

    let ratios: Vec<f64> = probes
        .par_iter()
        .zip(&values)
        .map(|(x, v)| {
            let excess = v - region_min;
            if excess <= EXCESS_FLOOR {
                f64::INFINITY
            } else {
                let g = field.gradient(x);
                dot(&g, &g) / excess
            }
        })
        .collect();
    let (worst, mut nu_hat) = argmin(&ratios);
    if !nu_hat.is_finite() {
        return Err(Error::EmptyProbeSet("every probe sits at the region minimum".into()));
    }
    if nu_hat < EXCESS_FLOOR {
        nu_hat = 0.0;
    }
    Ok(PLCertificate {
        region: region.clone(),
        nu_hat,
        worst_point: probes[worst].clone(),
        sample_count: probes.len(),
        region_min,
        low_confidence,
    })
}

/// `nu_eb_hat = inf |grad V| / dist(x, S)` over probes off `S`.
pub fn certify_error_bound(
    field: &dyn ScalarField,
    region: &RegionSpec,
    plan: &ProbePlan,
) -> Result<ErrorBoundCertificate> {
    check_dim(field, region)?;
    let probes = plan.probes(region)?;
    let ratios: Vec<f64> = probes
        .par_iter()
        .map(|x| {
            let d = distance_to_optimal_set(field, x);
            if d <= EXCESS_FLOOR {
                f64::INFINITY
            } else {
                norm(&field.gradient(x)) / d
            }
        })
        .collect();
    let (worst, nu) = argmin(&ratios);
    if !nu.is_finite() {
        return Err(Error::EmptyProbeSet("every probe lies on the optimal set".into()));
    }
    Ok(ErrorBoundCertificate {
        region: region.clone(),
        nu_eb_hat: nu,
        worst_point: probes[worst].clone(),
        sample_count: probes.len(),
    })
}

/// Number of geometric probe shells between `R0` and `32 R0`.
const GROWTH_SHELLS: usize = 16;

/// Smallest `C_g` with `|Lap V| <= C_g |x|^2` on spherical probe shells
/// `R0 <= |x| <= 32 R0`. A shell maximum that keeps climbing towards the
/// outer shells is reported as unbounded growth.
pub fn certify_growth(field: &dyn ScalarField, r0: f64, plan: &ProbePlan) -> Result<GrowthCertificate> {
    if !(r0 > 0.0) {
        return Err(Error::InvalidArgument(format!("R0 must be positive, got {r0}")));
    }
    let resolution = match *plan {
        ProbePlan::Grid { per_axis } => per_axis,
        ProbePlan::Sample { boundary, .. } => boundary,
    };
    let origin = vec![0.0; field.dim()];
    let mut shell_max = Vec::with_capacity(GROWTH_SHELLS);
    let mut worst = (f64::MIN, origin.clone());
    let mut count = 0;
    for j in 0..GROWTH_SHELLS {
        let r = r0 * 32f64.powf(j as f64 / (GROWTH_SHELLS - 1) as f64);
        let pts = RegionSpec::ball(&origin, r).boundary_samples(resolution);
        count += pts.len();
        let (idx, m) = pts
            .par_iter()
            .map(|x| field.laplacian(x).abs() / dot(x, x))
            .enumerate()
            .reduce(|| (0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
        if m > worst.0 {
            worst = (m, pts[idx].clone());
        }
        shell_max.push((r, m));
    }
    let tail: Vec<f64> = shell_max[GROWTH_SHELLS - 4..].iter().map(|s| s.1).collect();
    let head = shell_max[..GROWTH_SHELLS / 2]
        .iter()
        .map(|s| s.1)
        .fold(f64::MIN, f64::max);
    let climbing = tail.windows(2).all(|w| w[1] > w[0] * (1.0 + 1e-9));
    if climbing && tail[3] > 1.5 * head {
        return Err(Error::UnboundedGrowth {
            first: shell_max[0].1,
            last: tail[3],
        });
    }
    Ok(GrowthCertificate {
        r0,
        c_g: worst.0,
        worst_point: worst.1,
        shell_max,
        sample_count: count,
    })
}

fn check_dim(field: &dyn ScalarField, region: &RegionSpec) -> Result<()> {
    if field.dim() != region.dim() {
        return Err(Error::InvalidArgument(format!(
            "region of dimension {} for a field on R^{}",
            region.dim(),
            field.dim()
        )));
    }
    Ok(())
}

fn argmin(v: &[f64]) -> (usize, f64) {
    v.iter()
        .cloned()
        .enumerate()
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
}

/// Backtracking descent that refuses steps leaving the region.
fn descend_within(field: &dyn ScalarField, region: &RegionSpec, x0: &[f64]) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut v = field.value(&x);
    let mut step = 1e-2;
    for _ in 0..2000 {
        let g = field.gradient(&x);
        let gg = dot(&g, &g);
        if gg < 1e-30 {
            break;
        }
        let mut moved = false;
        while step > 1e-16 {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            if region.contains(&trial) {
                let vt = field.value(&trial);
                if vt <= v - 0.25 * step * gg {
                    x = trial;
                    v = vt;
                    step *= 1.5;
                    moved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    x
}
