use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sim::{simulate_ensemble, step_bound, InitialState, SimConfig, TrajectoryEnsemble};
use crate::error::{Error, Result};
use crate::potential::ScalarField;
use crate::spectral::{generator_spectrum, linear_fit};

/// Lags over which `ln C(t)` is fitted by a line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FitWindow {
    /// From the first lag with `C(t)/C(0) <= upper` to the first with
    /// `C(t)/C(0) <= lower`.
    Relative { upper: f64, lower: f64 },
    /// Explicit lag times.
    Lags { from: f64, to: f64 },
}

impl Default for FitWindow {
    fn default() -> Self {
        FitWindow::Relative { upper: 0.9, lower: 0.3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    /// Decay rate of the autocovariance, per unit time.
    pub rate: f64,
    /// Bootstrap 95% interval over trajectories.
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub r2: f64,
    /// Lag times of the fit.
    pub window: (f64, f64),
    pub lags: usize,
    pub variance: f64,
    pub low_confidence: bool,
}

/// Smallest ensemble for a rate estimate.
pub const MIN_ENSEMBLE: usize = 100;
const BOOTSTRAP: usize = 400;
const MIN_R2: f64 = 0.9;

/// Rate of exponential decay of the stationary autocovariance of
/// `observable`, averaged over time origins and trajectories.
pub fn estimate_gap_autocorr(
    ensemble: &TrajectoryEnsemble,
    observable: &(dyn Fn(&[f64]) -> f64 + Sync),
    window: FitWindow,
) -> Result<GapEstimate> {
    if ensemble.config.initial != InitialState::Stationary {
        return Err(Error::Precondition("rate estimates need a stationary warm start".into()));
    }
    if ensemble.len() < MIN_ENSEMBLE {
        return Err(Error::Precondition(format!(
            "rate estimates need at least {MIN_ENSEMBLE} trajectories, got {}",
            ensemble.len()
        )));
    }
    let n = ensemble.observations();
    let dt = ensemble.times.get(1).copied().unwrap_or(0.0);
    if n < 8 {
        return Err(Error::Precondition("too few observations per trajectory".into()));
    }
    let live: Vec<usize> = (0..ensemble.len()).filter(|&i| !ensemble.diverged[i]).collect();
    let series: Vec<Vec<f64>> = live.par_iter().map(|&i| ensemble.series(i, observable)).collect();
    let mean = series.iter().flatten().sum::<f64>() / (series.len() * n) as f64;
    let max_lag = match window {
        FitWindow::Lags { to, .. } => ((to / dt).ceil() as usize).min(n - 1),
        FitWindow::Relative { .. } => n / 2,
    };
    // per-trajectory lag sums of centred products
    let sums: Vec<Vec<f64>> = series
        .par_iter()
        .map(|f| {
            let c: Vec<f64> = f.iter().map(|v| v - mean).collect();
            (0..=max_lag)
                .map(|k| c[..n - k].iter().zip(&c[k..]).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect();
    let covariance = |pick: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
        let mut acc = vec![0.0; max_lag + 1];
        let mut count = 0usize;
        for i in pick {
            count += 1;
            for (a, s) in acc.iter_mut().zip(&sums[i]) {
                *a += s;
            }
        }
        acc.iter()
            .enumerate()
            .map(|(k, a)| a / (count * (n - k)) as f64)
            .collect()
    };
    let cov = covariance(&mut (0..sums.len()));
    let variance = cov[0];
    if !(variance > 0.0) {
        return Err(Error::Precondition("observable has zero variance".into()));
    }
    let (k_lo, k_hi, truncated) = match window {
        FitWindow::Lags { from, to } => (((from / dt).round() as usize).max(1), ((to / dt).round() as usize).min(max_lag), false),
        FitWindow::Relative { upper, lower } => {
            let first = |level: f64| cov.iter().position(|c| *c <= level * variance);
            let lo = first(upper).unwrap_or(max_lag).max(1);
            match first(lower) {
                Some(hi) => (lo, hi, false),
                None => (lo, max_lag, true),
            }
        }
    };
    let fit = |c: &[f64]| -> Option<(f64, f64)> {
        let pts: Vec<(f64, f64)> = (k_lo..=k_hi).filter(|&k| c[k] > 0.0).map(|k| (k as f64 * dt, c[k].ln())).collect();
        if pts.len() < 3 {
            return None;
        }
        let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        let (slope, _, r2) = linear_fit(&x, &y);
        Some((-slope, r2))
    };
    let (rate, r2) = fit(&cov).ok_or_else(|| Error::Precondition(format!("fit window [{k_lo}, {k_hi}] holds fewer than 3 positive lags")))?;

    let mut rng = ChaCha8Rng::seed_from_u64(ensemble.config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let m = sums.len();
    let mut boot: Vec<f64> = (0..BOOTSTRAP)
        .filter_map(|_| {
            let idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..m)).collect();
            fit(&covariance(&mut idx.into_iter())).map(|f| f.0)
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let q = |p: f64| boot[((p * (boot.len() - 1) as f64).round() as usize).min(boot.len() - 1)];
    let (ci_lo, ci_hi) = if boot.is_empty() { (rate, rate) } else { (q(0.025).min(rate), q(0.975).max(rate)) };
    Ok(GapEstimate {
        rate,
        ci_lo,
        ci_hi,
        r2,
        window: (k_lo as f64 * dt, k_hi as f64 * dt),
        lags: k_hi + 1 - k_lo,
        variance,
        low_confidence: r2 < MIN_R2 || truncated || boot.len() < BOOTSTRAP / 2,
    })
}

/// Coarse generator gap used to scale simulation horizons.
pub fn pilot_gap(field: &dyn ScalarField, eps: f64) -> Result<f64> {
    let h = match field.dim() {
        1 => eps.sqrt() / 16.0,
        2 => eps.sqrt() / 6.0,
        d => {
            return Err(Error::InvalidArgument(format!(
                "pilot gaps are computed on grids in one or two dimensions, not {d}"
            )))
        }
    };
    Ok(generator_spectrum(field, eps, h, 2)?.gap)
}

/// Per-temperature simulation settings, in units of the pilot relaxation
/// time `1 / gap`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepTemplate {
    pub relaxation_times: f64,
    pub burn_in_times: f64,
    pub observations_per_relaxation: usize,
    pub ensemble: usize,
    pub seed: u64,
    /// Step as a fraction of the admissible maximum.
    pub step_fraction: f64,
    pub reflect_radius: f64,
    pub window: FitWindow,
}

impl Default for SweepTemplate {
    fn default() -> Self {
        Self {
            relaxation_times: 20.0,
            burn_in_times: 0.5,
            observations_per_relaxation: 100,
            ensemble: 100,
            seed: 0,
            step_fraction: 1.0,
            reflect_radius: 8.0,
            window: FitWindow::default(),
        }
    }
}

impl SweepTemplate {
    /// Simulation config at `eps` for a pilot gap.
    pub fn config(&self, field: &dyn ScalarField, eps: f64, pilot: f64) -> Result<SimConfig> {
        let bound = step_bound(field, eps, self.reflect_radius)?;
        let step = bound.max_step * self.step_fraction.clamp(f64::MIN_POSITIVE, 1.0);
        let tau = 1.0 / pilot;
        let observe_every = ((tau / self.observations_per_relaxation as f64 / step).floor() as usize).max(1);
        Ok(SimConfig {
            potential: field.name().to_owned(),
            eps,
            step,
            horizon: self.relaxation_times * tau,
            burn_in: self.burn_in_times * tau,
            ensemble: self.ensemble,
            seed: self.seed,
            initial: InitialState::Stationary,
            observe_every,
            reflect_radius: self.reflect_radius,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub gap_hat: f64,
    pub gap_over_eps: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub r2: f64,
    pub pilot_gap: f64,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingSweep {
    pub potential: String,
    pub rows: Vec<SweepRow>,
}

impl MixingSweep {
    pub const CSV_HEADER: &'static str = "epsilon,gap_hat,gap_over_eps,ci_lo,ci_hi,r2,pilot_gap,low_confidence";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.9e},{:.9e},{:.9e},{:.9e},{:.6},{:.9e},{}\n",
                r.epsilon, r.gap_hat, r.gap_over_eps, r.ci_lo, r.ci_hi, r.r2, r.pilot_gap, r.low_confidence
            ));
        }
        out
    }

    /// Largest over smallest `gap_hat / eps`.
    pub fn flatness(&self) -> f64 {
        let v = self.rows.iter().map(|r| r.gap_over_eps);
        v.clone().fold(f64::NEG_INFINITY, f64::max) / v.fold(f64::INFINITY, f64::min)
    }

    /// Slope of `ln gap_hat` against `1 / eps`.
    pub fn arrhenius_slope(&self) -> f64 {
        let x: Vec<f64> = self.rows.iter().map(|r| 1.0 / r.epsilon).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.gap_hat.ln()).collect();
        linear_fit(&x, &y).0
    }

    pub fn any_low_confidence(&self) -> bool {
        self.rows.iter().any(|r| r.low_confidence)
    }
}

/// Simulated gap at each temperature, horizons scaled by a grid pilot.
pub fn mixing_sweep(
    field: &dyn ScalarField,
    eps_list: &[f64],
    template: &SweepTemplate,
    observable: &(dyn Fn(&[f64]) -> f64 + Sync),
) -> Result<MixingSweep> {
    let mut rows = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let pilot = pilot_gap(field, eps)?;
        let config = template.config(field, eps, pilot)?;
        let ens = simulate_ensemble(&config, field)?;
        let est = estimate_gap_autocorr(&ens, observable, template.window)?;
        rows.push(SweepRow {
            epsilon: eps,
            gap_hat: est.rate,
            gap_over_eps: est.rate / eps,
            ci_lo: est.ci_lo,
            ci_hi: est.ci_hi,
            r2: est.r2,
            pilot_gap: pilot,
            low_confidence: est.low_confidence,
        });
    }
    Ok(MixingSweep {
        potential: field.name().to_owned(),
        rows,
    })
}
