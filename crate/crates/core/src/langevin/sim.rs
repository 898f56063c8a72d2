use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{hessian_extremes, lattice_points, ScalarField};
use crate::spectral::{config_hash, covering_box, covering_grid};

/// One Euler–Maruyama step `x - h grad V(x) + sqrt(2 eps h) xi`.
pub fn em_step(field: &dyn ScalarField, x: &[f64], step: f64, eps: f64, xi: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    field.gradient_into(x, &mut g);
    let s = (2.0 * eps * step).sqrt();
    x.iter().zip(&g).zip(xi).map(|((x, g), n)| x - step * g + s * n).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    Point { x: Vec<f64> },
    UniformBox { lo: Vec<f64>, hi: Vec<f64> },
    /// Exact draw from the grid quadrature of the Gibbs measure.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub potential: String,
    pub eps: f64,
    pub step: f64,
    /// Observed time span after the burn-in.
    pub horizon: f64,
    pub burn_in: f64,
    pub ensemble: usize,
    pub seed: u64,
    pub initial: InitialState,
    /// Steps between stored observations.
    pub observe_every: usize,
    /// Trajectories leaving this ball are reflected back and counted.
    pub reflect_radius: f64,
}

impl SimConfig {
    /// Config at the largest admissible step with the reflection radius at
    /// four times `r0`.
    pub fn new(field: &dyn ScalarField, eps: f64, r0: f64) -> Result<Self> {
        let reflect_radius = 4.0 * r0;
        let bound = step_bound(field, eps, reflect_radius)?;
        Ok(Self {
            potential: field.name().to_owned(),
            eps,
            step: bound.max_step,
            horizon: 1.0,
            burn_in: 0.0,
            ensemble: 100,
            seed: 0,
            initial: InitialState::Stationary,
            observe_every: 1,
            reflect_radius,
        })
    }

    pub fn validate(&self, field: &dyn ScalarField) -> Result<StepBound> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return bad(format!("eps must be nonnegative, got {}", self.eps));
        }
        if !(self.step > 0.0 && self.horizon >= self.step && self.burn_in >= 0.0) {
            return bad(format!(
                "need step > 0, horizon >= step and burn_in >= 0; got {}, {}, {}",
                self.step, self.horizon, self.burn_in
            ));
        }
        if self.ensemble == 0 || self.observe_every == 0 {
            return bad("ensemble and observe_every must be positive".into());
        }
        if !(self.reflect_radius > 0.0) {
            return bad(format!("reflect radius must be positive, got {}", self.reflect_radius));
        }
        let d = field.dim();
        match &self.initial {
            InitialState::Point { x } if x.len() != d => return bad(format!("initial point has dimension {}", x.len())),
            InitialState::UniformBox { lo, hi } if lo.len() != d || hi.len() != d || lo.iter().zip(hi).any(|(a, b)| a >= b) => {
                return bad("initial box must be nondegenerate in the field's dimension".into())
            }
            InitialState::Stationary if self.eps == 0.0 => return bad("no stationary law at eps = 0".into()),
            _ => {}
        }
        let bound = step_bound(field, self.eps, self.reflect_radius)?;
        if self.step > bound.max_step * (1.0 + 1e-12) {
            return Err(Error::Precondition(format!(
                "step {} exceeds {:.4e} = {} / (10 L) with L = {:.4}",
                self.step,
                bound.max_step,
                if self.eps > 0.0 { "eps" } else { "1" },
                bound.lipschitz
            )));
        }
        Ok(bound)
    }

    pub fn hash(&self) -> Result<String> {
        config_hash(self)
    }

    fn observations(&self) -> usize {
        (self.horizon / (self.step * self.observe_every as f64)).floor() as usize + 1
    }
}

/// Gradient Lipschitz constant on the simulation box and the step it allows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepBound {
    pub lipschitz: f64,
    pub max_step: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

/// `L` is the largest Hessian norm over the box that carries the Gibbs
/// measure (the spectral truncation box); `h <= eps / (10 L)`. At `eps = 0`
/// the box is the reflection cube and `h <= 1 / (10 L)`.
pub fn step_bound(field: &dyn ScalarField, eps: f64, reflect_radius: f64) -> Result<StepBound> {
    let d = field.dim();
    let (lo, hi) = if eps > 0.0 {
        covering_box(field, eps)?
    } else {
        (vec![-reflect_radius; d], vec![reflect_radius; d])
    };
    let per_axis = match d {
        1 => 2001,
        2 => 201,
        _ => 41,
    };
    let lipschitz = lattice_points(&lo, &hi, per_axis)
        .par_iter()
        .map(|x| {
            let (a, b) = hessian_extremes(field, x);
            a.abs().max(b.abs())
        })
        .reduce(|| 0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let scale = if eps > 0.0 { eps } else { 1.0 };
    Ok(StepBound {
        lipschitz,
        max_step: scale / (10.0 * lipschitz),
        lo,
        hi,
    })
}

/// Sampler for the cell-quadrature approximation of the Gibbs measure.
#[derive(Debug, Clone)]
pub struct GibbsSampler {
    centres: Vec<Vec<f64>>,
    cumulative: Vec<f64>,
    spacing: Vec<f64>,
}

impl GibbsSampler {
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let total = *self.cumulative.last().unwrap();
        let u: f64 = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|c| *c <= u).min(self.centres.len() - 1);
        self.centres[i]
            .iter()
            .zip(&self.spacing)
            .map(|(c, h)| c + (rng.random::<f64>() - 0.5) * h)
            .collect()
    }

    /// `E[f]` under the quadrature measure.
    pub fn mean(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let mut prev = 0.0;
        let mut acc = 0.0;
        for (c, cum) in self.centres.iter().zip(&self.cumulative) {
            acc += (cum - prev) * f(c);
            prev = *cum;
        }
        acc / prev
    }
}

/// Largest number of quadrature cells for the warm start.
const GIBBS_CELLS: f64 = 4.0e6;

pub fn gibbs_sampler(field: &dyn ScalarField, eps: f64) -> Result<GibbsSampler> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("the Gibbs measure needs eps > 0".into()));
    }
    let (lo, hi) = covering_box(field, eps)?;
    let volume: f64 = lo.iter().zip(&hi).map(|(a, b)| b - a).product();
    let d = field.dim() as f64;
    let h = (eps.sqrt() / 16.0).max((volume / GIBBS_CELLS).powf(1.0 / d));
    let grid = covering_grid(field, eps, h)?;
    let vmin = field.global_min();
    let mut centres = Vec::new();
    let mut cumulative = Vec::new();
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let c = grid.centre(i);
        let w = (-(field.value(&c) - vmin) / eps).exp();
        if w > 0.0 {
            acc += w;
            centres.push(c);
            cumulative.push(acc);
        }
    }
    if centres.is_empty() {
        return Err(Error::Precondition("Gibbs weights vanish on the covering grid".into()));
    }
    Ok(GibbsSampler {
        centres,
        cumulative,
        spacing: grid.spacing(),
    })
}

/// Stored observations of an ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEnsemble {
    pub config: SimConfig,
    pub config_hash: String,
    pub dim: usize,
    /// Observation times, measured from the end of the burn-in.
    pub times: Vec<f64>,
    pub stream_ids: Vec<u64>,
    pub reflections: Vec<u64>,
    pub diverged: Vec<bool>,
    /// `[trajectory][observation][coordinate]`, row-major.
    #[serde(skip)]
    pub data: Vec<f64>,
}

impl TrajectoryEnsemble {
    pub fn len(&self) -> usize {
        self.stream_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stream_ids.is_empty()
    }

    pub fn observations(&self) -> usize {
        self.times.len()
    }

    pub fn state(&self, trajectory: usize, observation: usize) -> &[f64] {
        let start = (trajectory * self.times.len() + observation) * self.dim;
        &self.data[start..start + self.dim]
    }

    /// `f` along trajectory `i`.
    pub fn series(&self, i: usize, f: &(impl Fn(&[f64]) -> f64 + ?Sized)) -> Vec<f64> {
        (0..self.times.len()).map(|j| f(self.state(i, j))).collect()
    }

    /// States at the last observation time.
    pub fn final_states(&self) -> Vec<&[f64]> {
        (0..self.len()).map(|i| self.state(i, self.times.len() - 1)).collect()
    }

    /// Writes `<stem>.bin` (little-endian f64 observations) and
    /// `<stem>.json`; returns both paths.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir)?;
        let bin = dir.join(format!("{stem}.bin"));
        let json = dir.join(format!("{stem}.json"));
        let bytes: Vec<u8> = self.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&bin, bytes)?;
        fs::write(&json, serde_json::to_string_pretty(self)?)?;
        Ok((bin, json))
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let mut ens: Self = serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let bytes = fs::read(dir.join(format!("{stem}.bin")))?;
        let expected = ens.len() * ens.times.len() * ens.dim * 8;
        if bytes.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "{stem}.bin holds {} bytes, sidecar implies {expected}",
                bytes.len()
            )));
        }
        ens.data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ens)
    }
}

/// Largest fraction of trajectories that may be reflected or diverge.
const MAX_FLAGGED: f64 = 0.01;

struct Run {
    data: Vec<f64>,
    reflections: u64,
    diverged: bool,
}

/// Simulates `config.ensemble` independent trajectories.
pub fn simulate_ensemble(config: &SimConfig, field: &dyn ScalarField) -> Result<TrajectoryEnsemble> {
    config.validate(field)?;
    let d = field.dim();
    let sampler = match config.initial {
        InitialState::Stationary => Some(gibbs_sampler(field, config.eps)?),
        _ => None,
    };
    let n_obs = config.observations();
    let burn = (config.burn_in / config.step).round() as usize;
    let noise = (2.0 * config.eps * config.step).sqrt();
    let radius = config.reflect_radius;

    let run = |id: u64| -> Run {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(id);
        let mut x = match &config.initial {
            InitialState::Point { x } => x.clone(),
            InitialState::UniformBox { lo, hi } => {
                lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect()
            }
            InitialState::Stationary => sampler.as_ref().unwrap().sample(&mut rng),
        };
        let mut g = vec![0.0; d];
        let mut data = Vec::with_capacity(n_obs * d);
        let mut reflections = 0;
        let mut advance = |x: &mut Vec<f64>, rng: &mut ChaCha8Rng, reflections: &mut u64| -> bool {
            field.gradient_into(x, &mut g);
            for k in 0..d {
                let xi: f64 = rng.sample(StandardNormal);
                x[k] += -config.step * g[k] + noise * xi;
            }
            let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !r.is_finite() {
                return false;
            }
            if r > radius {
                *reflections += 1;
                let scale = (2.0 * radius - r).max(0.0) / r;
                x.iter_mut().for_each(|v| *v *= scale);
            }
            true
        };
        for _ in 0..burn {
            if !advance(&mut x, &mut rng, &mut reflections) {
                return Run {
                    data: vec![f64::NAN; n_obs * d],
                    reflections,
                    diverged: true,
                };
            }
        }
        data.extend_from_slice(&x);
        for _ in 1..n_obs {
            for _ in 0..config.observe_every {
                if !advance(&mut x, &mut rng, &mut reflections) {
                    data.resize(n_obs * d, f64::NAN);
                    return Run {
                        data,
                        reflections,
                        diverged: true,
                    };
                }
            }
            data.extend_from_slice(&x);
        }
        Run {
            data,
            reflections,
            diverged: false,
        }
    };

    let stream_ids: Vec<u64> = (0..config.ensemble as u64).collect();
    let runs: Vec<Run> = stream_ids.par_iter().map(|&id| run(id)).collect();
    let flagged = runs.iter().filter(|r| r.diverged || r.reflections > 0).count();
    let fraction = flagged as f64 / runs.len() as f64;
    if fraction > MAX_FLAGGED {
        return Err(Error::Diverged { fraction });
    }
    let dt = config.step * config.observe_every as f64;
    Ok(TrajectoryEnsemble {
        config_hash: config.hash()?,
        config: config.clone(),
        dim: d,
        times: (0..n_obs).map(|j| j as f64 * dt).collect(),
        reflections: runs.iter().map(|r| r.reflections).collect(),
        diverged: runs.iter().map(|r| r.diverged).collect(),
        data: runs.into_iter().flat_map(|r| r.data).collect(),
        stream_ids,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Potential;

    #[test]
    fn em_step_examples() {
        let ou = Potential::quadratic(1);
        assert_eq!(em_step(&ou, &[0.0], 0.1, 0.3, &[0.0]), vec![0.0]);
        assert!((em_step(&ou, &[1.0], 0.1, 7.0, &[0.0])[0] - 0.9).abs() < 1e-15);
        let circle = Potential::circle2d();
        let x = em_step(&circle, &[1.0, 0.0], 0.02, 0.5, &[1.0, 0.0]);
        assert!((x[0] - (1.0 + 0.02f64.sqrt())).abs() < 1e-15 && x[1] == 0.0);
    }

    #[test]
    fn oversized_steps_are_rejected() {
        let ou = Potential::quadratic(1);
        let mut c = SimConfig::new(&ou, 0.1, 1.0).unwrap();
        assert!((c.step - 0.01).abs() < 1e-12);
        c.step *= 2.0;
        assert!(matches!(c.validate(&ou), Err(Error::Precondition(_))));
    }
}
