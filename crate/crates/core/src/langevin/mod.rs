//! Euler–Maruyama simulation of overdamped Langevin dynamics and
//! autocorrelation estimates of the spectral gap.
//!
//! Every trajectory draws from its own ChaCha8 stream keyed by the seed and
//! the trajectory index, so ensembles are identical however rayon schedules
//! them.

mod estimate;
mod sim;

pub use estimate::{
    estimate_gap_autocorr, mixing_sweep, pilot_gap, FitWindow, GapEstimate, MixingSweep, SweepRow, SweepTemplate,
};
pub use sim::{
    em_step, gibbs_sampler, simulate_ensemble, step_bound, GibbsSampler, InitialState, SimConfig, StepBound,
    TrajectoryEnsemble,
};
