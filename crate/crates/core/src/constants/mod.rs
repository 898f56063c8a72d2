//! Explicit constants behind the temperature-independent Poincaré bound.
//!
//! A [`ConstantsLedger`] holds the certified geometric inputs of a potential
//! and everything derived from them. Exponentially small quantities are kept
//! as natural logarithms throughout: `e^{-228}` is far below what an `f64`
//! can resolve next to order-one numbers.

mod bound;
mod ledger;
mod lyapunov;

pub use bound::{
    combine_lyapunov_pi, combine_lyapunov_pi_ln, final_bound, holley_stroock, holley_stroock_ln, oscillation_on_tube,
    BoundFactor, EigenInput, FinalBound, Oscillation,
};
pub use ledger::{
    build_ledger, certify_inputs, epsilon_threshold, sigma_b, CertifiedInputs, ConstantsLedger, Derived,
    EpsilonThreshold, Geometry, LedgerEntry, LedgerInputs, ScanResolution, SigmaB, SigmaBranch,
};
pub use lyapunov::{verify_lyapunov, LyapunovCheckReport, LyapunovGrid, LyapunovViolation};
