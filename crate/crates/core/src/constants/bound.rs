//! Composition of the final lower bound on the scaled gap, kept in
//! logarithms so that factors like `e^{-228}` survive.

use serde::{Deserialize, Serialize};

use super::ledger::{ConstantsLedger, SigmaB, SigmaBranch};
use crate::error::{Error, Result};
use crate::potential::{distance_to_optimal_set, lattice_points, ScalarField};

/// `sigma rho_U / (b + rho_U)`: Poincaré constant from a Lyapunov pair and
/// a local constant on `U`.
pub fn combine_lyapunov_pi(sigma: f64, b: f64, rho_u: f64) -> f64 {
    sigma * rho_u / (b + rho_u)
}

/// Logarithm of [`combine_lyapunov_pi`] for `rho_U = e^{ln_rho_u}`.
pub fn combine_lyapunov_pi_ln(sigma: f64, b: f64, ln_rho_u: f64) -> f64 {
    let ln_b = b.ln();
    let (hi, lo) = if ln_b > ln_rho_u { (ln_b, ln_rho_u) } else { (ln_rho_u, ln_b) };
    sigma.ln() + ln_rho_u - (hi + (lo - hi).exp().ln_1p())
}

/// `e^{-osc/eps} rho`: perturbation of a Poincaré constant by a bounded
/// potential change.
pub fn holley_stroock(osc: f64, eps: f64, rho: f64) -> f64 {
    (-osc / eps).exp() * rho
}

pub fn holley_stroock_ln(osc: f64, eps: f64, ln_rho: f64) -> f64 {
    ln_rho - osc / eps
}

/// Oscillation of `V` over the tube `U = {dist(x, S) <= sqrt(C eps)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Oscillation {
    pub eps: f64,
    pub tube_radius: f64,
    /// Analytic bound `4 L C eps`.
    pub analytic: f64,
    /// `max V - min V` over lattice points of `U`, if any fall inside.
    pub sampled: Option<f64>,
    pub samples: usize,
}

/// Analytic and sampled oscillation of `V` on `U`.
pub fn oscillation_on_tube(
    field: &dyn ScalarField,
    ledger: &ConstantsLedger,
    eps: f64,
    per_axis: usize,
) -> Result<Oscillation> {
    let tube_radius = (ledger.derived.c * eps).sqrt();
    let analytic = ledger.derived.c_bar * eps;
    let bound = (ledger.inputs.r0 + tube_radius).max(1.0);
    let d = field.dim();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut samples = 0;
    for x in lattice_points(&vec![-bound; d], &vec![bound; d], per_axis.max(2)) {
        if distance_to_optimal_set(field, &x) <= tube_radius {
            let v = field.value(&x);
            lo = lo.min(v);
            hi = hi.max(v);
            samples += 1;
        }
    }
    Ok(Oscillation {
        eps,
        tube_radius,
        analytic,
        sampled: (samples > 0).then_some(hi - lo),
        samples,
    })
}

/// Eigenvalue fed into the final bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum EigenInput {
    /// First nonzero Laplace–Beltrami eigenvalue of the optimal set.
    Manifold(f64),
    /// First nonzero Neumann eigenvalue of the tube `U`.
    Tube(f64),
}

/// One multiplicative factor, as a natural logarithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundFactor {
    pub name: String,
    pub ln: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalBound {
    pub potential: String,
    pub eps: f64,
    pub eigen: EigenInput,
    pub factors: Vec<BoundFactor>,
    /// `ln` of the bound on `rho`; `None` when the bound is zero.
    pub ln_rho: Option<f64>,
    pub log10_rho: Option<f64>,
    /// The bound on `rho`, possibly underflowing to zero.
    pub rho: f64,
    /// Bound on the gap, `eps rho`.
    pub gap: f64,
}

/// Lower bound on `rho = gap / eps` at an admissible `eps`.
///
/// With the manifold eigenvalue this is `C_P lambda_S`. With the tube
/// eigenvalue the prefactor is `(1/2) max_ratio e^{-C_bar}`, valid only
/// while `sigma` takes its local-maximum branch.
pub fn final_bound(ledger: &ConstantsLedger, eps: f64, eigen: EigenInput) -> Result<FinalBound> {
    let SigmaB { branch, .. } = super::sigma_b(ledger, eps)?;
    let (lambda, prefactor) = match eigen {
        EigenInput::Manifold(l) => (l, 0.25),
        EigenInput::Tube(l) => {
            if branch != SigmaBranch::LocalMax {
                return Err(Error::Precondition(format!(
                    "tube bound needs sigma on its local-maximum branch; eps = {eps} is above the crossing {}",
                    ledger.branch_crossing()
                )));
            }
            (l, 0.5)
        }
    };
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("eigenvalue must be nonnegative, got {lambda}")));
    }
    let ln_lambda = (lambda > 0.0).then(|| lambda.ln());
    let factors = vec![
        BoundFactor {
            name: "prefactor".into(),
            ln: Some(f64::ln(prefactor)),
        },
        BoundFactor {
            name: "max_ratio".into(),
            ln: Some(ledger.derived.max_ratio.ln()),
        },
        BoundFactor {
            name: "exp(-C_bar)".into(),
            ln: Some(-ledger.derived.c_bar),
        },
        BoundFactor {
            name: "eigenvalue".into(),
            ln: ln_lambda,
        },
    ];
    let ln_rho = factors.iter().try_fold(0.0, |acc, f| f.ln.map(|l| acc + l));
    let rho = ln_rho.map_or(0.0, f64::exp);
    Ok(FinalBound {
        potential: ledger.inputs.potential.clone(),
        eps,
        eigen,
        factors,
        ln_rho,
        log10_rho: ln_rho.map(|l| l / std::f64::consts::LN_10),
        rho,
        gap: eps * rho,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_examples() {
        assert!((combine_lyapunov_pi(1.0, 1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((combine_lyapunov_pi(100.0, 300.0, 1.0) - 100.0 / 301.0).abs() < 1e-15);
        let ln = combine_lyapunov_pi_ln(100.0, 300.0, 0.0);
        assert!((ln - (100.0f64 / 301.0).ln()).abs() < 1e-14);
        // far below f64 range the log form stays exact
        let ln = combine_lyapunov_pi_ln(1000.0, 3000.0, -800.0);
        assert!((ln - (-800.0 + (1000.0f64 / 3000.0).ln())).abs() < 1e-12);
    }

    #[test]
    fn holley_stroock_examples() {
        assert!((holley_stroock(0.0, 0.1, 2.0) - 2.0).abs() < 1e-15);
        assert!((holley_stroock(0.1, 0.1, 1.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((holley_stroock_ln(1.0, 0.01, 0.0) + 100.0).abs() < 1e-12);
    }
}
