use poincare_lab::constants::*;
use poincare_lab::potential::{Potential, ScalarField};
use poincare_lab::Error;
use proptest::prelude::*;

fn circle_ledger() -> ConstantsLedger {
    let p = Potential::circle2d();
    build_ledger(&certify_inputs(&p, ScanResolution::for_dim(2)).unwrap()).unwrap()
}

/// Circle inputs with the curvature of the maximum taken at the origin.
fn circle_ledger_unit_max() -> ConstantsLedger {
    let mut inputs = circle_ledger().inputs;
    inputs.mu_minus = 1.0;
    ConstantsLedger::from_inputs(inputs).unwrap()
}

#[test]
fn certified_circle_inputs() {
    let l = circle_ledger();
    let i = &l.inputs;
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9 * b.abs().max(1.0);
    assert!(close(i.nu, 0.75), "{i:?}");
    assert!(close(i.nu_eb, 2.0));
    assert!(close(i.c_g, 1.0));
    assert!(close(i.delta0, 0.5));
    assert!(close(i.g0, 0.1875));
    assert!(close(i.hessian_bound, 2.0));
    assert!(close(i.laplacian_bound, 4.0));
    assert!(close(i.mu_minus, 0.5));
    assert!((l.derived.c - 256.0 / 9.0).abs() < 1e-9);
    assert!((l.derived.c_bar - 2048.0 / 9.0).abs() < 1e-8);
    assert!((l.threshold.value - 0.1875f64.powi(2) / 16.0).abs() < 1e-12);
    for e in &l.entries {
        assert!(!e.formula.is_empty() && !e.source.is_empty(), "{e:?}");
    }
}

#[test]
fn ledger_is_deterministic() {
    let a = circle_ledger().to_json().unwrap();
    let b = circle_ledger().to_json().unwrap();
    assert_eq!(a, b);
}

#[test]
fn degenerate_minimum_is_refused() {
    let p = Potential::quartic(2);
    let certs = certify_inputs(&p, ScanResolution::for_dim(2)).unwrap();
    match build_ledger(&certs) {
        Err(Error::CertificateFailed(msg)) => assert!(msg.contains("PL"), "{msg}"),
        other => panic!("expected refusal, got {other:?}"),
    }
}

#[test]
fn lyapunov_holds_on_the_default_lattice() {
    let p = Potential::circle2d();
    for l in [circle_ledger(), circle_ledger_unit_max()] {
        let r = verify_lyapunov(&p, &l, 0.001, LyapunovGrid::default()).unwrap();
        assert!(r.passed(), "{:?}", &r.violations[..r.violations.len().min(5)]);
        assert!(r.points > 2_000_000);
    }
}

#[test]
fn lyapunov_fine_lattice_near_the_maximum() {
    let p = Potential::circle2d();
    let grid = LyapunovGrid { radius: 0.02, h: 0.0005 };
    // with the origin's curvature the inequality fails where 0 < r (1 - r)^2 < 6 eps
    let r = verify_lyapunov(&p, &circle_ledger_unit_max(), 0.001, grid).unwrap();
    assert!(!r.passed());
    for v in &r.violations {
        let n = v.x.iter().map(|c| c * c).sum::<f64>().sqrt();
        assert!(n > 0.0 && n * (1.0 - n).powi(2) < 6.0 * 0.001, "{v:?}");
    }
    assert!(r.violations_csv().lines().count() == r.violations.len() + 1);
    // the certified curvature over N(X) leaves room
    let r = verify_lyapunov(&p, &circle_ledger(), 0.001, grid).unwrap();
    assert!(r.passed());
}

#[test]
fn lyapunov_far_point() {
    let p = Potential::circle2d();
    let eps: f64 = 0.001;
    let x = [5.0, 0.0];
    let g = p.gradient(&x);
    let lhs = p.laplacian(&x) / (2.0 * eps) - (g[0] * g[0] + g[1] * g[1]) / (4.0 * eps * eps);
    assert!((lhs - (6.5 / eps - 100.0 / (eps * eps))).abs() < 1e-6 * lhs.abs());
    assert!(lhs <= -SigmaB::evaluate(&circle_ledger_unit_max(), eps).sigma);
}

#[test]
fn lyapunov_rejects_inadmissible_eps() {
    let p = Potential::circle2d();
    assert!(matches!(
        verify_lyapunov(&p, &circle_ledger(), 0.01, LyapunovGrid::default()),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn final_bound_in_log_form() {
    let l = circle_ledger();
    let b = final_bound(&l, 0.001, EigenInput::Manifold(1.0)).unwrap();
    assert!((b.ln_rho.unwrap() - l.derived.ln_cp).abs() < 1e-12);
    assert_eq!(b.rho, (l.derived.ln_cp).exp());
    let zero = final_bound(&l, 0.001, EigenInput::Manifold(0.0)).unwrap();
    assert_eq!(zero.rho, 0.0);
    assert!(zero.ln_rho.is_none());
    let tube = final_bound(&l, 0.001, EigenInput::Tube(1.0)).unwrap();
    assert!((tube.ln_rho.unwrap() - b.ln_rho.unwrap() - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn tube_oscillation_within_the_analytic_bound() {
    let l = circle_ledger();
    let o = oscillation_on_tube(&Potential::circle2d(), &l, 0.002, 201).unwrap();
    assert!(o.samples > 100);
    assert!(o.sampled.unwrap() <= o.analytic);
}

#[test]
fn geometry_enters_the_threshold() {
    let l = circle_ledger()
        .with_geometry(Geometry {
            reach: 1.0,
            stability_b: 20.0,
        })
        .unwrap();
    let s = l.threshold.stability.unwrap();
    assert!((s - 1.0 / (1600.0 * l.derived.c)).abs() < 1e-15);
    assert_eq!(l.threshold.binding, "stability");
    assert!(l.entries.iter().any(|e| e.name == "eps_stability"));
}

proptest! {
    #[test]
    fn combine_is_monotone(sigma in 0.1f64..1e3, b in 0.1f64..1e3, r1 in 1e-6f64..1e3, r2 in 1e-6f64..1e3) {
        let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
        prop_assert!(combine_lyapunov_pi(sigma, b, lo) <= combine_lyapunov_pi(sigma, b, hi));
        prop_assert!(combine_lyapunov_pi(sigma, b, hi) <= sigma);
        let direct = combine_lyapunov_pi(sigma, b, r1).ln();
        prop_assert!((combine_lyapunov_pi_ln(sigma, b, r1.ln()) - direct).abs() < 1e-10 * direct.abs().max(1.0));
    }

    #[test]
    fn holley_stroock_shrinks_with_oscillation(o1 in 0.0f64..10.0, o2 in 0.0f64..10.0, eps in 0.01f64..1.0) {
        let (lo, hi) = if o1 < o2 { (o1, o2) } else { (o2, o1) };
        prop_assert!(holley_stroock(hi, eps, 1.0) <= holley_stroock(lo, eps, 1.0));
        prop_assert!((holley_stroock_ln(lo, eps, 0.0) - holley_stroock(lo, eps, 1.0).ln()).abs() < 1e-9);
    }

    #[test]
    fn threshold_is_monotone_in_delta0(d1 in 1e-4f64..1.0, d2 in 1e-4f64..1.0) {
        let base = circle_ledger_inputs();
        let t = |d: f64| {
            let mut i = base.clone();
            i.delta0 = d;
            ConstantsLedger::from_inputs(i).unwrap().threshold.value
        };
        let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(t(lo) <= t(hi));
    }
}

fn circle_ledger_inputs() -> LedgerInputs {
    LedgerInputs {
        potential: "circle2d".into(),
        d: 2,
        k: 1,
        nu: 0.75,
        nu_eb: 2.0,
        c_g: 1.0,
        r0: 2.0,
        r1: 0.25,
        delta0: 0.5,
        g0: 0.1875,
        hessian_bound: 2.0,
        laplacian_bound: 4.0,
        mu_minus: 1.0,
    }
}
