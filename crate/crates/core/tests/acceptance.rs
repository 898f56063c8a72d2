//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use poincare_lab::constants::*;
use poincare_lab::langevin::*;
use poincare_lab::manifold::*;
use poincare_lab::potential::*;
use poincare_lab::spectral::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

type Outcome = std::result::Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ledger(name: &str) -> ConstantsLedger {
    let p = Potential::by_name(name).unwrap();
    build_ledger(&certify_inputs(&p, ScanResolution::for_dim(p.dim())).unwrap()).unwrap()
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    linear_fit(&x, &y).0
}

fn rho_is_temperature_independent() -> Outcome {
    let v = Potential::circle2d();
    let mut rho = Vec::new();
    for eps in [0.05f64, 0.02, 0.01] {
        let s = generator_spectrum(&v, eps, eps.sqrt() / 8.0, 3).map_err(|e| e.to_string())?;
        if !s.spectrum.converged {
            return Err(format!("eigensolve at eps = {eps} did not converge"));
        }
        rho.push(s.rho);
    }
    let ratio = rho.iter().cloned().fold(f64::MIN, f64::max) / rho.iter().cloned().fold(f64::MAX, f64::min);
    check(
        ratio <= 2.0 && (0.5..=2.0).contains(&rho[2]),
        format!("rho = {rho:.4?} at eps = [0.05, 0.02, 0.01], max/min = {ratio:.4}"),
    )
}

fn baselines() -> Outcome {
    let ou = Potential::quadratic(1);
    let mut worst: f64 = 0.0;
    for eps in [0.1f64, 0.01] {
        let s = generator_spectrum(&ou, eps, eps.sqrt() / 16.0, 3).map_err(|e| e.to_string())?;
        let ev = &s.spectrum.eigenvalues;
        worst = worst.max(ev[0].abs()).max((ev[1] - 1.0).abs()).max((ev[2] / 2.0 - 1.0).abs());
    }
    let dw = Potential::double_well();
    let mut pts = Vec::new();
    for eps in [0.05, 0.04, 0.035, 0.03] {
        let (lo, hi) = covering_box(&dw, eps).map_err(|e| e.to_string())?;
        let s = generator_spectrum(&dw, eps, (hi[0] - lo[0]) / 1400.0, 2).map_err(|e| e.to_string())?;
        pts.push((1.0 / eps, s.gap.ln()));
    }
    let k = slope(&pts);
    check(
        worst <= 5e-3 && (k + 0.25).abs() <= 0.025,
        format!("quadratic spectrum rel. error {worst:.2e}; double-well Arrhenius slope {k:.4}"),
    )
}

fn tube_stability() -> Outcome {
    let radii = [0.2, 0.1, 0.05, 0.025];
    let mut lines = Vec::new();
    let mut ok = true;
    for (m, exact) in [(Manifold::circle(1.0), 1.0), (Manifold::circle(2.0), 0.25)] {
        let r = tube_stability_report(&m, &radii, TubeRoute::TubeCoordinates, TubeResolution::default())
            .map_err(|e| e.to_string())?;
        let bounded = r
            .samples
            .iter()
            .all(|s| (s.lambda1 - r.base_gap).abs() <= r.b_min * s.radius * r.base_gap * (1.0 + 1e-12));
        ok &= bounded && r.r_squared >= 0.95 && (r.limit / exact - 1.0).abs() <= 0.01;
        lines.push(format!("R = {}: B = {:.4}, R^2 = {:.3}, limit {:.5}", exact.sqrt().recip(), r.b_min, r.r_squared, r.limit));
    }
    check(ok, lines.join("; "))
}

fn weyl_formula() -> Outcome {
    let integrands: [(&str, fn(&[f64]) -> f64); 3] = [
        ("1", |_| 1.0),
        ("exp(y1) cos(3 y2) + y1 y2^2", |y| y[0].exp() * (3.0 * y[1]).cos() + y[0] * y[1] * y[1]),
        ("exp(-|y - c|^2)", |y| (-y.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>()).exp()),
    ];
    let mut worst: f64 = 0.0;
    let mut circle_one = f64::NAN;
    for m in [Manifold::circle(1.0), Manifold::sphere()] {
        let tube = TubularNeighborhood::new(m, 0.1).map_err(|e| e.to_string())?;
        for (label, f) in integrands {
            let t = tube_integrate(&tube, &f, label, &QuadratureSpec::default()).map_err(|e| e.to_string())?;
            let direct = shell_quadrature(&m, 0.1, &f, 160).map_err(|e| e.to_string())?;
            worst = worst.max(((t.value - direct) / direct).abs());
            if m == Manifold::circle(1.0) && label == "1" {
                circle_one = t.value;
            }
        }
    }
    let err = (circle_one - 0.4 * PI).abs();
    check(
        worst <= 1e-6 && err <= 1e-10,
        format!("max relative gap {worst:.2e} over 3 integrands x {{circle, sphere}}; |circle volume - 0.4 pi| = {err:.1e}"),
    )
}

fn lyapunov_on_the_grid() -> Outcome {
    let p = Potential::circle2d();
    let certified = ledger("circle2d");
    let mut inputs = certified.inputs.clone();
    inputs.mu_minus = 1.0;
    let unit = ConstantsLedger::from_inputs(inputs).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    let mut ok = true;
    for (tag, l) in [("certified", &certified), ("unit curvature", &unit)] {
        let r = verify_lyapunov(&p, l, 0.001, LyapunovGrid::default()).map_err(|e| e.to_string())?;
        ok &= r.passed();
        lines.push(format!(
            "{tag}: sigma = {}, b = {}, {}/{} nodes",
            r.sigma,
            r.b,
            r.points - r.violations.len(),
            r.points
        ));
    }
    let s = SigmaB::evaluate(&unit, 0.001);
    ok &= (s.sigma - 1000.0).abs() < 1e-9 && (s.b - 3000.0).abs() < 1e-9;
    check(ok, lines.join("; "))
}

fn bound_direction() -> Outcome {
    let lambda_s = laplace_beltrami_gap(&Manifold::circle(1.0), None).map_err(|e| e.to_string())?.lambda1();
    let mut lines = Vec::new();
    let mut ok = true;
    for name in ["circle2d", "softring2d"] {
        let l = ledger(name);
        let p = Potential::by_name(name).unwrap();
        let e0 = l.threshold.value;
        let mut gaps = Vec::new();
        for eps in [e0, e0 / 2.0, e0 / 4.0] {
            let b = final_bound(&l, eps, EigenInput::Manifold(lambda_s)).map_err(|e| e.to_string())?;
            let measured = radial_generator_gap(&p, eps, RADIAL_CELLS).map_err(|e| e.to_string())?.rho;
            let lb = b.log10_rho.unwrap_or(f64::NEG_INFINITY);
            ok &= lb <= measured.log10();
            gaps.push(measured.log10() - lb);
        }
        if name == "softring2d" {
            ok &= l.derived.c_bar <= 5.0 && gaps.iter().all(|g| *g <= 4.0);
        }
        lines.push(format!(
            "{name}: C_bar = {:.2}, bound 10^{:.2}, orders below measured {:.2?}",
            l.derived.c_bar, l.derived.log10_cp, gaps
        ));
    }
    check(ok, lines.join("; "))
}

fn laplace_beltrami() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (m, exact, mult) in [(Manifold::circle(1.0), 1.0, 2), (Manifold::circle(2.0), 0.25, 2), (Manifold::sphere(), 2.0, 3)] {
        let s = laplace_beltrami_gap(&m, None).map_err(|e| e.to_string())?;
        let rel = (s.lambda1() / exact - 1.0).abs();
        ok &= rel <= 2e-3 && s.multiplicities[1] == mult;
        lines.push(format!("{}: {:.6} (x{})", m.name(), s.lambda1(), s.multiplicities[1]));
    }
    check(ok, lines.join("; "))
}

fn simulation_cross_check() -> Outcome {
    let ou = Potential::quadratic(1);
    let dw = Potential::double_well();
    let circle = Potential::circle2d();
    let cases: [(&dyn ScalarField, f64, f64); 3] = [(&ou, 0.1, 0.1f64.sqrt() / 16.0), (&circle, 0.02, 0.02f64.sqrt() / 8.0), (&dw, 0.05, 0.0)];
    let mut lines = Vec::new();
    let mut ok = true;
    for (field, eps, h) in cases {
        let h = if h > 0.0 {
            h
        } else {
            let (lo, hi) = covering_box(field, eps).map_err(|e| e.to_string())?;
            (hi[0] - lo[0]) / 1400.0
        };
        let exact = generator_spectrum(field, eps, h, 2).map_err(|e| e.to_string())?.gap;
        let template = SweepTemplate::default();
        let config = template.config(field, eps, exact).map_err(|e| e.to_string())?;
        let ens = simulate_ensemble(&config, field).map_err(|e| e.to_string())?;
        let est = estimate_gap_autocorr(&ens, &|x: &[f64]| x[0], template.window).map_err(|e| e.to_string())?;
        let ratio = est.rate / exact;
        ok &= (ratio - 1.0).abs() <= 0.2;
        lines.push(format!("{} eps {eps}: {:.4} vs {:.4}", field.name(), est.rate, exact));
    }

    let (eps, h) = (0.1, 1e-3);
    let mut c = SimConfig::new(&ou, eps, 2.0).map_err(|e| e.to_string())?;
    c.step = h;
    c.horizon = h;
    c.burn_in = 5.0;
    c.ensemble = 20_000;
    c.seed = 11;
    let ens = simulate_ensemble(&c, &ou).map_err(|e| e.to_string())?;
    let xs: Vec<f64> = ens.final_states().iter().map(|x| x[0]).collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = var * (2.0 / n).sqrt();
    let ar1 = eps / (1.0 - h / 2.0);
    ok &= (var - ar1).abs() <= 3.0 * se;
    lines.push(format!("OU variance {var:.5} vs {ar1:.5} ({:.2} se)", (var - ar1).abs() / se));
    check(ok, lines.join("; "))
}

fn property_suites() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 32,
        failure_persistence: None,
        ..Config::default()
    });
    let mut failures = Vec::new();
    let mut record = |name: &str, r: std::result::Result<(), String>| {
        if let Err(e) = r {
            failures.push(format!("{name}: {e}"));
        }
    };

    let generators: Vec<DiscreteOperator> = [(Potential::circle2d(), 0.05, 0.04), (Potential::double_well(), 0.03, 0.002), (Potential::quadratic(1), 0.01, 0.002)]
        .into_iter()
        .map(|(v, eps, h)| assemble_weighted_generator(&v, eps, &covering_grid(&v, eps, h).unwrap()).unwrap())
        .collect();
    record(
        "operator invariants",
        runner.run(&(0usize..3, any::<u64>()), |(i, seed)| {
            let op = &generators[i];
            prop_assert!(op.symmetry_defect(4, seed) < 1e-10);
            prop_assert!(op.zero_mode_residual() < 1e-10);
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );

    let box_op = assemble_neumann_laplacian(&GridDomain::new(&[0.0, 0.0], &[1.0, 0.7], &[24, 18], BoundaryKind::Neumann).unwrap()).unwrap();
    let lambda1 = smallest_eigenvalues(&box_op, 2, DEFAULT_TOL).unwrap().lambda1();
    let n = box_op.len();
    record(
        "Rayleigh upper bound",
        runner.run(&prop::collection::vec(-1.0f64..1.0, n), |u| {
            if let Ok(w) = rayleigh_quotient(&box_op, &u) {
                prop_assert!(w.mean_zero);
                prop_assert!(w.quotient >= lambda1 * (1.0 - 1e-10), "{} < {lambda1}", w.quotient);
            }
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );

    record(
        "tensorization min-rule",
        runner.run(&(0.3f64..3.0, 0.3f64..3.0), |(a, b)| {
            let gap1 = |len: f64, cells: usize| {
                let g = GridDomain::new(&[0.0], &[len], &[cells], BoundaryKind::Neumann).unwrap();
                smallest_eigenvalues(&assemble_neumann_laplacian(&g).unwrap(), 2, DEFAULT_TOL).unwrap().lambda1()
            };
            let g = GridDomain::new(&[0.0, 0.0], &[a, b], &[20, 16], BoundaryKind::Neumann).unwrap();
            let prod = smallest_eigenvalues(&assemble_neumann_laplacian(&g).unwrap(), 2, DEFAULT_TOL).unwrap().lambda1();
            let expect = tensor_gap(gap1(a, 20), gap1(b, 16)).unwrap();
            prop_assert!((prod - expect).abs() <= 1e-8 * expect, "{prod} vs {expect}");
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );

    let grad = |y: &[f64]| -> Vec<f64> {
        let d = y.len();
        let mut g = vec![0.0; d];
        g[0] = y[0].cos() * y[1];
        g[1] = y[0].sin();
        g[d - 1] += 3.0 * y[d - 1] * y[d - 1];
        g
    };
    let phi = |y: &[f64]| y[0].sin() * y[1] + y[y.len() - 1].powi(3);
    record(
        "pushforward gradient",
        runner.run(&(0usize..3, 0.0f64..6.0, 0.3f64..2.8, -0.25f64..0.25), |(which, u0, u1, r)| {
            let m = [Manifold::circle(1.0), Manifold::sphere(), Manifold::torus(2.0, 0.5)][which];
            let tube = TubularNeighborhood::new(m, 0.3).unwrap();
            let u: Vec<f64> = [u0, u1][..m.intrinsic_dim()].to_vec();
            let g = pushforward_gradient(&tube, &grad, &u, &[r]).unwrap();
            let h = 1e-6;
            for i in 0..=u.len() {
                let shift = |s: f64| {
                    let (mut uu, mut rr) = (u.clone(), r);
                    if i < u.len() {
                        uu[i] += s;
                    } else {
                        rr += s;
                    }
                    phi(&tube.tube_point(&uu, &[rr]).unwrap())
                };
                let fd = (shift(h) - shift(-h)) / (2.0 * h);
                prop_assert!((g[i] - fd).abs() <= 1e-6 * fd.abs().max(1.0), "{i}: {} vs {fd}", g[i]);
            }
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );

    let circle = Potential::circle2d();
    let dw = Potential::double_well();
    let plan = ProbePlan::grid(61);
    record(
        "PL region monotonicity",
        runner.run(&(0.05f64..0.5, 0.05f64..0.5, 0.0f64..1.0), |(lo, hi, t)| {
            let outer = RegionSpec::annulus(&[0.0, 0.0], 1.0 - lo, 1.0 + hi);
            let inner = RegionSpec::annulus(&[0.0, 0.0], 1.0 - lo * t.max(0.1), 1.0 + hi * t.max(0.1));
            let a = certify_pl(&circle, &outer, &plan).unwrap().nu_hat;
            let b = certify_pl(&circle, &inner, &plan).unwrap().nu_hat;
            prop_assert!(b >= a, "{b} < {a}");
            let far = RegionSpec::annulus(&[0.0, 0.0], 2.0 + 2.0 * lo, 6.0 + 8.0 * hi);
            let near = RegionSpec::annulus(&[0.0, 0.0], 2.0 + 2.0 * lo + t, 6.0 + 8.0 * hi * t.max(0.1));
            let a = certify_error_bound(&circle, &far, &plan).unwrap().nu_eb_hat;
            let b = certify_error_bound(&circle, &near, &plan).unwrap().nu_eb_hat;
            prop_assert!(b >= a, "{b} < {a}");
            let wide = RegionSpec::boxed(&[1.0 - lo], &[1.0 + hi]);
            let narrow = RegionSpec::boxed(&[1.0 - lo * t.max(0.1)], &[1.0 + hi * t.max(0.1)]);
            let a = certify_pl(&dw, &wide, &ProbePlan::grid(4001)).unwrap().nu_hat;
            let b = certify_pl(&dw, &narrow, &ProbePlan::grid(4001)).unwrap().nu_hat;
            prop_assert!(b >= a, "{b} < {a}");
            Ok(())
        })
        .map_err(|e| e.to_string()),
    );

    check(failures.is_empty(), if failures.is_empty() { "5 suites x 32 cases green".into() } else { failures.join("; ") })
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("rho independent of temperature", rho_is_temperature_independent),
        ("quadratic and double-well baselines", baselines),
        ("tube Neumann stability", tube_stability),
        ("Weyl tube integration", weyl_formula),
        ("Lyapunov inequality on the grid", lyapunov_on_the_grid),
        ("bound below the measured constant", bound_direction),
        ("Laplace-Beltrami eigenvalues", laplace_beltrami),
        ("simulation against eigensolver", simulation_cross_check),
        ("property suites", property_suites),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {} PASS [{name}] {d} ({secs:.1}s)", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {} FAIL [{name}] {d} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
