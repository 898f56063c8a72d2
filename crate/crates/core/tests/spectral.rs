use std::f64::consts::PI;

use poincare_lab::potential::{Potential, ScalarField};
use poincare_lab::spectral::*;

/// First nonzero Neumann eigenvalue of the annulus `a <= r <= b` in the
/// `cos(theta)` family, by shooting the radial equation
/// `g'' + g'/r + (lambda - 1/r^2) g = 0` with `g'(a) = g'(b) = 0`.
fn annulus_oracle(a: f64, b: f64) -> f64 {
    let end_slope = |lambda: f64| {
        let steps = 4000;
        let h = (b - a) / steps as f64;
        let f = |r: f64, y: [f64; 2]| [y[1], -y[1] / r - (lambda - 1.0 / (r * r)) * y[0]];
        let mut y = [1.0, 0.0];
        let mut r = a;
        for _ in 0..steps {
            let k1 = f(r, y);
            let k2 = f(r + h / 2.0, [y[0] + h / 2.0 * k1[0], y[1] + h / 2.0 * k1[1]]);
            let k3 = f(r + h / 2.0, [y[0] + h / 2.0 * k2[0], y[1] + h / 2.0 * k2[1]]);
            let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
            for c in 0..2 {
                y[c] += h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
            }
            r += h;
        }
        y[1]
    };
    let (mut x0, mut x1) = (0.9, 1.1);
    let (mut f0, mut f1) = (end_slope(x0), end_slope(x1));
    for _ in 0..60 {
        let x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        (x0, f0) = (x1, f1);
        x1 = x2;
        f1 = end_slope(x1);
        if (x1 - x0).abs() < 1e-14 {
            break;
        }
    }
    x1
}

fn annulus_grid(h: f64) -> GridDomain {
    GridDomain::with_spacing(&[-1.1, -1.1], &[1.1, 1.1], h, BoundaryKind::Neumann)
        .unwrap()
        .cut_by(
            |x| {
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                (r - 1.1).max(0.9 - r)
            },
            8,
        )
}

#[test]
fn annulus_oracle_is_near_one() {
    let l = annulus_oracle(0.9, 1.1);
    assert!((l - 1.0).abs() < 0.02, "{l}");
}

#[test]
fn annulus_matches_the_shooting_oracle() {
    let grid = annulus_grid(1.0 / 400.0);
    let op = assemble_neumann_laplacian(&grid).unwrap();
    assert!(op.symmetry_defect(4, 7) < 1e-10);
    assert!(op.zero_mode_residual() < 1e-10);
    let s = smallest_eigenvalues(&op, 3, DEFAULT_TOL).unwrap();
    let oracle = annulus_oracle(0.9, 1.1);
    assert!(s.converged, "{:?}", s.residuals);
    assert!((s.lambda1() / oracle - 1.0).abs() < 5e-3, "{} vs {oracle}", s.lambda1());
    assert_eq!(s.multiplicities[1], 2, "{:?}", s.eigenvalues);

    // cos(theta) witness brackets the eigenvalue from above
    let u: Vec<f64> = op.points.iter().map(|p| p[0] / (p[0] * p[0] + p[1] * p[1]).sqrt()).collect();
    let w = rayleigh_quotient(&op, &u).unwrap();
    assert!(w.mean_zero);
    assert!(w.quotient >= s.lambda1() - 1e-8 && w.quotient <= s.lambda1() * 1.01, "{}", w.quotient);
}

#[test]
fn square_has_a_double_first_eigenvalue() {
    let g = GridDomain::new(&[0.0, 0.0], &[1.0, 1.0], &[128, 128], BoundaryKind::Neumann).unwrap();
    let s = smallest_eigenvalues(&assemble_neumann_laplacian(&g).unwrap(), 3, DEFAULT_TOL).unwrap();
    assert!((s.lambda1() / (PI * PI) - 1.0).abs() < 1e-3);
    assert_eq!(s.multiplicities[1..], [2, 2]);
}

#[test]
fn product_grid_takes_the_smaller_gap() {
    let g = GridDomain::new(&[0.0, 0.0], &[1.0, 0.1], &[200, 20], BoundaryKind::Neumann).unwrap();
    let s = smallest_eigenvalues(&assemble_neumann_laplacian(&g).unwrap(), 2, DEFAULT_TOL).unwrap();
    let expect = tensor_gap(PI * PI, (PI / 0.1).powi(2)).unwrap();
    assert!((s.lambda1() / expect - 1.0).abs() < 1e-3);
    assert_eq!(tensor_gap(1.0, 100.0).unwrap(), 1.0);
    assert_eq!(tensor_gap(2.0, 2.0).unwrap(), 2.0);
    assert!(tensor_gap(-1.0, 2.0).is_err());
}

#[test]
fn normal_ball_gap_dominates_thin_tubes() {
    let g = GridDomain::new(&[-0.05], &[0.05], &[200], BoundaryKind::Neumann).unwrap();
    let s = smallest_eigenvalues(&assemble_neumann_laplacian(&g).unwrap(), 2, DEFAULT_TOL).unwrap();
    assert!((s.lambda1() / (PI / 0.1).powi(2) - 1.0).abs() < 1e-3);
    assert_eq!(tensor_gap(1.0, s.lambda1()).unwrap(), 1.0);
}

#[test]
fn refinement_follows_second_order() {
    let lam = |n: usize| {
        let g = GridDomain::new(&[0.0], &[1.0], &[n], BoundaryKind::Neumann).unwrap();
        smallest_eigenvalues(&assemble_neumann_laplacian(&g).unwrap(), 2, DEFAULT_TOL)
            .unwrap()
            .lambda1()
    };
    let exact = PI * PI;
    let (a, b, c) = (lam(32), lam(64), lam(128));
    // the error ratio of a second-order scheme is close to 4
    let model = (a - b).abs() / 3.0;
    assert!((b - c).abs() <= 4.0 * model);
    let (r1, r2) = (richardson(a, b), richardson(b, c));
    assert!((r2 - exact).abs() <= (r1 - exact).abs());
    assert!((r2 - exact).abs() < 1e-5);
}

#[test]
fn rayleigh_of_the_eigenvector_reproduces_the_eigenvalue() {
    let g = GridDomain::new(&[0.0, 0.0], &[1.0, 0.7], &[40, 30], BoundaryKind::Neumann).unwrap();
    let op = assemble_neumann_laplacian(&g).unwrap();
    let s = smallest_eigenvalues(&op, 4, DEFAULT_TOL).unwrap();
    for k in 1..4 {
        let w = rayleigh_quotient(&op, &s.eigenvectors[k]).unwrap();
        assert!((w.quotient - s.eigenvalues[k]).abs() < 1e-8 * s.eigenvalues[k]);
    }
}

#[test]
fn double_well_follows_the_kramers_slope() {
    let v = Potential::double_well();
    let epss = [0.05, 0.04, 0.035, 0.03];
    let pts: Vec<(f64, f64)> = epss
        .iter()
        .map(|&eps| {
            let (lo, hi) = covering_box(&v, eps).unwrap();
            let s = generator_spectrum(&v, eps, (hi[0] - lo[0]) / 1400.0, 2).unwrap();
            (1.0 / eps, s.gap.ln())
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.25).abs() <= 0.025, "{slope}");
}

struct Shifted(Potential, f64);

impl ScalarField for Shifted {
    fn name(&self) -> &str {
        "shifted"
    }
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x) + self.1
    }
    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        self.0.gradient_into(x, out)
    }
    fn hessian_apply(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        self.0.hessian_apply(x, v)
    }
    fn global_min(&self) -> f64 {
        self.0.global_min() + self.1
    }
}

#[test]
fn generator_spectrum_ignores_constant_shifts() {
    let v = Potential::circle2d();
    let eps = 0.05;
    let grid = covering_grid(&v, eps, 0.04).unwrap();
    let a = generator_spectrum_on(&v, eps, &grid, 3).unwrap();
    let b = generator_spectrum_on(&Shifted(v, 123.456), eps, &grid, 3).unwrap();
    for (x, y) in a.spectrum.eigenvalues.iter().zip(&b.spectrum.eigenvalues) {
        assert!((x - y).abs() <= 1e-8 * y.abs().max(1.0), "{x} vs {y}");
    }
}

#[test]
fn generators_pass_operator_invariants() {
    for (v, eps) in [(Potential::circle2d(), 0.05), (Potential::double_well(), 0.03), (Potential::quadratic(1), 0.01)] {
        let grid = covering_grid(&v, eps, if v.dim() == 1 { 0.002 } else { 0.04 }).unwrap();
        let op = assemble_weighted_generator(&v, eps, &grid).unwrap();
        assert!(op.symmetry_defect(8, 3) < 1e-10, "{}", v.name());
        assert!(op.zero_mode_residual() < 1e-10, "{}", v.name());
    }
}

#[test]
fn spectrum_rows_serialize() {
    let op = DiscreteOperator::diagonal("diag", &[0.0, 1.0, 4.0, 9.0]).unwrap();
    let s = smallest_eigenvalues(&op, 2, DEFAULT_TOL).unwrap();
    let hash = config_hash(&serde_json::json!({"op": "diag"})).unwrap();
    let row = SpectrumRow::new(&hash, 1.0, &s, Some(1.0));
    let csv = to_csv(&[row.clone()]);
    assert!(csv.starts_with(SpectrumRow::CSV_HEADER));
    assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), 7);
    let back: SpectrumRow = serde_json::from_str(&serde_json::to_string(&row).unwrap()).unwrap();
    assert_eq!(back, row);
}
