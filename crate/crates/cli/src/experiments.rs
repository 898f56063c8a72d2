//! The named pipelines behind each subcommand.

use std::f64::consts::PI;
use std::fs;
use std::time::Instant;

use poincare_lab::constants::{
    build_ledger, certify_inputs, verify_lyapunov, CertifiedInputs, ConstantsLedger, LyapunovGrid, ScanResolution,
};
use poincare_lab::langevin::{mixing_sweep, SweepTemplate};
use poincare_lab::manifold::{shell_quadrature, tube_integrate, Manifold, QuadratureSpec, TubularNeighborhood};
use poincare_lab::potential::{CriticalKind, Potential, ScalarField};
use poincare_lab::spectral::{
    generator_spectrum, laplace_beltrami_gap, radial_generator_gap, tube_stability_report, TubeResolution, TubeRoute,
    RADIAL_CELLS,
};

use crate::config::{Experiment, ExperimentConfig};
use crate::report::{Cell, Reduce, RunReport, Stage, Table};

type StageResult<T> = std::result::Result<T, String>;

/// Violation rows kept per temperature in the Lyapunov table.
const MAX_VIOLATION_ROWS: usize = 10_000;

struct Run {
    report: RunReport,
}

impl Run {
    /// Runs one stage, recording its outcome; `None` if it failed.
    fn stage<T>(&mut self, name: &str, f: impl FnOnce(&mut RunReport) -> StageResult<T>) -> Option<T> {
        let start = Instant::now();
        let out = f(&mut self.report);
        self.report.stages.push(Stage {
            name: name.into(),
            ok: out.is_ok(),
            error: out.as_ref().err().cloned(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out.ok()
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn row<const N: usize>(cells: [Cell; N]) -> Vec<Cell> {
    cells.into()
}

fn point(x: &[f64]) -> Cell {
    Cell::Text(x.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(" "))
}

/// Executes the experiment named in `config`. Stage failures are recorded,
/// never raised.
pub fn run(config: &ExperimentConfig) -> RunReport {
    let start = Instant::now();
    let mut r = Run {
        report: RunReport::new(config),
    };
    match config.experiment {
        Experiment::Certify => certify(&mut r, config),
        Experiment::Ledger => {
            if let Some(p) = potential(&mut r, config) {
                ledger(&mut r, config, &p);
            }
        }
        Experiment::Lyapunov => lyapunov(&mut r, config),
        Experiment::Spectrum => spectrum(&mut r, config),
        Experiment::Tube => tube(&mut r, config),
        Experiment::LbGap => lb_gap(&mut r, config),
        Experiment::Sweep => sweep(&mut r, config),
        Experiment::Weyl => weyl(&mut r, config),
        Experiment::Report => aggregate(&mut r, config),
    }
    r.report.wall_time = start.elapsed().as_secs_f64();
    r.report
}

fn potential(r: &mut Run, config: &ExperimentConfig) -> Option<Potential> {
    r.stage("potential", |_| Potential::by_name(&config.potential).map_err(err))
}

fn manifold(r: &mut Run, config: &ExperimentConfig) -> Option<Manifold> {
    r.stage("manifold", |_| Manifold::by_name(&config.manifold).map_err(err))
}

fn certified(r: &mut Run, p: &Potential) -> Option<CertifiedInputs> {
    r.stage("certify", |_| certify_inputs(p, ScanResolution::for_dim(p.dim())).map_err(err))
}

fn certify(r: &mut Run, config: &ExperimentConfig) {
    let Some(p) = potential(r, config) else { return };
    let Some(c) = certified(r, &p) else { return };
    r.stage("tables", |rep| {
        let mut t = Table::new(
            "certificates",
            &["nu", "nu_eb", "c_g", "g0", "delta0", "hessian_bound", "laplacian_bound", "mu_minus", "normal_curvature", "pl_compatible"],
        );
        t.push(row([
            c.pl.nu_hat.into(),
            c.error_bound.nu_eb_hat.into(),
            c.growth.c_g.into(),
            c.critical.g0.into(),
            c.delta0.value.into(),
            c.hessian_bound.value.into(),
            c.laplacian_bound.value.into(),
            c.mu_minus.as_ref().map_or(Cell::from(""), |m| m.value.into()),
            c.normal_curvature.into(),
            c.critical.is_pl_compatible().into(),
        ]));
        rep.tables.push(t);

        let mut prov = Table::new("provenance", &["constant", "value", "worst_point", "probes"]);
        prov.push(row(["nu".into(), c.pl.nu_hat.into(), point(&c.pl.worst_point), c.pl.sample_count.into()]));
        prov.push(row([
            "nu_eb".into(),
            c.error_bound.nu_eb_hat.into(),
            point(&c.error_bound.worst_point),
            c.error_bound.sample_count.into(),
        ]));
        prov.push(row(["c_g".into(), c.growth.c_g.into(), point(&c.growth.worst_point), c.growth.sample_count.into()]));
        prov.push(row(["g0".into(), c.critical.g0.into(), point(&c.critical.g0_point), "".into()]));
        for (name, s) in [("delta0", &c.delta0), ("hessian_bound", &c.hessian_bound), ("laplacian_bound", &c.laplacian_bound)]
            .into_iter()
            .chain(c.mu_minus.as_ref().map(|m| ("mu_minus", m)))
        {
            prov.push(row([name.into(), s.value.into(), point(&s.worst_point), s.probes.into()]));
        }
        rep.tables.push(prov);

        let mut crit = Table::new("critical_points", &["kind", "location", "grad_norm", "min_eigenvalue", "max_eigenvalue"]);
        for q in &c.critical.points {
            crit.push(row([
                format!("{:?}", q.kind).to_lowercase().into(),
                point(&q.location),
                q.grad_norm.into(),
                q.min_eigenvalue.into(),
                q.max_eigenvalue.into(),
            ]));
        }
        rep.tables.push(crit);
        rep.documents.insert("certificates".into(), serde_json::to_value(&c).map_err(err)?);

        for col in ["nu", "nu_eb", "g0", "delta0", "normal_curvature"] {
            rep.assert_range(&format!("{col} positive"), "certificates", col, Reduce::Min, f64::MIN_POSITIVE, f64::INFINITY);
        }
        rep.assert_range("no saddles off the optimal set", "certificates", "pl_compatible", Reduce::Min, 1.0, 1.0);
        Ok(())
    });
}

/// Certified ledger, with the curvature override applied.
fn ledger(r: &mut Run, config: &ExperimentConfig, p: &Potential) -> Option<ConstantsLedger> {
    let c = certified(r, p)?;
    let l = r.stage("ledger", |_| {
        let l = build_ledger(&c).map_err(err)?;
        match config.mu_minus {
            Some(m) => {
                let mut inputs = l.inputs.clone();
                inputs.mu_minus = m;
                ConstantsLedger::from_inputs(inputs).map_err(err)
            }
            None => Ok(l),
        }
    })?;
    r.stage("tables", |rep| {
        let th = &l.threshold;
        let mut d = Table::new(
            "derived",
            &["c", "c_bar", "max_ratio", "ln_cp", "log10_cp", "eps_max", "branch_crossing", "mu_minus", "binding"],
        );
        d.push(row([
            l.derived.c.into(),
            l.derived.c_bar.into(),
            l.derived.max_ratio.into(),
            l.derived.ln_cp.into(),
            l.derived.log10_cp.into(),
            th.value.into(),
            l.branch_crossing().into(),
            l.inputs.mu_minus.into(),
            th.binding.clone().into(),
        ]));
        rep.tables.push(d);
        let mut e = Table::new("entries", &["name", "value", "formula", "source"]);
        for x in &l.entries {
            e.push(row([x.name.clone().into(), x.value.into(), x.formula.clone().into(), x.source.clone().into()]));
        }
        rep.tables.push(e);
        rep.documents.insert("ledger".into(), serde_json::to_value(&l).map_err(err)?);
        rep.assert_range("admissible temperatures exist", "derived", "eps_max", Reduce::Min, f64::MIN_POSITIVE, f64::INFINITY);
        Ok(())
    });
    Some(l)
}

fn lyapunov(r: &mut Run, config: &ExperimentConfig) {
    let Some(p) = potential(r, config) else { return };
    let Some(l) = ledger(r, config, &p) else { return };
    let grid = LyapunovGrid {
        h: config.h.unwrap_or(LyapunovGrid::default().h),
        ..LyapunovGrid::default()
    };
    let mut summary = Table::new("lyapunov", &["epsilon", "sigma", "b", "tube_radius", "points", "violations", "max_excess"]);
    let mut viol = Table::new("violations", &["epsilon", "x", "lhs", "rhs", "in_tube"]);
    for &eps in &config.eps {
        let Some(rep) = r.stage(&format!("lyapunov eps={eps}"), |_| verify_lyapunov(&p, &l, eps, grid).map_err(err)) else {
            continue;
        };
        summary.push(row([
            eps.into(),
            rep.sigma.into(),
            rep.b.into(),
            rep.tube_radius.into(),
            rep.points.into(),
            rep.violations.len().into(),
            rep.max_excess.into(),
        ]));
        for v in rep.violations.iter().take(MAX_VIOLATION_ROWS) {
            viol.push(row([eps.into(), point(&v.x), v.lhs.into(), v.rhs.into(), v.in_tube.into()]));
        }
    }
    r.report.tables.push(summary);
    r.report.tables.push(viol);
    r.report.assert_range("inequality holds at every node", "lyapunov", "violations", Reduce::Max, 0.0, 0.0);
}

fn spectrum(r: &mut Run, config: &ExperimentConfig) {
    let Some(p) = potential(r, config) else { return };
    let mut t = Table::new("rho", &["epsilon", "route", "h", "gap", "rho", "converged"]);
    for &eps in &config.eps {
        let out = r.stage(&format!("spectrum eps={eps}"), |_| {
            if p.dim() <= 2 {
                let h = config.h.unwrap_or(eps.sqrt() / if p.dim() == 1 { 16.0 } else { 8.0 });
                let s = generator_spectrum(&p, eps, h, 3).map_err(err)?;
                Ok(row([eps.into(), "grid".into(), h.into(), s.gap.into(), s.rho.into(), s.spectrum.converged.into()]))
            } else {
                let s = radial_generator_gap(&p, eps, RADIAL_CELLS).map_err(err)?;
                let h = (s.r_hi - s.r_lo) / s.cells as f64;
                Ok(row([eps.into(), "radial".into(), h.into(), s.gap.into(), s.rho.into(), true.into()]))
            }
        });
        if let Some(x) = out {
            t.push(x);
        }
    }
    r.report.tables.push(t);
    r.report.assert_range("eigensolves converged", "rho", "converged", Reduce::Min, 1.0, 1.0);
    if p.declared().manifold.is_some() {
        r.report.assert_range("rho flat in temperature", "rho", "rho", Reduce::MaxOverMin, 1.0, 2.0);
    }
}

fn tube(r: &mut Run, config: &ExperimentConfig) {
    let Some(m) = manifold(r, config) else { return };
    let Some(s) = r.stage("stability", |_| {
        tube_stability_report(&m, &config.radii, TubeRoute::TubeCoordinates, TubeResolution::default()).map_err(err)
    }) else {
        return;
    };
    let mut samples = Table::new("samples", &["radius", "lambda1", "deviation", "ratio", "residual"]);
    for x in &s.samples {
        samples.push(row([x.radius.into(), x.lambda1.into(), x.deviation.into(), x.ratio.into(), x.residual.into()]));
    }
    let mut summary = Table::new("stability", &["base_gap", "b_min", "r_squared", "limit", "limit_error", "span", "non_monotone"]);
    summary.push(row([
        s.base_gap.into(),
        s.b_min.into(),
        s.r_squared.into(),
        s.limit.into(),
        (s.limit / s.base_gap - 1.0).abs().into(),
        s.span.into(),
        s.non_monotone.into(),
    ]));
    let rep = &mut r.report;
    rep.tables.push(samples);
    rep.tables.push(summary);
    rep.documents.insert("stability".into(), serde_json::to_value(&s).unwrap_or_default());
    if s.samples.len() >= 3 {
        rep.assert_range("deviation linear in the radius", "stability", "r_squared", Reduce::Min, 0.95, 1.0);
    }
    rep.assert_range("extrapolated limit", "stability", "limit_error", Reduce::Max, 0.0, 0.01);
}

fn lb_gap(r: &mut Run, config: &ExperimentConfig) {
    let Some(m) = manifold(r, config) else { return };
    let Some(s) = r.stage("laplace-beltrami", |_| laplace_beltrami_gap(&m, None).map_err(err)) else { return };
    let mut t = Table::new("eigenvalues", &["index", "eigenvalue", "multiplicity", "residual"]);
    for (i, ev) in s.eigenvalues.iter().enumerate() {
        t.push(row([i.into(), (*ev).into(), s.multiplicities[i].into(), s.residuals[i].into()]));
    }
    let mut summary = Table::new("gap", &["lambda1", "multiplicity", "converged"]);
    summary.push(row([s.lambda1().into(), s.multiplicities.get(1).copied().unwrap_or(0).into(), s.converged.into()]));
    r.report.tables.push(t);
    r.report.tables.push(summary);
    r.report.assert_range("eigensolve converged", "gap", "converged", Reduce::Min, 1.0, 1.0);
    r.report.assert_range("positive gap", "gap", "lambda1", Reduce::Min, f64::MIN_POSITIVE, f64::INFINITY);
}

/// Height of the lowest local maximum above the minimum, for potentials
/// with isolated minima.
fn barrier(p: &Potential, c: &CertifiedInputs) -> Option<f64> {
    if p.declared().manifold.is_some() {
        return None;
    }
    c.critical
        .points
        .iter()
        .filter(|q| q.kind == CriticalKind::Max)
        .map(|q| p.value(&q.location) - p.global_min())
        .min_by(f64::total_cmp)
}

fn sweep(r: &mut Run, config: &ExperimentConfig) {
    let Some(p) = potential(r, config) else { return };
    let template = SweepTemplate {
        seed: config.seed,
        ..SweepTemplate::default()
    };
    let Some(s) = r.stage("sweep", |_| mixing_sweep(&p, &config.eps, &template, &|x: &[f64]| x[0]).map_err(err)) else {
        return;
    };
    let mut t = Table::new(
        "sweep",
        &["epsilon", "gap_hat", "gap_over_eps", "ci_lo", "ci_hi", "r2", "pilot_gap", "low_confidence", "inv_eps", "ln_gap_hat", "ratio_to_pilot"],
    );
    for x in &s.rows {
        t.push(row([
            x.epsilon.into(),
            x.gap_hat.into(),
            x.gap_over_eps.into(),
            x.ci_lo.into(),
            x.ci_hi.into(),
            x.r2.into(),
            x.pilot_gap.into(),
            x.low_confidence.into(),
            (1.0 / x.epsilon).into(),
            x.gap_hat.ln().into(),
            (x.gap_hat / x.pilot_gap).into(),
        ]));
    }
    r.report.tables.push(t);
    r.report.assert_range("simulated gap within 20% of the eigensolver", "sweep", "ratio_to_pilot", Reduce::Min, 0.8, 1.2);
    r.report.assert_range("simulated gap within 20% of the eigensolver (max)", "sweep", "ratio_to_pilot", Reduce::Max, 0.8, 1.2);
    let height = certified(r, &p).and_then(|c| barrier(&p, &c));
    if let Some(b) = height {
        r.report.assert_range(
            "Arrhenius slope matches the barrier",
            "sweep",
            "ln_gap_hat",
            Reduce::Slope { against: "inv_eps".into() },
            -1.1 * b,
            -0.9 * b,
        );
    }
}

type Integrand = (&'static str, fn(&[f64]) -> f64);

const WEYL_INTEGRANDS: [Integrand; 3] = [
    ("1", |_| 1.0),
    ("exp(y1) cos(3 y2) + y1 y2^2", |y| y[0].exp() * (3.0 * y[1]).cos() + y[0] * y[1] * y[1]),
    ("exp(-|y - 0.3|^2)", |y| (-y.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>()).exp()),
];

fn shell_volume(m: &Manifold, radius: f64) -> Option<f64> {
    match *m {
        Manifold::Circle { radius: big } => Some(4.0 * PI * big * radius),
        Manifold::Sphere { radius: big } => Some(4.0 * PI / 3.0 * ((big + radius).powi(3) - (big - radius).powi(3))),
        _ => None,
    }
}

fn weyl(r: &mut Run, config: &ExperimentConfig) {
    let Some(m) = manifold(r, config) else { return };
    let mut t = Table::new("weyl", &["integrand", "radius", "tube", "direct", "rel_error"]);
    let mut vol = Table::new("volume", &["radius", "tube", "exact", "rel_error"]);
    for &radius in &config.radii {
        let Some(tube) = r.stage(&format!("tube radius={radius}"), |_| TubularNeighborhood::new(m, radius).map_err(err)) else {
            continue;
        };
        for (label, f) in WEYL_INTEGRANDS {
            let out = r.stage(&format!("{label} radius={radius}"), |_| {
                let a = tube_integrate(&tube, &f, label, &QuadratureSpec::default()).map_err(err)?.value;
                let b = shell_quadrature(&m, radius, &f, 160).map_err(err)?;
                Ok((a, b))
            });
            if let Some((a, b)) = out {
                t.push(row([label.into(), radius.into(), a.into(), b.into(), ((a - b) / b).abs().into()]));
                if label == "1" {
                    if let Some(exact) = shell_volume(&m, radius) {
                        vol.push(row([radius.into(), a.into(), exact.into(), ((a - exact) / exact).abs().into()]));
                    }
                }
            }
        }
    }
    r.report.tables.push(t);
    r.report.tables.push(vol);
    r.report.assert_range("tube and ambient quadrature agree", "weyl", "rel_error", Reduce::Max, 0.0, 1e-6);
    r.report.assert_range("shell volume", "volume", "rel_error", Reduce::Max, 0.0, 1e-10);
}

/// Figure data from earlier runs under the same output directory:
/// measured `rho` against the certified lower bound. The most recently
/// written ledger and lb-gap runs are used.
fn aggregate(r: &mut Run, config: &ExperimentConfig) {
    let Some(p) = potential(r, config) else { return };
    let manifold_name = p.declared().manifold.map_or(config.manifold.clone(), str::to_owned);
    let runs = r.stage("scan", |_| {
        let mut dirs: Vec<_> = fs::read_dir(&config.out)
            .map_err(|e| format!("{}: {e}", config.out.display()))?
            .filter_map(|d| d.ok().map(|d| d.path()))
            .filter_map(|d| {
                let at = fs::metadata(d.join("report.json")).and_then(|m| m.modified()).ok()?;
                Some((at, d))
            })
            .collect();
        dirs.sort();
        let dirs: Vec<_> = dirs.into_iter().map(|(_, d)| d).collect();
        Ok(dirs.iter().filter_map(|d| RunReport::load(d).ok()).collect::<Vec<_>>())
    });
    let Some(runs) = runs else { return };
    let latest = |kind: Experiment, key: &dyn Fn(&ExperimentConfig) -> bool| {
        runs.iter()
            .filter(|x| x.config.experiment == kind && key(&x.config) && x.config.mu_minus.is_none())
            .next_back()
    };
    let figure = r.stage("figure", |rep| {
        let ledger = latest(Experiment::Ledger, &|c| c.potential == config.potential)
            .ok_or_else(|| format!("no ledger run for {} under {}", config.potential, config.out.display()))?;
        let lb = latest(Experiment::LbGap, &|c| c.manifold == manifold_name)
            .ok_or_else(|| format!("no lb-gap run for {manifold_name} under {}", config.out.display()))?;
        let ln_cp = ledger.table("derived").and_then(|t| t.column("ln_cp")).and_then(|v| v.first().copied());
        let eps_max = ledger.table("derived").and_then(|t| t.column("eps_max")).and_then(|v| v.first().copied());
        let lambda = lb.table("gap").and_then(|t| t.column("lambda1")).and_then(|v| v.first().copied());
        let (Some(ln_cp), Some(eps_max), Some(lambda)) = (ln_cp, eps_max, lambda) else {
            return Err("ledger or lb-gap run lacks its summary table".into());
        };
        let mut points: Vec<(f64, f64)> = runs
            .iter()
            .filter(|x| x.config.experiment == Experiment::Spectrum && x.config.potential == config.potential)
            .filter_map(|x| x.table("rho").and_then(|t| Some(t.column("epsilon")?.into_iter().zip(t.column("rho")?))))
            .flatten()
            .collect();
        if points.is_empty() {
            return Err(format!("no spectrum runs for {} under {}", config.potential, config.out.display()));
        }
        points.sort_by(|a, b| b.0.total_cmp(&a.0));
        points.dedup_by(|a, b| a.0 == b.0);
        let bound_ln = ln_cp + lambda.ln();
        let mut t = Table::new(
            "figure",
            &["epsilon", "rho_measured", "ln_rho_measured", "bound_ln", "lambda1_s", "admissible", "margin_ln"],
        );
        for (eps, rho) in points {
            t.push(row([
                eps.into(),
                rho.into(),
                rho.ln().into(),
                bound_ln.into(),
                lambda.into(),
                (eps <= eps_max).into(),
                (rho.ln() - bound_ln).into(),
            ]));
        }
        rep.tables.push(t);
        Ok(())
    });
    if figure.is_some() {
        r.report.assert_range("bound below the measured constant", "figure", "margin_ln", Reduce::Min, 0.0, f64::INFINITY);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_potential_is_a_failed_stage() {
        let mut c = ExperimentConfig::for_experiment(Experiment::Spectrum);
        c.potential = "nowhere".into();
        let r = run(&c);
        assert!(!r.success());
        assert_eq!(r.stages[0].name, "potential");
        assert!(r.stages[0].error.as_deref().unwrap().contains("nowhere"));
    }

    #[test]
    fn shell_volumes_match_the_closed_forms() {
        assert!((shell_volume(&Manifold::circle(1.0), 0.1).unwrap() - 0.4 * PI).abs() < 1e-15);
        assert!(shell_volume(&Manifold::torus(2.0, 0.5), 0.1).is_none());
    }
}
