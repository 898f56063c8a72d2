use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potential::{
    certify_error_bound, certify_growth, certify_pl, distance_to_optimal_set, hessian_eigenvalues, hessian_extremes, locate_critical_points,
    CriticalKind, CriticalPointReport, ErrorBoundCertificate, GrowthCertificate, LatticeSpec, PLCertificate, Potential,
    ProbePlan, RegionSpec, ScalarField,
};

/// Inputs of the ledger. `nu_eb` may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerInputs {
    pub potential: String,
    pub d: usize,
    /// Dimension of the optimal set.
    pub k: usize,
    /// PL constant on `N(S)`.
    pub nu: f64,
    /// Error-bound constant beyond `R0`.
    pub nu_eb: f64,
    /// Laplacian growth constant beyond `R0`.
    pub c_g: f64,
    pub r0: f64,
    /// Radius of `N(X)` around the local maxima.
    pub r1: f64,
    /// Distance from the boundary of `N(S)` to `S`.
    pub delta0: f64,
    /// Gradient floor away from `N(S)` and `N(X)`.
    pub g0: f64,
    /// Hessian norm bound `L` on `N(S)`.
    pub hessian_bound: f64,
    /// Laplacian bound `M_Delta` on `|x| <= R0`.
    pub laplacian_bound: f64,
    /// Curvature `mu^-` of the local maxima: `Hess V <= -mu^- I` on `N(X)`.
    pub mu_minus: f64,
}

/// Tube data of the optimal set entering the final temperature threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub reach: f64,
    /// Stability constant `B` of the tube Neumann eigenvalue.
    pub stability_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    /// `C = 4 M_Delta / nu^2`.
    pub c: f64,
    /// `C_bar = 4 L C`.
    pub c_bar: f64,
    /// `d mu^- / (d mu^- + M_Delta)`.
    pub max_ratio: f64,
    /// `ln C_P` with `C_P = (1/4) max_ratio e^{-C_bar}`.
    pub ln_cp: f64,
    pub log10_cp: f64,
    /// `mu^-` was lowered to `M_Delta / d`.
    pub mu_minus_capped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonThreshold {
    /// `nu_eb^2 / (64 C_g)`.
    pub error_bound: f64,
    /// `delta0^2 / C`.
    pub neighbourhood: f64,
    /// `g0^2 / (4 M_Delta)`.
    pub gradient: f64,
    /// Tube reach, when geometry is supplied.
    pub reach: Option<f64>,
    /// `(1/C) (1/(2B))^2`, when geometry is supplied.
    pub stability: Option<f64>,
    pub value: f64,
    pub binding: String,
}

/// One line of the serialized ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub name: String,
    pub value: f64,
    pub formula: String,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsLedger {
    pub inputs: LedgerInputs,
    pub derived: Derived,
    pub threshold: EpsilonThreshold,
    pub geometry: Option<Geometry>,
    pub entries: Vec<LedgerEntry>,
}

impl ConstantsLedger {
    /// Ledger from explicit inputs. If `M_Delta < d mu^-`, `mu^-` is lowered
    /// to `M_Delta / d`.
    pub fn from_inputs(inputs: LedgerInputs) -> Result<Self> {
        Self::assemble(inputs, None, Vec::new())
    }

    pub fn with_geometry(self, geometry: Geometry) -> Result<Self> {
        if !(geometry.reach > 0.0 && geometry.stability_b > 0.0) {
            return Err(Error::InvalidArgument(format!("geometry must be positive, got {geometry:?}")));
        }
        let sources = self
            .entries
            .iter()
            .map(|e| (e.name.clone(), e.source.clone()))
            .collect();
        Self::assemble(self.inputs, Some(geometry), sources)
    }

    fn assemble(mut inputs: LedgerInputs, geometry: Option<Geometry>, sources: Vec<(String, String)>) -> Result<Self> {
        let named = [
            ("nu", inputs.nu),
            ("C_g", inputs.c_g),
            ("R0", inputs.r0),
            ("delta0", inputs.delta0),
            ("g0", inputs.g0),
            ("L", inputs.hessian_bound),
            ("M_Delta", inputs.laplacian_bound),
            ("mu_minus", inputs.mu_minus),
        ];
        for (name, v) in named {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("ledger input {name} must be positive and finite, got {v}")));
            }
        }
        if !(inputs.nu_eb > 0.0) || inputs.nu_eb.is_nan() {
            return Err(Error::InvalidArgument(format!("ledger input nu_eb must be positive, got {}", inputs.nu_eb)));
        }
        if !(inputs.r1 >= 0.0) || inputs.d == 0 {
            return Err(Error::InvalidArgument("R1 must be nonnegative and d positive".into()));
        }
        let d = inputs.d as f64;
        let mu_minus_capped = inputs.laplacian_bound < d * inputs.mu_minus;
        if mu_minus_capped {
            inputs.mu_minus = inputs.laplacian_bound / d;
        }
        let c = 4.0 * inputs.laplacian_bound / (inputs.nu * inputs.nu);
        let c_bar = 4.0 * inputs.hessian_bound * c;
        let dm = d * inputs.mu_minus;
        let max_ratio = dm / (dm + inputs.laplacian_bound);
        let ln_cp = 0.25f64.ln() + max_ratio.ln() - c_bar;
        let derived = Derived {
            c,
            c_bar,
            max_ratio,
            ln_cp,
            log10_cp: ln_cp / std::f64::consts::LN_10,
            mu_minus_capped,
        };
        let threshold = threshold_of(&inputs, &derived, geometry.as_ref());
        let source = |name: &str, fallback: &str| {
            sources
                .iter()
                .find(|(n, _)| n == name)
                .map_or_else(|| fallback.to_owned(), |(_, s)| s.clone())
        };
        let input = |name: &str, value: f64, formula: &str| LedgerEntry {
            name: name.into(),
            value,
            formula: formula.into(),
            source: source(name, "declared input"),
        };
        let derived_entry = |name: &str, value: f64, formula: &str| LedgerEntry {
            name: name.into(),
            value,
            formula: formula.into(),
            source: "derived".into(),
        };
        let mut entries = vec![
            input("nu", inputs.nu, "inf |grad V|^2 / (V - min V) over N(S)"),
            input("nu_eb", inputs.nu_eb, "inf |grad V| / dist(x, S) over |x| >= R0"),
            input("C_g", inputs.c_g, "sup |Lap V| / |x|^2 over |x| >= R0"),
            input("R0", inputs.r0, "declared growth radius"),
            input("R1", inputs.r1, "radius of N(X)"),
            input("delta0", inputs.delta0, "min dist(x, S) over the boundary of N(S)"),
            input("g0", inputs.g0, "inf |grad V| outside N(S) and N(X)"),
            input("L", inputs.hessian_bound, "sup ||Hess V|| over N(S)"),
            input("M_Delta", inputs.laplacian_bound, "sup |Lap V| over |x| <= R0"),
            input(
                "mu_minus",
                inputs.mu_minus,
                if mu_minus_capped { "M_Delta / d (capped)" } else { "-sup lambda_max(Hess V) over N(X)" },
            ),
            derived_entry("C", c, "4 M_Delta / nu^2"),
            derived_entry("C_bar", c_bar, "4 L C"),
            derived_entry("max_ratio", max_ratio, "d mu_minus / (d mu_minus + M_Delta)"),
            derived_entry("ln_C_P", ln_cp, "ln(1/4) + ln(d mu_minus / (d mu_minus + M_Delta)) - 4 L C"),
            derived_entry("eps_error_bound", threshold.error_bound, "nu_eb^2 / (64 C_g)"),
            derived_entry("eps_neighbourhood", threshold.neighbourhood, "delta0^2 / C"),
            derived_entry("eps_gradient", threshold.gradient, "g0^2 / (4 M_Delta)"),
        ];
        if let (Some(r), Some(s)) = (threshold.reach, threshold.stability) {
            entries.push(derived_entry("eps_reach", r, "reach of S"));
            entries.push(derived_entry("eps_stability", s, "(1/C) (1/(2B))^2"));
        }
        entries.push(derived_entry("eps_max", threshold.value, "min of the eps_* bounds"));
        Ok(Self {
            inputs,
            derived,
            threshold,
            geometry,
            entries,
        })
    }

    /// Temperature at which both branches of `sigma` agree:
    /// `nu_eb^2 R0^2 / (64 d mu^-)`.
    pub fn branch_crossing(&self) -> f64 {
        let i = &self.inputs;
        i.nu_eb * i.nu_eb * i.r0 * i.r0 / (64.0 * i.d as f64 * i.mu_minus)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn threshold_of(inputs: &LedgerInputs, derived: &Derived, geometry: Option<&Geometry>) -> EpsilonThreshold {
    let error_bound = inputs.nu_eb * inputs.nu_eb / (64.0 * inputs.c_g);
    let neighbourhood = inputs.delta0 * inputs.delta0 / derived.c;
    let gradient = inputs.g0 * inputs.g0 / (4.0 * inputs.laplacian_bound);
    let reach = geometry.map(|g| g.reach);
    let stability = geometry.map(|g| (0.5 / g.stability_b).powi(2) / derived.c);
    let mut candidates = vec![
        ("error_bound", error_bound),
        ("neighbourhood", neighbourhood),
        ("gradient", gradient),
    ];
    if let (Some(r), Some(s)) = (reach, stability) {
        candidates.push(("reach", r));
        candidates.push(("stability", s));
    }
    let (binding, value) = candidates
        .into_iter()
        .fold(("", f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
    EpsilonThreshold {
        error_bound,
        neighbourhood,
        gradient,
        reach,
        stability,
        value,
        binding: binding.into(),
    }
}

/// Largest admissible temperature.
pub fn epsilon_threshold(ledger: &ConstantsLedger) -> f64 {
    ledger.threshold.value
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaBranch {
    /// `nu_eb^2 R0^2 / (128 eps^2)`.
    ErrorBound,
    /// `d mu^- / (2 eps)`.
    LocalMax,
}

/// Drift constants of the Lyapunov condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaB {
    pub eps: f64,
    pub sigma: f64,
    pub b: f64,
    pub branch: SigmaBranch,
    pub error_bound_branch: f64,
    pub local_max_branch: f64,
}

impl SigmaB {
    /// Both branches at `eps`, without the threshold check.
    pub fn evaluate(ledger: &ConstantsLedger, eps: f64) -> Self {
        let i = &ledger.inputs;
        let error_bound_branch = i.nu_eb * i.nu_eb * i.r0 * i.r0 / (128.0 * eps * eps);
        let local_max_branch = i.d as f64 * i.mu_minus / (2.0 * eps);
        let (sigma, branch) = if local_max_branch <= error_bound_branch {
            (local_max_branch, SigmaBranch::LocalMax)
        } else {
            (error_bound_branch, SigmaBranch::ErrorBound)
        };
        Self {
            eps,
            sigma,
            b: sigma + i.laplacian_bound / (2.0 * eps),
            branch,
            error_bound_branch,
            local_max_branch,
        }
    }
}

/// `sigma = min{nu_eb^2 R0^2/(128 eps^2), d mu^-/(2 eps)}` and
/// `b = sigma + M_Delta/(2 eps)` at an admissible temperature.
pub fn sigma_b(ledger: &ConstantsLedger, eps: f64) -> Result<SigmaB> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
    }
    if eps > ledger.threshold.value {
        return Err(Error::Precondition(format!(
            "eps = {eps} exceeds the admissible {:.6e} set by the {} bound",
            ledger.threshold.value, ledger.threshold.binding
        )));
    }
    Ok(SigmaB::evaluate(ledger, eps))
}

/// Probe densities for the region scans behind the ledger inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanResolution {
    /// Grid nodes per axis for the region probes.
    pub per_axis: usize,
    /// Lattice nodes per axis for critical points and `g0`.
    pub lattice: usize,
    /// Samples per axis on region boundaries.
    pub boundary: usize,
}

impl ScanResolution {
    pub fn for_dim(d: usize) -> Self {
        match d {
            1 => Self {
                per_axis: 4001,
                lattice: 4001,
                boundary: 2,
            },
            2 => Self {
                per_axis: 201,
                lattice: 241,
                boundary: 720,
            },
            _ => Self {
                per_axis: 41,
                lattice: 25,
                boundary: 60,
            },
        }
    }
}

/// Extremum of a scalar over region probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScan {
    pub region: RegionSpec,
    pub value: f64,
    pub worst_point: Vec<f64>,
    pub probes: usize,
}

/// Certificates and scans for every ledger input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifiedInputs {
    pub potential: String,
    pub d: usize,
    pub k: usize,
    pub pl: PLCertificate,
    /// Smallest of the `d - k` largest Hessian eigenvalues at the lowest
    /// probe of `N(S)`; zero at a degenerate minimum.
    pub normal_curvature: f64,
    pub error_bound: ErrorBoundCertificate,
    pub growth: GrowthCertificate,
    pub critical: CriticalPointReport,
    pub delta0: RegionScan,
    pub hessian_bound: RegionScan,
    pub laplacian_bound: RegionScan,
    /// `None` when there are no local maxima.
    pub mu_minus: Option<RegionScan>,
    pub r1: f64,
}

fn scan(
    field: &dyn ScalarField,
    region: &RegionSpec,
    probes: Vec<Vec<f64>>,
    f: impl Fn(&dyn ScalarField, &[f64]) -> f64 + Sync,
) -> Result<RegionScan> {
    if probes.is_empty() {
        return Err(Error::EmptyProbeSet(format!("{region:?}")));
    }
    let (i, value) = probes
        .par_iter()
        .map(|x| f(field, x))
        .enumerate()
        .reduce(|| (0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    Ok(RegionScan {
        region: region.clone(),
        value,
        worst_point: probes[i].clone(),
        probes: probes.len(),
    })
}

/// Runs every certificate and region scan on the declared neighbourhoods
/// of a catalog potential.
pub fn certify_inputs(potential: &Potential, res: ScanResolution) -> Result<CertifiedInputs> {
    let field: &dyn ScalarField = potential;
    let d = field.dim();
    let declared = potential.declared();
    let origin = vec![0.0; d];
    let n_s = declared
        .n_s
        .clone()
        .ok_or_else(|| Error::Precondition(format!("`{}` declares no neighbourhood of its optimal set", potential.name())))?;
    let plan = ProbePlan::grid(res.per_axis);

    let pl = certify_pl(field, &n_s, &plan)?;
    let k = field.optimal_set_dim().unwrap_or(0);
    let lowest = plan
        .probes(&n_s)?
        .into_iter()
        .map(|x| (field.value(&x), x))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, x)| x)
        .unwrap_or_default();
    let eig = hessian_eigenvalues(field, &lowest);
    let normal_curvature = eig.get(k).copied().unwrap_or(0.0);
    let far = RegionSpec::annulus(&origin, declared.r0, declared.outer_radius);
    let error_bound = certify_error_bound(field, &far, &plan)?;
    let growth = certify_growth(field, declared.r0, &plan)?;

    let mut excluded = vec![n_s.clone()];
    excluded.extend(declared.n_x.clone());
    let lattice = LatticeSpec::new(declared.search_box.clone().without(excluded), res.lattice);
    let critical = locate_critical_points(field, &lattice)?;

    let boundary = n_s.boundary_samples(res.boundary);
    let delta0 = scan(field, &n_s, boundary, |f, x| -distance_to_optimal_set(f, x))?;
    let delta0 = RegionScan {
        value: -delta0.value,
        ..delta0
    };
    let hessian_bound = scan(field, &n_s, plan.probes(&n_s)?, |f, x| {
        let (lo, hi) = hessian_extremes(f, x);
        lo.abs().max(hi.abs())
    })?;
    let inner = RegionSpec::ball(&origin, declared.r0);
    let laplacian_bound = scan(field, &inner, plan.probes(&inner)?, |f, x| f.laplacian(x).abs())?;
    let (mu_minus, r1) = match &declared.n_x {
        Some(n_x) => {
            let s = scan(field, n_x, plan.probes(n_x)?, |f, x| hessian_extremes(f, x).1)?;
            let r1 = match n_x {
                RegionSpec::Ball { radius, .. } => *radius,
                other => {
                    let (lo, hi) = other.bounding_box();
                    lo.iter().zip(&hi).map(|(a, b)| 0.5 * (b - a)).fold(f64::INFINITY, f64::min)
                }
            };
            (
                Some(RegionScan {
                    value: -s.value,
                    ..s
                }),
                r1,
            )
        }
        None => (None, 0.0),
    };
    Ok(CertifiedInputs {
        potential: potential.name().to_owned(),
        d,
        k,
        pl,
        normal_curvature,
        error_bound,
        growth,
        critical,
        delta0,
        hessian_bound,
        laplacian_bound,
        mu_minus,
        r1,
    })
}

/// Relative size below which a normal Hessian eigenvalue counts as zero.
const DEGENERACY_TOL: f64 = 1e-6;

/// Ledger from certificates; refused, with the failing assumption named,
/// unless every certificate passes.
pub fn build_ledger(certs: &CertifiedInputs) -> Result<ConstantsLedger> {
    let fail = |what: &str| Err(Error::CertificateFailed(format!("{}: {what}", certs.potential)));
    if !certs.pl.passed() {
        return fail(&format!(
            "local PL inequality on N(S) (nu_hat = {}, low confidence = {})",
            certs.pl.nu_hat, certs.pl.low_confidence
        ));
    }
    if !(certs.normal_curvature > DEGENERACY_TOL * certs.hessian_bound.value.max(1.0)) {
        return fail(&format!(
            "local PL inequality on N(S): Hessian degenerate across the optimal set (curvature {})",
            certs.normal_curvature
        ));
    }
    if !(certs.error_bound.nu_eb_hat > 0.0) {
        return fail("error bound inequality beyond R0");
    }
    if !certs.critical.is_pl_compatible() {
        return fail("no saddles or degenerate critical points off the optimal set");
    }
    if !(certs.critical.g0 > 0.0) {
        return fail("gradient floor g0 outside N(S) and N(X)");
    }
    if !(certs.delta0.value > 0.0) {
        return fail("N(S) boundary separated from S");
    }
    let maxima = certs.critical.count(CriticalKind::Max);
    let mu_minus = match &certs.mu_minus {
        Some(s) if s.value > 0.0 => s.value,
        Some(_) => return fail("Hessian negative definite on N(X)"),
        None if maxima > 0 => return fail("local maxima present but no N(X) declared"),
        // without local maxima the branch is never needed; the cap value keeps
        // the formulas finite
        None => certs.laplacian_bound.value / certs.d as f64,
    };
    let inputs = LedgerInputs {
        potential: certs.potential.clone(),
        d: certs.d,
        k: certs.k,
        nu: certs.pl.nu_hat,
        nu_eb: certs.error_bound.nu_eb_hat,
        c_g: certs.growth.c_g,
        r0: certs.growth.r0,
        r1: certs.r1,
        delta0: certs.delta0.value,
        g0: certs.critical.g0,
        hessian_bound: certs.hessian_bound.value,
        laplacian_bound: certs.laplacian_bound.value,
        mu_minus,
    };
    let where_ = |x: &[f64], n: usize| format!("worst probe {x:?} of {n}");
    let sources = vec![
        ("nu".to_owned(), format!("PL certificate, {}", where_(&certs.pl.worst_point, certs.pl.sample_count))),
        (
            "nu_eb".to_owned(),
            format!(
                "error-bound certificate, {}",
                where_(&certs.error_bound.worst_point, certs.error_bound.sample_count)
            ),
        ),
        (
            "C_g".to_owned(),
            format!("growth certificate, {}", where_(&certs.growth.worst_point, certs.growth.sample_count)),
        ),
        ("delta0".to_owned(), format!("boundary scan, {}", where_(&certs.delta0.worst_point, certs.delta0.probes))),
        ("g0".to_owned(), format!("critical-point lattice, attained at {:?}", certs.critical.g0_point)),
        (
            "L".to_owned(),
            format!("Hessian scan, {}", where_(&certs.hessian_bound.worst_point, certs.hessian_bound.probes)),
        ),
        (
            "M_Delta".to_owned(),
            format!("Laplacian scan, {}", where_(&certs.laplacian_bound.worst_point, certs.laplacian_bound.probes)),
        ),
        (
            "mu_minus".to_owned(),
            match &certs.mu_minus {
                Some(s) => format!("Hessian scan over N(X), {}", where_(&s.worst_point, s.probes)),
                None => "no local maxima; set to M_Delta / d".to_owned(),
            },
        ),
    ];
    ConstantsLedger::assemble(inputs, None, sources)
}
