//! Experiment configuration: a flat `key = value` file (TOML syntax), with
//! command-line flags layered on top.

use std::fmt;
use std::path::PathBuf;

use clap::ValueEnum;
use poincare_lab::spectral::config_hash;
use serde::{Deserialize, Serialize};

/// Named pipelines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Certify,
    Ledger,
    Lyapunov,
    Spectrum,
    Tube,
    LbGap,
    Sweep,
    Weyl,
    Report,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Certify,
        Experiment::Ledger,
        Experiment::Lyapunov,
        Experiment::Spectrum,
        Experiment::Tube,
        Experiment::LbGap,
        Experiment::Sweep,
        Experiment::Weyl,
        Experiment::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Certify => "certify",
            Experiment::Ledger => "ledger",
            Experiment::Lyapunov => "lyapunov",
            Experiment::Spectrum => "spectrum",
            Experiment::Tube => "tube",
            Experiment::LbGap => "lb-gap",
            Experiment::Sweep => "sweep",
            Experiment::Weyl => "weyl",
            Experiment::Report => "report",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }

    /// Temperatures used when none are given.
    pub fn default_eps(self) -> Vec<f64> {
        match self {
            Experiment::Lyapunov => vec![0.001],
            Experiment::Spectrum => vec![0.05, 0.02, 0.01],
            Experiment::Sweep => vec![0.05, 0.04, 0.03],
            _ => Vec::new(),
        }
    }

    /// Tube radii used when none are given.
    pub fn default_radii(self) -> Vec<f64> {
        match self {
            Experiment::Tube => vec![0.2, 0.1, 0.05, 0.025],
            Experiment::Weyl => vec![0.1],
            _ => Vec::new(),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub potential: String,
    pub manifold: String,
    /// Temperatures.
    pub eps: Vec<f64>,
    /// Tube radii.
    pub radii: Vec<f64>,
    /// Grid spacing; each experiment picks its own when absent.
    pub h: Option<f64>,
    pub seed: u64,
    /// Overrides the certified curvature bound at local maxima.
    pub mu_minus: Option<f64>,
    pub out: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::for_experiment(Experiment::Certify)
    }
}

/// Keys accepted in a config file.
pub const KEYS: [&str; 9] = ["experiment", "potential", "manifold", "eps", "radii", "h", "seed", "mu_minus", "out"];

/// One problem found while reading a config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(k) => write!(f, "line {}: `{k}`: {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: Experiment) -> Self {
        Self {
            experiment,
            potential: "circle2d".into(),
            manifold: "circle".into(),
            eps: experiment.default_eps(),
            radii: experiment.default_radii(),
            h: None,
            seed: 0,
            mu_minus: None,
            out: PathBuf::from("out"),
        }
    }

    /// Switches the experiment, replacing list defaults that belonged to
    /// the previous one.
    pub fn with_experiment(mut self, experiment: Experiment) -> Self {
        if self.eps == self.experiment.default_eps() {
            self.eps = experiment.default_eps();
        }
        if self.radii == self.experiment.default_radii() {
            self.radii = experiment.default_radii();
        }
        self.experiment = experiment;
        self
    }

    /// Positivity and range checks shared by files and flags.
    pub fn check(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            errs.push(format!("eps values must be positive, got {e}"));
        }
        if let Some(r) = self.radii.iter().find(|r| !(**r > 0.0 && r.is_finite())) {
            errs.push(format!("radii must be positive, got {r}"));
        }
        if let Some(h) = self.h.filter(|h| !(*h > 0.0 && h.is_finite())) {
            errs.push(format!("h must be positive, got {h}"));
        }
        if let Some(m) = self.mu_minus.filter(|m| !(*m > 0.0 && m.is_finite())) {
            errs.push(format!("mu_minus must be positive, got {m}"));
        }
        errs
    }

    /// Content hash of everything except the output directory.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        v.as_object_mut().expect("config is an object").remove("out");
        config_hash(&v).expect("config hashes")
    }

    /// Directory name `<experiment>-<hash prefix>`.
    pub fn run_id(&self) -> String {
        format!("{}-{}", self.experiment, &self.hash()[..12])
    }

    /// The config in file syntax, every key present.
    pub fn to_text(&self) -> String {
        let list = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ");
        let mut s = format!(
            "experiment = \"{}\"\npotential = \"{}\"\nmanifold = \"{}\"\neps = [{}]\nradii = [{}]\n",
            self.experiment,
            self.potential,
            self.manifold,
            list(&self.eps),
            list(&self.radii)
        );
        match self.h {
            Some(h) => s.push_str(&format!("h = {h:?}\n")),
            None => s.push_str("# h = (per experiment)\n"),
        }
        s.push_str(&format!("seed = {}\n", self.seed));
        match self.mu_minus {
            Some(m) => s.push_str(&format!("mu_minus = {m:?}\n")),
            None => s.push_str("# mu_minus = (certified)\n"),
        }
        s.push_str(&format!("out = {:?}\n", self.out.display().to_string()));
        s
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn as_number(v: &toml::Value) -> Option<f64> {
    v.as_float().or_else(|| v.as_integer().map(|i| i as f64))
}

fn as_list(v: &toml::Value) -> Option<Vec<f64>> {
    match v {
        toml::Value::Array(a) => a.iter().map(as_number).collect(),
        other => as_number(other).map(|x| vec![x]),
    }
}

/// Parses a config file, injecting defaults for missing keys. Every
/// problem is reported with its line number.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let (doc, syntax) = toml::de::DeTable::parse_recoverable(raw);
    let mut errors: Vec<ConfigError> = syntax
        .iter()
        .map(|e| ConfigError {
            line: e.span().map_or(1, |s| line_of(raw, s.start)),
            key: None,
            message: e.message().to_owned(),
        })
        .collect();
    if !errors.is_empty() {
        return Err(errors);
    }
    let table: toml::Table = match raw.parse() {
        Ok(t) => t,
        Err(e) => {
            return Err(vec![ConfigError {
                line: e.span().map_or(1, |s| line_of(raw, s.start)),
                key: None,
                message: e.message().to_owned(),
            }])
        }
    };
    let lines: Vec<(String, usize)> = doc
        .get_ref()
        .keys()
        .map(|k| (k.get_ref().to_string(), line_of(raw, k.span().start)))
        .collect();
    let line = |key: &str| lines.iter().find(|(k, _)| k == key).map_or(1, |(_, l)| *l);

    let experiment = match table.get("experiment") {
        None => Experiment::Certify,
        Some(v) => match v.as_str().and_then(Experiment::parse) {
            Some(e) => e,
            None => {
                errors.push(ConfigError {
                    line: line("experiment"),
                    key: Some("experiment".into()),
                    message: format!(
                        "expected one of {}",
                        Experiment::ALL.map(|e| e.name()).join(", ")
                    ),
                });
                Experiment::Certify
            }
        },
    };
    let mut cfg = ExperimentConfig::for_experiment(experiment);
    for (key, value) in &table {
        let mut bad = |message: String| {
            errors.push(ConfigError {
                line: line(key),
                key: Some(key.clone()),
                message,
            })
        };
        match key.as_str() {
            "experiment" => {}
            "potential" | "manifold" | "out" => match value.as_str() {
                Some(s) if key == "potential" => cfg.potential = s.into(),
                Some(s) if key == "manifold" => cfg.manifold = s.into(),
                Some(s) => cfg.out = s.into(),
                None => bad(format!("expected a string, got {}", value.type_str())),
            },
            "eps" | "radii" => match as_list(value) {
                Some(v) if v.iter().all(|x| *x > 0.0 && x.is_finite()) => {
                    if key == "eps" {
                        cfg.eps = v
                    } else {
                        cfg.radii = v
                    }
                }
                Some(v) => bad(format!("values must be positive, got {v:?}")),
                None => bad("expected a number or a list of numbers".into()),
            },
            "h" | "mu_minus" => match as_number(value) {
                Some(x) if x > 0.0 && x.is_finite() => {
                    if key == "h" {
                        cfg.h = Some(x)
                    } else {
                        cfg.mu_minus = Some(x)
                    }
                }
                Some(x) => bad(format!("must be positive, got {x}")),
                None => bad(format!("expected a number, got {}", value.type_str())),
            },
            "seed" => match value.as_integer() {
                Some(s) if s >= 0 => cfg.seed = s as u64,
                _ => bad("expected a nonnegative integer".into()),
            },
            _ => bad(format!("unknown key (known: {})", KEYS.join(", "))),
        }
    }
    if errors.is_empty() {
        Ok(cfg)
    } else {
        errors.sort_by_key(|e| e.line);
        Err(errors)
    }
}
