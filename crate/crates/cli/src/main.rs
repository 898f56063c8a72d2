use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use poincare_lab_cli::{run, validate_config, Experiment, ExperimentConfig, THREADS_ENV};

#[derive(Parser)]
#[command(name = "poincare-lab", version, about = "Poincaré constants and Langevin mixing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its report under the output directory.
    Run(RunArgs),
    /// Check a config file and print it with defaults filled in.
    Validate { file: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(value_enum)]
    experiment: Experiment,
    /// Config file; flags take precedence over its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    potential: Option<String>,
    #[arg(long)]
    manifold: Option<String>,
    /// Comma-separated temperatures.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Comma-separated tube radii.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Grid spacing.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Replace the certified curvature bound at local maxima.
    #[arg(long)]
    mu_minus: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    validate_config(&text).map_err(|errs| {
        errs.iter()
            .map(|e| format!("{}: {e}", path.display()))
            .collect::<Vec<_>>()
            .join("\n")
    })
}

fn resolve(a: RunArgs) -> Result<ExperimentConfig, String> {
    let mut c = match &a.config {
        Some(p) => load(p)?.with_experiment(a.experiment),
        None => ExperimentConfig::for_experiment(a.experiment),
    };
    if let Some(v) = a.potential {
        c.potential = v;
    }
    if let Some(v) = a.manifold {
        c.manifold = v;
    }
    if let Some(v) = a.eps {
        c.eps = v;
    }
    if let Some(v) = a.radii {
        c.radii = v;
    }
    c.h = a.h.or(c.h);
    c.seed = a.seed.unwrap_or(c.seed);
    c.mu_minus = a.mu_minus.or(c.mu_minus);
    if let Some(v) = a.out {
        c.out = v;
    }
    let errs = c.check();
    if errs.is_empty() {
        Ok(c)
    } else {
        Err(errs.join("\n"))
    }
}

fn init_threads() -> Result<(), String> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = raw.parse().map_err(|_| format!("{THREADS_ENV} must be a thread count, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match cli.command {
        Command::Validate { file } => match load(&file) {
            Ok(c) => {
                print!("{}", c.to_text());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
        Command::Run(args) => {
            let config = match resolve(args) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let report = run(&config);
            match report.write() {
                Ok(dir) => eprintln!("wrote {}", dir.display()),
                Err(e) => {
                    eprintln!("error: writing report: {e}");
                    return ExitCode::from(2);
                }
            }
            print!("{}", report.summary());
            if report.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
