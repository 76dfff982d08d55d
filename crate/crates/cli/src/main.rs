//! Command-line front end: configuration-driven computation of quantum and
//! classical Fisher information matrices for multi-source localisation.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 numerical failure
//! (conditioning, quadrature, degenerate analysis input), 4 convergence
//! failure of the self-refining computations, 1 anything else (I/O).

mod config;
mod output;
mod presets;
mod run;

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use locfim::spectra::DEFAULT_CRB_TOLERANCE;
use locfim::{analytic_qfim, converged_qfim, crb_bound, relative_deviation, SourceConfig64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use config::{OutputFormat, RunConfig};
use output::{CrbSummary, Sidecar, SidecarDiagnostics, SpectrumSummary};
use run::{evaluate_point, evaluate_sweep, fit_sweep};

/// Largest analytic-versus-spectral deviation the oracle check accepts.
const ORACLE_TOLERANCE: f64 = 1e-6;
/// Smallest pairwise separation of generated oracle-check scenes.
const ORACLE_MIN_SEPARATION: f64 = 0.05;
/// Positions of generated oracle-check scenes stay within this bound.
const ORACLE_MAX_ALPHA: f64 = 2.0;

/// A failed run, classified by exit code.
#[derive(Debug)]
pub enum Failure {
    /// Unparseable or inconsistent configuration (exit 2).
    Config(String),
    /// The computation itself broke down (exit 3).
    Numerical(String),
    /// A self-refining computation did not settle (exit 4).
    Convergence(String),
    /// Filesystem trouble (exit 1).
    Io(String),
}

impl Failure {
    fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Convergence(_) => 4,
            Failure::Io(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(msg) => write!(f, "invalid configuration: {msg}"),
            Failure::Numerical(msg) => write!(f, "numerical failure: {msg}"),
            Failure::Convergence(msg) => write!(f, "convergence failure: {msg}"),
            Failure::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<locfim::Error> for Failure {
    fn from(e: locfim::Error) -> Self {
        use locfim::Error::*;
        let message = e.to_string();
        match e {
            EmptyConfig
            | LengthMismatch { .. }
            | NonpositiveWeight { .. }
            | NonpositiveWidth { .. }
            | NonFiniteInput
            | CoincidentSources { .. }
            | InvalidDetection { .. } => Failure::Config(message),
            ConditioningFailure { .. }
            | DegenerateQubitState { .. }
            | QuadratureNonConvergence { .. }
            | DegenerateFit { .. }
            | InsufficientSweep { .. }
            | SingularTransform => Failure::Numerical(message),
            ConvergenceFailure { .. } | TruncationInsufficient { .. } => {
                Failure::Convergence(message)
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "locfim",
    version,
    about = "Fisher information matrices for localising weak point sources",
    after_help = "Exit codes: 0 success, 2 invalid config, 3 numerical failure, 4 convergence failure."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one computation over a sweep or a single scene.
    Run(RunArgs),
    /// Evaluate the computation and its `versus` slot on the same sweep.
    Compare(RunArgs),
    /// Cross-check the closed-form matrix against the spectral computation
    /// on randomized scenes.
    OracleCheck(OracleArgs),
    /// Run a bundled figure preset.
    Preset(PresetArgs),
    /// List the bundled presets.
    Presets,
}

#[derive(Args)]
struct RunArgs {
    /// Path to a JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct PresetArgs {
    /// Preset name (see `locfim presets`).
    name: String,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Output data file; overrides the config's output.path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format; overrides the config's output.format.
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Worker threads for sweep evaluation (0 means one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct OracleArgs {
    /// Seed of the scene generator.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Sources per scene.
    #[arg(long, default_value_t = 3)]
    sources: usize,
    /// Number of random scenes.
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(arg: FormatArg) -> Self {
        match arg {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(failure) = dispatch(cli.command) {
        eprintln!("error: {failure}");
        std::process::exit(failure.exit_code());
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => {
            let config = load_config(&args.config)?;
            execute(config, &args.common, false, "run", None)
        }
        Command::Compare(args) => {
            let config = load_config(&args.config)?;
            execute(config, &args.common, true, "compare", None)
        }
        Command::Preset(args) => {
            let Some(text) = presets::lookup(&args.name) else {
                return Err(Failure::Config(format!(
                    "unknown preset {:?}; available presets:\n{}",
                    args.name,
                    presets::catalogue()
                )));
            };
            let config: RunConfig = serde_json::from_str(text)
                .expect("bundled presets are validated by the test suite");
            let comparing = config.versus.is_some();
            let command = format!("preset {}", args.name);
            execute(config, &args.common, comparing, &command, Some(&args.name))
        }
        Command::OracleCheck(args) => oracle_check(&args),
        Command::Presets => {
            println!("{}", presets::catalogue());
            Ok(())
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

/// Resolve output selection, run the computation(s), write data file and
/// sidecar.
fn execute(
    mut config: RunConfig,
    args: &CommonArgs,
    comparing: bool,
    command: &str,
    preset_name: Option<&str>,
) -> Result<(), Failure> {
    config::validate(&config, comparing)?;

    let format: OutputFormat = args
        .format
        .map(Into::into)
        .or(config.output.as_ref().map(|o| o.format))
        .unwrap_or_default();
    let path: PathBuf = args
        .out
        .clone()
        .or_else(|| {
            config
                .output
                .as_ref()
                .and_then(|o| o.path.as_ref())
                .map(PathBuf::from)
        })
        .or_else(|| preset_name.map(|name| PathBuf::from(format!("{name}.{}", format.extension()))))
        .ok_or_else(|| Failure::Config("no output path: set output.path or pass --out".into()))?;
    // The sidecar records the selection that was actually used.
    config.output = Some(config::OutputSpec {
        format,
        path: Some(path.to_string_lossy().into_owned()),
    });

    let pattern = config::resolve_pattern(&config)?;
    let psf = config::resolve_psf(&config)?;
    let budget = config::resolve_budget(&config)?;

    let body = || -> Result<(), Failure> {
        match (&config.sweep, comparing) {
            (Some(sweep), false) => {
                let grid = sweep.grid();
                let rows = evaluate_sweep(&config, &pattern, &psf, config.computation, &grid)?;
                let fit = if config.analysis.fit {
                    Some(fit_sweep(&rows)?)
                } else {
                    None
                };
                output::write_sweep(&path, format, &rows, fit.as_ref())?;
                let diagnostics =
                    SidecarDiagnostics::Single(rows.iter().map(|r| r.diagnostics).collect());
                write_sidecar(
                    &path,
                    command,
                    &config,
                    diagnostics,
                    fit.as_ref(),
                    None,
                    None,
                )?;
                println!(
                    "{}: {} sweep points -> {}",
                    config.computation.label(),
                    rows.len(),
                    path.display()
                );
                if let Some(fit) = &fit {
                    for branch in &fit.branches {
                        println!(
                            "  eigenvalue {} scales with exponent {:.3} (stderr {:.1e})",
                            branch.eigenvalue, branch.slope, branch.stderr
                        );
                    }
                }
                Ok(())
            }
            (Some(sweep), true) => {
                let versus = config.versus.expect("validated");
                let grid = sweep.grid();
                let primary = evaluate_sweep(&config, &pattern, &psf, config.computation, &grid)?;
                let second = evaluate_sweep(&config, &pattern, &psf, versus, &grid)?;
                output::write_compare(&path, format, &primary, &second)?;
                let diagnostics = SidecarDiagnostics::Paired {
                    primary: primary.iter().map(|r| r.diagnostics).collect(),
                    versus: second.iter().map(|r| r.diagnostics).collect(),
                };
                write_sidecar(&path, command, &config, diagnostics, None, None, None)?;
                println!(
                    "{} vs {}: {} sweep points -> {}",
                    config.computation.label(),
                    versus.label(),
                    primary.len(),
                    path.display()
                );
                Ok(())
            }
            (None, false) => {
                let row = evaluate_point(&config, &pattern, &psf, config.computation, 1.0)?;
                output::write_dump(&path, format, &row.matrix)?;
                let spectrum = row.report.as_ref().map(|report| SpectrumSummary {
                    eigenvalues: report.eigenvalues().to_vec(),
                    rank: report.rank(),
                });
                let crb = match (&budget, config.analysis.crb) {
                    (Some(budget), true) => {
                        let bound = crb_bound(&row.matrix, budget, DEFAULT_CRB_TOLERANCE);
                        let matrix = bound.matrix();
                        Some(CrbSummary {
                            support_dim: bound.support_dim(),
                            matrix: (0..matrix.nrows())
                                .map(|i| (0..matrix.ncols()).map(|j| matrix[(i, j)]).collect())
                                .collect(),
                        })
                    }
                    _ => None,
                };
                let diagnostics = SidecarDiagnostics::Single(vec![row.diagnostics]);
                write_sidecar(&path, command, &config, diagnostics, None, spectrum, crb)?;
                println!(
                    "{}: {}x{} matrix -> {}",
                    config.computation.label(),
                    row.matrix.dim(),
                    row.matrix.dim(),
                    path.display()
                );
                Ok(())
            }
            (None, true) => unreachable!("compare without a sweep is rejected by validation"),
        }
    };

    if args.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(args.workers)
            .build()
            .map_err(|e| Failure::Io(format!("cannot build worker pool: {e}")))?;
        pool.install(body)
    } else {
        body()
    }
}

#[allow(clippy::too_many_arguments)]
fn write_sidecar(
    path: &Path,
    command: &str,
    config: &RunConfig,
    diagnostics: SidecarDiagnostics,
    fit: Option<&run::FitSummary>,
    spectrum: Option<SpectrumSummary>,
    crb: Option<CrbSummary>,
) -> Result<(), Failure> {
    let sidecar = Sidecar {
        tool: "locfim",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config,
        diagnostics,
        fit,
        spectrum,
        crb,
    };
    output::write_sidecar(path, &sidecar)
}

/// Generate random scenes and compare the closed-form matrix against the
/// self-converging spectral computation, element by element.
fn oracle_check(args: &OracleArgs) -> Result<(), Failure> {
    if args.sources < 1 {
        return Err(Failure::Config(
            "oracle check needs at least one source".into(),
        ));
    }
    if args.trials < 1 {
        return Err(Failure::Config(
            "oracle check needs at least one trial".into(),
        ));
    }
    let psf = locfim::Psf64::gaussian(1.0).expect("unit width is valid");
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut worst: f64 = 0.0;
    for trial in 1..=args.trials {
        let scene = random_scene(&mut rng, args.sources);
        let closed = analytic_qfim(&scene)?;
        let spectral = converged_qfim(&scene, &psf)?;
        let deviation = relative_deviation(closed.entries(), spectral.matrix.entries());
        println!(
            "trial {trial:3}: {} sources, basis dimension {:3}, relative deviation {deviation:.3e}",
            args.sources, spectral.dim
        );
        worst = worst.max(deviation);
    }
    println!(
        "worst relative deviation over {} scenes: {worst:.3e} (tolerance {ORACLE_TOLERANCE:.0e})",
        args.trials
    );
    if worst <= ORACLE_TOLERANCE {
        println!("oracle check passed");
        Ok(())
    } else {
        Err(Failure::Numerical(format!(
            "closed form and spectral computation disagree by {worst:.3e}"
        )))
    }
}

/// Random scene with the separation and extent guarantees the closed form
/// is specified for.
fn random_scene(rng: &mut ChaCha8Rng, n: usize) -> SourceConfig64 {
    let alphas = loop {
        let mut draw: Vec<f64> = (0..n)
            .map(|_| rng.gen_range(-ORACLE_MAX_ALPHA..ORACLE_MAX_ALPHA))
            .collect();
        draw.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
        if draw
            .windows(2)
            .all(|pair| pair[1] - pair[0] >= ORACLE_MIN_SEPARATION)
        {
            break draw;
        }
    };
    let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    SourceConfig64::new(&alphas, &weights).expect("separated scenes are valid")
}
