//! `nsdyn` command-line front end.
//!
//! Every run is described by a [`RunConfig`]; flags and `--config file.json`
//! fill the same structure (flags win), so a run given either way produces
//! the same bytes.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use nsdyn_core::counterexample::{escape_experiment, EscapeConfig, DEFAULT_K_MAX};
use nsdyn_core::engine::{run, InterpolatedPath, RunOptions, SelectionPolicy};
use nsdyn_core::flow::{integrate_flow, sup_deviation};
use nsdyn_core::prober::{
    convex_bounds_report, default_alpha_grid, default_delta_grid, estimate_lipschitz, probe,
    StabilityQuery, StabilityVerdict, DEFAULT_PROBE_SAMPLES, PROBE_LIPSCHITZ_SAMPLES,
};
use nsdyn_core::report::{render, to_json_string, write_trajectory_csv, Format, Reportable};
use nsdyn_core::{list_catalog, CatalogFunction, Error, FunctionId, Vector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DIVERGED: i32 = 3;

/// Overrides `--seed` when set.
pub const SEED_ENV: &str = "NSDYN_SEED";

const DEFAULT_FLOW_STEP: f64 = 1e-4;
const DEFAULT_BOUND_STEPS: usize = 1000;
const DEFAULT_ESCAPE_EPSILON: f64 = 0.25;
const DEFAULT_ESCAPE_ALPHA: f64 = 0.1;
const DEFAULT_ESCAPE_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ListFunctions,
    Simulate,
    Flow,
    Compare,
    Probe,
    Counterexample,
    ConvexBounds,
}

/// Fully merged run description.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<Command>,
    pub function: Option<FunctionId>,
    pub dim: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub xstar: Option<Vec<f64>>,
    pub alpha: Option<f64>,
    pub steps: Option<usize>,
    pub horizon: Option<f64>,
    pub h: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub delta_grid: Option<Vec<f64>>,
    pub alpha_grid: Option<Vec<f64>>,
    pub samples: Option<usize>,
    pub k_max: Option<usize>,
    pub seed: Option<u64>,
    pub policy: Option<SelectionPolicy>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
}

impl RunConfig {
    /// Field-wise `self` over `base`.
    pub fn overlay(self, base: RunConfig) -> RunConfig {
        RunConfig {
            command: self.command.or(base.command),
            function: self.function.or(base.function),
            dim: self.dim.or(base.dim),
            x0: self.x0.or(base.x0),
            xstar: self.xstar.or(base.xstar),
            alpha: self.alpha.or(base.alpha),
            steps: self.steps.or(base.steps),
            horizon: self.horizon.or(base.horizon),
            h: self.h.or(base.h),
            epsilon: self.epsilon.or(base.epsilon),
            delta: self.delta.or(base.delta),
            delta_grid: self.delta_grid.or(base.delta_grid),
            alpha_grid: self.alpha_grid.or(base.alpha_grid),
            samples: self.samples.or(base.samples),
            k_max: self.k_max.or(base.k_max),
            seed: self.seed.or(base.seed),
            policy: self.policy.or(base.policy),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "nsdyn",
    version,
    about = "Constant-step subgradient dynamics, subgradient flow and stability probes"
)]
struct Cli {
    /// Operation to run (may come from --config instead).
    #[arg(value_enum)]
    command: Option<Command>,
    /// JSON run description; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    function: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Initial point, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    x0: Option<String>,
    /// Probe center, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    xstar: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Flow node spacing.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    delta_grid: Option<String>,
    #[arg(long)]
    alpha_grid: Option<String>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// minimal_norm | random_extreme | fixed_index:<i>
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

type CliResult<T> = Result<T, CliError>;

fn parse_list(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("cannot parse `{p}` as a number in `{s}`")))
        })
        .collect()
}

impl Cli {
    fn into_config(self) -> CliResult<(RunConfig, Option<PathBuf>)> {
        let opt_list = |s: Option<String>| s.as_deref().map(parse_list).transpose();
        let cfg = RunConfig {
            command: self.command,
            function: self
                .function
                .map(|s| s.parse().map_err(|e: Error| CliError::Usage(e.to_string())))
                .transpose()?,
            dim: self.dim,
            x0: opt_list(self.x0)?,
            xstar: opt_list(self.xstar)?,
            alpha: self.alpha,
            steps: self.steps,
            horizon: self.horizon,
            h: self.h,
            epsilon: self.epsilon,
            delta: self.delta,
            delta_grid: opt_list(self.delta_grid)?,
            alpha_grid: opt_list(self.alpha_grid)?,
            samples: self.samples,
            k_max: self.k_max,
            seed: self.seed,
            policy: self
                .policy
                .map(|s| s.parse().map_err(|e: Error| CliError::Usage(e.to_string())))
                .transpose()?,
            out: self.out,
            format: self
                .format
                .map(|s| s.parse().map_err(|e: Error| CliError::Usage(e.to_string())))
                .transpose()?,
        };
        Ok((cfg, self.config))
    }
}

/// Parses flags (and an optional `--config` file) into a merged config.
pub fn parse_config<I, T>(argv: I, env_seed: Option<&str>) -> Result<RunConfig, String>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = std::iter::once(OsString::from("nsdyn")).chain(argv.into_iter().map(Into::into));
    let cli = Cli::try_parse_from(args).map_err(|e| e.to_string())?;
    let (flags, config_path) = cli.into_config().map_err(|e| match e {
        CliError::Usage(m) => m,
        CliError::Core(e) => e.to_string(),
    })?;
    let base = match config_path {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            serde_json::from_str::<RunConfig>(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => RunConfig::default(),
    };
    let mut cfg = flags.overlay(base);
    if let Some(s) = env_seed {
        cfg.seed = Some(
            s.trim()
                .parse()
                .map_err(|_| format!("{SEED_ENV}=`{s}` is not an unsigned integer"))?,
        );
    }
    Ok(cfg)
}

/// Entry point used by the binary; reads `NSDYN_SEED` from the environment.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let env_seed = std::env::var(SEED_ENV).ok();
    run_command_with(
        argv,
        env_seed.as_deref(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    )
}

/// Runs one invocation; results go to `--out` or `stdout`, diagnostics to `stderr`.
pub fn run_command_with<I, T>(
    argv: I,
    env_seed: Option<&str>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    if let Err(e) =
        Cli::try_parse_from(std::iter::once(OsString::from("nsdyn")).chain(argv.iter().cloned()))
    {
        if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    }
    let cfg = match parse_config(argv, env_seed) {
        Ok(cfg) => cfg,
        Err(msg) => return usage(stderr, &msg),
    };
    match execute(&cfg, stdout) {
        Ok(code) => code,
        Err(CliError::Usage(msg)) => usage(stderr, &msg),
        Err(CliError::Core(e)) => {
            let _ = writeln!(stderr, "error: {e}");
            match e {
                Error::NonFiniteState { .. } => EXIT_DIVERGED,
                Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_FAILURE,
                _ => {
                    let _ = writeln!(stderr, "{}", Cli::command().render_long_help());
                    EXIT_USAGE
                }
            }
        }
    }
}

fn usage(stderr: &mut dyn Write, msg: &str) -> i32 {
    let _ = writeln!(stderr, "{}", msg.trim_end());
    let _ = writeln!(stderr, "{}", Cli::command().render_long_help());
    EXIT_USAGE
}

fn need<T: Clone>(v: &Option<T>, flag: &str) -> CliResult<T> {
    v.clone()
        .ok_or_else(|| CliError::Usage(format!("missing required flag --{flag}")))
}

fn function_for(cfg: &RunConfig, point: Option<&Vec<f64>>) -> CliResult<CatalogFunction> {
    let id = need(&cfg.function, "function")?;
    let dim = cfg.dim.or(point.map(Vec::len));
    Ok(match dim {
        Some(d) => CatalogFunction::new(id, d)?,
        None => CatalogFunction::with_default_dim(id),
    })
}

fn emit<R: Reportable + ?Sized>(
    cfg: &RunConfig,
    result: &R,
    default: Format,
    stdout: &mut dyn Write,
) -> CliResult<()> {
    let bytes = render(result, cfg.format.unwrap_or(default))?;
    match &cfg.out {
        Some(path) => fs::write(path, bytes)?,
        None => stdout.write_all(&bytes)?,
    }
    Ok(())
}

fn execute(cfg: &RunConfig, stdout: &mut dyn Write) -> CliResult<i32> {
    let command = need(&cfg.command, "command (positional)")?;
    let seed = cfg.seed.unwrap_or(0);
    let policy = cfg.policy.unwrap_or_default();
    match command {
        Command::ListFunctions => {
            emit(cfg, &list_catalog(), Format::Json, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Simulate => {
            let x0 = need(&cfg.x0, "x0")?;
            let f = function_for(cfg, Some(&x0))?;
            let opts = RunOptions::new(need(&cfg.alpha, "alpha")?, need(&cfg.steps, "steps")?)
                .policy(policy)
                .seed(seed);
            let traj = run(&f, &Vector::new(x0)?, &opts)?;
            emit(cfg, &traj, Format::Csv, stdout)?;
            Ok(if traj.diverged_at.is_some() {
                EXIT_DIVERGED
            } else {
                EXIT_OK
            })
        }
        Command::Flow => {
            let x0 = need(&cfg.x0, "x0")?;
            let f = function_for(cfg, Some(&x0))?;
            let sol = integrate_flow(
                &f,
                &Vector::new(x0)?,
                need(&cfg.horizon, "horizon")?,
                cfg.h.unwrap_or(DEFAULT_FLOW_STEP),
            )?;
            emit(cfg, &sol, Format::Csv, stdout)?;
            Ok(EXIT_OK)
        }
        Command::Compare => compare(cfg, seed, policy, stdout),
        Command::Probe => probe_command(cfg, seed, policy, stdout),
        Command::Counterexample => {
            let ecfg = EscapeConfig::new(
                cfg.epsilon.unwrap_or(DEFAULT_ESCAPE_EPSILON),
                cfg.alpha.unwrap_or(DEFAULT_ESCAPE_ALPHA),
                cfg.samples.unwrap_or(DEFAULT_ESCAPE_SAMPLES),
                cfg.k_max.unwrap_or(DEFAULT_K_MAX),
                seed,
            );
            let stats = escape_experiment(&ecfg)?;
            emit(cfg, &stats, Format::Json, stdout)?;
            Ok(EXIT_OK)
        }
        Command::ConvexBounds => {
            let x0 = need(&cfg.x0, "x0")?;
            let f = function_for(cfg, Some(&x0))?;
            let report = convex_bounds_report(
                &f,
                &Vector::new(x0)?,
                need(&cfg.alpha, "alpha")?,
                need(&cfg.epsilon, "epsilon")?,
                cfg.steps.unwrap_or(DEFAULT_BOUND_STEPS),
                policy,
                seed,
            )?;
            emit(cfg, &report, Format::Json, stdout)?;
            Ok(EXIT_OK)
        }
    }
}

/// Discrete iterates against the flow from the same start. With `--out DIR`
/// writes `flow.csv`, `discrete.csv` and `deviation.json` into DIR; the
/// deviation report always goes to stdout.
fn compare(
    cfg: &RunConfig,
    seed: u64,
    policy: SelectionPolicy,
    stdout: &mut dyn Write,
) -> CliResult<i32> {
    let x0 = need(&cfg.x0, "x0")?;
    let f = function_for(cfg, Some(&x0))?;
    let x0 = Vector::new(x0)?;
    let alpha = need(&cfg.alpha, "alpha")?;
    let horizon = match (cfg.horizon, cfg.steps) {
        (Some(t), _) => t,
        (None, Some(k)) => alpha * k as f64,
        (None, None) => return Err(CliError::Usage("compare needs --horizon or --steps".into())),
    };
    let steps = (horizon / alpha * (1.0 - 1e-12)).ceil() as usize;
    let h = cfg.h.unwrap_or(alpha / 100.0);
    let traj = run(
        &f,
        &x0,
        &RunOptions::new(alpha, steps).policy(policy).seed(seed),
    )?;
    if let Some(k) = traj.diverged_at {
        return Err(Error::NonFiniteState { index: k }.into());
    }
    let sol = integrate_flow(&f, &x0, horizon, h)?;
    let path = InterpolatedPath::new(traj.clone(), horizon)?;
    let report = sup_deviation(&path, &sol)?;
    let json = to_json_string(&report)?;
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("flow.csv"), render(&sol, Format::Csv)?)?;
        fs::write(dir.join("discrete.csv"), render(&traj, Format::Csv)?)?;
        fs::write(dir.join("deviation.json"), &json)?;
    }
    stdout.write_all(json.as_bytes())?;
    Ok(EXIT_OK)
}

fn probe_command(
    cfg: &RunConfig,
    seed: u64,
    policy: SelectionPolicy,
    stdout: &mut dyn Write,
) -> CliResult<i32> {
    let xstar = need(&cfg.xstar, "xstar")?;
    let f = function_for(cfg, Some(&xstar))?;
    let x_star = Vector::new(xstar)?;
    let epsilon = need(&cfg.epsilon, "epsilon")?;
    let delta_grid = match (&cfg.delta_grid, cfg.delta) {
        (Some(g), _) => g.clone(),
        (None, Some(d)) => vec![d],
        (None, None) => default_delta_grid(epsilon),
    };
    let alpha_grid = match (&cfg.alpha_grid, cfg.alpha) {
        (Some(g), _) => g.clone(),
        (None, Some(a)) => vec![a],
        (None, None) => {
            if epsilon.is_nan() || epsilon <= 0.0 {
                return Err(Error::InvalidQuery("epsilon must be positive".into()).into());
            }
            let l = estimate_lipschitz(&f, &x_star, epsilon, PROBE_LIPSCHITZ_SAMPLES, seed)?;
            default_alpha_grid(epsilon, l)
        }
    };
    let query = StabilityQuery {
        function: f.id(),
        dim: f.dim(),
        x_star,
        epsilon,
        delta_grid,
        alpha_grid,
        samples: cfg.samples.unwrap_or(DEFAULT_PROBE_SAMPLES),
        max_iters: cfg.steps,
        policy,
        seed,
    };
    let mut report = probe(&query)?;
    if let (Some(out), StabilityVerdict::EscapeWitnessed { witness }) =
        (&cfg.out, &mut report.verdict)
    {
        let name = witness_file_name(out);
        let path = out.parent().unwrap_or(Path::new("")).join(&name);
        let mut buf = Vec::new();
        write_trajectory_csv(&witness.trajectory, &mut buf)?;
        fs::write(path, buf)?;
        witness.trajectory_csv = Some(name);
    }
    emit(cfg, &report, Format::Json, stdout)?;
    Ok(EXIT_OK)
}

fn witness_file_name(report_path: &Path) -> String {
    let stem = report_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "probe".into());
    format!("{stem}.witness.csv")
}
