use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};

use spinhall::config::{parse_config, ScenarioConfig};
use spinhall::runner::{self, RunContext};
use spinhall::verify::{omega_grid, VerifyTarget};
use spinhall::{Result, SimError};

/// Moment dynamics and spin Hall separation of Gaussian wave packets in graded-index media.
#[derive(Parser)]
#[command(name = "spinhall", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario document (JSON). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Classical RK4 with this step instead of adaptive stepping.
    #[arg(long, value_name = "DT")]
    fixed_step: Option<f64>,
    /// Assert that no random numbers are used. Nothing in the tool draws any.
    #[arg(long)]
    seedless: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Stationary,
    Initial,
    Moments,
    Riccati,
    All,
}

#[derive(Subcommand)]
enum Command {
    /// Ray of the optical metric: t, x, p, H.
    Geodesic(Common),
    /// Complex Hessian M(t) along the ray.
    Riccati(Common),
    /// One beam: moments, ray and invariants.
    Run(Common),
    /// Both helicities, their separation and a two-frequency scaling check.
    Spinhall(Common),
    /// Runs over sweep.omega_list × sweep.helicities with fitted exponents.
    Sweep(Common),
    /// Checks against quadrature and closed forms; exits with 4 if any fails.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        what: What,
        /// Geometric ω grid `lo:hi:n` replacing the default sweeps.
        #[arg(long, value_name = "LO:HI:N")]
        omega_sweep: Option<String>,
        /// Quadrature nodes per axis (odd, >= 21).
        #[arg(long, value_name = "N")]
        grid_points: Option<usize>,
    },
    /// Print the default scenario document.
    PrintDefaults,
}

/// Prints a line; a closed stdout (e.g. piped into `head`) is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn load(common: &Common) -> Result<RunContext> {
    let cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| SimError::Io { path: path.clone(), source })?;
            parse_config(&text)?
        }
        None => ScenarioConfig::default(),
    };
    if common.seedless {
        info!("seedless mode: no random source is used");
    }
    RunContext::new(cfg, common.out.clone(), common.fixed_step)
}

fn parse_sweep(text: &str) -> Result<Vec<f64>> {
    let bad = || SimError::config("--omega-sweep", format!("expected LO:HI:N with 1 < LO <= HI and N >= 1, got `{text}`"));
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if !(lo > 1.0 && hi >= lo && n >= 1) {
        return Err(bad());
    }
    Ok(omega_grid(lo, hi, n))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PrintDefaults => {
            say!("{}", ScenarioConfig::defaults_document());
        }
        Command::Geodesic(c) => {
            let path = runner::run_geodesic(&load(&c)?)?;
            say!("{}", path.display());
        }
        Command::Riccati(c) => {
            let path = runner::run_riccati(&load(&c)?)?;
            say!("{}", path.display());
        }
        Command::Run(c) => {
            for p in runner::run_beam(&load(&c)?)? {
                say!("{}", p.display());
            }
        }
        Command::Spinhall(c) => {
            let r = runner::run_spinhall(&load(&c)?)?;
            say!(
                "omega {} |sep(T)| {:.6e} sup|X-gamma| {:.6e} exponent {:.3} mid-slab cos {:.4}",
                r.omega, r.sep_norm_final, r.geo_dev_sup, r.sep_exponent, r.mid_cos_angle
            );
        }
        Command::Sweep(c) => {
            let r = runner::run_sweep(&load(&c)?)?;
            for row in &r.rows {
                say!("omega {} |sep(T)| {:?} sup|X-gamma| {:.6e}", row.omega, row.sep_norm_final, row.geo_dev_sup);
            }
            if let Some(f) = &r.sep_fit {
                say!("separation exponent {:.4}", f.slope);
            }
            say!("deviation exponent {:.4}", r.geo_dev_fit.slope);
        }
        Command::Verify { common, what, omega_sweep, grid_points } => {
            let ctx = load(&common)?;
            let omegas = omega_sweep.as_deref().map(parse_sweep).transpose()?;
            let target = match what {
                What::Stationary => VerifyTarget::Stationary,
                What::Initial => VerifyTarget::Initial,
                What::Moments => VerifyTarget::Moments,
                What::Riccati => VerifyTarget::Riccati,
                What::All => VerifyTarget::All,
            };
            let report = runner::run_verification(&ctx, target, omegas, grid_points)?;
            for c in &report.checks {
                say!("{} {} = {:.4e} (threshold {:.1e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
            }
            if !report.all_pass {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                return Err(SimError::Verification(failed.join(", ")));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                SimError::Verification(_) => warn!("{e}"),
                _ => error!("{e}"),
            }
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
