//! `nonint`: parameter sweeps over loop integrals, monodromy matrices and
//! nonintegrability certificates for the restricted three-body problem.
//!
//! Sweeps write one JSON object per line, in grid order, each carrying the
//! SHA-256 of the run configuration. `k1-curve` writes CSV.

mod commands;
mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nonint::contour::Side;

use commands::Sweep;
use config::{parse_theta_grid, RunConfig, SystemKind};

#[derive(Parser)]
#[command(name = "nonint", version, about = "Loop integrals and monodromy certificates for the restricted three-body problem")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CSV of (e, K1(e)) on an evenly spaced grid.
    K1Curve(K1Args),
    /// Planar loop integral over an (e, mu, theta2) grid.
    Melnikov(SweepArgs),
    /// Spatial (equatorial) loop integral over an (e, mu, theta3) grid.
    MelnikovSpatial(SweepArgs),
    /// Loop and period monodromy elements over the grid.
    Monodromy(SystemSweepArgs),
    /// Nonintegrability certificates over the grid.
    Certify(SystemSweepArgs),
    /// The integration loop and singular times for each (e, mu).
    GammaDump(SweepArgs),
}

#[derive(Args)]
struct K1Args {
    #[arg(long, default_value_t = 0.05)]
    e_min: f64,
    #[arg(long, default_value_t = 0.95)]
    e_max: f64,
    /// Number of rows.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Eccentricities, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    e: Vec<f64>,
    /// Mass ratios, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    mu: Vec<f64>,
    /// Resonant first action I1*.
    #[arg(long, default_value_t = 1.0)]
    i1: f64,
    /// Angle grid: an integer n gives k*pi/n for k < n (0 gives an empty
    /// grid); otherwise a comma-separated list of angles.
    #[arg(long, default_value = "8")]
    theta_grid: String,
    /// Detour radius around the singular times, in units of K1/omega1.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Height of the loop's top segment, in units of K1/omega1.
    #[arg(long, default_value_t = 10.0)]
    big_m: f64,
    /// Quadrature tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Side of the detours: left or right.
    #[arg(long, default_value = "left")]
    side: Side,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<String>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct SystemSweepArgs {
    #[command(flatten)]
    sweep: SweepArgs,
    #[arg(long, value_enum, default_value_t = SystemKind::Planar)]
    system: SystemKind,
}

impl SweepArgs {
    fn config(&self, command: &str, system: Option<SystemKind>) -> Result<RunConfig, String> {
        let cfg = RunConfig {
            command: command.into(),
            system,
            e: self.e.clone(),
            mu: self.mu.clone(),
            i1: self.i1,
            theta: parse_theta_grid(&self.theta_grid)?,
            delta: self.delta,
            big_m: self.big_m,
            tol: self.tol,
            side: self.side,
            out: self.out.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn open_output(out: &Option<String>) -> io::Result<Box<dyn Write>> {
    Ok(match out.as_deref() {
        None | Some("-") => Box::new(BufWriter::new(io::stdout().lock())),
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
    })
}

fn write_sweep(sweep: &Sweep, out: &Option<String>) -> io::Result<()> {
    let mut w = open_output(out)?;
    for record in &sweep.records {
        serde_json::to_writer(&mut w, record)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

fn write_k1(args: &K1Args) -> Result<(), String> {
    if !(args.e_min > 0.0 && args.e_min < args.e_max && args.e_max < 1.0) {
        return Err(format!("need 0 < e-min < e-max < 1 (got {} and {})", args.e_min, args.e_max));
    }
    let mut csv = csv::Writer::from_writer(open_output(&args.out).map_err(|e| e.to_string())?);
    csv.write_record(["e", "K1"]).map_err(|e| e.to_string())?;
    for (e, k) in commands::k1_curve(args.e_min, args.e_max, args.n) {
        csv.serialize((e, k)).map_err(|e| e.to_string())?;
    }
    csv.flush().map_err(|e| e.to_string())
}

fn run_sweep(args: &SweepArgs, command: &str, system: Option<SystemKind>, f: impl FnOnce(&RunConfig) -> Sweep + Send) -> Result<usize, String> {
    let cfg = args.config(command, system)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = args.jobs {
        pool = pool.num_threads(n.max(1));
    }
    let pool = pool.build().map_err(|e| e.to_string())?;
    let sweep = pool.install(|| f(&cfg));
    write_sweep(&sweep, &cfg.out).map_err(|e| e.to_string())?;
    Ok(sweep.failures)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::K1Curve(a) => write_k1(a).map(|_| 0),
        Command::Melnikov(a) => run_sweep(a, "melnikov", None, |c| commands::melnikov(c, false)),
        Command::MelnikovSpatial(a) => run_sweep(a, "melnikov-spatial", None, |c| commands::melnikov(c, true)),
        Command::Monodromy(a) => run_sweep(&a.sweep, "monodromy", Some(a.system), |c| commands::monodromy(c, a.system)),
        Command::Certify(a) => run_sweep(&a.sweep, "certify", Some(a.system), |c| commands::certify(c, a.system)),
        Command::GammaDump(a) => run_sweep(a, "gamma-dump", None, commands::gamma_dump),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("nonint: {failed} grid point(s) failed; see the error records");
            ExitCode::from(1)
        }
        Err(msg) => {
            eprintln!("nonint: {msg}");
            ExitCode::from(2)
        }
    }
}
