//! Command-line front end.
//!
//! Exit codes: 0 success or certified, 1 not certified, 2 input or
//! hypothesis error, 3 numerical or output failure.

mod config;
mod simulate;

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::certificates::{certify_consensus, certify_flocking, halanay_gamma, halanay_residual, Certificate, ScanOptions};
use crate::diagnostics::{initial_spread, Block, DEFAULT_REFINE};
use crate::error::{Error, Result};
use crate::exec::{with_thread_cap, Exec};
use crate::influence::InfluenceFunction;
use crate::models::ModelKind;
use crate::spectral::{
    default_omega_grid, hopf_branches, simulate_toy, stability_grid, write_curve_csv, HopfOptions,
};

pub use config::{AnalysisConfig, HistoryConfig, RunConfig, SimConfig};
pub use simulate::{run_simulation, PositionBound, Summary};

/// Environment variable capping the worker threads of parallel sweeps.
pub const THREADS_ENV: &str = "DELAYFLOCK_THREADS";

#[derive(Debug, Parser)]
#[command(name = "delayflock", version, about = "Delayed consensus and flocking laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a configured run and export trajectory, observables and summary.
    Simulate(SimulateArgs),
    /// Consensus certificate for the first-order system.
    CertifyConsensus(CertifyArgs),
    /// Flocking certificate for the second-order system.
    CertifyFlocking(CertifyArgs),
    /// Decay rate solving x = eta - alpha - gamma e^{x tau}.
    #[command(allow_negative_numbers = true)]
    Halanay { alpha: f64, gamma: f64, eta: f64, tau: f64 },
    /// Hopf curves and stability grid of the two-agent toy equation.
    Hopf(HopfArgs),
    /// Integrate u'(t) = -u(t - tau) - u(t - sigma) from u = 1.
    ToySimulate(ToyArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Influence function override, e.g. `power-law:0.5`.
    #[arg(long)]
    psi: Option<InfluenceFunction>,
    /// Record the certificate scan.
    #[arg(long)]
    trace: bool,
}

#[derive(Debug, Args)]
struct CertifyArgs {
    /// Take delays, influence and initial spreads from a run config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long = "delta-x0")]
    delta_x0: Option<f64>,
    #[arg(long = "delta-v0")]
    delta_v0: Option<f64>,
    /// Influence function, e.g. `constant:1` (the default) or `power-law:0.5`.
    #[arg(long)]
    psi: Option<InfluenceFunction>,
    /// Fixed beta instead of a scan.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    trace: bool,
    /// Certificate JSON path (a directory receives `certificate.json`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HopfArgs {
    /// Curves are written for m = 0..=m-max.
    #[arg(long = "m-max", default_value_t = 0)]
    m_max: u32,
    #[arg(long, default_value_t = 120)]
    resolution: usize,
    #[arg(long = "omega-points", default_value_t = 2000)]
    omega_points: usize,
    #[arg(long = "max-k", default_value_t = 2)]
    max_k: u32,
    #[arg(long = "tau-max", default_value_t = 6.0)]
    tau_max: f64,
    #[arg(long = "sigma-max", default_value_t = 6.0)]
    sigma_max: f64,
    /// Keep points with sigma > tau as well.
    #[arg(long = "both-orders")]
    both_orders: bool,
    #[arg(long, default_value = "hopf")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ToyArgs {
    #[arg(long)]
    tau: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long, default_value_t = 1e-3)]
    h: f64,
    #[arg(short = 'T', long = "horizon", default_value_t = 50.0)]
    horizon: f64,
    #[arg(long = "output-every", default_value_t = 1)]
    output_every: usize,
    /// Trajectory CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Domain(_) | Error::Config(_) | Error::Hypothesis(_) | Error::InitialData { .. } | Error::Json(_) => 2,
        Error::Integration { .. } | Error::Consistency(_) | Error::Io(_) => 3,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) => Some(n),
            Err(_) => {
                eprintln!("error: {THREADS_ENV} must be a thread count, got {v:?}");
                return 2;
            }
        },
        Err(_) => None,
    };
    match with_thread_cap(threads, || dispatch(cli.command)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    let exec = Exec::default();
    match cmd {
        Command::Simulate(a) => {
            let mut cfg = RunConfig::load(&a.config)?;
            if let Some(s) = a.seed {
                cfg.seed = s;
            }
            if let Some(psi) = a.psi {
                cfg.model.influence = psi;
            }
            cfg.analysis.scan.trace |= a.trace;
            let out = a.out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let summary = run_simulation(&cfg, &out, exec)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(0)
        }
        Command::CertifyConsensus(a) => certify(CertifyKind::Consensus, a, exec),
        Command::CertifyFlocking(a) => certify(CertifyKind::Flocking, a, exec),
        Command::Halanay { alpha, gamma, eta, tau } => {
            let g = halanay_gamma(alpha, gamma, eta, tau)?;
            println!("{g} {:e}", halanay_residual(g, alpha, gamma, eta, tau));
            Ok(0)
        }
        Command::Hopf(a) => hopf(a, exec),
        Command::ToySimulate(a) => {
            let traj = simulate_toy(a.tau, a.sigma, a.h, a.horizon, None)?;
            if let Some(path) = &a.out {
                create_parent(path)?;
                let w = BufWriter::new(fs::File::create(path)?);
                traj.write_csv(w, a.output_every, true, |_| (1, 1))?;
            }
            let t = traj.horizon();
            println!("{t} {:.16e}", traj.sample(t)?[0]);
            Ok(0)
        }
    }
}

#[derive(Clone, Copy)]
enum CertifyKind {
    Consensus,
    Flocking,
}

fn certify(kind: CertifyKind, a: CertifyArgs, exec: Exec) -> Result<i32> {
    let mut sigma = a.sigma;
    let mut tau = a.tau;
    let mut dx = a.delta_x0;
    let mut dv = a.delta_v0;
    let mut psi = a.psi.clone();
    let mut opts = ScanOptions::default();
    if let Some(path) = &a.config {
        let cfg = RunConfig::load(path)?;
        let want = match kind {
            CertifyKind::Consensus => ModelKind::FirstOrder,
            CertifyKind::Flocking => ModelKind::SecondOrder,
        };
        if cfg.model.kind != want {
            return Err(Error::Config(format!("{}: model kind does not match the certificate", path.display())));
        }
        let hist = cfg.build_history(a.seed.unwrap_or(cfg.seed))?;
        sigma = sigma.or(Some(cfg.model.sigma));
        tau = tau.or(Some(cfg.model.tau));
        psi = psi.or_else(|| Some(cfg.model.influence.clone()));
        if dx.is_none() {
            dx = Some(initial_spread(&cfg.model, &hist, Block::Position, DEFAULT_REFINE)?);
        }
        if dv.is_none() && want == ModelKind::SecondOrder {
            dv = Some(initial_spread(&cfg.model, &hist, Block::Velocity, DEFAULT_REFINE)?);
        }
        opts = cfg.analysis.scan.clone();
        opts.beta = opts.beta.or(cfg.analysis.beta);
    }
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| Error::Config(format!("missing --{flag} (or --config)")));
    let sigma = need(sigma, "sigma")?;
    let tau = need(tau, "tau")?;
    let dx = need(dx, "delta-x0")?;
    let psi = match psi {
        Some(p) => p,
        None => InfluenceFunction::unit(),
    };
    if a.beta.is_some() {
        opts.beta = a.beta;
    }
    opts.trace |= a.trace;
    let cert = match kind {
        CertifyKind::Consensus => certify_consensus(sigma, tau, dx, &psi, &opts, exec)?,
        CertifyKind::Flocking => certify_flocking(sigma, tau, dx, need(dv, "delta-v0")?, &psi, &opts, exec)?,
    };
    emit_certificate(&cert, a.out.as_deref())?;
    Ok(if cert.is_certified() { 0 } else { 1 })
}

fn emit_certificate(cert: &Certificate, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(cert)?;
    println!("{text}");
    if let Some(out) = out {
        let path = if out.is_dir() { out.join("certificate.json") } else { out.to_path_buf() };
        write_text(&path, &text)?;
    }
    Ok(())
}

fn hopf(a: HopfArgs, exec: Exec) -> Result<i32> {
    if a.resolution == 0 {
        return Err(Error::Config("--resolution must be positive".into()));
    }
    if a.omega_points < 2 {
        return Err(Error::Config("--omega-points must be at least 2".into()));
    }
    let grid_pts = default_omega_grid(a.omega_points);
    let opts = HopfOptions { max_k: a.max_k, order_filter: !a.both_orders };
    fs::create_dir_all(&a.out)?;
    let mut all = Vec::new();
    let mut curves = Vec::new();
    for m in 0..=a.m_max {
        let branches = hopf_branches(m, &grid_pts, &opts);
        let pts: Vec<_> = branches.iter().flatten().copied().collect();
        let path = a.out.join(format!("curve_m{m}.csv"));
        let w = BufWriter::new(fs::File::create(&path)?);
        write_curve_csv(w, &pts)?;
        curves.push((m, pts.len(), path));
        all.extend(branches);
    }
    let grid = stability_grid((0.0, a.tau_max), (0.0, a.sigma_max), a.resolution, &all, exec)?;
    let grid_path = a.out.join("grid.csv");
    grid.write_csv(BufWriter::new(fs::File::create(&grid_path)?))?;
    for (m, n, path) in &curves {
        println!("m = {m}: {n} points -> {}", path.display());
    }
    println!("grid {r}x{r} -> {}", grid_path.display(), r = a.resolution);
    Ok(0)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    let mut f = fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    f.write_all(b"\n")?;
    Ok(())
}
