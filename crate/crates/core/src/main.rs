use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use irs_wiretap::ao::{ao_solve, baseline_zero_phase};
use irs_wiretap::channel::generate_channel;
use irs_wiretap::experiment::{run_convergence, run_sweep, ExperimentConfig, OutputOptions};
use irs_wiretap::Error;

#[derive(Parser)]
#[command(version, about = "Secrecy-rate optimization for IRS-assisted MIMO wiretap channels")]
struct Cli {
    /// Omit the timestamp line from CSV output.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// AO convergence traces at the first grid power.
    Convergence {
        #[arg(long)]
        config: PathBuf,
    },
    /// AO against zero-phase and random-phase baselines over the power grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// One channel realization; prints a JSON report.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        channel_seed: u64,
        /// Transmit power; defaults to the first grid entry.
        #[arg(long)]
        power_dbm: Option<f64>,
    },
}

#[derive(Serialize)]
struct SolveReport {
    channel_seed: u64,
    power_dbm: f64,
    c_s_bits: f64,
    zero_phase_baseline_bits: f64,
    iterations: usize,
    converged: bool,
    trace: Vec<(usize, f64)>,
    phases_rad: Vec<f64>,
    covariance_re: Vec<Vec<f64>>,
    covariance_im: Vec<Vec<f64>>,
}

fn solve(cfg: &ExperimentConfig, channel_seed: u64, power_dbm: f64) -> irs_wiretap::Result<SolveReport> {
    let ch = generate_channel(cfg.dims, &cfg.fading.with_seed(channel_seed))?;
    let rep = ao_solve(&ch, power_dbm, &cfg.ao)?;
    let zero = baseline_zero_phase(&ch, power_dbm, &cfg.ao.cov)?;
    let r = rep.r_final.matrix();
    let rows = |f: fn(&num_complex::Complex64) -> f64| (0..r.nrows()).map(|i| r.row(i).iter().map(f).collect()).collect();
    Ok(SolveReport {
        channel_seed,
        power_dbm,
        c_s_bits: rep.final_c_s(),
        zero_phase_baseline_bits: zero,
        iterations: rep.iterations,
        converged: rep.converged,
        trace: rep.trace.clone(),
        phases_rad: rep.q_final.angles(),
        covariance_re: rows(|z| z.re),
        covariance_im: rows(|z| z.im),
    })
}

fn run(cli: Cli) -> irs_wiretap::Result<()> {
    let opts = OutputOptions { timestamp: !cli.no_timestamp };
    match cli.command {
        Command::Convergence { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run_convergence(&cfg, opts)?;
            let converged = out.traces.iter().filter(|t| t.converged).count();
            println!(
                "{} channels at {} dBm, {converged} converged, median {} iterations",
                out.traces.len(),
                out.power_dbm,
                out.median_iterations()
            );
            println!("wrote {} and {}", out.csv_path.display(), out.script_path.display());
        }
        Command::Sweep { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run_sweep(&cfg, opts)?;
            for r in &out.rows {
                println!("{:>8} dBm  {:<12} {:.6e} +- {:.2e}", r.power_dbm, r.scheme.label(), r.mean_c_s, r.stderr_c_s);
            }
            println!("wrote {} and {}", out.csv_path.display(), out.script_path.display());
        }
        Command::Solve { config, channel_seed, power_dbm } => {
            let cfg = ExperimentConfig::load(&config)?;
            let p = power_dbm.unwrap_or(cfg.power_grid_dbm[0]);
            let report = solve(&cfg, channel_seed, p)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(|e| Error::Config(e.to_string()))?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Audit(_)) => {
            eprintln!("audit failed: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
