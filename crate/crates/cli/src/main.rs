use clap::{ArgAction, Parser, Subcommand};
use mfg_cli::config::load_config;
use mfg_cli::{commands, CliError, CliResult, EXIT_OK};
use mfg_core::exponents::DEFAULT_BUDGET;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Solver and verification harness for regularized mean-field games on the torus.
#[derive(Parser)]
#[command(name = "mfg", version)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the coupled system and evaluate the estimate suite.
    Solve {
        #[arg(short, long)]
        config: PathBuf,
        /// Output directory; defaults to `output.dir` from the config.
        #[arg(short, long)]
        out: Option<PathBuf>,
        /// Also write PNG snapshots and residual plots.
        #[arg(long)]
        plots: bool,
    },
    /// Solve along the configured ε-ladder with warm starts.
    Continuation {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Sample-based certificates for the Hamiltonian structural assumptions.
    Audit {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Largest admissible coupling exponent over a (γ, d) grid.
    Exponents {
        /// Comma-separated γ values.
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
        /// Comma-separated dimensions.
        #[arg(long, value_delimiter = ',', required = true)]
        dim: Vec<usize>,
        /// Also test this α and emit witness JSON.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u32,
        /// Directory for `alpha_max.csv` and witness files.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Re-evaluate the estimate suite on stored trajectories.
    Monitor {
        #[arg(long)]
        u: PathBuf,
        #[arg(long)]
        m: PathBuf,
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

fn out_dir(out: Option<PathBuf>, cfg_dir: &Path) -> PathBuf {
    out.unwrap_or_else(|| cfg_dir.to_path_buf())
}

fn init_threads() {
    if let Some(n) = std::env::var("MFG_THREADS").ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not cap thread pool: {e}");
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Solve { config, out, plots } => {
            let asm = load_config(&config)?;
            let dir = out_dir(out, &asm.config.output.dir);
            let res = commands::solve(&asm, &dir, plots)?;
            let s = &res.summary;
            println!(
                "converged={} iterations={} residual={:e} checks failed: {} of {}",
                s.converged,
                s.iterations,
                s.final_residual.unwrap_or(f64::NAN),
                s.checks.failed,
                s.checks.total
            );
            for e in res.report.failures() {
                println!("FAIL {} lhs={:e} rhs={:e} slack={:e} tol={:e}", e.name, e.lhs, e.rhs, e.slack, e.tol);
            }
        }
        Command::Continuation { config, out } => {
            let asm = load_config(&config)?;
            let dir = out_dir(out, &asm.config.output.dir);
            let s = commands::continuation(&asm, &dir)?;
            for r in &s.rungs {
                println!("eps={} converged={} iterations={} delta_m={:?}", r.eps, r.converged, r.iterations, r.delta_m);
            }
            println!("deltas_shrink={}", s.deltas_shrink);
        }
        Command::Audit { config, out } => {
            let asm = load_config(&config)?;
            let dir = out_dir(out, &asm.config.output.dir);
            let certs = commands::audit(&asm, &dir)?;
            for c in &certs {
                println!("{:4} {} residual={:e}", if c.passed() { "PASS" } else { "FAIL" }, c.assumption, c.residual);
            }
            println!("certificates failed: {} of {}", certs.iter().filter(|c| !c.passed()).count(), certs.len());
        }
        Command::Exponents { gamma, dim, alpha, budget, out } => {
            let (rows, adm) = commands::exponents(&gamma, &dim, alpha, budget, out.as_deref())?;
            print!("{}", commands::exponent_csv(&rows));
            for a in &adm {
                println!("{}", serde_json::to_string(a).map_err(|e| CliError::Format(e.to_string()))?);
            }
        }
        Command::Monitor { u, m, config, out } => {
            let asm = load_config(&config)?;
            let dir = out_dir(out, &asm.config.output.dir);
            let (report, s) = commands::monitor(&asm, &u, &m, &dir)?;
            for e in report.failures() {
                println!("FAIL {} lhs={:e} rhs={:e} slack={:e} tol={:e}", e.name, e.lhs, e.rhs, e.slack, e.tol);
            }
            println!("checks failed: {} of {}", s.checks.failed, s.checks.total);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    init_threads();
    match run(cli.command) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
