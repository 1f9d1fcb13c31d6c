use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use hybrid_risk::jumps::JumpDirection;
use hybrid_risk::solver::DescriptorSet;
use hybrid_risk_cli::commands::{self, SchemaError};
use hybrid_risk_cli::config::{MethodChoice, RunConfig};
use hybrid_risk_cli::output::num;

#[derive(Parser)]
#[command(name = "hybrid-risk", version, about = "Ruin descriptors of hybrid risk processes")]
struct Cli {
    /// Worker threads for Monte Carlo (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Down,
    Up,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Transient,
    Stationary,
}

#[derive(Subcommand)]
enum Command {
    /// Check the configured model and its ruin augmentation.
    Validate { config: PathBuf },
    /// Tabulate the jump-size intensity density from one level.
    JumpDensity {
        config: PathBuf,
        #[arg(long)]
        level: f64,
        /// Premium-paying base state the jump starts from.
        #[arg(long, default_value_t = 0)]
        state: usize,
        #[arg(long, value_enum, default_value = "down")]
        direction: Direction,
        #[arg(long, default_value_t = 0.01)]
        dy: f64,
        #[arg(long, default_value_t = 100.0)]
        cap: f64,
        /// Write CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo estimates, whatever the config's method.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one sample path as CSV.
        #[arg(long)]
        path_csv: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        path_seed: u64,
    },
    /// Grid solver, whatever the config's method.
    Solve {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "transient")]
        backend: BackendArg,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the config as written.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_results(results: &[DescriptorSet]) {
    println!("{:<11} {:>12} {:>12} {:>12} {:>12} {:>12}", "method", "psi_lower", "psi_plus", "psi_minus", "upper", "discounted");
    for ds in results {
        let s = ds.summary();
        println!(
            "{:<11} {:>12.6e} {:>12.6e} {:>12.6e} {:>12.6e} {:>12.6e}",
            ds.provenance.method.name(),
            s.psi_lower,
            s.psi_plus,
            s.psi_minus,
            s.upper,
            s.discounted
        );
        if let Some(se) = ds.summary_std_errors() {
            println!(
                "{:<11} {:>12.2e} {:>12.2e} {:>12.2e} {:>12.2e} {:>12.2e}",
                "  ± se", se.psi_lower, se.psi_plus, se.psi_minus, se.upper, se.discounted
            );
        }
    }
}

fn execute(mut cfg: RunConfig, config: &PathBuf, out: Option<PathBuf>) -> Result<()> {
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    let artifacts = commands::run(&cfg, config)?;
    print_results(&artifacts.results);
    for f in &artifacts.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = commands::load(&config)?;
            let (base, aug) = commands::validate(&cfg)?;
            print!("base model: {base}augmented model ({}): {aug}", cfg.ruin.name());
            Ok(base.passed() && aug.passed())
        }
        Command::JumpDensity {
            config,
            level,
            state,
            direction,
            dy,
            cap,
            out,
        } => {
            let cfg = commands::load(&config)?;
            let dir = match direction {
                Direction::Down => JumpDirection::Down,
                Direction::Up => JumpDirection::Up,
            };
            let table = commands::jump_density(&cfg, level, state, dir, dy, cap)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["y", "density"])?;
            for (y, d) in table {
                w.write_record([num(y), num(d)])?;
            }
            let bytes = w.into_inner()?;
            match out {
                Some(p) => fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?,
                None => print!("{}", String::from_utf8(bytes)?),
            }
            Ok(true)
        }
        Command::Simulate {
            config,
            out,
            path_csv,
            path_seed,
        } => {
            let mut cfg = commands::load(&config)?;
            cfg.method = MethodChoice::Mc;
            if let Some(p) = path_csv {
                fs::write(&p, commands::path_csv(&cfg, path_seed)?).with_context(|| format!("writing {}", p.display()))?;
            }
            execute(cfg, &config, out).map(|_| true)
        }
        Command::Solve {
            config,
            backend,
            bins,
            out,
        } => {
            let mut cfg = commands::load(&config)?;
            cfg.method = match backend {
                BackendArg::Transient => MethodChoice::Transient,
                BackendArg::Stationary => MethodChoice::Stationary,
            };
            cfg.bins = bins.or(cfg.bins);
            anyhow::ensure!(cfg.bins.is_some(), "solve needs `bins` in the config or --bins");
            execute(cfg, &config, out).map(|_| true)
        }
        Command::Run { config, out } => {
            let cfg = commands::load(&config)?;
            execute(cfg, &config, out).map(|_| true)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<SchemaError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
