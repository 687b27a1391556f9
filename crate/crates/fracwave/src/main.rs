use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fracwave::config::{self, ExperimentConfig};
use fracwave::error::{HarnessError, Result};
use fracwave::harness::{dump_matrices, run_convergence, run_energy_audit, run_single};
use fracwave::output::{optional, Table};

#[derive(Parser)]
#[command(version, about = "Space-fractional wave equation solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One solve with nodal snapshots beside the reference solution.
    Solve(Common),
    /// Convergence sweep over the mesh ladder.
    Converge(Common),
    /// Energy history of an unforced run.
    Energy(Common),
    /// Write the y and Ω matrices in `row col value` format.
    DumpMatrices(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file (a directory for dump-matrices); stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for concurrent ladder rungs.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Config override, `key=value`; repeatable and applied after the file.
    #[arg(long = "set", short = 'D', value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let base = match &self.config {
            Some(p) => config::read(p)?,
            None => config::RawConfig::new(),
        };
        let mut overrides = self
            .overrides
            .iter()
            .map(|o| config::parse_override(o))
            .collect::<Result<Vec<_>>>()?;
        if let Some(seed) = self.seed {
            overrides.push(("seed".into(), seed.to_string()));
        }
        if let Some(out) = &self.out {
            overrides.push(("out".into(), out.display().to_string()));
        }
        ExperimentConfig::from_raw(&config::merge(base, overrides)?)
    }
}

fn emit(table: &Table, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => table.save(p),
        None => table
            .write_to(io::stdout().lock())
            .map_err(|e| HarnessError::io("<stdout>", e)),
    }
}

fn run(cli: Cli) -> Result<()> {
    let (Command::Solve(c) | Command::Converge(c) | Command::Energy(c) | Command::DumpMatrices(c)) =
        &cli.command;
    let cfg = c.load()?;
    if let Some(threads) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build_global()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
    }
    let out = cfg.out.as_ref();
    match cli.command {
        Command::Solve(_) => {
            let r = run_single(&cfg)?;
            emit(&r.table(), out)?;
            for s in &r.snapshots {
                eprintln!("t = {:.6}: max deviation {:.6e}", s.time, s.max_deviation);
            }
            eprintln!("final error ({}) = {:.6e}", cfg.metric.name(), r.error);
        }
        Command::Converge(_) => {
            let r = run_convergence(&cfg)?;
            emit(&r.table(), out)?;
            eprintln!("fitted slope = {}", optional(r.slope));
        }
        Command::Energy(_) => {
            let a = run_energy_audit(&cfg)?;
            emit(&a.table(), out)?;
            let mut err = io::stderr().lock();
            let _ = writeln!(err, "{} K = {} dt = {:.6e}", a.scheme.name(), a.steps, a.dt);
            if let Some(c) = a.cfl {
                let _ = writeln!(
                    err,
                    "cfl margin = {:.6e} (admissible dt {:.6e})",
                    c.margin, c.max_dt
                );
            }
            let _ = writeln!(
                err,
                "drift = {:.3e}, min energy = {:.6e}, amplification = {:.3e}{}",
                a.drift,
                a.min_energy,
                a.amplification,
                if a.unstable { ", UNSTABLE" } else { "" }
            );
            if a.unstable {
                return Err(HarnessError::Numerical(
                    fracwave::numerics::Error::Divergence { step: a.steps },
                ));
            }
        }
        Command::DumpMatrices(_) => {
            let dir = out.cloned().unwrap_or_else(|| PathBuf::from("matrices"));
            for p in dump_matrices(&cfg, &dir)? {
                eprintln!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
