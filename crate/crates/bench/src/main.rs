use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eerk_bench::experiments::{run_analysis, run_convergence, run_energy, run_rate};
use eerk_bench::output::{save_analysis, save_convergence, save_energy, save_rates};
use eerk_bench::{BenchError, ExperimentConfig, Result};
use eerk_core::catalog::{get_method, MethodId};

#[derive(Parser)]
#[command(name = "eerk", version, about = "Exponential Runge-Kutta experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the method catalog as CSV on stdout.
    Catalog,
    /// Classify methods by the leading minors of their dissipation matrix.
    Analyze(Opts),
    /// Average dissipation rate curves.
    Rate(Opts),
    /// Temporal error table against a fine reference run.
    Converge(Opts),
    /// Discrete energy series and final state.
    Energy(Opts),
}

#[derive(Args, Default)]
struct Opts {
    /// key = value file; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Method specs separated by ';', e.g. "eerk2w:c2=3/11;etd1".
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long = "T")]
    final_time: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    monitor: bool,
    /// Further overrides, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Opts {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| BenchError::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        let flags = [
            ("method", &self.method),
            ("tau", &self.tau),
            ("kappa", &self.kappa),
            ("eps", &self.eps),
            ("T", &self.final_time),
            ("grid", &self.grid),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                cfg.set(k, v)?;
            }
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if self.monitor {
            cfg.monitor = true;
        }
        Ok(cfg)
    }
}

fn catalog() -> Result<()> {
    println!("method,stages,order");
    for id in MethodId::catalog() {
        let t = get_method(id)?;
        println!("\"{id}\",{},{}", t.stages(), id.order());
    }
    Ok(())
}

fn report_paths(paths: &[PathBuf]) {
    for p in paths {
        eprintln!("wrote {}", p.display());
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Catalog => catalog(),
        Command::Analyze(o) => {
            let cfg = o.resolve()?;
            let res = run_analysis(&cfg)?;
            for a in &res {
                let c = &a.classification;
                match &c.witness {
                    Some(w) => println!(
                        "{}: {:?} witness z={:.6e} minor_{}={:.6e}",
                        a.method, c.verdict, w.z, w.minor_index, w.minor_value
                    ),
                    None => println!("{}: {:?} on {} points", a.method, c.verdict, c.grid_len),
                }
            }
            report_paths(&save_analysis(&cfg.out, &res)?);
            Ok(())
        }
        Command::Rate(o) => {
            let cfg = o.resolve()?;
            let res = run_rate(&cfg)?;
            report_paths(&save_rates(&cfg.out, &res)?);
            Ok(())
        }
        Command::Converge(o) => {
            let cfg = o.resolve()?;
            let rep = run_convergence(&cfg)?;
            eprintln!("reference step {:e} ({:.2?})", rep.reference_tau, rep.reference_time);
            for t in &rep.tables {
                println!("{} (reference {})", t.method, t.reference);
                for r in &t.rows {
                    match r.order {
                        Some(o) => println!("  tau={:<10e} error={:.4e} order={o:.2}", r.tau, r.error),
                        None => println!("  tau={:<10e} error={:.4e} order=-", r.tau, r.error),
                    }
                }
            }
            report_paths(&save_convergence(&cfg.out, &rep.tables)?);
            Ok(())
        }
        Command::Energy(o) => {
            let cfg = o.resolve()?;
            let rep = run_energy(&cfg)?;
            for r in &rep.runs {
                let e = &r.run.energies;
                println!(
                    "{} kappa={} tau={}: E0={:.8} E_end={:.8} increases={} violations={}{}",
                    r.method,
                    r.kappa,
                    r.run.tau,
                    e[0],
                    e[e.len() - 1],
                    r.increases.len(),
                    r.run.violations.len(),
                    r.diverged_at.map_or(String::new(), |s| format!(" diverged at step {s}")),
                );
            }
            report_paths(&save_energy(&cfg.out, &rep.runs)?);
            if let Some(step) = rep.runs.iter().find_map(|r| r.diverged_at) {
                return Err(BenchError::Core(eerk_core::Error::Diverged { step }));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
