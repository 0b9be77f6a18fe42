use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use expstab::experiment::{
    build_reference, cmd_converge, cmd_longtime, cmd_solve, cmd_stability, exit_code, Command,
    ExperimentConfig, ReferenceCache, EXIT_ALL_BLOWUP,
};
use expstab::integrators::RunStatus;
use expstab::Result;

/// Partitioned exponential integrator experiments.
#[derive(Parser)]
#[command(name = "expstab", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Stability grids on the partitioned Dahlquist equation.
    Stability(Opts),
    /// Convergence study against a cached reference.
    Converge(Opts),
    /// Relative error over time against cached references.
    Longtime(Opts),
    /// One integration, writing spectrum snapshots.
    Solve(Opts),
    /// Build (or confirm) the cached reference only.
    Reference(Opts),
}

#[derive(Args)]
struct Opts {
    /// key = value configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    /// Repeatable; comma lists also accepted.
    #[arg(short, long)]
    method: Vec<String>,
    #[arg(short, long)]
    steps: Vec<String>,
    /// kind:param, e.g. abs_k3:pi/128 or none.
    #[arg(long)]
    repartition: Vec<String>,
    /// m:gamma, e.g. 8:1e10.
    #[arg(long)]
    hyperviscosity: Vec<String>,
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// k2 window for stability grids, lo:hi.
    #[arg(long)]
    k2_range: Option<String>,
    /// Any config key, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Opts {
    fn overrides(&self) -> Result<Vec<(String, String)>> {
        let mut kv = Vec::new();
        let mut push = |k: &str, v: String| kv.push((k.to_string(), v));
        if let Some(p) = &self.problem {
            push("problem", p.clone());
        }
        for (key, list) in [
            ("methods", &self.method),
            ("steps", &self.steps),
            ("repartition", &self.repartition),
            ("hyperviscosity", &self.hyperviscosity),
        ] {
            if !list.is_empty() {
                push(key, list.join(","));
            }
        }
        if let Some(o) = &self.out {
            push("out", o.display().to_string());
        }
        if let Some(r) = &self.k2_range {
            push("k2_range", r.clone());
        }
        for item in &self.set {
            let (k, v) = item.split_once('=').ok_or_else(|| {
                expstab::Error::Config(format!("--set expects KEY=VALUE, got {item:?}"))
            })?;
            push(k.trim(), v.trim().to_string());
        }
        Ok(kv)
    }
}

fn run(cli: Cli) -> Result<i32> {
    let (command, opts) = match &cli.command {
        Sub::Stability(o) => (Command::Stability, o),
        Sub::Converge(o) => (Command::Converge, o),
        Sub::Longtime(o) => (Command::Longtime, o),
        Sub::Solve(o) => (Command::Solve, o),
        Sub::Reference(o) => (Command::Reference, o),
    };
    let cfg = ExperimentConfig::load(command, opts.config.as_deref(), &opts.overrides()?)?;
    let cache = ReferenceCache::from_env();
    match command {
        Command::Stability => {
            let report = cmd_stability(&cfg)?;
            for s in &report.summaries {
                println!(
                    "{:<6} rho={:.6e} unstable={:.4} max|R|={:.4e}{}",
                    s.method,
                    s.rho,
                    s.unstable_fraction,
                    s.max_abs_r,
                    s.split_angle
                        .map(|a| format!(" split at {a:.6}"))
                        .unwrap_or_default()
                );
            }
            println!("wrote {}", report.summary_path.display());
        }
        Command::Converge => {
            let report = cmd_converge(&cfg, &cache)?;
            print_reference(&report.reference);
            for r in &report.records {
                println!(
                    "{:<6} {:<24} {:>8} {:>12} {:<12} {}",
                    r.method,
                    r.modification,
                    r.n_steps,
                    r.relative_error
                        .map(|e| format!("{e:.3e}"))
                        .unwrap_or("-".into()),
                    r.status.name(),
                    r.observed_order
                        .map(|p| format!("{p:.2}"))
                        .unwrap_or_default()
                );
            }
            println!("wrote {}", report.csv_path.display());
            if report.all_blew_up() {
                return Ok(EXIT_ALL_BLOWUP);
            }
        }
        Command::Longtime => {
            let report = cmd_longtime(&cfg, &cache)?;
            print_reference(&report.reference);
            for run in &report.runs {
                let state = match run.status {
                    RunStatus::Ok => "ok".to_string(),
                    RunStatus::Blowup {
                        last_finite_time, ..
                    } => {
                        format!("blowup after t={last_finite_time:.3}")
                    }
                };
                println!(
                    "{:<6} {:<24} max error {:.3e} {}",
                    run.method,
                    run.modification.label(),
                    run.max_error(),
                    state
                );
            }
            println!("wrote {}", report.csv_path.display());
            if report.all_blew_up() {
                return Ok(EXIT_ALL_BLOWUP);
            }
        }
        Command::Solve => {
            let report = cmd_solve(&cfg)?;
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if let RunStatus::Blowup { step, .. } = report.status {
                eprintln!("blowup at step {step}");
                return Ok(EXIT_ALL_BLOWUP);
            }
        }
        Command::Reference => print_reference(&build_reference(&cfg, &cache)?),
    }
    Ok(0)
}

fn print_reference(r: &expstab::experiment::Reference) {
    println!(
        "reference {} {} steps ({}) {}",
        r.key.method,
        r.key.steps,
        if r.cache_hit { "cached" } else { "built" },
        r.path.display()
    );
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
