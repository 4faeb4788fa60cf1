use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sns::oracle::oracle_solve;
use sns::sim::{self, LogLayout};
use sns::solver::{sns_solve, SolverSettings};
use sns::Error;

#[derive(Parser)]
#[command(name = "sns", about = "Saturation-in-the-null-space kinematic control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write the tick log as CSV.
    Run {
        scenario: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace the scenario duration (seconds).
        #[arg(long)]
        duration_override: Option<f64>,
        /// Perturb the initial configuration with seeded uniform noise.
        #[arg(long)]
        seed: Option<u64>,
        /// Noise amplitude in rad used with `--seed`.
        #[arg(long, default_value_t = 0.01, requires = "seed")]
        jitter: f64,
    },
    /// Parse and validate a scenario without running it.
    Check { scenario: PathBuf },
    /// Solve a single-tick instance with both the solver and the oracle.
    Oracle { instance: PathBuf },
    /// Print the version.
    Version,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => 3,
        Error::SolverDivergence { .. } => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn execute(command: Command) -> sns::Result<()> {
    match command {
        Command::Run {
            scenario,
            out,
            duration_override,
            seed,
            jitter,
        } => {
            let mut sc = sim::load_scenario_file(&scenario)?;
            if let Some(d) = duration_override {
                if !(d >= 0.0 && d.is_finite()) {
                    return Err(Error::Validation {
                        field: "duration-override".into(),
                        line: None,
                        message: "must be a non-negative number".into(),
                    });
                }
                sc.duration = d;
            }
            if let Some(seed) = seed {
                sim::perturb_initial_q(&mut sc, seed, jitter);
            }
            let log = sim::run(&sc)?;
            let layout = LogLayout::for_scenario(&sc);
            match out {
                Some(path) => sim::write_log_file(&log, &layout, path)?,
                None => sim::write_log(&log, &layout, std::io::stdout().lock())?,
            }
            Ok(())
        }
        Command::Check { scenario } => {
            let sc = sim::load_scenario_file(&scenario)?;
            println!(
                "ok: {} ({} joints, {} Cartesian constraints, {} ticks)",
                sc.name,
                sc.robot.joint_count(),
                sc.cartesian.len(),
                sc.tick_count()
            );
            Ok(())
        }
        Command::Oracle { instance } => {
            let inst = sim::load_instance_file(&instance)?;
            let sol = match sns_solve(&inst.task, &inst.system, &SolverSettings::default()) {
                Ok(sol) => sol,
                Err(Error::SolverDivergence { best, .. }) => *best,
                Err(e) => return Err(e),
            };
            let verdict = oracle_solve(&inst.task, &inst.system)?;
            let fmt = |v: &nalgebra::DVector<f64>| v.iter().map(|x| format!("{x:.9}")).collect::<Vec<_>>().join(" ");
            let mut out = std::io::stdout().lock();
            writeln!(out, "sns.status = {}", sol.status)?;
            writeln!(out, "sns.s_star = {:.9}", sol.s_star)?;
            writeln!(out, "sns.q_dot = {}", fmt(&sol.q_dot))?;
            writeln!(out, "sns.saturated = {}", sol.saturations.tags())?;
            writeln!(out, "oracle.feasible_exact = {}", verdict.feasible_exact)?;
            writeln!(out, "oracle.best_scale = {:.9}", verdict.best_scale)?;
            if let Some(w) = &verdict.witness {
                writeln!(out, "oracle.witness = {}", fmt(w))?;
            }
            Ok(())
        }
        Command::Version => {
            println!("sns {}", env!("CARGO_PKG_VERSION"));
            Ok(())
        }
    }
}
