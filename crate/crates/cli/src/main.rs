//! `dofc`: run load-frequency control scenarios and dispatch oracles.
//!
//! Exit codes: 0 success, 1 a check failed, 2 bad config or uncertified
//! gains, 3 the simulation diverged, 4 the dispatch problem is infeasible.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use dofc_core::config::{load_any, load_scenario, ConfigFile};
use dofc_core::scenario::{self, Outcome, RunOptions};
use dofc_core::Error;

#[derive(Parser)]
#[command(name = "dofc", version, about = "Distributed optimal load-frequency control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario and write channels plus a verification report.
    Simulate(RunArgs),
    /// Run both controllers and compare nadir and settling time.
    Compare(RunArgs),
    /// Solve the optimal dispatch problem with both oracles.
    SolveOlfc {
        /// Scenario or network file.
        #[arg(long)]
        config: PathBuf,
        /// Ignore the scenario's load events and solve at base load.
        #[arg(long)]
        base_load: bool,
        /// KKT residual tolerance.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Check the controller gains against the stability bound.
    CertifyGains {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file; repeat to run several scenarios.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    /// Output directory. With several scenarios each gets a subdirectory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    allow_uncertified: bool,
    /// Scenarios to run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Fixed RK4 step, overriding the scenario.
    #[arg(long)]
    step: Option<f64>,
    /// Final time, overriding the scenario.
    #[arg(long)]
    t_end: Option<f64>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Diverged { .. } | Error::NotConverged { .. } => 3,
        Error::Infeasible { .. } => 4,
        _ => 2,
    }
}

fn fail(e: &Error) -> u8 {
    eprintln!("error: {e}");
    if let Error::Infeasible { certificate, .. } = e {
        eprintln!("certificate: {certificate:?}");
    }
    exit_code(e)
}

fn print_outcome(outcome: &Outcome, dir: &Path) {
    let r = &outcome.report;
    println!("scenario {} -> {}", r.scenario, dir.display());
    for w in &r.warnings {
        println!("  warning: {w}");
    }
    for c in &r.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("  {verdict} {:<28} value {:.3e} threshold {:.1e} {}", c.name, c.value, c.threshold, c.note);
    }
    if let Some(cmp) = &r.comparison {
        println!(
            "  bus {}: nadir {:.4e} (proposed) vs {:.4e} (AGC); settling {:.3} s vs {:.3} s; {:?}",
            cmp.bus, cmp.proposed.nadir, cmp.agc.nadir, cmp.proposed.settling_time, cmp.agc.settling_time, cmp.verdict
        );
    }
    if let Some(t) = r.settled_at {
        println!("  steady state from t = {t:.2} s");
    }
}

fn run_one(path: &Path, args: &RunArgs, compare: bool) -> u8 {
    let opts = RunOptions {
        allow_uncertified: args.allow_uncertified,
        step: args.step,
        t_end: args.t_end,
    };
    let mut out = PathBuf::new();
    let result = load_scenario(path).and_then(|mut scn| {
        opts.apply(&mut scn)?;
        out = output_dir(path, args, scn.output_dir.as_deref());
        let outcome = if compare {
            scenario::compare(&scn, &opts)?
        } else {
            scenario::simulate(&scn, &opts)?
        };
        scenario::write_outputs(&outcome, &out)?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => {
            print_outcome(&outcome, &out);
            if outcome.report.pass {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("{}:", path.display());
            fail(&e)
        }
    }
}

/// `--out` wins, then the scenario's own `output_dir` (relative to the
/// scenario file), then `out/<stem>`.
fn output_dir(path: &Path, args: &RunArgs, configured: Option<&Path>) -> PathBuf {
    let stem = path.file_stem().map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    match (&args.out, args.config.len(), configured) {
        (Some(out), 1, _) => out.clone(),
        (Some(out), _, _) => out.join(stem),
        (None, _, Some(dir)) => path.parent().unwrap_or_else(|| Path::new(".")).join(dir),
        (None, _, None) => PathBuf::from("out").join(stem),
    }
}

fn run_many(args: &RunArgs, compare: bool) -> u8 {
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(args.jobs.max(1)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let codes: Vec<u8> = pool.install(|| {
        args.config
            .par_iter()
            .map(|path| run_one(path, args, compare))
            .collect()
    });
    codes.into_iter().max().unwrap_or(0)
}

fn solve_olfc(config: &Path, base_load: bool, tol: f64) -> u8 {
    let report = load_any(config).and_then(|file| match file {
        ConfigFile::Scenario(scn) => {
            let load = if base_load {
                scn.model.params.base_load.clone()
            } else {
                scenario::post_disturbance_load(&scn)
            };
            scenario::olfc_report(&scn.name, &scn.model.topo, &scn.model.costs, load, tol)
        }
        ConfigFile::Network(model) => {
            scenario::olfc_report(&model.name, &model.topo, &model.costs, model.params.base_load.clone(), tol)
        }
    });
    match report {
        Ok(r) => {
            println!("{}", scenario::to_json(&r));
            if r.pass {
                0
            } else {
                1
            }
        }
        Err(e) => fail(&e),
    }
}

fn certify(config: &Path) -> u8 {
    match load_scenario(config).and_then(|scn| scenario::certify(&scn)) {
        Ok(cert) => {
            println!("{}", scenario::to_json(&cert));
            if cert.pass {
                0
            } else {
                1
            }
        }
        Err(e) => fail(&e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Simulate(args) => run_many(&args, false),
        Command::Compare(args) => run_many(&args, true),
        Command::SolveOlfc { config, base_load, tol } => solve_olfc(&config, base_load, tol),
        Command::CertifyGains { config } => certify(&config),
    };
    log::debug!("exit code {code}");
    ExitCode::from(code)
}
