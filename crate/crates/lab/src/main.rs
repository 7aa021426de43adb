//! The `softgate` command line: seeded experiment drivers and the
//! verification checklist, all writing deterministic artifacts.

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use softgate_lab::config::{self, Experiment, Overrides, RunConfig};
use softgate_lab::{exp1, exp2, exp3, verify, Failure};

#[derive(Parser)]
#[command(name = "softgate", version, about = "Boundary-layer diagnostics for soft-to-hard routing")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Temperature sweep on the realizable two-expert model
    Exp1(CommonArgs),
    /// Interface-offset sweep at fixed temperature
    Exp2(CommonArgs),
    /// Reduced symmetry-breaking training runs
    Exp3(CommonArgs),
    /// Run the invariant checklist and write its report
    Verify(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Flat TOML config file; flags given here override its values
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory for all artifacts
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed for every sampler in the run
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Monte Carlo sample count
    #[arg(long, value_name = "N")]
    samples: Option<usize>,
}

impl CommonArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            config: self.config.clone(),
            out: self.out.clone(),
            seed: self.seed,
            samples: self.samples,
        }
    }
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let (experiment, args) = match &cli.cmd {
        Cmd::Exp1(a) => (Experiment::Exp1, a),
        Cmd::Exp2(a) => (Experiment::Exp2, a),
        Cmd::Exp3(a) => (Experiment::Exp3, a),
        Cmd::Verify(a) => (Experiment::Verify, a),
    };
    let cfg = match config::resolve(experiment, &args.overrides()) {
        Ok(cfg) => cfg,
        Err(f) => {
            eprintln!("error: {f}");
            return f.exit_code();
        }
    };
    match execute(&cfg) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

fn execute(cfg: &RunConfig) -> Result<i32, Failure> {
    match cfg.experiment {
        Experiment::Exp1 => {
            let out = exp1::run(cfg)?;
            println!(
                "exp1: slope_mass {:.4}, slope_gap {:.4}, corr {:.4} ({:.2} s)",
                out.summary.slope_mass,
                out.summary.slope_gap,
                out.summary.corr_mass_gap,
                out.summary.wall_secs
            );
            announce(&exp1::write_artifacts(&out, &cfg.out)?);
            Ok(0)
        }
        Experiment::Exp2 => {
            let out = exp2::run(cfg)?;
            println!(
                "exp2: corr_gap_mass {:.4}, corr_flip_mass {:.4} ({:.2} s)",
                out.summary.corr_gap_mass, out.summary.corr_flip_mass, out.summary.wall_secs
            );
            announce(&exp2::write_artifacts(&out, &cfg.out)?);
            Ok(0)
        }
        Experiment::Exp3 => {
            let out = exp3::run(cfg)?;
            for r in &out.records {
                println!(
                    "exp3 tau {}: align {:.4}, unorm {:.4}, entropy {:.4}{}",
                    r.tau,
                    r.align,
                    r.unorm,
                    r.entropy,
                    if r.diverged { " (diverged)" } else { "" }
                );
            }
            announce(&exp3::write_artifacts(&out, &cfg.out)?);
            Ok(0)
        }
        Experiment::Verify => {
            let report = verify::run(cfg)?;
            print!("{}", verify::render(&report));
            announce(&verify::write_artifacts(&report, &cfg.out)?);
            Ok(if report.all_passed { 0 } else { 2 })
        }
    }
}

fn announce(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}
