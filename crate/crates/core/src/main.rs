use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pluralism::cli::{self, exit, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "pluralism", version, about = "One-school vs two-school education policies under uncertain, endogenous tastes")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its JSON report.
    Run { config: PathBuf },
    /// Write figure CSV data for a config.
    Figures { config: PathBuf },
    /// Run all property certificates.
    Verify {
        #[arg(long)]
        trials: Option<usize>,
        /// Single seed; defaults to the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        /// Optional config providing the remaining settings.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, ExitCode> {
    ExperimentConfig::load(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(exit::FAILURE as u8)
    })
}

fn finish(report: &cli::RunReport, path: &std::path::Path) -> ExitCode {
    println!("{}: {} -> {}", report.name, report.status, path.display());
    for p in &report.policies {
        match (&p.level, &p.maximin, &p.error) {
            (Some(level), Some(m), _) => println!("  {:<28} level {level:.9}  cost {:.9}  maximin {m:.9}", p.policy, p.total_cost.unwrap_or(f64::NAN)),
            (_, _, Some(e)) => println!("  {:<28} {}", p.policy, e),
            _ => {}
        }
    }
    for c in report.certificates.iter().filter(|c| !c.passed) {
        println!(
            "  FAIL {} ({:?} κ={} seed {}): {} violations, worst slack {:e}",
            c.property.name(),
            c.density.family,
            c.density.kappa,
            c.seed,
            c.violation_count,
            c.worst_slack
        );
    }
    if let Some(t) = &report.theorems {
        println!("  maximin resource {:?} utility {:?} weighted {:?} levels {:?}", t.maximin_resource, t.maximin_utility, t.weighted_utility, t.level_dominance);
    }
    ExitCode::from(report.exit_code as u8)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match args.command {
        Command::Run { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match cli::run(&cfg) {
                Ok((report, path)) => finish(&report, &path),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit::FAILURE as u8)
                }
            }
        }
        Command::Figures { config } => {
            let cfg = match load(&config) {
                Ok(c) => c,
                Err(code) => return code,
            };
            match cli::emit_figure_data(&cfg) {
                Ok(paths) => {
                    for p in paths {
                        println!("{}", p.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit::FAILURE as u8)
                }
            }
        }
        Command::Verify { trials, seed, config } => {
            let mut cfg = match &config {
                Some(p) => match load(p) {
                    Ok(c) => c,
                    Err(code) => return code,
                },
                None => ExperimentConfig::parse("name = \"verify\"").expect("default config parses"),
            };
            cfg.experiment = Experiment::Verify;
            if let Some(t) = trials {
                cfg.verify.trials = t.max(1);
            }
            if let Some(s) = seed {
                cfg.verify.seeds = vec![s];
            }
            match cli::run(&cfg) {
                Ok((report, path)) => finish(&report, &path),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(exit::FAILURE as u8)
                }
            }
        }
    }
}
