use clap::{Parser, Subcommand};
use nonlinritz::certify::{CertificateReport, Status};
use nonlinritz_cli::{cmd_certify, cmd_check, cmd_grid, cmd_run, init_threads, CliError, Options};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "nonlinritz",
    version,
    about = "Alternating Ritz minimisation with certificates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory; overrides `out_dir` in the config.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Overrides `seed`; part of the config hash.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `stopping.max_epochs`; part of the config hash.
    #[arg(long, global = true)]
    max_epochs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Run the optimiser; writes trace.csv, summary.json and record.json.
    Run,
    /// Certify a previous run; writes report.json.
    Certify,
    /// Grid-search the minimiser oracle; writes oracle.json.
    Grid,
    /// Invariant checks at seeded random parameters; writes check.json.
    Check,
}

fn print_report(report: &CertificateReport) {
    for e in &report.entries {
        let status = match e.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotAsserted => "NOT ASSERTED",
            Status::Inconclusive => "INCONCLUSIVE",
        };
        println!(
            "{status:<13} {:<34} lhs = {:.6e}  rhs = {:.6e}  {}",
            e.name, e.lhs, e.rhs, e.detail
        );
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let config = cli
        .config
        .ok_or_else(|| CliError::Config("--config PATH is required".into()))?;
    let opts = Options {
        config,
        out_dir: cli.out_dir,
        seed: cli.seed,
        max_epochs: cli.max_epochs,
    };
    init_threads()?;
    match cli.command {
        Command::Run => {
            let s = cmd_run(&opts)?;
            println!(
                "best_energy = {:.16e} after {} iterations ({})",
                s.best_energy, s.iterations, s.termination
            );
        }
        Command::Grid => {
            let o = cmd_grid(&opts)?;
            println!("k_star = {:.16e}, k_star_lower = {:.16e}", o.k_star, o.k_star_lower);
        }
        Command::Certify | Command::Check => {
            let r = if matches!(cli.command, Command::Certify) {
                cmd_certify(&opts)
            } else {
                cmd_check(&opts)
            };
            match r {
                Ok(report) => print_report(&report),
                Err(CliError::CertificateFailed { failed, report }) => {
                    print_report(&report);
                    return Err(CliError::CertificateFailed { failed, report });
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nonlinritz: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
