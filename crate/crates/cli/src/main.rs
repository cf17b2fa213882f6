use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use eqsub::Counterfunction;
use eqsub_cli::{CliError, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "eqsub", version, about = "Subgradient extragradient runs with exact rate bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the method and write out/trajectory.csv and out/summary.json.
    Solve(Common),
    /// Print the exact rate bounds for the configured constants.
    Rates(Common),
    /// Run the method and check the bounds against its trajectory.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma separated check groups.
        #[arg(long)]
        checks: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    #[arg(long)]
    k: Option<u64>,
    /// Counterfunction, `const:C` or `affine:P,C`.
    #[arg(long, value_name = "FAMILY:PARAMS")]
    g: Option<Counterfunction>,
    /// Decimal digit budget for exact bounds.
    #[arg(long, value_name = "DIGITS")]
    cap: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

impl Common {
    fn overrides(&self, checks: Option<String>) -> Overrides {
        Overrides {
            k: self.k,
            g: self.g.clone(),
            cap: self.cap,
            seed: self.seed,
            out: self.out.clone(),
            checks,
        }
    }
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(c) => {
            let cfg = RunConfig::load(&c.config)?;
            let summary = eqsub_cli::solve(&cfg, &c.overrides(None))?;
            if c.json {
                print_json(&summary);
            } else {
                println!("records   {}", summary.records);
                println!("final x   {:?}", summary.final_x);
                println!("final rho {}", summary.final_rho);
                println!("last f    {:?}", summary.fval_tail);
                println!("trajectory written to {}", summary.csv);
            }
            Ok(())
        }
        Command::Rates(c) => {
            let cfg = RunConfig::load(&c.config)?;
            let rows = eqsub_cli::rates(&cfg, &c.overrides(None))?;
            if c.json {
                print_json(&rows);
            } else {
                print!("{}", eqsub_cli::format_table(&rows));
            }
            Ok(())
        }
        Command::Verify { common: c, checks } => {
            let cfg = RunConfig::load(&c.config)?;
            let report = eqsub_cli::verify(&cfg, &c.overrides(checks))?;
            if c.json {
                print_json(&report);
            } else {
                print!("{}", eqsub_cli::format_report(&report));
            }
            if report.fail > 0 {
                return Err(CliError::ChecksFailed(report.fail));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eqsub: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
