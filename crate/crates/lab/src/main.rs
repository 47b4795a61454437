use std::io::Write;
use std::panic;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thermosym_lab::{run, RunArgs, EXIT_INTERNAL, EXIT_USAGE};

#[derive(Parser)]
#[command(name = "thermosym", version, about = "Run thermal-symmetry verification scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write report.json, config.toml and CSV tables.
    Run {
        /// symmetry, spectrum, degeneracy, evolve, gaussian, fokker-planck,
        /// hpz-breaking, ekert or coth-scan
        #[arg(long)]
        scenario: String,
        /// TOML file of scenario parameters
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a parameter, e.g. `--set dim=28`; may repeat
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let Command::Run {
        scenario,
        config,
        overrides,
        out,
    } = cli.command;
    let args = RunArgs {
        scenario,
        config,
        overrides,
        out,
    };
    let code = match panic::catch_unwind(|| run(&args)) {
        Ok(Ok((report, code))) => {
            // a closed pipe must not turn a finished run into a crash
            let mut stdout = std::io::stdout().lock();
            for c in &report.checks {
                let _ = writeln!(
                    stdout,
                    "{} {}: {:e} (tolerance {:e}){}",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.tolerance,
                    c.error.as_deref().map(|e| format!(" [{e}]")).unwrap_or_default()
                );
            }
            let _ = writeln!(stdout, "wrote {}", args.out.join("report.json").display());
            code
        }
        Ok(Err(e)) => {
            eprintln!("{e}");
            e.exit_code()
        }
        Err(_) => {
            eprintln!("internal error: scenario panicked");
            EXIT_INTERNAL
        }
    };
    ExitCode::from(code as u8)
}
