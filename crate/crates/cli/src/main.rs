use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dgtau::{check, compare, pipeline, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "dgtau", version, about = "Anisotropic p-adaptive DGSEM steady solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Markdown,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its artifacts.
    Run {
        config: PathBuf,
        /// `key=value` with a dotted key, e.g. `mg.eta=1.2`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Tabulate finished runs of one case, relative to the first.
    Compare {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "markdown")]
        format: Format,
    },
    /// Run the invariant suite on tiny meshes.
    Check,
}

fn execute(cli: Cli) -> CliResult<bool> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = RunConfig::load(&config, &overrides)?;
            let out = pipeline::run(&cfg)?;
            let s = &out.summary;
            println!(
                "{}: {} {} dofs {} -> {}, residual {:.3e}, work units {:.1}, L2 error {:.3e}",
                out.dir.display(),
                s.case,
                s.mode,
                s.dofs_initial,
                s.dofs_final,
                s.residual,
                s.work_units,
                s.l2_error
            );
            for w in &s.warnings {
                eprintln!("warning: {w}");
            }
            Ok(s.converged)
        }
        Command::Compare { dirs, format } => {
            let rows = compare::table(&compare::load(&dirs)?)?;
            match format {
                Format::Markdown => print!("{}", compare::markdown(&rows)),
                Format::Csv => print!("{}", compare::csv(&rows)),
            }
            Ok(true)
        }
        Command::Check => {
            let results = check::run_checks();
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
