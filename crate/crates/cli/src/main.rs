mod commands;
mod config;
mod error;
mod export;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Flags;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "landmix",
    version = concat!(env!("CARGO_PKG_VERSION"), " (", env!("LANDMIX_GIT_HASH"), ")"),
    about = "Spatial mixture models of land-use signals in catchment time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Clone, Copy, Subcommand)]
enum Command {
    /// Check the three input tables and report every violated invariant.
    Validate,
    /// Generate a synthetic dataset with known labels.
    Simulate,
    /// Fit the nem, gibbs or clr model and write fit.json.
    Fit,
    /// Tabulate category baselines and SSE across fits.
    Compare,
    /// Write the site adjacency as an edge list and cell polygons.
    ExportLattice,
    /// Write the MAP labelling as GeoJSON polygons.
    ExportMap,
    /// Write each component's trend and seasonal basis.
    ExportBasis,
}

fn run(command: Command, flags: &Flags) -> Result<(), CliError> {
    if let Some(jobs) = flags.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::usage("InvalidConfig", e.to_string()))?;
    }
    match command {
        Command::Validate => commands::validate(flags),
        Command::Simulate => commands::simulate_cmd(flags),
        Command::Fit => commands::fit(flags),
        Command::Compare => commands::compare(flags),
        Command::ExportLattice => commands::export_lattice(flags),
        Command::ExportMap => commands::export_map(flags),
        Command::ExportBasis => commands::export_basis(flags),
    }
}

fn fail(err: CliError) -> ExitCode {
    eprintln!("{}", err.to_json());
    ExitCode::from(err.exit_code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.render().to_string();
            let first = message.lines().next().unwrap_or_default().trim_start_matches("error: ");
            return fail(CliError::usage("InvalidArguments", first));
        }
    };
    let flags = match cli.flags.resolve() {
        Ok(f) => f,
        Err(e) => return fail(e),
    };
    let level = if flags.verbose.unwrap_or(false) { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli.command, &flags) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
