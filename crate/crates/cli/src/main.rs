use std::io::Write;
use std::net::{SocketAddr, ToSocketAddrs};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use srampuf::analysis::{AnalysisOptions, ProfileSource, DEFAULT_BASELINE};
use srampuf::chipnet::Server;
use srampuf::commands;

const DEFAULT_ENDPOINT: &str = "127.0.0.1:7878";

/// SRAM-PUF characterization workbench.
#[derive(Parser, Debug)]
#[command(name = "srampuf", version, about)]
struct Cli {
    /// Master seed for chip generation.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Floorplan/parameter file; the built-in floorplan when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory, depending on the command.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Validate a configuration, calibrate missing noise and write it out.
    Gen,
    /// Serve a bank of virtual chips over TCP.
    Serve {
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        endpoint: String,
        #[arg(long, default_value_t = 50)]
        chips: u32,
    },
    /// Power-cycle chips on a server and write dump files.
    Collect {
        #[arg(long, default_value = DEFAULT_ENDPOINT)]
        endpoint: String,
        #[arg(long, default_value_t = 50)]
        chips: u32,
        #[arg(long, default_value_t = 10)]
        cycles: u32,
    },
    /// Analyze a dump directory into a JSON report plus plot data.
    Analyze {
        dumps: PathBuf,
        #[arg(long, default_value = DEFAULT_BASELINE)]
        baseline: String,
        /// `averaged` or `highest-autocorrelation`.
        #[arg(long, default_value = "averaged")]
        profile: ProfileSource,
    },
    /// Render a JSON report as a table.
    Report {
        report: PathBuf,
        /// Print the canonical JSON instead of the table.
        #[arg(long)]
        json: bool,
    },
}

fn resolve(endpoint: &str) -> Result<SocketAddr> {
    endpoint
        .to_socket_addrs()
        .with_context(|| format!("cannot resolve endpoint {endpoint}"))?
        .next()
        .with_context(|| format!("endpoint {endpoint} has no address"))
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Cmd::Gen => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("floorplan.cfg"));
            let cfg = commands::cmd_gen(config, &out)?;
            println!("wrote {} ({} designs)", out.display(), cfg.floorplan.designs().len());
        }
        Cmd::Serve { endpoint, chips } => {
            let cfg = commands::load_config(config)?;
            let bank = commands::bank_config(&cfg, cli.seed, chips)?;
            let server = Server::bind(resolve(&endpoint)?, bank)?;
            println!("listening on {}", server.local_addr()?);
            std::io::stdout().flush()?;
            server.run()?;
        }
        Cmd::Collect { endpoint, chips, cycles } => {
            let Some(out) = cli.out else { bail!("collect needs --out <DIR>") };
            let summary = commands::cmd_collect(config, resolve(&endpoint)?, chips, cycles, &out)?;
            println!("wrote {} dump files, {} bits", summary.files.len(), summary.total_bits);
        }
        Cmd::Analyze { dumps, baseline, profile } => {
            let out = cli.out.unwrap_or_else(|| PathBuf::from("report.json"));
            let options = AnalysisOptions { baseline, profile_source: profile };
            let report = commands::cmd_analyze(&dumps, &options, Some(cli.seed), &out)?;
            print!("{}", report.render_table()?);
        }
        Cmd::Report { report, json } => {
            let (table, canonical) = commands::cmd_report(&report)?;
            print!("{}", if json { canonical } else { table });
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
