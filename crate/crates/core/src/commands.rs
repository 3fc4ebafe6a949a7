//! Command implementations behind the `srampuf` binary. Each takes explicit
//! paths and options so that pipelines can also be driven in-process.

use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::analysis::{analyze, AnalysisError, AnalysisOptions, DesignAnalysis};
use crate::chipnet::{collect, BankConfig, ChipnetError, CollectOptions, CollectSummary};
use crate::config::{Config, ConfigError};
use crate::dataset::{Dataset, DatasetError};
use crate::report::{Report, ReportError, RunMetadata};

/// Resolved configuration written next to collected dumps.
pub const CAMPAIGN_FILE: &str = "campaign.cfg";

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Chipnet(#[from] ChipnetError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CommandError + '_ {
    move |source| CommandError::Io { path: path.display().to_string(), source }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CommandError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}

/// Loads `config` (or the default floorplan) with `sigma_noise` resolved.
pub fn load_config(config: Option<&Path>) -> Result<Config, CommandError> {
    let cfg = match config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    Ok(cfg.resolved()?)
}

/// Writes the validated, resolved configuration to `out`.
pub fn cmd_gen(config: Option<&Path>, out: &Path) -> Result<Config, CommandError> {
    let cfg = load_config(config)?;
    write_file(out, &cfg.to_text())?;
    Ok(cfg)
}

pub fn bank_config(cfg: &Config, seed: u64, chips: u32) -> Result<BankConfig, CommandError> {
    Ok(BankConfig { floorplan: cfg.floorplan.clone(), params: cfg.params()?, master_seed: seed, chips })
}

/// Collects `chips x cycles` readings from a running server into `out_dir`.
pub fn cmd_collect(
    config: Option<&Path>,
    endpoint: SocketAddr,
    chips: u32,
    cycles: u32,
    out_dir: &Path,
) -> Result<CollectSummary, CommandError> {
    let cfg = load_config(config)?;
    let options = CollectOptions { endpoint, chips, cycles, out_dir: out_dir.to_path_buf(), retries: 3 };
    let summary = collect(&options, &cfg.floorplan)?;
    write_file(&out_dir.join(CAMPAIGN_FILE), &cfg.to_text())?;
    Ok(summary)
}

/// Plot directory belonging to a report path: `<stem>_plots` beside it.
pub fn plot_dir(report: &Path) -> PathBuf {
    let stem = report.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{stem}_plots"))
}

fn write_plots(dir: &Path, analyses: &[DesignAnalysis]) -> Result<(), CommandError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for a in analyses {
        let mut profile = String::from("# position probability\n");
        for (i, p) in a.profile.probabilities.iter().enumerate() {
            let _ = writeln!(profile, "{i} {p}");
        }
        write_file(&dir.join(format!("{}_profile.dat", a.design)), &profile)?;
        let mut acf = String::from("# lag value\n");
        for (i, r) in a.autocorrelation.iter().enumerate() {
            let _ = writeln!(acf, "{i} {r}");
        }
        write_file(&dir.join(format!("{}_acf.dat", a.design)), &acf)?;
    }
    Ok(())
}

/// Puts designs into the order of `cfg`'s floorplan; unknown ones go last.
fn floorplan_order(data: &mut Dataset, cfg: &Config) {
    let rank = |name: &str| cfg.floorplan.designs().iter().position(|d| d.name == name).unwrap_or(usize::MAX);
    data.designs.sort_by_key(|d| rank(&d.design));
}

fn metadata(data: &Dataset, cfg: Option<&Config>, seed: Option<u64>, options: &AnalysisOptions) -> RunMetadata {
    let chips = data.designs.first().map_or(0, |d| d.chips().len() as u32);
    let cycles = data
        .designs
        .first()
        .and_then(|d| d.chips().iter().map(|&c| d.cycles_of(c).count() as u32).min())
        .unwrap_or(0);
    RunMetadata {
        seed,
        sigma_mismatch: cfg.map(|c| c.sigma_mismatch),
        sigma_noise: cfg.and_then(|c| c.sigma_noise),
        beta: cfg.map(|c| c.beta),
        gradient: cfg.map(|c| c.gradient),
        chips,
        cycles,
        bits_per_reading: data.designs.iter().map(|d| d.geometry.cells() as u64).sum(),
        baseline: options.baseline.clone(),
        profile_source: options.profile_source.to_string(),
    }
}

/// Analyzes the dumps in `dump_dir`, writes the JSON report to `out` and
/// plot data to [`plot_dir`]`(out)`.
pub fn cmd_analyze(
    dump_dir: &Path,
    options: &AnalysisOptions,
    seed: Option<u64>,
    out: &Path,
) -> Result<Report, CommandError> {
    let mut data = Dataset::load_dir(dump_dir)?;
    if data.designs.is_empty() {
        return Err(AnalysisError::InsufficientData(format!("no dump files in {}", dump_dir.display())).into());
    }
    let campaign = dump_dir.join(CAMPAIGN_FILE);
    let cfg = if campaign.exists() { Some(Config::load(&campaign)?) } else { None };
    if let Some(c) = &cfg {
        floorplan_order(&mut data, c);
    }
    let analyses = analyze(&data, options)?;
    let report = Report::new(metadata(&data, cfg.as_ref(), seed, options), &analyses);
    write_file(out, &report.to_json())?;
    write_plots(&plot_dir(out), &analyses)?;
    Ok(report)
}

/// Reads a JSON report and returns `(text table, canonical JSON)`.
pub fn cmd_report(path: &Path) -> Result<(String, String), CommandError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let report = Report::from_json(&text)?;
    Ok((report.render_table()?, report.to_json()))
}
