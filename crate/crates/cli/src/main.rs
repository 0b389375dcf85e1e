//! `lobescope` command-line front end.
//!
//! Every command reads its inputs, runs one pipeline stage from the core
//! crate and writes plain data files into `--output-dir`. Settings come
//! from flags, then an optional TOML file (`--config`), then defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use lobescope::io::{read_ensemble_spec, read_environments, read_records, read_summaries};
use lobescope::report::{
    comparison_table, run_compare3gpp, run_stats, summary_table, write_cdfs, write_comparisons,
    write_ensemble, write_simulation, write_stats, PipelineConfig, ReportFormat,
};
use lobescope::sounder::{
    default_gain_dbi, run_procedures, AntennaModel, Antennas, SweepConfig, SyntheticEnvironment,
    DEFAULT_SIDELOBE_FLOOR_DB,
};
use lobescope::tgpp::TgppParamTable;

#[derive(Debug, Parser)]
#[command(
    name = "lobescope",
    version,
    about = "Angular spread statistics from directional sweeps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Input file (records CSV, summary CSV, environment or ensemble JSON).
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Directory receiving the output files; created if missing.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// TOML file with defaults for any of these settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "GHZ")]
    frequency: Option<f64>,
    /// Lobe threshold below the PAS peak [default: 10].
    #[arg(long, global = true, value_name = "DB", allow_negative_numbers = true)]
    threshold_db: Option<f64>,
    /// Azimuth grid of the synthesized PAS [default: 1].
    #[arg(long, global = true, value_name = "DEG")]
    resolution_deg: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Summary format: csv or json [default: csv].
    #[arg(long, global = true)]
    format: Option<ReportFormat>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lobes, spreads, log-normal summaries and CDFs from a records CSV.
    Stats,
    /// Set a summary CSV against the 3GPP indoor-office model.
    Compare3gpp {
        /// Alternative coefficient table (CSV) instead of the builtin one.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Run the sounder procedure on synthetic environments (JSON).
    Simulate(SimulateArgs),
    /// Generate a synthetic dataset from an ensemble spec (JSON).
    Ensemble,
    /// Empirical CDFs only, from a records CSV.
    Cdf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Azimuth HPBW of both horns.
    #[arg(long, value_name = "DEG")]
    hpbw_az: Option<f64>,
    /// Elevation HPBW of both horns.
    #[arg(long, value_name = "DEG")]
    hpbw_el: Option<f64>,
    /// Boresight gain; defaults to the horn gain at the link frequency.
    #[arg(long, value_name = "DBI", allow_negative_numbers = true)]
    gain_dbi: Option<f64>,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    input: Option<PathBuf>,
    output_dir: Option<PathBuf>,
    frequency_ghz: Option<f64>,
    threshold_db: Option<f64>,
    resolution_deg: Option<f64>,
    seed: Option<u64>,
    format: Option<ReportFormat>,
    hpbw_az_deg: Option<f64>,
    hpbw_el_deg: Option<f64>,
    gain_dbi: Option<f64>,
    sidelobe_floor_db: Option<f64>,
    sweep: Option<SweepConfig>,
}

impl FileConfig {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Settings after merging flags, config file and defaults.
#[derive(Debug)]
struct RunConfig {
    input: PathBuf,
    output_dir: PathBuf,
    frequency_ghz: Option<f64>,
    pipeline: PipelineConfig,
    seed: Option<u64>,
    format: ReportFormat,
    hpbw_az_deg: Option<f64>,
    hpbw_el_deg: Option<f64>,
    gain_dbi: Option<f64>,
    sidelobe_floor_db: f64,
    sweep: SweepConfig,
}

impl RunConfig {
    fn resolve(args: CommonArgs, sim: Option<&SimulateArgs>) -> Result<Self> {
        let file = match &args.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let defaults = PipelineConfig::default();
        let input = args
            .input
            .or(file.input)
            .context("no input file given (use --input or `input` in the config)")?;
        let output_dir = args.output_dir.or(file.output_dir).context(
            "no output directory given (use --output-dir or `output_dir` in the config)",
        )?;
        let cfg = Self {
            input,
            output_dir,
            frequency_ghz: args.frequency.or(file.frequency_ghz),
            pipeline: PipelineConfig {
                threshold_db: args
                    .threshold_db
                    .or(file.threshold_db)
                    .unwrap_or(defaults.threshold_db),
                resolution_deg: args
                    .resolution_deg
                    .or(file.resolution_deg)
                    .unwrap_or(defaults.resolution_deg),
            },
            seed: args.seed.or(file.seed),
            format: args.format.or(file.format).unwrap_or_default(),
            hpbw_az_deg: sim.and_then(|s| s.hpbw_az).or(file.hpbw_az_deg),
            hpbw_el_deg: sim.and_then(|s| s.hpbw_el).or(file.hpbw_el_deg),
            gain_dbi: sim.and_then(|s| s.gain_dbi).or(file.gain_dbi),
            sidelobe_floor_db: file.sidelobe_floor_db.unwrap_or(DEFAULT_SIDELOBE_FLOOR_DB),
            sweep: file.sweep.unwrap_or_default(),
        };
        cfg.validate_paths()?;
        Ok(cfg)
    }

    fn validate_paths(&self) -> Result<()> {
        if !self.input.is_file() {
            bail!(
                "input {} does not exist or is not a file",
                self.input.display()
            );
        }
        if self.output_dir.exists() && !self.output_dir.is_dir() {
            bail!(
                "output path {} exists and is not a directory",
                self.output_dir.display()
            );
        }
        Ok(())
    }
}

fn report_written(paths: &[PathBuf]) {
    for p in paths {
        log::info!("wrote {}", p.display());
    }
}

fn cmd_stats(cfg: &RunConfig) -> Result<()> {
    let records = read_records(&cfg.input)?;
    let report = run_stats(&records, &cfg.pipeline)?;
    report_written(&write_stats(&report, &cfg.output_dir, cfg.format)?);
    print!("{}", summary_table(&report.summaries));
    Ok(())
}

fn cmd_cdf(cfg: &RunConfig) -> Result<()> {
    let records = read_records(&cfg.input)?;
    let report = run_stats(&records, &cfg.pipeline)?;
    report_written(&write_cdfs(&report, &cfg.output_dir)?);
    Ok(())
}

fn cmd_compare3gpp(cfg: &RunConfig, table: Option<&Path>) -> Result<()> {
    let summaries = read_summaries(&cfg.input)?;
    let loaded;
    let table = match table {
        Some(p) => {
            loaded = TgppParamTable::load(p)?;
            &loaded
        }
        None => TgppParamTable::builtin(),
    };
    let rows = run_compare3gpp(&summaries, table, cfg.frequency_ghz)?;
    report_written(&[write_comparisons(&rows, &cfg.output_dir, cfg.format)?]);
    print!("{}", comparison_table(&rows));
    Ok(())
}

fn antennas_for(cfg: &RunConfig, frequency_ghz: f64) -> Result<Antennas> {
    let (Some(az), Some(el)) = (cfg.hpbw_az_deg, cfg.hpbw_el_deg) else {
        bail!("simulate needs both --hpbw-az and --hpbw-el (or hpbw_az_deg/hpbw_el_deg in the config)");
    };
    let gain = match cfg.gain_dbi.or_else(|| default_gain_dbi(frequency_ghz)) {
        Some(g) => g,
        None => bail!("no default horn gain at {frequency_ghz} GHz; pass --gain-dbi"),
    };
    Ok(Antennas::symmetric(AntennaModel::new(
        gain,
        az,
        el,
        cfg.sidelobe_floor_db,
    )?))
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    let mut envs = read_environments(&cfg.input)?;
    if let Some(f) = cfg.frequency_ghz {
        for e in &mut envs {
            e.frequency_ghz = f;
        }
    }
    if cfg.seed.is_some() {
        log::warn!("simulate is deterministic; --seed has no effect");
    }
    // One antenna model per frequency; keep the input order of the links.
    let mut by_freq: Vec<(f64, Vec<usize>)> = Vec::new();
    for (i, e) in envs.iter().enumerate() {
        match by_freq.iter_mut().find(|(f, _)| *f == e.frequency_ghz) {
            Some((_, idx)) => idx.push(i),
            None => by_freq.push((e.frequency_ghz, vec![i])),
        }
    }
    let mut outputs = vec![None; envs.len()];
    for (f, idx) in &by_freq {
        let group: Vec<SyntheticEnvironment> = idx.iter().map(|&i| envs[i].clone()).collect();
        let out = run_procedures(&group, &cfg.sweep, &antennas_for(cfg, *f)?)?;
        for (&i, o) in idx.iter().zip(out) {
            outputs[i] = Some(o);
        }
    }
    let outputs: Vec<_> = outputs.into_iter().flatten().collect();
    report_written(&write_simulation(&outputs, &cfg.output_dir)?);
    Ok(())
}

fn cmd_ensemble(cfg: &RunConfig) -> Result<()> {
    let mut spec = read_ensemble_spec(&cfg.input)?;
    if let Some(seed) = cfg.seed {
        spec.seed = seed;
    }
    if let Some(f) = cfg.frequency_ghz {
        spec.frequency_ghz = f;
    }
    let ensemble = lobescope::ensemble::generate_ensemble(&spec)?;
    let redrawn = ensemble.links.iter().filter(|l| l.redraws > 0).count();
    if redrawn > 0 {
        log::warn!(
            "{redrawn} of {} links needed redrawn targets",
            ensemble.links.len()
        );
    }
    report_written(&write_ensemble(&ensemble, &cfg.output_dir)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let sim = match &cli.command {
        Command::Simulate(s) => Some(s),
        _ => None,
    };
    let cfg = RunConfig::resolve(cli.common, sim)?;
    log::debug!("{cfg:?}");
    match &cli.command {
        Command::Stats => cmd_stats(&cfg),
        Command::Cdf => cmd_cdf(&cfg),
        Command::Compare3gpp { table } => cmd_compare3gpp(&cfg, table.as_deref()),
        Command::Simulate(_) => cmd_simulate(&cfg),
        Command::Ensemble => cmd_ensemble(&cfg),
    }
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
