//! Command-line front end for the scenario pipeline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use transit_impact::gtfs::{build_synthetic_schedule, load_line_config, merge_feeds, parse_feed, write_feed};
use transit_impact::pipeline::toy::write_toy_city;
use transit_impact::pipeline::{
    equity_for, load_skim_outputs, report_from_records, run_evaluation, run_scenario, run_skim_stages, with_workers,
    OutputLock, PipelineError, ScenarioConfig, Stage, WORKERS_ENV,
};
use transit_impact::welfare::read_welfare_csv;

#[derive(Parser)]
#[command(name = "transit-impact", version, about = "Evaluate the impacts of adding a transit line to a network")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a timetable for a line description, optionally merged into a base feed.
    SynthGtfs {
        /// Line description (TOML).
        #[arg(long)]
        line: PathBuf,
        /// Output directory for the line's GTFS tables.
        #[arg(long)]
        out: PathBuf,
        /// Base GTFS directory to merge the line into.
        #[arg(long, requires = "merged_out")]
        base: Option<PathBuf>,
        /// Output directory for the merged feed.
        #[arg(long, requires = "base")]
        merged_out: Option<PathBuf>,
        /// Prefix for line ids that collide with base ids.
        #[arg(long, default_value = "new_")]
        prefix: String,
    },
    /// Compute base and alternative skims and their deltas.
    Skim(Overrides),
    /// Evaluate trip groups against persisted skims.
    Evaluate(Overrides),
    /// Compute equity indices from a welfare table.
    Equity {
        #[arg(long)]
        welfare: PathBuf,
        /// Sufficiency thresholds as fractions of the pre-scenario mean surplus.
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5")]
        thresholds: Vec<f64>,
        /// Write JSON here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export report tables and map layers from persisted group records.
    Report(Overrides),
    /// Run the full pipeline.
    Run(Overrides),
    /// Write a small seeded example city with a ready-to-run config.
    ToyCity {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Scenario config plus flag overrides; the file is the source of truth.
#[derive(Args)]
struct Overrides {
    /// Scenario config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (also settable via the environment).
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[arg(long)]
    weekday: Option<String>,
    /// Departure sampling step within a period, minutes.
    #[arg(long)]
    step_min: Option<f64>,
    #[arg(long)]
    max_transfers: Option<usize>,
    /// Notional base time for newly connected ODs, minutes.
    #[arg(long)]
    ceiling_min: Option<f64>,
    #[arg(long)]
    grams_per_mile: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Recompute skims instead of reading the cache.
    #[arg(long)]
    no_cache: bool,
}

impl Overrides {
    fn load(&self) -> Result<ScenarioConfig, PipelineError> {
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(v) = &self.output_dir {
            cfg.output_dir = v.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        if let Some(v) = &self.weekday {
            cfg.weekday = v.clone();
        }
        if let Some(v) = self.step_min {
            cfg.skim.sampling_step_min = v;
        }
        if let Some(v) = self.max_transfers {
            cfg.skim.max_transfers = v;
        }
        if let Some(v) = self.ceiling_min {
            cfg.ceiling_min = v;
        }
        if let Some(v) = self.grams_per_mile {
            cfg.grams_per_mile = v;
        }
        if let Some(v) = &self.thresholds {
            cfg.thresholds = v.clone();
        }
        if self.no_cache {
            cfg.cache = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn write_json(value: &impl serde::Serialize, out: Option<&Path>) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::failed(Stage::Report, e))?;
    match out {
        Some(p) => std::fs::write(p, text + "\n").map_err(|e| PipelineError::failed(Stage::Report, e)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::SynthGtfs { line, out, base, merged_out, prefix } => {
            let input = |s| move |e| PipelineError::input(s, e);
            let cfg = load_line_config(&line).map_err(input(Stage::Synth))?;
            let feed = build_synthetic_schedule(&cfg.route, &cfg.plan).map_err(input(Stage::Synth))?;
            write_feed(&feed, &out).map_err(|e| PipelineError::failed(Stage::Synth, e))?;
            println!("{}: {} stops, {} trips", out.display(), feed.stops.len(), feed.trips.len());
            if let (Some(base), Some(merged_out)) = (base, merged_out) {
                let base = parse_feed(&base).map_err(input(Stage::Ingest))?;
                let merged = merge_feeds(&base, &feed, &prefix).map_err(input(Stage::Merge))?;
                write_feed(&merged, &merged_out).map_err(|e| PipelineError::failed(Stage::Merge, e))?;
                println!("{}: {} stops, {} trips", merged_out.display(), merged.stops.len(), merged.trips.len());
            }
        }
        Command::Skim(o) => {
            let cfg = o.load()?;
            let _lock = OutputLock::acquire(&cfg.output_dir)?;
            let s = with_workers(cfg.workers, || run_skim_stages(&cfg))?;
            println!("{} periods x {} zones written to {}", s.deltas.len(), s.zones.len(), cfg.output_dir.display());
        }
        Command::Evaluate(o) => {
            let cfg = o.load()?;
            let _lock = OutputLock::acquire(&cfg.output_dir)?;
            let r = with_workers(cfg.workers, || {
                let skims = load_skim_outputs(&cfg)?;
                run_evaluation(&cfg, &skims)
            })?;
            println!("{} groups evaluated; results in {}", r.records.len(), cfg.output_dir.display());
        }
        Command::Equity { welfare, thresholds, out } => {
            let records = read_welfare_csv(&welfare).map_err(|e| PipelineError::input(Stage::Equity, e))?;
            if thresholds.iter().any(|&f| f.is_nan() || f <= 0.0) {
                return Err(PipelineError::input(Stage::Equity, "thresholds must be positive"));
            }
            let report = equity_for(&records, &thresholds)?
                .ok_or_else(|| PipelineError::input(Stage::Equity, "equity indices undefined for this welfare table"))?;
            write_json(&report, out.as_deref())?;
        }
        Command::Report(o) => {
            let cfg = o.load()?;
            let _lock = OutputLock::acquire(&cfg.output_dir)?;
            report_from_records(&cfg)?;
            println!("reports written to {}", cfg.output_dir.join("reports").display());
        }
        Command::Run(o) => {
            let cfg = o.load()?;
            let r = run_scenario(&cfg)?;
            write_json(&r.aggregates, None)?;
        }
        Command::ToyCity { out, seed } => {
            let city = write_toy_city(&out, seed)?;
            info!("toy city in {}", city.dir.display());
            println!("{}", city.config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
