use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use sana::harness::{band_checks, parse_seeds, sweep, Grid};
use sana::report::{emit_report, metrics_header, render, Format, Row};
use sana::{audit::conservation_audit, EventLog, Metrics, ScenarioConfig};

#[derive(Parser)]
#[command(name = "sana", version, about = "Artificial immune system network-security simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded simulation.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the scenario horizon.
        #[arg(long)]
        steps: Option<u64>,
        /// Write `events.log` and the metrics report here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Exit with status 2 if the calibration bands are missed.
        #[arg(long)]
        check: bool,
    },
    /// Run a parameter grid over a seed range.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// TOML table of dotted knob names to value arrays.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// `a..b`, `a..=b` or a single seed.
        #[arg(long, default_value = "0..30")]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Exit with status 2 if the medians miss the calibration bands.
        #[arg(long)]
        check: bool,
    },
    /// Load and validate a scenario file.
    Validate {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Recompute metrics from a persisted event log.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

fn load(path: &PathBuf) -> Result<ScenarioConfig> {
    ScenarioConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn checks_pass(runs: &[Metrics], cooperative: bool) -> bool {
    let mut ok = true;
    for c in band_checks(runs, cooperative) {
        eprintln!("{c}");
        ok &= c.pass();
    }
    ok
}

fn is_cooperative(config: &ScenarioConfig) -> bool {
    !config.defense.ids.is_empty() || config.defense.ids_top_betweenness > 0
}

fn execute(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            scenario,
            seed,
            steps,
            out,
            format,
            check,
        } => {
            let mut config = load(&scenario)?;
            if let Some(steps) = steps {
                config.horizon = steps;
            }
            let seed = seed.unwrap_or(config.seed);
            let output = sana::run(&config, seed)?;
            let rows = [Row::from_metrics(vec![], &output.metrics)];
            match out {
                Some(dir) => {
                    std::fs::create_dir_all(&dir)?;
                    std::fs::write(dir.join("events.log"), output.log.render())?;
                    let path = dir.join(format!("metrics.{}", format.extension()));
                    emit_report(format, &metrics_header(), &rows, &path)?;
                }
                None => print!("{}", render(format, &metrics_header(), &rows)),
            }
            if check && !checks_pass(&[output.metrics], is_cooperative(&config)) {
                return Ok(ExitCode::from(2));
            }
        }
        Command::Sweep {
            scenario,
            grid,
            seeds,
            out,
            format,
            check,
        } => {
            let config = load(&scenario)?;
            let grid = match grid {
                Some(path) => Grid::parse(&std::fs::read_to_string(&path)?)?,
                None => Grid::default(),
            };
            let seeds = parse_seeds(&seeds)?;
            let rows = sweep(&config, &grid, &seeds)?;
            let table: Vec<Row> = rows.iter().map(|r| r.to_row()).collect();
            let mut header = vec!["point".to_string()];
            header.extend(grid.axes.iter().map(|(k, _)| k.clone()));
            header.push("seed".to_string());
            header.extend(metrics_header());
            match out {
                Some(path) => emit_report(format, &header, &table, &path)?,
                None => print!("{}", render(format, &header, &table)),
            }
            if check {
                let metrics: Vec<Metrics> = rows.into_iter().map(|r| r.metrics).collect();
                if !checks_pass(&metrics, is_cooperative(&config)) {
                    return Ok(ExitCode::from(2));
                }
            }
        }
        Command::Validate { scenario } => {
            let config = load(&scenario)?;
            println!(
                "ok: {} nodes, horizon {}, {} attack(s)",
                config.topology.node_count(),
                config.horizon,
                config.attacks.len()
            );
        }
        Command::Replay { log, format } => {
            let text = std::fs::read_to_string(&log).with_context(|| format!("reading {}", log.display()))?;
            let log = EventLog::parse(&text)?;
            conservation_audit(&log)?;
            let rows = [Row::from_metrics(vec![], &Metrics::from_log(&log))];
            print!("{}", render(format, &metrics_header(), &rows));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
