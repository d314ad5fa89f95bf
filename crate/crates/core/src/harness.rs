//! Seeded experiment execution: single runs and parameter sweeps.

use std::ops::Range;

use rayon::prelude::*;

use crate::audit::{conservation_audit, AuditReport};
use crate::error::{HarnessError, ScenarioError};
use crate::event::EventLog;
use crate::metrics::{Metrics, Value};
use crate::report::Row;
use crate::scenario::ScenarioConfig;
use crate::world::World;

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub log: EventLog,
    pub metrics: Metrics,
    pub audit: AuditReport,
}

/// Run `config.horizon` steps with `seed`. The log must pass the
/// conservation audit.
pub fn run(config: &ScenarioConfig, seed: u64) -> Result<RunOutput, HarnessError> {
    let (mut sim, mut world) = World::new(config, seed)?;
    for _ in 0..config.horizon {
        sim.step(&mut world);
    }
    sim.finish();
    let log = sim.into_log();
    let audit = conservation_audit(&log)?;
    let metrics = Metrics::from_log(&log);
    Ok(RunOutput { log, metrics, audit })
}

/// Parse `a..b` (exclusive), `a..=b` (inclusive) or a single seed.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = || HarnessError::SeedRange(text.to_string());
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let range: Range<u64> = if let Some((a, b)) = text.split_once("..=") {
        num(a)?..num(b)?.checked_add(1).ok_or_else(bad)?
    } else if let Some((a, b)) = text.split_once("..") {
        num(a)?..num(b)?
    } else {
        let s = num(text)?;
        s..s + 1
    };
    if range.is_empty() {
        return Err(bad());
    }
    Ok(range.collect())
}

/// Knob values to sweep, in file order of the sorted keys.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Grid {
    pub axes: Vec<(String, Vec<toml::Value>)>,
}

impl Grid {
    /// A TOML table mapping dotted knob names to value arrays.
    pub fn parse(text: &str) -> Result<Grid, HarnessError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| HarnessError::Grid(e.to_string()))?;
        let mut axes = Vec::new();
        flatten("", &table, &mut axes)?;
        Ok(Grid { axes })
    }

    /// Cartesian product, last axis varying fastest.
    pub fn points(&self) -> Vec<Vec<(String, toml::Value)>> {
        let mut points = vec![Vec::new()];
        for (knob, values) in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((knob.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        points
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, Vec<toml::Value>)>) -> Result<(), HarnessError> {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out)?,
            toml::Value::Array(a) if !a.is_empty() => out.push((key, a.clone())),
            _ => return Err(HarnessError::Grid(format!("`{key}` must be a non-empty array of values"))),
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub point: usize,
    pub knobs: Vec<(String, toml::Value)>,
    pub seed: u64,
    pub metrics: Metrics,
}

impl SweepRow {
    pub fn to_row(&self) -> Row {
        let mut prefix = vec![("point".to_string(), Value::Int(self.point as u64))];
        prefix.extend(self.knobs.iter().map(|(k, v)| (k.clone(), Value::Text(v.to_string()))));
        prefix.push(("seed".to_string(), Value::Int(self.seed)));
        Row::from_metrics(prefix, &self.metrics)
    }
}

/// One row per (grid point, seed), points outer. Runs in parallel; the
/// row order does not depend on scheduling.
pub fn sweep(config: &ScenarioConfig, grid: &Grid, seeds: &[u64]) -> Result<Vec<SweepRow>, HarnessError> {
    let configs: Vec<(Vec<(String, toml::Value)>, ScenarioConfig)> = grid
        .points()
        .into_iter()
        .map(|point| {
            let mut c = config.clone();
            for (knob, value) in &point {
                c = c.with_knob(knob, value.clone())?;
            }
            Ok::<_, ScenarioError>((point, c))
        })
        .collect::<Result<_, _>>()?;
    let jobs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    jobs.par_iter()
        .map(|&(p, seed)| {
            let out = run(&configs[p].1, seed)?;
            Ok(SweepRow {
                point: p,
                knobs: configs[p].0.clone(),
                seed,
                metrics: out.metrics,
            })
        })
        .collect()
}

/// A calibration band check over the per-run medians of several runs.
#[derive(Clone, Debug, PartialEq)]
pub struct BandCheck {
    pub name: &'static str,
    pub median: Option<f64>,
    pub band: (f64, f64),
}

impl BandCheck {
    pub fn pass(&self) -> bool {
        self.median.is_some_and(|m| m >= self.band.0 && m <= self.band.1)
    }
}

impl std::fmt::Display for BandCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.pass() { "PASS" } else { "FAIL" };
        let value = self.median.map_or("null".to_string(), |m| format!("{m:.4}"));
        write!(f, "{verdict} {} median={value} band=[{}, {}]", self.name, self.band.0, self.band.1)
    }
}

/// Median of a per-run metric across runs, skipping runs where it is null.
pub fn median_of(runs: &[Metrics], pick: impl Fn(&Metrics) -> Option<f64>) -> Option<f64> {
    let mut values: Vec<f64> = runs.iter().filter_map(pick).collect();
    crate::metrics::median(&mut values)
}

/// Target bands for the baseline scenario. With static IDS present the
/// prevention band is the cooperative one.
pub fn band_checks(runs: &[Metrics], cooperative: bool) -> Vec<BandCheck> {
    let prevention = if cooperative { (0.80, 0.95) } else { (0.60, 0.85) };
    vec![
        BandCheck {
            name: "prevention_rate",
            median: median_of(runs, |m| m.prevention_rate),
            band: prevention,
        },
        BandCheck {
            name: "infections_per_event",
            median: median_of(runs, |m| m.infections_per_event),
            band: (2.0, 5.0),
        },
        BandCheck {
            name: "identification_latency",
            median: median_of(runs, |m| m.identification_latency),
            band: (50.0, 150.0),
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds("0..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seeds("1..=3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("7").unwrap(), vec![7]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("x..3").is_err());
    }

    #[test]
    fn grid_points() {
        let g = Grid::parse("[traffic]\nbackground_rate = [1.0, 2.0]\n[cells]\np_move = [0.1, 0.2, 0.3]\n").unwrap();
        assert_eq!(g.points().len(), 6);
        assert!(Grid::parse("x = 1").is_err());
    }
}
