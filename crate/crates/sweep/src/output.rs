//! Result persistence: one CSV per sweep, a JSON manifest describing the run,
//! and gnuplot-ready `.dat` files with a machine-readable plot spec.
//!
//! Floats are written in Rust's shortest round-trip form, so reloading a CSV
//! reproduces bit-identical values; infeasible points leave their rate cells
//! empty.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::sweep::{
    CurveResult, JobSpec, PointStatus, RegionResult, SweepError, SweepPoint, FORMAT_VERSION,
};

/// Files produced for one job.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EmittedFiles {
    pub csv: PathBuf,
    pub dat: PathBuf,
    pub plot_spec: PathBuf,
}

/// The run manifest doubles as the re-runnable configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub preset: Option<String>,
    pub jobs: Vec<JobSpec>,
    pub emitted: Vec<EmittedFiles>,
}

impl Manifest {
    pub fn new(preset: Option<String>, jobs: Vec<JobSpec>) -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            preset,
            jobs,
            emitted: Vec::new(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), SweepError> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SweepError> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn order_cell(order: &Option<Vec<usize>>) -> String {
    match order {
        Some(o) => o
            .iter()
            .map(|u| u.to_string())
            .collect::<Vec<_>>()
            .join(">"),
        None => "-".into(),
    }
}

fn grouping_cell(grouping: &Option<Vec<Vec<usize>>>) -> String {
    match grouping {
        Some(groups) => groups
            .iter()
            .map(|g| {
                g.iter()
                    .map(|u| u.to_string())
                    .collect::<Vec<_>>()
                    .join(".")
            })
            .collect::<Vec<_>>()
            .join("|"),
        None => "-".into(),
    }
}

fn parse_order(cell: &str) -> Option<Vec<usize>> {
    if cell == "-" {
        return None;
    }
    Some(cell.split('>').map(|s| s.parse().unwrap()).collect())
}

fn parse_grouping(cell: &str) -> Option<Vec<Vec<usize>>> {
    if cell == "-" {
        return None;
    }
    Some(
        cell.split('|')
            .map(|g| g.split('.').map(|s| s.parse().unwrap()).collect())
            .collect(),
    )
}

/// CSV serialization of sweep points. Columns:
/// `format_version,label,sweep,value,strategy,r1..rK,wsr,order,grouping,iterations,status`.
pub fn points_to_csv(label: &str, sweep_name: &str, num_users: usize, points: &[SweepPoint]) -> String {
    let mut out = String::new();
    let rates: Vec<String> = (1..=num_users).map(|k| format!("r{k}")).collect();
    let _ = writeln!(
        out,
        "format_version,label,sweep,value,strategy,{},wsr,order,grouping,iterations,status",
        rates.join(",")
    );
    for p in points {
        let rate_cells: Vec<String> = match &p.rates {
            Some(r) => r.iter().map(|v| fmt_f64(*v)).collect(),
            None => vec![String::new(); num_users],
        };
        let wsr_cell = p.wsr.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            FORMAT_VERSION,
            label,
            sweep_name,
            fmt_f64(p.sweep_value),
            p.strategy.name(),
            rate_cells.join(","),
            wsr_cell,
            order_cell(&p.order),
            grouping_cell(&p.grouping),
            p.iterations,
            p.status,
        );
    }
    out
}

/// Parse a CSV produced by [`points_to_csv`] back into points.
pub fn points_from_csv(csv: &str) -> Result<Vec<SweepPoint>, SweepError> {
    let mut lines = csv.lines();
    let header = lines
        .next()
        .ok_or_else(|| SweepError::Setup("empty csv".into()))?;
    let columns: Vec<&str> = header.split(',').collect();
    let num_users = columns.iter().filter(|c| c.starts_with('r') && c[1..].parse::<usize>().is_ok()).count();
    let mut points = Vec::new();
    for line in lines {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 10 + num_users {
            return Err(SweepError::Setup(format!(
                "row has {} cells, expected {}",
                cells.len(),
                10 + num_users
            )));
        }
        let strategy = rsma_core::model::StrategyKind::parse(cells[4])
            .map_err(|e| SweepError::Setup(e.to_string()))?;
        let rate_cells = &cells[5..5 + num_users];
        let rates: Option<Vec<f64>> = if rate_cells.iter().any(|c| c.is_empty()) {
            None
        } else {
            Some(rate_cells.iter().map(|c| c.parse().unwrap()).collect())
        };
        let wsr_cell = cells[5 + num_users];
        let status = match cells[9 + num_users] {
            "converged" => PointStatus::Converged,
            "max-iterations" => PointStatus::MaxIterations,
            "infeasible" => PointStatus::Infeasible,
            other => return Err(SweepError::Setup(format!("unknown status {other}"))),
        };
        points.push(SweepPoint {
            sweep_value: cells[3].parse().unwrap(),
            strategy,
            rates,
            wsr: if wsr_cell.is_empty() {
                None
            } else {
                Some(wsr_cell.parse().unwrap())
            },
            order: parse_order(cells[6 + num_users]),
            grouping: parse_grouping(cells[7 + num_users]),
            iterations: cells[8 + num_users].parse().unwrap(),
            status,
        });
    }
    Ok(points)
}

/// Gnuplot-ready data: one block per strategy separated by blank lines,
/// columns `sweep_value r1 .. rK wsr` (infeasible points skipped).
fn points_to_dat(label: &str, points: &[SweepPoint], strategies: &[rsma_core::model::StrategyKind]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {label}");
    for (i, s) in strategies.iter().enumerate() {
        let _ = writeln!(out, "# block {i}: {}", s.name());
        for p in points.iter().filter(|p| p.strategy == *s) {
            if let (Some(rates), Some(wsr)) = (&p.rates, p.wsr) {
                let cells: Vec<String> = std::iter::once(p.sweep_value)
                    .chain(rates.iter().copied())
                    .chain(std::iter::once(wsr))
                    .map(fmt_f64)
                    .collect();
                let _ = writeln!(out, "{}", cells.join(" "));
            }
        }
        let _ = writeln!(out);
        let _ = writeln!(out);
    }
    out
}

#[derive(Serialize)]
struct PlotSpec<'a> {
    format_version: u32,
    kind: &'a str,
    label: &'a str,
    dat_file: &'a str,
    columns: Vec<String>,
    series: Vec<PlotSeries>,
}

#[derive(Serialize)]
struct PlotSeries {
    strategy: String,
    block: usize,
}

fn write_job_files(
    dir: &Path,
    label: &str,
    kind: &str,
    sweep_name: &str,
    num_users: usize,
    points: &[SweepPoint],
    strategies: &[rsma_core::model::StrategyKind],
) -> Result<EmittedFiles, SweepError> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join(format!("{label}.csv"));
    fs::write(&csv_path, points_to_csv(label, sweep_name, num_users, points))?;

    let dat_path = dir.join(format!("{label}.dat"));
    fs::write(&dat_path, points_to_dat(label, points, strategies))?;

    let mut columns = vec![sweep_name.to_string()];
    columns.extend((1..=num_users).map(|k| format!("r{k}")));
    columns.push("wsr".into());
    let spec = PlotSpec {
        format_version: FORMAT_VERSION,
        kind,
        label,
        dat_file: dat_path.file_name().unwrap().to_str().unwrap(),
        columns,
        series: strategies
            .iter()
            .enumerate()
            .map(|(block, s)| PlotSeries {
                strategy: s.name().into(),
                block,
            })
            .collect(),
    };
    let spec_path = dir.join(format!("{label}.plot.json"));
    fs::write(&spec_path, serde_json::to_string_pretty(&spec)?)?;

    Ok(EmittedFiles {
        csv: csv_path,
        dat: dat_path,
        plot_spec: spec_path,
    })
}

pub fn write_region(dir: &Path, result: &RegionResult) -> Result<EmittedFiles, SweepError> {
    write_job_files(
        dir,
        &result.job.label,
        "region",
        "u2_exponent",
        result.job.base.num_users,
        &result.points,
        &result.job.strategies,
    )
}

pub fn write_curve(dir: &Path, result: &CurveResult) -> Result<EmittedFiles, SweepError> {
    write_job_files(
        dir,
        &result.job.label,
        "curve",
        "snr_db",
        result.job.base.num_users,
        &result.points,
        &result.job.strategies,
    )
}
