//! Region and curve sweeps: one AO solve per (weight or SNR) point per
//! strategy, Monte Carlo averaging over channel ensembles, deterministic
//! parallel execution.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use rsma_core::model::{ChannelSpec, ScenarioConfig, StrategyKind};
use rsma_core::optimizer::{self, AoStatus, OptError};
use rsma_core::channels::random_channel_realization;

use crate::hull::{convex_hull, rate_region_hull};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{0}")]
    Setup(String),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Weight exponents of the two-user region boundary sweep: -3, then -1..1 in
/// 0.05 steps, then 3 (u_1 = 1, u_2 = 10^e), 43 points in total.
pub fn default_weight_exponents() -> Vec<f64> {
    let mut exps = vec![-3.0];
    for i in 0..=40 {
        exps.push(-1.0 + 0.05 * i as f64);
    }
    exps.push(3.0);
    exps
}

/// A coarse 9-point subset of the default grid (shared endpoints), for
/// expensive Monte Carlo settings.
pub fn coarse_weight_exponents() -> Vec<f64> {
    vec![-3.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 3.0]
}

/// Rate-region sweep description (two users).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionJob {
    pub label: String,
    /// Template scenario; weights are overwritten per sweep point.
    pub base: ScenarioConfig,
    pub strategies: Vec<StrategyKind>,
    pub weight_exponents: Vec<f64>,
    /// Number of channel realizations averaged per point (random channels
    /// only; 1 keeps the template channel).
    pub mc_channels: usize,
}

/// WSR-versus-SNR sweep description.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveJob {
    pub label: String,
    pub base: ScenarioConfig,
    pub strategies: Vec<StrategyKind>,
    pub snr_db: Vec<f64>,
    /// Per-SNR QoS threshold applied to every user; empty keeps the
    /// template's thresholds at every SNR.
    pub threshold_schedule: Vec<f64>,
    pub mc_channels: usize,
}

/// Either sweep, as stored in run manifests.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JobSpec {
    Region(RegionJob),
    Curve(CurveJob),
}

impl JobSpec {
    pub fn label(&self) -> &str {
        match self {
            JobSpec::Region(j) => &j.label,
            JobSpec::Curve(j) => &j.label,
        }
    }
}

/// One solved sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    /// Weight exponent (regions) or SNR in dB (curves).
    pub sweep_value: f64,
    pub strategy: StrategyKind,
    /// Per-user rates; `None` when the point is infeasible.
    pub rates: Option<Vec<f64>>,
    pub wsr: Option<f64>,
    pub order: Option<Vec<usize>>,
    pub grouping: Option<Vec<Vec<usize>>>,
    pub iterations: usize,
    pub status: PointStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointStatus {
    Converged,
    MaxIterations,
    Infeasible,
}

impl std::fmt::Display for PointStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            PointStatus::Converged => "converged",
            PointStatus::MaxIterations => "max-iterations",
            PointStatus::Infeasible => "infeasible",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionResult {
    pub job: RegionJob,
    pub points: Vec<SweepPoint>,
    /// Closed region hull per strategy (same order as `job.strategies`).
    pub hulls: Vec<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveResult {
    pub job: CurveJob,
    pub points: Vec<SweepPoint>,
}

fn realized_channel_config(base: &ScenarioConfig, realization: usize) -> ScenarioConfig {
    let mut config = base.clone();
    if let ChannelSpec::Random { variances, seed } = &base.channel {
        let h = random_channel_realization(base.nt, variances, *seed, realization as u64)
            .expect("validated random spec");
        config.channel = ChannelSpec::Explicit(h);
    }
    config
}

/// Solve one scenario, averaging user rates over `mc` channel realizations.
/// All realizations must be feasible for the point to count as feasible.
fn solve_point(base: &ScenarioConfig, mc: usize) -> Result<SweepPoint, SweepError> {
    let mut rates = vec![0.0; base.num_users];
    let mut iterations = 0usize;
    let mut status = PointStatus::Converged;
    let mut order = None;
    let mut grouping = None;
    for r in 0..mc.max(1) {
        let config = realized_channel_config(base, r);
        match optimizer::solve_scenario(&config) {
            Ok(result) => {
                for (acc, rate) in rates.iter_mut().zip(&result.run.outcome.user_totals) {
                    *acc += rate / mc.max(1) as f64;
                }
                iterations = iterations.max(result.run.iterations);
                if result.run.status == AoStatus::MaxIterations {
                    status = PointStatus::MaxIterations;
                }
                order = result.chosen.order.clone();
                grouping = result.chosen.grouping.clone();
            }
            Err(OptError::Infeasible(_)) => {
                return Ok(SweepPoint {
                    sweep_value: 0.0,
                    strategy: base.strategy,
                    rates: None,
                    wsr: None,
                    order: None,
                    grouping: None,
                    iterations: 0,
                    status: PointStatus::Infeasible,
                });
            }
            Err(e) => return Err(e.into()),
        }
    }
    let wsr = rates
        .iter()
        .zip(&base.weights)
        .map(|(r, w)| r * w)
        .sum::<f64>();
    Ok(SweepPoint {
        sweep_value: 0.0,
        strategy: base.strategy,
        rates: Some(rates),
        wsr: Some(wsr),
        order,
        grouping,
        iterations,
        status,
    })
}

/// Run a two-user rate-region sweep: one AO solve per exponent and strategy
/// (order enumeration inside), then the convex hull per strategy.
pub fn run_region(job: &RegionJob) -> Result<RegionResult, SweepError> {
    if job.base.num_users != 2 {
        return Err(SweepError::Setup(
            "rate regions are defined for two users".into(),
        ));
    }
    let mut tasks = Vec::new();
    for &strategy in &job.strategies {
        for &e in &job.weight_exponents {
            tasks.push((strategy, e));
        }
    }
    let points: Vec<SweepPoint> = tasks
        .par_iter()
        .map(|&(strategy, e)| {
            let mut config = job.base.clone();
            config.strategy = strategy;
            config.weights = vec![1.0, 10f64.powf(e)];
            let mut point = solve_point(&config, job.mc_channels)?;
            point.sweep_value = e;
            point.strategy = strategy;
            Ok(point)
        })
        .collect::<Result<Vec<_>, SweepError>>()?;

    let hulls = job
        .strategies
        .iter()
        .map(|&s| {
            let pts: Vec<(f64, f64)> = points
                .iter()
                .filter(|p| p.strategy == s)
                .filter_map(|p| p.rates.as_ref().map(|r| (r[0], r[1])))
                .collect();
            if pts.is_empty() {
                Vec::new()
            } else {
                rate_region_hull(&pts)
            }
        })
        .collect();

    Ok(RegionResult {
        job: job.clone(),
        points,
        hulls,
    })
}

/// Run a WSR-versus-SNR sweep with the job's per-SNR QoS schedule.
pub fn run_curve(job: &CurveJob) -> Result<CurveResult, SweepError> {
    if !job.threshold_schedule.is_empty() && job.threshold_schedule.len() != job.snr_db.len() {
        return Err(SweepError::Setup(
            "threshold schedule must have one entry per SNR".into(),
        ));
    }
    let mut tasks = Vec::new();
    for &strategy in &job.strategies {
        for (i, &snr) in job.snr_db.iter().enumerate() {
            tasks.push((strategy, i, snr));
        }
    }
    let points: Vec<SweepPoint> = tasks
        .par_iter()
        .map(|&(strategy, i, snr)| {
            let mut config = job.base.clone();
            config.strategy = strategy;
            config.snr_db = snr;
            if let Some(&t) = job.threshold_schedule.get(i) {
                config.thresholds = vec![t; config.num_users];
            }
            let mut point = solve_point(&config, job.mc_channels)?;
            point.sweep_value = snr;
            point.strategy = strategy;
            Ok(point)
        })
        .collect::<Result<Vec<_>, SweepError>>()?;
    Ok(CurveResult {
        job: job.clone(),
        points,
    })
}

/// Convex hull across several strategies' achieved pairs (for union regions).
pub fn union_hull(results: &RegionResult) -> Vec<(f64, f64)> {
    let pts: Vec<(f64, f64)> = results
        .points
        .iter()
        .filter_map(|p| p.rates.as_ref().map(|r| (r[0], r[1])))
        .collect();
    convex_hull(&pts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_has_43_points() {
        let exps = default_weight_exponents();
        assert_eq!(exps.len(), 43);
        assert_eq!(exps[0], -3.0);
        assert_eq!(*exps.last().unwrap(), 3.0);
        assert!((exps[1] - -1.0).abs() < 1e-12);
        assert!((exps[41] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn coarse_grid_is_a_subset_of_the_default() {
        let full = default_weight_exponents();
        for e in coarse_weight_exponents() {
            assert!(
                full.iter().any(|f| (f - e).abs() < 1e-9),
                "{e} missing from the default grid"
            );
        }
    }
}
