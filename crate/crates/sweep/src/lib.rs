//! Sweep front end for the multiple-access beamforming toolkit: scenario
//! presets, rate-region and WSR-versus-SNR experiments, persistence and plot
//! data emission.

pub mod hull;
pub mod output;
pub mod presets;
pub mod sweep;

use std::path::Path;

use sweep::{CurveResult, JobSpec, RegionResult, SweepError};

/// Outcome of running one job.
pub enum JobResult {
    Region(RegionResult),
    Curve(CurveResult),
}

/// Run any job spec.
pub fn run_job(job: &JobSpec) -> Result<JobResult, SweepError> {
    match job {
        JobSpec::Region(j) => Ok(JobResult::Region(sweep::run_region(j)?)),
        JobSpec::Curve(j) => Ok(JobResult::Curve(sweep::run_curve(j)?)),
    }
}

/// Run a list of jobs, writing per-job files and the manifest into `dir`.
/// Returns the manifest and whether any point came back infeasible.
pub fn run_and_write(
    dir: &Path,
    preset: Option<String>,
    jobs: &[JobSpec],
) -> Result<(output::Manifest, bool), SweepError> {
    let mut manifest = output::Manifest::new(preset, jobs.to_vec());
    let mut any_infeasible = false;
    for job in jobs {
        let result = run_job(job)?;
        let (emitted, infeasible) = match &result {
            JobResult::Region(r) => (
                output::write_region(dir, r)?,
                r.points.iter().any(|p| p.status == sweep::PointStatus::Infeasible),
            ),
            JobResult::Curve(c) => (
                output::write_curve(dir, c)?,
                c.points.iter().any(|p| p.status == sweep::PointStatus::Infeasible),
            ),
        };
        any_infeasible |= infeasible;
        manifest.emitted.push(emitted);
    }
    manifest.save(&dir.join("manifest.json"))?;
    Ok((manifest, any_infeasible))
}

/// Quick invariant suite behind `rsma-sweep validate`: a desk-scale sample of
/// the properties the full test suite checks. Returns human-readable lines,
/// erroring out on the first violated invariant.
pub fn validate() -> Result<Vec<String>, SweepError> {
    use rsma_core::model::{layout_for_strategy, ChannelSpec, ScenarioConfig, StrategyKind};
    use rsma_core::optimizer::solve_scenario;

    let mut report = Vec::new();

    // Layout key-set rules for K <= 4.
    for k in 1..=4usize {
        let rs = layout_for_strategy(StrategyKind::GeneralizedRs, k, None, None)
            .map_err(|e| SweepError::Setup(e.to_string()))?;
        if rs.num_streams() != (1 << k) - 1 {
            return Err(SweepError::Setup(format!(
                "generalized layout for K={k} has {} streams",
                rs.num_streams()
            )));
        }
    }
    report.push("layout key-set rules: ok".into());

    // Monotone AO trace on a structured two-user instance.
    let mut config = ScenarioConfig::new(StrategyKind::GeneralizedRs, 4, 2, 20.0);
    config.channel = ChannelSpec::Structured {
        gammas: vec![1.0],
        thetas: vec![std::f64::consts::PI / 9.0],
    };
    let result = solve_scenario(&config)?;
    if result
        .run
        .trace
        .windows(2)
        .any(|w| w[1] < w[0] - 1e-8)
    {
        return Err(SweepError::Setup("AO trace decreased".into()));
    }
    report.push(format!(
        "AO monotone trace ({} iterations, wsr {:.4}): ok",
        result.run.iterations, result.run.outcome.wsr
    ));

    // Region hull convexity and determinism on a coarse sweep.
    let job = sweep::RegionJob {
        label: "validate".into(),
        base: config.clone(),
        strategies: vec![StrategyKind::GeneralizedRs, StrategyKind::MuLp],
        weight_exponents: vec![-3.0, -0.5, 0.0, 0.5, 3.0],
        mc_channels: 1,
    };
    let a = sweep::run_region(&job)?;
    let b = sweep::run_region(&job)?;
    for hull in &a.hulls {
        if !hull::is_convex(hull) {
            return Err(SweepError::Setup("region hull not convex".into()));
        }
    }
    let csv_a = output::points_to_csv("validate", "u2_exponent", 2, &a.points);
    let csv_b = output::points_to_csv("validate", "u2_exponent", 2, &b.points);
    if csv_a != csv_b {
        return Err(SweepError::Setup("region sweep not deterministic".into()));
    }
    // RS region contains the MU-LP points.
    let rs_hull = &a.hulls[0];
    for p in a.points.iter().filter(|p| p.strategy == StrategyKind::MuLp) {
        if let Some(r) = &p.rates {
            if !hull::hull_contains(rs_hull, (r[0], r[1]), 1e-3) {
                return Err(SweepError::Setup(format!(
                    "MU-LP point ({}, {}) outside the RS region",
                    r[0], r[1]
                )));
            }
        }
    }
    report.push("region hulls convex, deterministic, RS contains MU-LP: ok".into());

    Ok(report)
}
