//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 when a scenario (or any sweep point) is
//! infeasible, 3 when order/grouping enumeration exceeds its cap, 1 on other
//! errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rsma_core::model::{ChannelSpec, OrderPolicy, ScenarioConfig, StrategyKind};
use rsma_core::optimizer::OptError;
use rsma_sweep::output::Manifest;
use rsma_sweep::sweep::{
    default_weight_exponents, CurveJob, JobSpec, RegionJob, SweepError,
};
use rsma_sweep::{presets, run_and_write, validate};

#[derive(Parser)]
#[command(
    name = "rsma-sweep",
    about = "Rate-region and WSR-vs-SNR sweeps for multi-antenna multiple access",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Two-user rate-region sweep over the weight grid.
    Region(RegionArgs),
    /// WSR-versus-SNR sweep.
    Curve(CurveArgs),
    /// Preset catalog operations.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Run a named preset.
    Run(RunArgs),
    /// Run the built-in invariant suite.
    Validate,
}

#[derive(Subcommand)]
enum PresetAction {
    /// List available presets.
    List,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory for CSV/JSON/plot files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores). Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Re-run the jobs of an existing manifest instead of building from flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Strategy tag (mu-lp, sc-sic, sc-sic-per-group, rs, 1-layer-rs,
    /// 2-layer-hrs, multicast). Repeat for several.
    #[arg(long = "strategy", value_parser = parse_strategy, default_values = ["rs", "sc-sic", "mu-lp"])]
    strategies: Vec<StrategyKind>,
    #[arg(long, default_value_t = 4)]
    nt: usize,
    /// Number of users.
    #[arg(long, default_value_t = 2)]
    users: usize,
    #[arg(long, default_value_t = 20.0)]
    snr: f64,
    /// Structured-channel gain factors (one per user after the first).
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Structured-channel angles in radians (one per user after the first).
    #[arg(long, value_delimiter = ',')]
    theta: Vec<f64>,
    /// Random-channel variances (one per user); overrides gamma/theta.
    #[arg(long, value_delimiter = ',')]
    variances: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// User weights.
    #[arg(long, value_delimiter = ',')]
    weights: Vec<f64>,
    /// Per-user QoS thresholds (bit/s/Hz).
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
    /// Channel realizations averaged per point.
    #[arg(long, default_value_t = 1)]
    mc: usize,
    /// AO restarts per candidate.
    #[arg(long, default_value_t = 3)]
    restarts: usize,
    /// AO stopping tolerance (bit/s/Hz).
    #[arg(long, default_value_t = 1e-4)]
    ao_tol: f64,
    #[arg(long, default_value_t = 200)]
    max_iter: usize,
    /// Enumeration cap on order/grouping candidates.
    #[arg(long, default_value_t = 64)]
    cap: usize,
    /// Fixed SC-SIC decoding order, e.g. 3,1,2.
    #[arg(long, value_delimiter = ',')]
    order: Vec<usize>,
    /// Decode in ascending channel-gain order (SC-SIC).
    #[arg(long, default_value_t = false)]
    ascending_order: bool,
    /// User grouping, e.g. 1.2|3.4.
    #[arg(long)]
    grouping: Option<String>,
    /// CSIT error scales per user; enables the imperfect-CSIT model.
    #[arg(long, value_delimiter = ',')]
    csit_scales: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    m_opt: usize,
    #[arg(long, default_value_t = 1000)]
    m_eval: usize,
}

#[derive(Args)]
struct RegionArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Output label.
    #[arg(long, default_value = "region")]
    label: String,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[arg(long, default_value = "curve")]
    label: String,
    /// SNR grid in dB.
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0])]
    snr_list: Vec<f64>,
    /// Per-SNR QoS threshold applied to every user.
    #[arg(long, value_delimiter = ',')]
    threshold_schedule: Vec<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Preset name (see `preset list`).
    name: String,
    /// Override the SNR grid of curve jobs.
    #[arg(long, value_delimiter = ',')]
    snr_list: Vec<f64>,
    /// Override the Monte Carlo channel count.
    #[arg(long)]
    mc: Option<usize>,
    /// Override the channel seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_strategy(s: &str) -> Result<StrategyKind, String> {
    StrategyKind::parse(s).map_err(|e| e.to_string())
}

fn parse_grouping(s: &str) -> Result<Vec<Vec<usize>>, String> {
    s.split('|')
        .map(|g| {
            g.split('.')
                .map(|u| u.parse::<usize>().map_err(|e| e.to_string()))
                .collect()
        })
        .collect()
}

fn scenario_from_args(a: &ScenarioArgs) -> Result<ScenarioConfig, String> {
    let strategy = a.strategies.first().copied().unwrap_or(StrategyKind::GeneralizedRs);
    let mut config = ScenarioConfig::new(strategy, a.nt, a.users, a.snr);
    config.channel = if !a.variances.is_empty() {
        ChannelSpec::Random {
            variances: a.variances.clone(),
            seed: a.seed,
        }
    } else if !a.gamma.is_empty() {
        ChannelSpec::Structured {
            gammas: a.gamma.clone(),
            thetas: a.theta.clone(),
        }
    } else {
        ChannelSpec::Random {
            variances: vec![1.0; a.users],
            seed: a.seed,
        }
    };
    if !a.weights.is_empty() {
        config.weights = a.weights.clone();
    }
    if !a.thresholds.is_empty() {
        config.thresholds = a.thresholds.clone();
    }
    if !a.order.is_empty() {
        config.order = Some(a.order.clone());
        config.order_policy = OrderPolicy::Fixed;
    }
    if a.ascending_order {
        config.order_policy = OrderPolicy::AscendingGain;
    }
    if let Some(g) = &a.grouping {
        config.grouping = Some(parse_grouping(g)?);
    }
    if !a.csit_scales.is_empty() {
        config.csit = Some(rsma_core::model::CsitSpec {
            error_scales: a.csit_scales.clone(),
            m_opt: a.m_opt,
            m_eval: a.m_eval,
            seed: a.seed.wrapping_add(1),
        });
    }
    config.restarts = a.restarts;
    config.ao_tol = a.ao_tol;
    config.max_ao_iter = a.max_iter;
    config.enumeration_cap = a.cap;
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

fn setup_threads(threads: Option<usize>) {
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn exit_code_for(err: &SweepError) -> u8 {
    match err {
        SweepError::Opt(OptError::Infeasible(_)) => 2,
        SweepError::Opt(OptError::EnumerationCap { .. }) => 3,
        _ => 1,
    }
}

fn finish(
    out: &PathBuf,
    preset: Option<String>,
    jobs: Vec<JobSpec>,
) -> Result<bool, SweepError> {
    let (manifest, any_infeasible) = run_and_write(out, preset, &jobs)?;
    for files in &manifest.emitted {
        println!("wrote {}", files.csv.display());
    }
    println!("wrote {}", out.join("manifest.json").display());
    Ok(any_infeasible)
}

fn dispatch(cli: Cli) -> Result<u8, SweepError> {
    match cli.command {
        Command::Region(args) => {
            setup_threads(args.common.threads);
            let jobs = match &args.common.config {
                Some(path) => Manifest::load(path)?.jobs,
                None => {
                    let base = scenario_from_args(&args.scenario).map_err(SweepError::Setup)?;
                    vec![JobSpec::Region(RegionJob {
                        label: args.label.clone(),
                        base,
                        strategies: args.scenario.strategies.clone(),
                        weight_exponents: default_weight_exponents(),
                        mc_channels: args.scenario.mc,
                    })]
                }
            };
            let infeasible = finish(&args.common.out, None, jobs)?;
            Ok(if infeasible { 2 } else { 0 })
        }
        Command::Curve(args) => {
            setup_threads(args.common.threads);
            let jobs = match &args.common.config {
                Some(path) => Manifest::load(path)?.jobs,
                None => {
                    let base = scenario_from_args(&args.scenario).map_err(SweepError::Setup)?;
                    vec![JobSpec::Curve(CurveJob {
                        label: args.label.clone(),
                        base,
                        strategies: args.scenario.strategies.clone(),
                        snr_db: args.snr_list.clone(),
                        threshold_schedule: args.threshold_schedule.clone(),
                        mc_channels: args.scenario.mc,
                    })]
                }
            };
            let infeasible = finish(&args.common.out, None, jobs)?;
            Ok(if infeasible { 2 } else { 0 })
        }
        Command::Preset { action } => match action {
            PresetAction::List => {
                for p in presets::PRESETS {
                    println!("{:24} {}", p.name, p.summary);
                }
                Ok(0)
            }
        },
        Command::Run(args) => {
            setup_threads(args.common.threads);
            let mut jobs = match &args.common.config {
                Some(path) => Manifest::load(path)?.jobs,
                None => presets::build(&args.name)?,
            };
            for job in &mut jobs {
                match job {
                    JobSpec::Curve(c) => {
                        if !args.snr_list.is_empty() {
                            // Keep the schedule aligned with the overridden grid.
                            if !c.threshold_schedule.is_empty() {
                                c.threshold_schedule = args
                                    .snr_list
                                    .iter()
                                    .map(|snr| {
                                        let idx = c
                                            .snr_db
                                            .iter()
                                            .position(|s| (s - snr).abs() < 1e-9)
                                            .unwrap_or(c.threshold_schedule.len() - 1);
                                        c.threshold_schedule[idx]
                                    })
                                    .collect();
                            }
                            c.snr_db = args.snr_list.clone();
                        }
                        if let Some(mc) = args.mc {
                            c.mc_channels = mc;
                        }
                        if let (Some(seed), ChannelSpec::Random { seed: s, .. }) =
                            (args.seed, &mut c.base.channel)
                        {
                            *s = seed;
                        }
                    }
                    JobSpec::Region(r) => {
                        if let Some(mc) = args.mc {
                            r.mc_channels = mc;
                        }
                        if let (Some(seed), ChannelSpec::Random { seed: s, .. }) =
                            (args.seed, &mut r.base.channel)
                        {
                            *s = seed;
                        }
                    }
                }
            }
            let infeasible = finish(&args.common.out, Some(args.name.clone()), jobs)?;
            Ok(if infeasible { 2 } else { 0 })
        }
        Command::Validate => {
            for line in validate()? {
                println!("{line}");
            }
            println!("all invariants hold");
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
