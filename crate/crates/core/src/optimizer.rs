//! Alternating optimization of the weighted sum rate: MRT/SVD precoder
//! initialization, the closed-form-update / convex-solve loop, multi-restart,
//! decoding-order and grouping enumeration, and the sample-average variant
//! for imperfect CSIT.

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::channels::{csit_error_std, random_channels, sample_csit_errors, structured_channels};
use crate::linalg::{self, norm_sqr};
use crate::model::{
    ChannelSet, ChannelSpec, CommonRateSplit, CsitModel, CsitSpec, ModelError, OrderPolicy,
    PrecoderSet, RateOutcome, ScenarioConfig, StreamKey, StreamLayout, StrategyKind,
    layout_for_strategy,
};
use crate::rates;
use crate::solver::{self, SolveOptions, SolveStatus, SolverError};
use crate::wmmse::{build_subproblem, mmse_update, EqualizerSet, SampleTerms, SubproblemInput, WeightSet};

#[derive(Debug, Error)]
pub enum OptError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("scenario infeasible: {0}")]
    Infeasible(String),
    #[error("enumeration needs {required} candidates, above the cap of {cap}; raise enumeration_cap to at least {required}")]
    EnumerationCap { required: usize, cap: usize },
    #[error("rate evaluation failed: {0}")]
    Rates(#[from] rates::RateError),
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

/// Restart schedule of private-power fractions: balanced, common-dominant
/// and private-dominant starts first, then intermediate fractions.
///
/// The common-dominant restart must be nearly pure (0.02): on aligned
/// channels with skewed weights, even 10% private power reliably pulls the
/// AO into the private-stream basin and the common-heavy optimum is never
/// found.
pub fn restart_alphas(restarts: usize) -> Vec<f64> {
    const CANON: [f64; 9] = [0.5, 0.02, 0.9, 0.2, 0.7, 0.05, 0.8, 0.35, 0.6];
    (0..restarts.max(1))
        .map(|i| CANON[i % CANON.len()])
        .collect()
}

/// Power fraction per active level: the private level takes `alpha`, the
/// remaining levels share `1 - alpha` equally. Layouts without private
/// streams put everything on the common levels; single-level layouts take
/// the whole budget.
pub fn level_split(layout: &StreamLayout, alpha: f64) -> BTreeMap<usize, f64> {
    let levels: Vec<usize> = layout.levels().collect();
    let mut split = BTreeMap::new();
    if levels.len() == 1 {
        split.insert(levels[0], 1.0);
        return split;
    }
    let has_private = levels.contains(&1);
    let common_levels = levels.iter().filter(|&&l| l != 1).count();
    for &l in &levels {
        let f = if l == 1 {
            if has_private { alpha } else { 0.0 }
        } else if has_private {
            (1.0 - alpha) / common_levels as f64
        } else {
            1.0 / common_levels as f64
        };
        split.insert(l, f);
    }
    split
}

/// MRT + SVD initialization: each singleton stream points along its user's
/// channel, each multi-user stream along the leading left singular vector of
/// its members' stacked channels. Level `l` receives the `level_split`
/// fraction of `p_t`, divided equally among the level's streams, so the total
/// initial power is exactly `p_t`.
pub fn initialize_precoders(
    layout: &StreamLayout,
    channels: &ChannelSet,
    p_t: f64,
    alpha: f64,
) -> PrecoderSet {
    let split = level_split(layout, alpha);
    let mut precoders = PrecoderSet::zeros(layout, channels.nt());
    for level in layout.levels().collect::<Vec<_>>() {
        let keys = layout.level_order(level).unwrap().to_vec();
        let share = split[&level] * p_t / keys.len() as f64;
        for key in keys {
            let direction = if key.level() == 1 {
                let user = key.users()[0];
                linalg::normalized(channels.channel(user))
                    .unwrap_or_else(|| unit_vector(channels.nt()))
            } else {
                let users = key.users();
                let cols: Vec<&[num_complex::Complex64]> =
                    users.iter().map(|&u| channels.channel(u)).collect();
                linalg::leading_left_singular(&cols)
            };
            precoders.set(key, linalg::scale(&direction, share.sqrt()));
        }
    }
    precoders
}

fn unit_vector(nt: usize) -> Vec<num_complex::Complex64> {
    let mut v = vec![num_complex::Complex64::ZERO; nt];
    v[0] = num_complex::Complex64::new(1.0, 0.0);
    v
}

// ---------------------------------------------------------------------------
// Alternating optimization
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum AoStatus {
    Converged,
    MaxIterations,
}

/// Result of one AO run.
#[derive(Clone, Debug)]
pub struct AoRun {
    pub outcome: RateOutcome,
    pub precoders: PrecoderSet,
    pub iterations: usize,
    pub status: AoStatus,
    /// Achieved WSR after each subproblem solve (the monotone trace).
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct AoOptions {
    /// Stop when the WSR improves by less than this (bit/s/Hz).
    pub tol: f64,
    pub max_iter: usize,
    pub solver_tol: f64,
    /// Streams pinned to zero power throughout.
    pub forced_zero: Vec<StreamKey>,
}

impl Default for AoOptions {
    fn default() -> Self {
        AoOptions {
            tol: 1e-4,
            max_iter: 200,
            solver_tol: 1e-9,
            forced_zero: Vec::new(),
        }
    }
}

/// Feasible split from the solver's common-rate variables: portions are
/// clipped to each stream's achievable rate so solver-tolerance slack cannot
/// overdraw a stream.
fn feasible_split(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &[&ChannelSet],
    mut split: CommonRateSplit,
) -> CommonRateSplit {
    for stream in layout.multiuser_streams() {
        let rate = average_stream_rate(layout, precoders, channels, &stream);
        let allocated = split.stream_total(&stream);
        if allocated > rate {
            let factor = if allocated > 0.0 { rate / allocated } else { 0.0 };
            split.scale_stream(&stream, factor.max(0.0));
        }
    }
    split
}

fn average_stream_rate(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &[&ChannelSet],
    stream: &StreamKey,
) -> f64 {
    stream
        .users()
        .iter()
        .map(|&user| {
            channels
                .iter()
                .map(|h| rates::user_stream_rate(layout, precoders, h, user, stream).unwrap())
                .sum::<f64>()
                / channels.len() as f64
        })
        .fold(f64::INFINITY, f64::min)
}

fn average_private_rate(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &[&ChannelSet],
    user: usize,
) -> f64 {
    if !layout.has_private(user) {
        return 0.0;
    }
    let key = StreamKey::singleton(user);
    channels
        .iter()
        .map(|h| rates::user_stream_rate(layout, precoders, h, user, &key).unwrap())
        .sum::<f64>()
        / channels.len() as f64
}

/// Achieved (sample-averaged) WSR of a precoder/split pair.
fn achieved_wsr(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &[&ChannelSet],
    split: &CommonRateSplit,
    weights: &[f64],
) -> f64 {
    layout
        .users()
        .map(|user| {
            let rate = split.user_total(user)
                + average_private_rate(layout, precoders, channels, user);
            weights[user - 1] * rate
        })
        .sum()
}

/// Solve one subproblem, relaxing the tolerance when the interior point
/// stalls below the tight target (near-aligned channels make late AO
/// iterations ill-conditioned).
fn solve_relaxing(
    problem: &crate::problem::ConvexProblem,
    base_tol: f64,
) -> Result<solver::Solution, OptError> {
    let rungs = [base_tol, (base_tol * 100.0).max(1e-8), 1e-6];
    let mut last: Option<solver::Solution> = None;
    for (i, &tol) in rungs.iter().enumerate() {
        if i > 0 && tol <= rungs[i - 1] {
            continue;
        }
        match solver::solve(problem, &SolveOptions { tol, max_iter: 200 }) {
            Ok(sol) if sol.status != SolveStatus::MaxIterations => return Ok(sol),
            Ok(sol) => last = Some(sol),
            Err(SolverError::Unusable(_)) if i + 1 < rungs.len() => continue,
            Err(e) => return Err(e.into()),
        }
    }
    last.ok_or_else(|| {
        OptError::Solver(SolverError::Unusable(
            "solver stalled at every tolerance rung".into(),
        ))
    })
}

/// Core AO loop over one set of channel samples (perfect CSIT passes exactly
/// one sample). Equalizers and weights are refreshed per sample from the
/// current precoders; the convex subproblem updates `(x, P)`; the loop stops
/// once the achieved WSR moves by less than `tol`.
fn ao_loop(
    layout: &StreamLayout,
    samples: &[&ChannelSet],
    weights: &[f64],
    thresholds: &[f64],
    p_t: f64,
    init: PrecoderSet,
    opts: &AoOptions,
) -> Result<AoRun, OptError> {
    let mut precoders = init;
    // Solve with weights normalized to a unit maximum: the argmax is the
    // same, but extreme weight scales (the region sweep reaches 10^3) would
    // otherwise push the subproblem data far outside the solver's
    // well-conditioned range. Reported rates are weight-free; the trace and
    // outcome WSR are rescaled back at the end.
    let weight_scale = weights.iter().fold(1e-300f64, |m, w| m.max(*w));
    let weights: Vec<f64> = weights.iter().map(|w| w / weight_scale).collect();
    let weights = weights.as_slice();
    let tol = opts.tol;

    // WSR of the initial point, with each stream's rate granted to its
    // best-weighted carrier; used only for the first convergence delta.
    let init_split = {
        let split = rates::greedy_split(layout, &precoders, samples[0], weights);
        feasible_split(layout, &precoders, samples, split)
    };
    let mut last_wsr = achieved_wsr(layout, &precoders, samples, &init_split, weights);

    let mut best: Option<AoRun> = None;
    let mut trace = Vec::new();
    let mut status = AoStatus::MaxIterations;
    let mut iterations = 0;

    for n in 1..=opts.max_iter {
        iterations = n;
        let updates: Vec<(EqualizerSet, WeightSet)> = samples
            .iter()
            .map(|h| mmse_update(layout, &precoders, h))
            .collect();
        let terms: Vec<SampleTerms> = samples
            .iter()
            .zip(&updates)
            .map(|(h, (g, u))| SampleTerms {
                channels: h,
                equalizers: g,
                weights: u,
            })
            .collect();
        let problem = build_subproblem(&SubproblemInput {
            layout,
            samples: &terms,
            user_weights: weights,
            thresholds,
            power_budget: p_t,
            forced_zero: &opts.forced_zero,
        });
        let solution = match solve_relaxing(&problem, opts.solver_tol) {
            Ok(s) => s,
            // A stall after productive iterations means the geometry has gone
            // degenerate around the optimum; the best iterate so far stands.
            // If the trace had already flattened below the tolerance this is
            // ordinary convergence, otherwise the run is flagged.
            Err(OptError::Solver(SolverError::Unusable(_))) if best.is_some() => {
                if trace
                    .windows(2)
                    .last()
                    .is_some_and(|w: &[f64]| (w[1] - w[0]).abs() <= tol)
                {
                    status = AoStatus::Converged;
                }
                break;
            }
            Err(e) => return Err(e),
        };
        match solution.status {
            SolveStatus::Optimal => {}
            SolveStatus::Infeasible => {
                return Err(OptError::Infeasible(
                    solution
                        .infeasibility
                        .unwrap_or_else(|| "subproblem infeasible".into()),
                ));
            }
            SolveStatus::MaxIterations => {
                // Keep the best point found so far rather than trusting a
                // non-converged iterate.
                break;
            }
        }
        let next = problem.extract_precoders(&solution.primal);
        let split = feasible_split(
            layout,
            &next,
            samples,
            problem.extract_split(&solution.primal),
        );
        let wsr = achieved_wsr(layout, &next, samples, &split, weights);

        // Exact alternating optimization cannot regress, so a WSR below the
        // best recorded iterate means the solver noise floor has been hit:
        // reject the iterate and stop. A noise floor within the stopping
        // tolerance is ordinary convergence.
        if let Some(b) = &best {
            if wsr < b.outcome.wsr {
                if b.outcome.wsr - wsr <= tol {
                    status = AoStatus::Converged;
                }
                break;
            }
        }
        precoders = next;
        trace.push(wsr);

        if best.as_ref().map_or(true, |b| wsr > b.outcome.wsr) {
            let outcome = outcome_from(layout, &precoders, samples, &split, weights);
            best = Some(AoRun {
                outcome,
                precoders: precoders.clone(),
                iterations: n,
                status: AoStatus::MaxIterations,
                trace: Vec::new(),
            });
        }

        if (wsr - last_wsr).abs() <= tol {
            status = AoStatus::Converged;
            break;
        }
        last_wsr = wsr;
    }

    let mut run = best.ok_or_else(|| OptError::Infeasible("no AO iterate produced".into()))?;
    run.status = status;
    run.iterations = iterations;
    run.trace = trace;
    // Back to the caller's weight scale.
    for w in run.trace.iter_mut() {
        *w *= weight_scale;
    }
    run.outcome.wsr *= weight_scale;
    for w in run.outcome.weights.iter_mut() {
        *w *= weight_scale;
    }
    Ok(run)
}

fn outcome_from(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    samples: &[&ChannelSet],
    split: &CommonRateSplit,
    weights: &[f64],
) -> RateOutcome {
    if samples.len() == 1 {
        return rates::total_rates(layout, precoders, samples[0], split, weights)
            .expect("clipped split is feasible");
    }
    // Sample-averaged outcome.
    let mut stream_rates = BTreeMap::new();
    for stream in layout.streams() {
        stream_rates.insert(
            stream,
            average_stream_rate(layout, precoders, samples, &stream),
        );
    }
    let private_rates: Vec<f64> = layout
        .users()
        .map(|u| average_private_rate(layout, precoders, samples, u))
        .collect();
    let user_totals: Vec<f64> = layout
        .users()
        .map(|u| private_rates[u - 1] + split.user_total(u))
        .collect();
    let wsr = user_totals.iter().zip(weights).map(|(r, w)| r * w).sum();
    RateOutcome {
        stream_rates,
        private_rates,
        split: split.clone(),
        user_totals,
        weights: weights.to_vec(),
        wsr,
    }
}

/// Maximize the WSR for one layout and perfect CSIT.
pub fn ao_maximize(
    layout: &StreamLayout,
    channels: &ChannelSet,
    weights: &[f64],
    thresholds: &[f64],
    p_t: f64,
    init: PrecoderSet,
    opts: &AoOptions,
) -> Result<AoRun, OptError> {
    ao_loop(layout, &[channels], weights, thresholds, p_t, init, opts)
}

/// Imperfect-CSIT variant: optimize the sample-average WSR over the model's
/// drawn realizations, then report average rates over a fresh evaluation
/// ensemble (common-rate portions re-clipped to the evaluated stream rates).
pub fn ao_maximize_saa(
    layout: &StreamLayout,
    model: &CsitModel,
    eval_samples: usize,
    weights: &[f64],
    thresholds: &[f64],
    p_t: f64,
    init: PrecoderSet,
    opts: &AoOptions,
) -> Result<AoRun, OptError> {
    let opt_draws = sample_csit_errors(model);
    let opt_refs: Vec<&ChannelSet> = opt_draws.iter().collect();
    let mut run = ao_loop(layout, &opt_refs, weights, thresholds, p_t, init, opts)?;

    // Fresh evaluation ensemble: disjoint sample indices via a shifted seed.
    let eval_model = CsitModel::new(
        model.estimate.clone(),
        model.error_std.clone(),
        eval_samples,
        model.seed ^ 0x9E37_79B9_7F4A_7C15,
    )
    .expect("valid model");
    let eval_draws = sample_csit_errors(&eval_model);
    let eval_refs: Vec<&ChannelSet> = eval_draws.iter().collect();
    let split = feasible_split(layout, &run.precoders, &eval_refs, run.outcome.split.clone());
    run.outcome = outcome_from(layout, &run.precoders, &eval_refs, &split, weights);
    Ok(run)
}

// ---------------------------------------------------------------------------
// Order / grouping enumeration and the scenario driver
// ---------------------------------------------------------------------------

/// The combinatorial choice behind a solved scenario.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChosenCombinatorics {
    pub order: Option<Vec<usize>>,
    pub grouping: Option<Vec<Vec<usize>>>,
    /// Level-2+ stream decode orders, rendered per level.
    pub level_orders: Vec<(usize, Vec<StreamKey>)>,
}

#[derive(Clone, Debug)]
pub struct BestResult {
    pub run: AoRun,
    pub layout: StreamLayout,
    pub chosen: ChosenCombinatorics,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut items: Vec<usize> = (1..=n).collect();
    heap_permute(&mut items, n, &mut out);
    out.sort();
    out
}

fn heap_permute(items: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..k {
        heap_permute(items, k - 1, out);
        if k % 2 == 0 {
            items.swap(i, k - 1);
        } else {
            items.swap(0, k - 1);
        }
    }
}

/// All partitions of `1..=k` into nonempty unordered groups.
fn partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut current: Vec<Vec<usize>> = Vec::new();
    fn recurse(user: usize, k: usize, current: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if user > k {
            out.push(current.clone());
            return;
        }
        for i in 0..current.len() {
            current[i].push(user);
            recurse(user + 1, k, current, out);
            current[i].pop();
        }
        current.push(vec![user]);
        recurse(user + 1, k, current, out);
        current.pop();
    }
    recurse(1, k, &mut current, &mut out);
    out
}

/// One candidate layout plus the bookkeeping describing it.
struct Candidate {
    layout: StreamLayout,
    chosen: ChosenCombinatorics,
}

fn level_orders_of(layout: &StreamLayout) -> Vec<(usize, Vec<StreamKey>)> {
    layout
        .levels()
        .filter(|&l| layout.level_order(l).map_or(false, |o| o.len() > 1))
        .map(|l| (l, layout.level_order(l).unwrap().to_vec()))
        .collect()
}

/// Whether any user decodes two or more streams of this level (only then
/// does the level's total order matter).
fn order_matters(layout: &StreamLayout, level: usize) -> bool {
    let streams = match layout.level_order(level) {
        Some(s) if s.len() > 1 => s,
        _ => return false,
    };
    (1..=layout.num_users()).any(|user| {
        streams.iter().filter(|s| s.contains(user)).count() >= 2
    })
}

fn enumerate_candidates(config: &ScenarioConfig) -> Result<Vec<Candidate>, OptError> {
    let k = config.num_users;
    let fixed_order = config.order.clone();
    let fixed_grouping = config.grouping.clone();

    let base = |layout: StreamLayout, order: Option<Vec<usize>>, grouping: Option<Vec<Vec<usize>>>| {
        let level_orders = level_orders_of(&layout);
        Candidate {
            chosen: ChosenCombinatorics {
                order,
                grouping,
                level_orders,
            },
            layout,
        }
    };

    let candidates: Vec<Candidate> = match config.strategy {
        StrategyKind::MuLp | StrategyKind::Multicast | StrategyKind::OneLayerRs => {
            let layout = layout_for_strategy(config.strategy, k, None, None)?;
            vec![base(layout, None, None)]
        }
        StrategyKind::TwoLayerHrs => {
            let grouping = fixed_grouping
                .ok_or(ModelError::MissingArgument("a user grouping"))?;
            let layout = layout_for_strategy(config.strategy, k, Some(&grouping), None)?;
            vec![base(layout, None, Some(grouping))]
        }
        StrategyKind::ScSic => {
            // Ascending-gain policies are resolved into a fixed order by
            // `best_over_orders` before reaching this point.
            let orders: Vec<Vec<usize>> = match (&config.order_policy, fixed_order) {
                (OrderPolicy::Enumerate, _) => permutations(k),
                (_, Some(o)) => vec![o],
                (_, None) => {
                    return Err(ModelError::MissingArgument("a decoding order").into())
                }
            };
            orders
                .into_iter()
                .map(|o| {
                    let layout = layout_for_strategy(StrategyKind::ScSic, k, None, Some(&o))?;
                    Ok(base(layout, Some(o), None))
                })
                .collect::<Result<Vec<_>, OptError>>()?
        }
        StrategyKind::ScSicPerGroup => {
            let groupings: Vec<Vec<Vec<usize>>> = match &fixed_grouping {
                Some(g) => vec![g.clone()],
                None => partitions(k),
            };
            let orders: Vec<Vec<usize>> = match (&config.order_policy, fixed_order) {
                (OrderPolicy::Fixed, Some(o)) => vec![o],
                _ => permutations(k),
            };
            let mut cands = Vec::new();
            let mut seen: Vec<(Vec<Vec<usize>>, Vec<Vec<usize>>)> = Vec::new();
            for grouping in &groupings {
                for order in &orders {
                    // Distinct candidates are (grouping, per-group order)
                    // pairs; many global orders collapse to one.
                    let per_group: Vec<Vec<usize>> = grouping
                        .iter()
                        .map(|g| order.iter().copied().filter(|u| g.contains(u)).collect())
                        .collect();
                    let sig = (grouping.clone(), per_group);
                    if seen.contains(&sig) {
                        continue;
                    }
                    seen.push(sig);
                    let layout = layout_for_strategy(
                        StrategyKind::ScSicPerGroup,
                        k,
                        Some(grouping),
                        Some(order),
                    )?;
                    cands.push(base(layout, Some(order.clone()), Some(grouping.clone())));
                }
            }
            cands
        }
        StrategyKind::GeneralizedRs => {
            let layout = layout_for_strategy(StrategyKind::GeneralizedRs, k, None, None)?;
            // Enumerate total orders for each level where some user decodes
            // two or more streams.
            let mut cands = vec![base(layout.clone(), None, None)];
            if config.order_policy == OrderPolicy::Enumerate {
                for level in layout.levels().collect::<Vec<_>>() {
                    if !order_matters(&layout, level) {
                        continue;
                    }
                    let streams = layout.level_order(level).unwrap().to_vec();
                    let mut next = Vec::new();
                    for cand in &cands {
                        for perm in index_permutations(streams.len()) {
                            let order: Vec<StreamKey> =
                                perm.iter().map(|&i| streams[i]).collect();
                            let layout =
                                cand.layout.clone().with_level_order(level, order)?;
                            next.push(base(
                                layout,
                                cand.chosen.order.clone(),
                                cand.chosen.grouping.clone(),
                            ));
                        }
                    }
                    cands = next;
                }
            }
            cands
        }
    };
    Ok(candidates)
}

fn index_permutations(n: usize) -> Vec<Vec<usize>> {
    permutations(n)
        .into_iter()
        .map(|p| p.into_iter().map(|i| i - 1).collect())
        .collect()
}

/// Channels a scenario describes (the estimate, under imperfect CSIT).
pub fn scenario_channels(config: &ScenarioConfig) -> Result<ChannelSet, OptError> {
    let h = match &config.channel {
        ChannelSpec::Structured { gammas, thetas } => {
            structured_channels(config.nt, gammas, thetas)?
        }
        ChannelSpec::Random { variances, seed } => {
            random_channels(config.nt, variances, *seed)?
        }
        ChannelSpec::Explicit(set) => set.clone(),
    };
    if h.num_users() != config.num_users || h.nt() != config.nt {
        return Err(ModelError::InvalidParameter(format!(
            "channel set is {}x{}, scenario wants {}x{}",
            h.num_users(),
            h.nt(),
            config.num_users,
            config.nt
        ))
        .into());
    }
    Ok(h)
}

fn ascending_gain_order(channels: &ChannelSet) -> Vec<usize> {
    let mut users: Vec<usize> = (1..=channels.num_users()).collect();
    users.sort_by(|&a, &b| {
        norm_sqr(channels.channel(a))
            .partial_cmp(&norm_sqr(channels.channel(b)))
            .unwrap()
            .then(a.cmp(&b))
    });
    users
}

/// Run AO for every candidate order/grouping and restart, keep the best WSR.
///
/// The number of (candidate x restart) runs is capped by
/// `config.enumeration_cap`; an excess is reported as an error naming the
/// required cap rather than silently truncated.
pub fn best_over_orders(
    config: &ScenarioConfig,
    channels: &ChannelSet,
) -> Result<BestResult, OptError> {
    config.validate()?;
    let mut config = config.clone();
    if config.strategy == StrategyKind::ScSic
        && config.order_policy == OrderPolicy::AscendingGain
    {
        config.order = Some(ascending_gain_order(channels));
        config.order_policy = OrderPolicy::Fixed;
    }
    let candidates = enumerate_candidates(&config)?;
    if candidates.len() > config.enumeration_cap {
        return Err(OptError::EnumerationCap {
            required: candidates.len(),
            cap: config.enumeration_cap,
        });
    }

    let alphas = match config.init_alpha {
        Some(a) => vec![a],
        None => restart_alphas(config.restarts),
    };
    let p_t = config.power_budget();
    let opts = AoOptions {
        tol: config.ao_tol,
        max_iter: config.max_ao_iter,
        solver_tol: config.solver_tol,
        forced_zero: Vec::new(),
    };

    // (candidate, initialization) jobs. A layout whose only level is the
    // private one ignores the split entirely, so one restart suffices.
    let mut jobs: Vec<(usize, PrecoderSet)> = Vec::new();
    for (ci, cand) in candidates.iter().enumerate() {
        let effective: &[f64] = if cand.layout.levels().count() == 1 {
            &alphas[..1]
        } else {
            &alphas
        };
        for &alpha in effective {
            jobs.push((ci, initialize_precoders(&cand.layout, channels, p_t, alpha)));
        }
    }
    // Containment-aware restarts: rate-splitting strategies contain MU-LP
    // (and generalized RS contains the SC-SIC chains), so the converged
    // baseline solutions embed as warm starts. This pins the sub-scheme
    // inequalities down to solver accuracy instead of hoping a power split
    // lands in the right basin.
    for warm in embedded_baseline_inits(&config, channels)? {
        jobs.push((0, warm));
    }

    let runs: Vec<Result<Option<(usize, AoRun)>, OptError>> = jobs
        .par_iter()
        .map(|(ci, init)| {
            let cand = &candidates[*ci];
            match run_candidate(&config, &cand.layout, channels, init.clone(), &opts) {
                Ok(run) => Ok(Some((*ci, run))),
                // A candidate order can be infeasible under QoS while others
                // are not; drop it and let feasible candidates compete.
                Err(OptError::Infeasible(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();

    let mut best: Option<(usize, AoRun)> = None;
    let mut any = false;
    for r in runs {
        if let Some((ci, run)) = r? {
            any = true;
            if best.as_ref().map_or(true, |(_, b)| run.outcome.wsr > b.outcome.wsr) {
                best = Some((ci, run));
            }
        }
    }
    if !any {
        return Err(OptError::Infeasible(
            "every candidate order/grouping is infeasible under the QoS thresholds".into(),
        ));
    }
    let (ci, run) = best.expect("checked above");
    Ok(BestResult {
        run,
        layout: candidates[ci].layout.clone(),
        chosen: candidates[ci].chosen.clone(),
    })
}

/// Converged baseline solutions embedded into the strategy's layout as warm
/// starts. Every rate-splitting layout with all-private streams contains
/// MU-LP (zero common power); generalized RS additionally contains every
/// SC-SIC chain, whose streams are a subset of its keys. The embedded point
/// reproduces the baseline's rates exactly, and the greedy common-rate split
/// makes its starting WSR at least the baseline's, so the monotone AO ends no
/// worse.
fn embedded_baseline_inits(
    config: &ScenarioConfig,
    channels: &ChannelSet,
) -> Result<Vec<PrecoderSet>, OptError> {
    if !matches!(
        config.strategy,
        StrategyKind::GeneralizedRs | StrategyKind::OneLayerRs | StrategyKind::TwoLayerHrs
    ) {
        return Ok(Vec::new());
    }
    let target = layout_for_strategy(
        config.strategy,
        config.num_users,
        config.grouping.as_deref(),
        None,
    )?;
    let baseline = |strategy: StrategyKind| -> Result<Option<PrecoderSet>, OptError> {
        let mut c = config.clone();
        c.strategy = strategy;
        c.order = None;
        c.order_policy = OrderPolicy::Enumerate;
        c.grouping = None;
        match best_over_orders(&c, channels) {
            Ok(b) => Ok(Some(b.run.precoders)),
            // An infeasible baseline has nothing to contribute.
            Err(OptError::Infeasible(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };
    let embed = |source: &PrecoderSet| {
        let mut p = PrecoderSet::zeros(&target, channels.nt());
        for stream in target.streams() {
            let v = source.get(&stream);
            if !v.is_empty() {
                p.set(stream, v.to_vec());
            }
        }
        p
    };
    let mut inits = Vec::new();
    if let Some(p) = baseline(StrategyKind::MuLp)? {
        inits.push(embed(&p));
    }
    if config.strategy == StrategyKind::GeneralizedRs && config.num_users <= 4 {
        if let Some(p) = baseline(StrategyKind::ScSic)? {
            inits.push(embed(&p));
        }
    }
    Ok(inits)
}

fn run_candidate(
    config: &ScenarioConfig,
    layout: &StreamLayout,
    channels: &ChannelSet,
    init: PrecoderSet,
    opts: &AoOptions,
) -> Result<AoRun, OptError> {
    let p_t = config.power_budget();
    match &config.csit {
        None => ao_maximize(
            layout,
            channels,
            &config.weights,
            &config.thresholds,
            p_t,
            init,
            opts,
        ),
        Some(spec) => {
            let model = csit_model_from(spec, channels, p_t)?;
            ao_maximize_saa(
                layout,
                &model,
                spec.m_eval,
                &config.weights,
                &config.thresholds,
                p_t,
                init,
                opts,
            )
        }
    }
}

fn csit_model_from(
    spec: &CsitSpec,
    estimate: &ChannelSet,
    p_t: f64,
) -> Result<CsitModel, OptError> {
    let stds: Vec<f64> = spec
        .error_scales
        .iter()
        .map(|&s| csit_error_std(s, p_t))
        .collect();
    Ok(CsitModel::new(estimate.clone(), stds, spec.m_opt, spec.seed)?)
}

/// Solve a full scenario: build channels, enumerate candidates, multi-restart
/// AO, return the winner.
pub fn solve_scenario(config: &ScenarioConfig) -> Result<BestResult, OptError> {
    let channels = scenario_channels(config)?;
    best_over_orders(config, &channels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ChannelSpec;
    use num_complex::Complex64;

    fn key(users: &[usize]) -> StreamKey {
        StreamKey::from_users(users).unwrap()
    }

    #[test]
    fn two_user_initialization_matches_reference_powers() {
        // alpha = 0.5: each private stream carries P_t/4, the common stream
        // P_t/2, summing to exactly P_t.
        let layout = layout_for_strategy(StrategyKind::OneLayerRs, 2, None, None).unwrap();
        let h = structured_channels(4, &[1.0], &[std::f64::consts::PI / 9.0]).unwrap();
        let p_t = 20.0;
        let p = initialize_precoders(&layout, &h, p_t, 0.5);
        assert!((p.stream_power(&key(&[1])) - p_t / 4.0).abs() < 1e-9);
        assert!((p.stream_power(&key(&[2])) - p_t / 4.0).abs() < 1e-9);
        assert!((p.stream_power(&key(&[1, 2])) - p_t / 2.0).abs() < 1e-9);
        assert!((p.total_power() - p_t).abs() < 1e-9);
    }

    #[test]
    fn initial_power_meets_budget_exactly_across_layouts() {
        let groups = vec![vec![1, 2], vec![3, 4]];
        let layouts = vec![
            layout_for_strategy(StrategyKind::MuLp, 3, None, None).unwrap(),
            layout_for_strategy(StrategyKind::GeneralizedRs, 3, None, None).unwrap(),
            layout_for_strategy(StrategyKind::ScSic, 3, None, Some(&[2, 1, 3])).unwrap(),
            layout_for_strategy(StrategyKind::TwoLayerHrs, 4, Some(&groups), None).unwrap(),
            layout_for_strategy(StrategyKind::Multicast, 3, None, None).unwrap(),
        ];
        for layout in layouts {
            let k = layout.num_users();
            let h = random_channels(2, &vec![1.0; k], 31).unwrap();
            for alpha in [0.1, 0.5, 0.9] {
                let p = initialize_precoders(&layout, &h, 10.0, alpha);
                assert!((p.total_power() - 10.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn orthonormal_tie_resolves_to_first_user_direction() {
        let h = ChannelSet::new(vec![
            vec![Complex64::new(1.0, 0.0), Complex64::ZERO],
            vec![Complex64::ZERO, Complex64::new(1.0, 0.0)],
        ])
        .unwrap();
        let layout = layout_for_strategy(StrategyKind::OneLayerRs, 2, None, None).unwrap();
        let p = initialize_precoders(&layout, &h, 4.0, 0.5);
        let common = p.get(&key(&[1, 2]));
        assert!(common[0].norm() > 0.99 * common.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    }

    #[test]
    fn sc_sic_three_user_initialization_follows_level_shares() {
        // Chain {123} > {23} > {3}: one stream per level, so the level shares
        // land whole on each stream: alpha on the private, (1-alpha)/2 each
        // on the others.
        let layout = layout_for_strategy(StrategyKind::ScSic, 3, None, Some(&[1, 2, 3])).unwrap();
        let h = random_channels(4, &[1.0, 0.5, 0.2], 32).unwrap();
        let p = initialize_precoders(&layout, &h, 10.0, 0.4);
        assert!((p.stream_power(&key(&[1, 2, 3])) - 3.0).abs() < 1e-9);
        assert!((p.stream_power(&key(&[2, 3])) - 3.0).abs() < 1e-9);
        assert!((p.stream_power(&key(&[3])) - 4.0).abs() < 1e-9);
        // Last user is MRT along its own channel.
        let dir = linalg::normalized(h.channel(3)).unwrap();
        let got = linalg::normalized(p.get(&key(&[3]))).unwrap();
        let align = linalg::inner(&dir, &got).norm();
        assert!((align - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_user_ao_reaches_capacity() {
        let config = {
            let mut c = ScenarioConfig::new(StrategyKind::MuLp, 2, 1, 10.0);
            c.channel = ChannelSpec::Random {
                variances: vec![1.0],
                seed: 77,
            };
            c
        };
        let h = scenario_channels(&config).unwrap();
        let capacity = (1.0 + config.power_budget() * norm_sqr(h.channel(1))).log2();
        let result = solve_scenario(&config).unwrap();
        assert!(
            (result.run.outcome.wsr - capacity).abs() < 1e-5,
            "wsr {} vs capacity {capacity}",
            result.run.outcome.wsr
        );
    }

    #[test]
    fn ao_trace_is_monotone_and_converges() {
        let mut config = ScenarioConfig::new(StrategyKind::OneLayerRs, 2, 2, 20.0);
        config.channel = ChannelSpec::Structured {
            gammas: vec![1.0],
            thetas: vec![std::f64::consts::PI / 9.0],
        };
        let result = solve_scenario(&config).unwrap();
        assert_eq!(result.run.status, AoStatus::Converged);
        assert!(result.run.iterations <= 200);
        for w in result.run.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "trace decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn qos_thresholds_are_met_at_optimum() {
        let mut config = ScenarioConfig::new(StrategyKind::OneLayerRs, 2, 3, 20.0);
        config.channel = ChannelSpec::Structured {
            gammas: vec![1.0, 0.3],
            thetas: vec![2.0 * std::f64::consts::PI / 9.0, 4.0 * std::f64::consts::PI / 9.0],
        };
        config.thresholds = vec![0.4, 0.4, 0.4];
        let result = solve_scenario(&config).unwrap();
        for (user, rate) in result.run.outcome.user_totals.iter().enumerate() {
            assert!(
                *rate >= config.thresholds[user] - 1e-6,
                "user {} rate {rate}",
                user + 1
            );
        }
    }

    #[test]
    fn infeasible_thresholds_are_reported() {
        let mut config = ScenarioConfig::new(StrategyKind::MuLp, 1, 1, 0.0);
        config.channel = ChannelSpec::Random {
            variances: vec![1.0],
            seed: 5,
        };
        config.thresholds = vec![50.0];
        match solve_scenario(&config) {
            Err(OptError::Infeasible(_)) => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn sc_sic_enumerates_six_orders_for_three_users() {
        let config = ScenarioConfig::new(StrategyKind::ScSic, 2, 3, 10.0);
        let candidates = enumerate_candidates(&config).unwrap();
        assert_eq!(candidates.len(), 6);
    }

    #[test]
    fn two_user_generalized_rs_has_single_candidate() {
        let config = ScenarioConfig::new(StrategyKind::GeneralizedRs, 2, 2, 10.0);
        let candidates = enumerate_candidates(&config).unwrap();
        assert_eq!(candidates.len(), 1);
    }

    #[test]
    fn enumeration_above_cap_is_refused_with_required_count() {
        let mut config = ScenarioConfig::new(StrategyKind::ScSic, 2, 5, 10.0);
        config.enumeration_cap = 10;
        let err = solve_scenario(&config).unwrap_err();
        match err {
            OptError::EnumerationCap { required, cap } => {
                assert_eq!(required, 120);
                assert_eq!(cap, 10);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn ascending_gain_policy_uses_one_weakest_first_order() {
        let mut config = ScenarioConfig::new(StrategyKind::ScSic, 1, 3, 10.0);
        config.channel = ChannelSpec::Random {
            variances: vec![1.0, 0.3, 0.1],
            seed: 21,
        };
        config.order_policy = OrderPolicy::AscendingGain;
        config.restarts = 1;
        let h = scenario_channels(&config).unwrap();
        let result = best_over_orders(&config, &h).unwrap();
        let order = result.chosen.order.unwrap();
        let gains: Vec<f64> = order.iter().map(|&u| norm_sqr(h.channel(u))).collect();
        assert!(gains.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn forcing_common_streams_to_zero_reproduces_mu_lp() {
        // Same initialization (all power private) so the AO iterates of the
        // pinned RS run coincide with MU-LP's step for step.
        let h = structured_channels(4, &[1.0], &[2.0 * std::f64::consts::PI / 9.0]).unwrap();
        let weights = [1.0, 2.0];
        let thresholds = [0.0, 0.0];
        let p_t = 100.0;

        let tight = AoOptions {
            tol: 1e-10,
            max_iter: 3000,
            ..AoOptions::default()
        };
        let mu = layout_for_strategy(StrategyKind::MuLp, 2, None, None).unwrap();
        let mu_init = initialize_precoders(&mu, &h, p_t, 1.0);
        let mu_run = ao_maximize(&mu, &h, &weights, &thresholds, p_t, mu_init, &tight).unwrap();

        let rs = layout_for_strategy(StrategyKind::OneLayerRs, 2, None, None).unwrap();
        let mut opts = tight.clone();
        opts.forced_zero = vec![key(&[1, 2])];
        let rs_init = initialize_precoders(&rs, &h, p_t, 1.0);
        let rs_run = ao_maximize(&rs, &h, &weights, &thresholds, p_t, rs_init, &opts).unwrap();

        assert!(
            (mu_run.outcome.wsr - rs_run.outcome.wsr).abs() < 1e-6,
            "mu-lp {} vs pinned rs {}",
            mu_run.outcome.wsr,
            rs_run.outcome.wsr
        );
    }

    #[test]
    fn strategy_containment_on_desk_instances() {
        // Generalized RS dominates 1-layer RS, MU-LP and SC-SIC (within the
        // AO tolerance) on small instances.
        for seed in [101u64, 202] {
            let base = |strategy| {
                let mut c = ScenarioConfig::new(strategy, 2, 2, 15.0);
                c.channel = ChannelSpec::Random {
                    variances: vec![1.0, 0.5],
                    seed,
                };
                c.weights = vec![1.0, 1.5];
                // Containment is a statement about converged optima.
                c.ao_tol = 1e-6;
                c.max_ao_iter = 1000;
                c
            };
            let rs = solve_scenario(&base(StrategyKind::GeneralizedRs)).unwrap();
            let one = solve_scenario(&base(StrategyKind::OneLayerRs)).unwrap();
            let mu = solve_scenario(&base(StrategyKind::MuLp)).unwrap();
            let sc = solve_scenario(&base(StrategyKind::ScSic)).unwrap();
            let wsr = |r: &BestResult| r.run.outcome.wsr;
            assert!(wsr(&rs) >= wsr(&one) - 1e-3, "{} vs {}", wsr(&rs), wsr(&one));
            assert!(wsr(&one) >= wsr(&mu) - 1e-3);
            assert!(wsr(&rs) >= wsr(&sc) - 1e-3);
        }
    }

    #[test]
    fn siso_two_user_sc_sic_matches_grid_search() {
        // Degraded scalar broadcast channel: exhaustive power-split search as
        // oracle for the AO result (10^4 grid points).
        let mut config = ScenarioConfig::new(StrategyKind::ScSic, 1, 2, 10.0);
        config.channel = ChannelSpec::Random {
            variances: vec![1.0, 0.4],
            seed: 55,
        };
        config.ao_tol = 1e-6;
        config.max_ao_iter = 1000;
        let h = scenario_channels(&config).unwrap();
        let p_t = config.power_budget();
        let result = best_over_orders(&config, &h).unwrap();

        let g1 = norm_sqr(h.channel(1));
        let g2 = norm_sqr(h.channel(2));
        let mut best = 0.0f64;
        let n = 10_000;
        for i in 0..=n {
            let beta = i as f64 / n as f64; // power on the first-decoded stream
            for (ga, gb) in [(g1, g2), (g2, g1)] {
                // First-decoded message must be decodable at both users;
                // second decoded interference-free at its own user.
                let r_first = (1.0 + beta * p_t * ga.min(gb) / (1.0 + (1.0 - beta) * p_t * ga.min(gb)))
                    .log2();
                let r_second = (1.0 + (1.0 - beta) * p_t * gb).log2();
                best = best.max(r_first + r_second);
            }
        }
        assert!(
            (result.run.outcome.wsr - best).abs() < 1e-3,
            "ao {} vs grid {best}",
            result.run.outcome.wsr
        );
    }
}
