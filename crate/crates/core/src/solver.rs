//! Conic solves for the precoder subproblem.
//!
//! The subproblem family is tiny (tens to a few hundred variables) and must
//! be solved to tight accuracy thousands of times per sweep, so it is handed
//! to Clarabel's primal-dual interior-point method rather than a hand-rolled
//! one; the [`ConvexProblem`] contract and all checks stay on our side.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus,
    SupportedConeT::{self, NonnegativeConeT, SecondOrderConeT, ZeroConeT},
};
use thiserror::Error;

use crate::problem::{BlockRole, ConeSpec, ConvexProblem};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("solver returned unusable status {0}")]
    Unusable(String),
    #[error("problem malformed: {0}")]
    Malformed(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    /// Relative duality-gap and feasibility tolerance.
    pub tol: f64,
    pub max_iter: u32,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-7,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub status: SolveStatus,
    pub primal: Vec<f64>,
    /// Dual variables per constraint row (certificate when infeasible).
    pub dual: Vec<f64>,
    pub objective: f64,
    pub duality_gap: f64,
    pub relative_gap: f64,
    pub iterations: u32,
    /// Human-readable account of the constraints an infeasibility
    /// certificate leans on.
    pub infeasibility: Option<String>,
}

fn csc_from_triplets(
    rows: usize,
    cols: usize,
    triplets: &[(usize, usize, f64)],
) -> Result<CscMatrix<f64>, SolverError> {
    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
    for &(r, c, v) in triplets {
        if r >= rows || c >= cols {
            return Err(SolverError::Malformed(format!(
                "triplet ({r}, {c}) outside {rows}x{cols}"
            )));
        }
        entries.push((c, r, v));
    }
    entries.sort_by_key(|&(c, r, _)| (c, r));
    // Merge duplicate coordinates.
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
    for (c, r, v) in entries {
        match merged.last_mut() {
            Some((mc, mr, mv)) if *mc == c && *mr == r => *mv += v,
            _ => merged.push((c, r, v)),
        }
    }
    let mut colptr = vec![0usize; cols + 1];
    let mut rowval = Vec::with_capacity(merged.len());
    let mut nzval = Vec::with_capacity(merged.len());
    for (c, r, v) in merged {
        colptr[c + 1] += 1;
        rowval.push(r);
        nzval.push(v);
    }
    for c in 0..cols {
        colptr[c + 1] += colptr[c];
    }
    Ok(CscMatrix::new(rows, cols, colptr, rowval, nzval))
}

fn cones_of(problem: &ConvexProblem) -> Vec<SupportedConeT<f64>> {
    problem
        .blocks
        .iter()
        .map(|b| match b.cone {
            ConeSpec::Zero(n) => ZeroConeT(n),
            ConeSpec::Nonnegative(n) => NonnegativeConeT(n),
            ConeSpec::SecondOrder(n) => SecondOrderConeT(n),
        })
        .collect()
}

/// Describe the rows an infeasibility certificate puts weight on.
fn explain_infeasibility(problem: &ConvexProblem, dual: &[f64]) -> String {
    let mut parts = Vec::new();
    let scale = dual.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for block in &problem.blocks {
        let seg = &dual[block.offset..block.offset + block.cone.dim()];
        let weight = seg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if weight > 0.01 * scale {
            let label = match &block.role {
                BlockRole::Power => "power budget".to_string(),
                BlockRole::Qos { user } => format!("QoS of user {user}"),
                BlockRole::StreamWmse { stream, user } => {
                    format!("stream {stream} at user {user}")
                }
                BlockRole::PrivateEpigraph { user } => format!("private WMSE of user {user}"),
                BlockRole::SignX => "common-rate sign".to_string(),
                BlockRole::ForcedZero => "pinned streams".to_string(),
            };
            if !parts.contains(&label) {
                parts.push(label);
            }
        }
    }
    format!("infeasibility certificate involves: {}", parts.join(", "))
}

/// Solve the conic program to the requested accuracy.
pub fn solve(problem: &ConvexProblem, opts: &SolveOptions) -> Result<Solution, SolverError> {
    let rows = problem.num_rows();
    let cols = problem.num_vars;
    let a = csc_from_triplets(rows, cols, &problem.a_triplets)?;
    let p = CscMatrix::<f64>::zeros((cols, cols));
    let cones = cones_of(problem);
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .max_iter(opts.max_iter)
        .tol_gap_abs(opts.tol)
        .tol_gap_rel(opts.tol)
        .tol_feas(opts.tol)
        .build()
        .map_err(|e| SolverError::Malformed(e.to_string()))?;
    let mut solver = DefaultSolver::new(&p, &problem.objective, &a, &problem.b, &cones, settings)
        .map_err(|e| SolverError::Malformed(format!("{e:?}")))?;
    solver.solve();

    let sol = &solver.solution;
    let status = match sol.status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => SolveStatus::Optimal,
        SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
            SolveStatus::Infeasible
        }
        SolverStatus::MaxIterations | SolverStatus::MaxTime => SolveStatus::MaxIterations,
        // The polish phase can stall on degenerate instances (streams driven
        // to zero power) after reaching a usable iterate. Accept the reverted
        // best iterate only if it passes our own feasibility and gap check.
        SolverStatus::NumericalError | SolverStatus::InsufficientProgress => {
            let viol = problem.primal_violation(&sol.x);
            let scale = 1.0 + problem.b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let gap = (sol.obj_val - sol.obj_val_dual).abs()
                / (1.0 + sol.obj_val.abs().max(sol.obj_val_dual.abs()));
            if viol <= 1e-7 * scale && gap <= 1e-5 {
                SolveStatus::Optimal
            } else {
                return Err(SolverError::Unusable(format!(
                    "{:?} (violation {viol:.2e}, gap {gap:.2e})",
                    sol.status
                )));
            }
        }
        other => return Err(SolverError::Unusable(format!("{other:?}"))),
    };
    let infeasibility = (status == SolveStatus::Infeasible)
        .then(|| explain_infeasibility(problem, &sol.z));
    Ok(Solution {
        status,
        primal: sol.x.clone(),
        dual: sol.z.clone(),
        objective: sol.obj_val + problem.objective_offset,
        duality_gap: (sol.obj_val - sol.obj_val_dual).abs(),
        relative_gap: solver.info.gap_rel,
        iterations: solver.info.iterations,
        infeasibility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::random_channels;
    use crate::linalg::{inner, norm_sqr};
    use crate::model::{layout_for_strategy, PrecoderSet, StreamKey, StrategyKind};
    use crate::problem::ConeSpec;
    use crate::wmmse::{build_subproblem, mmse_update, SampleTerms, SubproblemInput};
    use num_complex::Complex64;

    fn key(users: &[usize]) -> StreamKey {
        StreamKey::from_users(users).unwrap()
    }

    fn solve_once(
        layout: &crate::model::StreamLayout,
        h: &crate::model::ChannelSet,
        p: &PrecoderSet,
        weights: &[f64],
        thresholds: &[f64],
        p_t: f64,
    ) -> (crate::problem::ConvexProblem, Solution) {
        let (g, u) = mmse_update(layout, p, h);
        let sample = SampleTerms {
            channels: h,
            equalizers: &g,
            weights: &u,
        };
        let prob = build_subproblem(&SubproblemInput {
            layout,
            samples: &[sample],
            user_weights: weights,
            thresholds,
            power_budget: p_t,
            forced_zero: &[],
        });
        let sol = solve(&prob, &SolveOptions { tol: 1e-9, max_iter: 200 }).unwrap();
        (prob, sol)
    }

    #[test]
    fn single_user_solve_matches_matched_filter_algebra() {
        // One user, no QoS, generous power: with (g, u) frozen the optimum
        // satisfies h^H p = conj(g) / |g|^2 (the unconstrained quadratic
        // minimizer; directions orthogonal to h are objective-flat, so only
        // the matched-filter projection is pinned).
        let layout = layout_for_strategy(StrategyKind::MuLp, 1, None, None).unwrap();
        let h = random_channels(2, &[1.0], 1).unwrap();
        let mut p0 = PrecoderSet::zeros(&layout, 2);
        p0.set(key(&[1]), vec![Complex64::new(1.0, 0.0), Complex64::ZERO]);
        let (g, u) = mmse_update(&layout, &p0, &h);
        let ge = g.get(1, &key(&[1]));
        let ue = u.get(1, &key(&[1]));
        let hv = h.channel(1);
        let target = ge.conj() / ge.norm_sqr();

        let (prob, sol) = solve_once(&layout, &h, &p0, &[1.0], &[0.0], 1e6);
        let got = prob.extract_precoders(&sol.primal);
        let projected = inner(hv, got.get(&key(&[1])));
        assert!((projected - target).norm() < 1e-6, "{projected} vs {target}");
        // Objective at the analytic optimum: 1 + (u (1 - |g|^2 T*) ... ) via
        // direct evaluation of the minimized quadratic.
        let ln2 = std::f64::consts::LN_2;
        let e_min = ge.norm_sqr() * (1.0 + target.norm_sqr()) - 2.0 * (ge * target).re + 1.0;
        let expected_obj = 1.0 + (ue * e_min - ue.ln() - 1.0) / ln2;
        assert!((sol.objective - expected_obj).abs() < 1e-6);
    }

    #[test]
    fn infeasible_qos_is_reported_with_certificate() {
        // Threshold above single-user capacity at the power budget.
        let layout = layout_for_strategy(StrategyKind::MuLp, 1, None, None).unwrap();
        let h = random_channels(2, &[1.0], 2).unwrap();
        let p_t = 10.0;
        let capacity = (1.0 + p_t * norm_sqr(h.channel(1))).log2();
        let mut p0 = PrecoderSet::zeros(&layout, 2);
        p0.set(key(&[1]), vec![Complex64::new(p_t.sqrt(), 0.0), Complex64::ZERO]);
        let (_, sol) = solve_once(&layout, &h, &p0, &[1.0], &[capacity + 1.0], p_t);
        assert_eq!(sol.status, SolveStatus::Infeasible);
        let report = sol.infeasibility.unwrap();
        assert!(report.contains("QoS") || report.contains("power"), "{report}");
    }

    #[test]
    fn two_user_subproblem_matches_dense_grid_enumeration() {
        // SISO 1-layer RS, fixed (g, u): grid over (common power, private
        // split) with the x allocation resolved analytically per point.
        let layout = layout_for_strategy(StrategyKind::OneLayerRs, 2, None, None).unwrap();
        let h = random_channels(1, &[1.0, 0.6], 3).unwrap();
        let p_t: f64 = 10.0;
        let mut p0 = PrecoderSet::zeros(&layout, 1);
        p0.set(key(&[1, 2]), vec![Complex64::new((0.5 * p_t).sqrt(), 0.0)]);
        p0.set(key(&[1]), vec![Complex64::new((0.25 * p_t).sqrt(), 0.0)]);
        p0.set(key(&[2]), vec![Complex64::new((0.25 * p_t).sqrt(), 0.0)]);
        let weights = [1.0, 2.0];
        let (g, u) = mmse_update(&layout, &p0, &h);
        let sample = SampleTerms {
            channels: &h,
            equalizers: &g,
            weights: &u,
        };
        let prob = build_subproblem(&SubproblemInput {
            layout: &layout,
            samples: &[sample],
            user_weights: &weights,
            thresholds: &[0.0, 0.0],
            power_budget: p_t,
            forced_zero: &[],
        });
        let sol = solve(&prob, &SolveOptions { tol: 1e-9, max_iter: 200 }).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);

        // Dense 200 x 200 grid. For scalar channels the optimal precoder
        // phases are those of conj(g_k h_k); with real h and the chosen g the
        // real axis is optimal here, so sweep nonnegative amplitudes.
        let xi = |user: usize, stream: &StreamKey, p: &PrecoderSet| {
            crate::wmmse::augmented_wmse(
                &layout,
                p,
                &h,
                user,
                stream,
                g.get(user, stream),
                u.get(user, stream),
            )
        };
        let mut best = f64::INFINITY;
        let n = 200;
        for i in 0..=n {
            let pc = p_t * i as f64 / n as f64;
            for j in 0..=n {
                let pp = (p_t - pc) * j as f64 / n as f64;
                let mut p = PrecoderSet::zeros(&layout, 1);
                p.set(key(&[1, 2]), vec![Complex64::new(pc.sqrt(), 0.0)]);
                p.set(key(&[1]), vec![Complex64::new(pp.sqrt(), 0.0)]);
                p.set(key(&[2]), vec![Complex64::new((p_t - pc - pp).sqrt(), 0.0)]);
                // Common-rate variables: x1 + x2 >= xi_12 - 1, x <= 0; weights
                // decide the split -- put everything on the larger weight.
                let xi12 = xi(1, &key(&[1, 2]), &p).max(xi(2, &key(&[1, 2]), &p));
                let xsum = (xi12 - 1.0).min(0.0);
                let obj = weights[0] * xi(1, &key(&[1]), &p)
                    + weights[1] * (xsum + xi(2, &key(&[2]), &p));
                best = best.min(obj);
            }
        }
        let resolution = 2.0 * p_t / n as f64;
        assert!(
            sol.objective <= best + 1e-6 && sol.objective >= best - resolution,
            "solver {} vs grid {best}",
            sol.objective
        );
    }

    #[test]
    fn kkt_residuals_are_small_at_optimum() {
        let layout = layout_for_strategy(StrategyKind::OneLayerRs, 3, None, None).unwrap();
        let h = random_channels(4, &[1.0, 0.5, 0.2], 4).unwrap();
        let mut p0 = PrecoderSet::zeros(&layout, 4);
        for stream in layout.streams() {
            let dir = crate::linalg::normalized(h.channel(stream.users()[0])).unwrap();
            p0.set(stream, crate::linalg::scale(&dir, (10.0 / 4.0f64).sqrt()));
        }
        let tol: f64 = 1e-9;
        let (prob, sol) = solve_once(&layout, &h, &p0, &[1.0, 1.0, 1.0], &[0.1, 0.1, 0.1], 10.0);
        assert_eq!(sol.status, SolveStatus::Optimal);

        // Primal feasibility.
        assert!(prob.primal_violation(&sol.primal) <= 10.0 * tol.sqrt() * 1e-3);

        // Stationarity: q + A^T z = 0 for linear objectives.
        let mut grad = prob.objective.clone();
        for &(r, c, v) in &prob.a_triplets {
            grad[c] += v * sol.dual[r];
        }
        let stat = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        assert!(stat <= 1e-6, "stationarity residual {stat}");

        // Complementary slackness via the duality gap.
        assert!(sol.duality_gap <= 1e-6);

        // Dual cone membership for the SOC blocks.
        for block in &prob.blocks {
            if let ConeSpec::SecondOrder(nd) = block.cone {
                let seg = &sol.dual[block.offset..block.offset + nd];
                let tail: f64 = seg[1..].iter().map(|v| v * v).sum::<f64>().sqrt();
                assert!(seg[0] >= tail - 1e-7);
            }
        }
    }

    #[test]
    fn solution_is_invariant_under_joint_unitary_rotation() {
        // Rotating all channels by a unitary rotates precoders but leaves the
        // objective unchanged.
        let layout = layout_for_strategy(StrategyKind::OneLayerRs, 2, None, None).unwrap();
        let h = random_channels(2, &[1.0, 0.7], 5).unwrap();
        // Unitary: [[cos, sin e^{j}], [-sin e^{-j}, cos]] with angle 0.7.
        let (c, s) = (0.7f64.cos(), 0.7f64.sin());
        let phase = Complex64::from_polar(1.0, 0.3);
        let rotate = |v: &[Complex64]| -> Vec<Complex64> {
            vec![
                c * v[0] + s * phase * v[1],
                -s * phase.conj() * v[0] + c * v[1],
            ]
        };
        let h_rot = crate::model::ChannelSet::new(vec![
            rotate(h.channel(1)),
            rotate(h.channel(2)),
        ])
        .unwrap();

        let p_t = 10.0;
        let mut p0 = PrecoderSet::zeros(&layout, 2);
        for stream in layout.streams() {
            let dir = crate::linalg::normalized(h.channel(stream.users()[0])).unwrap();
            p0.set(stream, crate::linalg::scale(&dir, (p_t / 3.0f64).sqrt()));
        }
        let mut p0_rot = PrecoderSet::zeros(&layout, 2);
        for stream in layout.streams() {
            p0_rot.set(stream, rotate(p0.get(&stream)));
        }
        // Rotation preserves inner products h^H p, hence (g, u) and the
        // optimal objective.
        assert!(
            (inner(h.channel(1), p0.get(&key(&[1])))
                - inner(h_rot.channel(1), p0_rot.get(&key(&[1]))))
            .norm()
                < 1e-12
        );
        let (_, sol_a) = solve_once(&layout, &h, &p0, &[1.0, 1.0], &[0.0, 0.0], p_t);
        let (_, sol_b) = solve_once(&layout, &h_rot, &p0_rot, &[1.0, 1.0], &[0.0, 0.0], p_t);
        assert!((sol_a.objective - sol_b.objective).abs() < 1e-7);
    }

    #[test]
    fn qos_multipliers_vanish_when_thresholds_are_zero() {
        let layout = layout_for_strategy(StrategyKind::OneLayerRs, 2, None, None).unwrap();
        let h = random_channels(2, &[1.0, 0.8], 6).unwrap();
        let mut p0 = PrecoderSet::zeros(&layout, 2);
        for stream in layout.streams() {
            let dir = crate::linalg::normalized(h.channel(stream.users()[0])).unwrap();
            p0.set(stream, crate::linalg::scale(&dir, 1.0));
        }
        let (prob, sol) = solve_once(&layout, &h, &p0, &[1.0, 1.0], &[0.0, 0.0], 10.0);
        assert_eq!(sol.status, SolveStatus::Optimal);
        for block in &prob.blocks {
            if matches!(block.role, BlockRole::Qos { .. }) {
                assert!(sol.dual[block.offset].abs() < 1e-7);
            }
        }
    }
}
