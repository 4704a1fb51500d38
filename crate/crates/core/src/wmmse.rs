//! Rate-WMMSE machinery: per-stream MSEs, closed-form MMSE equalizers and
//! weights, augmented WMSEs, and assembly of the convex precoder subproblem
//! solved inside each alternating-optimization step.
//!
//! For user `k` decoding stream `A`, with `T` the residual receive power at
//! that SIC stage and `g` a scalar equalizer:
//!
//! ```text
//! mse      e = |g|^2 T - 2 Re{ g h^H p_A } + 1
//! g_mmse     = (p_A^H h) / T          e_mmse = I / T       (I = T - |h^H p_A|^2)
//! weight   u = 1 / e_mmse
//! xi         = 1 + (u e - ln u - 1) / ln 2
//! ```
//!
//! The augmented WMSE is the natural-log weighted MSE rescaled to bits: its
//! exact minimum over `(g, u)` sits at the closed forms above and equals
//! `1 - R_A`, so `xi >= 1 - R` everywhere and rate constraints transformed
//! through `xi` never overdraw an achievable rate.
//!
//! The last identity converts weighted sum-rate maximization into iterated
//! convex programs: with `(g, u)` frozen, every augmented WMSE is a convex
//! quadratic in the precoders, and the common-rate transformation `c = -x`
//! turns rate sharing into linear constraints. With imperfect CSIT each
//! sampled channel carries its own `(g, u)` pair and the subproblem uses
//! sample-averaged WMSEs (common-rate variables shared across samples).

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::linalg::inner;
use crate::model::{ChannelSet, PrecoderSet, StreamKey, StreamLayout};
use crate::problem::{Affine, BlockRole, ConvexProblem, ProblemBuilder, VariableMap};
use crate::rates::residual_power;

/// Scalar equalizers per (user, decoded stream).
#[derive(Clone, PartialEq, Debug, Default)]
pub struct EqualizerSet {
    map: BTreeMap<(usize, StreamKey), Complex64>,
}

impl EqualizerSet {
    pub fn get(&self, user: usize, stream: &StreamKey) -> Complex64 {
        self.map.get(&(user, *stream)).copied().unwrap_or(Complex64::ZERO)
    }

    pub fn set(&mut self, user: usize, stream: StreamKey, g: Complex64) {
        self.map.insert((user, stream), g);
    }
}

/// Positive augmented-WMSE weights per (user, decoded stream).
#[derive(Clone, PartialEq, Debug, Default)]
pub struct WeightSet {
    map: BTreeMap<(usize, StreamKey), f64>,
}

impl WeightSet {
    pub fn get(&self, user: usize, stream: &StreamKey) -> f64 {
        self.map.get(&(user, *stream)).copied().unwrap_or(1.0)
    }

    pub fn set(&mut self, user: usize, stream: StreamKey, u: f64) {
        debug_assert!(u > 0.0);
        self.map.insert((user, stream), u);
    }
}

/// MSE of user `k` decoding `stream` with equalizer `g`.
pub fn mse(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    user: usize,
    stream: &StreamKey,
    g: Complex64,
) -> f64 {
    let t = residual_power(layout, precoders, channels, user, stream);
    let hp = inner(channels.channel(user), precoders.get(stream));
    g.norm_sqr() * t - 2.0 * (g * hp).re + 1.0
}

/// Closed-form MMSE equalizer `(p_A^H h_k) / T`. `T >= 1` with unit noise, so
/// this is always defined.
pub fn mmse_equalizer(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    user: usize,
    stream: &StreamKey,
) -> Complex64 {
    let t = residual_power(layout, precoders, channels, user, stream);
    let hp = inner(channels.channel(user), precoders.get(stream));
    hp.conj() / t
}

/// Minimized MSE `I / T`.
pub fn mmse_value(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    user: usize,
    stream: &StreamKey,
) -> f64 {
    let t = residual_power(layout, precoders, channels, user, stream);
    let sig = inner(channels.channel(user), precoders.get(stream)).norm_sqr();
    (t - sig) / t
}

/// Optimum augmented-WMSE weight `1 / e_mmse`.
pub fn mmse_weight(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    user: usize,
    stream: &StreamKey,
) -> f64 {
    1.0 / mmse_value(layout, precoders, channels, user, stream)
}

/// Augmented WMSE `1 + (u e - ln u - 1) / ln 2`: minimized at the MMSE
/// equalizer and weight, where it equals `1 - R` (rate in bit/s/Hz).
pub fn augmented_wmse(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    user: usize,
    stream: &StreamKey,
    g: Complex64,
    u: f64,
) -> f64 {
    let e = mse(layout, precoders, channels, user, stream, g);
    1.0 + (u * e - u.ln() - 1.0) / std::f64::consts::LN_2
}

/// All MMSE equalizers and weights for one channel realization.
pub fn mmse_update(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
) -> (EqualizerSet, WeightSet) {
    let mut g = EqualizerSet::default();
    let mut u = WeightSet::default();
    for user in layout.users() {
        for stream in layout.decode_sequence(user) {
            g.set(user, stream, mmse_equalizer(layout, precoders, channels, user, &stream));
            u.set(user, stream, mmse_weight(layout, precoders, channels, user, &stream));
        }
    }
    (g, u)
}

/// One channel realization with its frozen equalizers and weights.
pub struct SampleTerms<'a> {
    pub channels: &'a ChannelSet,
    pub equalizers: &'a EqualizerSet,
    pub weights: &'a WeightSet,
}

/// Everything needed to assemble the precoder subproblem.
pub struct SubproblemInput<'a> {
    pub layout: &'a StreamLayout,
    pub samples: &'a [SampleTerms<'a>],
    pub user_weights: &'a [f64],
    pub thresholds: &'a [f64],
    pub power_budget: f64,
    /// Streams pinned to zero transmit power.
    pub forced_zero: &'a [StreamKey],
}

/// Number of explicit WMSE terms in `xi_{k,tot}`: 1 when the user has a
/// private stream, else 0. This is also the constant offset in the QoS
/// constraint `xi_{k,tot} <= offset - R_k^th`, which reduces to the familiar
/// `1 - R^th` form whenever every user keeps a private stream.
pub fn qos_offset(layout: &StreamLayout, user: usize) -> f64 {
    if layout.has_private(user) {
        1.0
    } else {
        0.0
    }
}

/// Quadratic data of one sample-averaged augmented WMSE as gram rows plus an
/// affine part: `xi(v) = ||rows v||^2 + lin . v + constant`.
struct WmseQuadratic {
    rows: Vec<Affine>,
    lin: Vec<(usize, f64)>,
    constant: f64,
}

fn wmse_quadratic(
    layout: &StreamLayout,
    vars: &VariableMap,
    samples: &[SampleTerms],
    user: usize,
    stream: &StreamKey,
) -> WmseQuadratic {
    let m = samples.len() as f64;
    let mut rows = Vec::new();
    let mut lin: Vec<(usize, f64)> = Vec::new();
    let mut constant = 0.0;

    let cancelled = layout.decoded_before(user, stream);
    let residual: Vec<StreamKey> = layout
        .streams()
        .into_iter()
        .filter(|s| !cancelled.contains(s))
        .collect();

    let ln2 = std::f64::consts::LN_2;
    for sample in samples {
        let g = sample.equalizers.get(user, stream);
        let u = sample.weights.get(user, stream);
        let h = sample.channels.channel(user);
        // Constant part of 1 + (u e - ln u - 1)/ln2 with e's own +1 terms.
        constant += (1.0 + (u * (1.0 + g.norm_sqr()) - u.ln() - 1.0) / ln2) / m;

        // Streams the AO has driven to zero power leave equalizers near 0;
        // their quadratic rows are below any solve tolerance and only feed
        // cone degeneracy, so drop them.
        let quad_scale = (u * g.norm_sqr() / (ln2 * m)).sqrt();
        if quad_scale > 1e-10 {
            for key in &residual {
                // Real and imaginary parts of h^H p_B as rows scaled by
                // sqrt(u |g|^2 / M).
                let mut row_re = Affine::default();
                let mut row_im = Affine::default();
                for (n, hn) in h.iter().enumerate() {
                    let col = vars.precoder_col(key, n);
                    row_re = row_re
                        .term(col, quad_scale * hn.re)
                        .term(col + 1, quad_scale * hn.im);
                    row_im = row_im
                        .term(col, -quad_scale * hn.im)
                        .term(col + 1, quad_scale * hn.re);
                }
                rows.push(row_re);
                rows.push(row_im);
            }
        }

        // -2 (u / (ln2 M)) Re{ g h^H p_A }.
        let lscale = -2.0 * u / (ln2 * m);
        for (n, hn) in h.iter().enumerate() {
            let w = g * hn.conj();
            let col = vars.precoder_col(stream, n);
            lin.push((col, lscale * w.re));
            lin.push((col + 1, -lscale * w.im));
        }
    }

    WmseQuadratic { rows, lin, constant }
}

/// Assemble the convex subproblem in `(P, x, t)` for frozen equalizers and
/// weights:
///
/// * objective: `sum_k u_k ( sum_{A: carrier slot} x_{k,A} + t_k )`,
/// * per multi-user stream `A` and user `k in A`:
///   `xi_k^A <= 1 + sum over carriers of x`,
/// * private epigraphs `xi_k^k <= t_k`, power `tr(P P^H) <= P_t`,
/// * QoS `sum x_{k,.} + t_k <= offset_k - R_k^th`, and `x <= 0`.
pub fn build_subproblem(input: &SubproblemInput) -> ConvexProblem {
    let layout = input.layout;
    let nt = input.samples[0].channels.nt();
    let vars = VariableMap {
        nt,
        streams: layout.streams(),
        common_slots: layout.common_slots(),
        epigraph_users: layout
            .users()
            .filter(|&u| layout.has_private(u))
            .collect(),
    };
    let mut builder = ProblemBuilder::new(vars);

    // Objective.
    let slot_users: Vec<usize> = builder.vars().common_slots.iter().map(|(u, _)| *u).collect();
    let epigraph_users = builder.vars().epigraph_users.clone();
    let precoder_len = builder.vars().precoder_len();
    for (i, user) in slot_users.iter().enumerate() {
        builder.add_objective(precoder_len + i, input.user_weights[user - 1]);
    }
    for (i, user) in epigraph_users.iter().enumerate() {
        builder.add_objective(
            precoder_len + slot_users.len() + i,
            input.user_weights[user - 1],
        );
    }

    // Power: ||vec(P)|| <= sqrt(P_t).
    let power_rows: Vec<Affine> = (0..builder.vars().precoder_len())
        .map(|col| Affine::default().term(col, 1.0))
        .collect();
    builder.add_norm_le(
        BlockRole::Power,
        &power_rows,
        Affine::default().constant(input.power_budget.sqrt()),
    );

    // Pinned streams.
    if !input.forced_zero.is_empty() {
        let mut rows = Vec::new();
        for key in input.forced_zero {
            for n in 0..nt {
                let col = builder.vars().precoder_col(key, n);
                rows.push(Affine::default().term(col, 1.0));
                rows.push(Affine::default().term(col + 1, 1.0));
            }
        }
        builder.add_eq_zero(BlockRole::ForcedZero, &rows);
    }

    // Multi-user stream WMSE epigraphs.
    for stream in layout.multiuser_streams() {
        let mut slot_sum = Affine::default().constant(1.0);
        for &carrier in layout.carriers(&stream) {
            slot_sum = slot_sum.term(builder.vars().common_col(carrier, &stream), 1.0);
        }
        for user in stream.users() {
            let quad = wmse_quadratic(layout, builder.vars(), input.samples, user, &stream);
            let mut rhs = slot_sum.clone().constant(-quad.constant);
            for (col, v) in &quad.lin {
                rhs = rhs.term(*col, -v);
            }
            builder.add_quad_le(BlockRole::StreamWmse { stream, user }, &quad.rows, rhs);
        }
    }

    // Private epigraphs.
    for user in layout.users().filter(|&u| layout.has_private(u)) {
        let stream = StreamKey::singleton(user);
        let quad = wmse_quadratic(layout, builder.vars(), input.samples, user, &stream);
        let t_col = builder.vars().epigraph_col(user).expect("epigraph var");
        let mut rhs = Affine::default().term(t_col, 1.0).constant(-quad.constant);
        for (col, v) in &quad.lin {
            rhs = rhs.term(*col, -v);
        }
        builder.add_quad_le(BlockRole::PrivateEpigraph { user }, &quad.rows, rhs);
    }

    // QoS rows: sum_slots x + t <= offset - threshold. For users without a
    // private stream and a zero threshold the row reads sum x <= 0, already
    // implied by the sign constraints; emitting it would only duplicate rows.
    for user in layout.users() {
        if input.thresholds[user - 1] == 0.0 && qos_offset(layout, user) == 0.0 {
            continue;
        }
        let mut expr = Affine::default().constant(
            input.thresholds[user - 1] - qos_offset(layout, user),
        );
        for (i, (slot_user, _)) in builder.vars().common_slots.iter().enumerate() {
            if *slot_user == user {
                expr = expr.term(builder.vars().precoder_len() + i, 1.0);
            }
        }
        if let Some(t_col) = builder.vars().epigraph_col(user) {
            expr = expr.term(t_col, 1.0);
        }
        builder.add_le_zero(BlockRole::Qos { user }, expr);
    }

    // Sign: x <= 0.
    for i in 0..builder.vars().common_slots.len() {
        let col = builder.vars().precoder_len() + i;
        builder.add_le_zero(BlockRole::SignX, Affine::default().term(col, 1.0));
    }

    builder.finish()
}
