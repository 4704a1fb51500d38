//! Conic standard form for the precoder subproblem.
//!
//! Problems are `min q^T z` over `z` with blocks of constraints `A z + s = b`,
//! `s` in a zero / nonnegative / second-order cone. Quadratic (weighted-MSE)
//! constraints arrive already encoded as second-order cones; each block keeps
//! a role tag so callers and tests can identify the power row, per-stream
//! WMSE epigraphs, QoS rows and sign rows.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{CommonRateSplit, PrecoderSet, StreamKey};

pub const PROBLEM_FORMAT_VERSION: u32 = 1;

/// Cone of one constraint block.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum ConeSpec {
    /// `s = 0` (equalities).
    Zero(usize),
    /// `s >= 0` element-wise.
    Nonnegative(usize),
    /// `s_0 >= ||s_1..||`.
    SecondOrder(usize),
}

impl ConeSpec {
    pub fn dim(&self) -> usize {
        match *self {
            ConeSpec::Zero(n) | ConeSpec::Nonnegative(n) | ConeSpec::SecondOrder(n) => n,
        }
    }
}

/// What a constraint block encodes.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum BlockRole {
    /// `||vec(P)|| <= sqrt(P_t)`.
    Power,
    /// Augmented-WMSE epigraph of `user` on a multi-user `stream`:
    /// `xi_k^A <= 1 + sum of carrier x vars`.
    StreamWmse { stream: StreamKey, user: usize },
    /// Private augmented WMSE of `user` bounded by its epigraph variable.
    PrivateEpigraph { user: usize },
    /// `xi_{k,tot} <= offset_k - R_k^th`.
    Qos { user: usize },
    /// `x <= 0` for every common-rate variable.
    SignX,
    /// Pinned-to-zero precoder entries.
    ForcedZero,
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ConstraintBlock {
    pub role: BlockRole,
    pub cone: ConeSpec,
    /// First row of this block in the stacked `(A, b)`.
    pub offset: usize,
}

/// Where each variable group lives inside `z`.
///
/// Layout: all precoder entries first (per stream in canonical order, `2 Nt`
/// reals as `re, im` interleaved per antenna), then one common-rate variable
/// per `(user, stream)` carrier slot, then one epigraph variable per user
/// with a private stream.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct VariableMap {
    pub nt: usize,
    pub streams: Vec<StreamKey>,
    pub common_slots: Vec<(usize, StreamKey)>,
    pub epigraph_users: Vec<usize>,
}

impl VariableMap {
    pub fn precoder_len(&self) -> usize {
        2 * self.nt * self.streams.len()
    }

    pub fn num_vars(&self) -> usize {
        self.precoder_len() + self.common_slots.len() + self.epigraph_users.len()
    }

    /// Column of the real (im = +1) part of antenna `n` of `stream`.
    pub fn precoder_col(&self, stream: &StreamKey, antenna: usize) -> usize {
        let si = self
            .streams
            .iter()
            .position(|s| s == stream)
            .expect("stream present");
        2 * (self.nt * si + antenna)
    }

    pub fn common_col(&self, user: usize, stream: &StreamKey) -> usize {
        let idx = self
            .common_slots
            .iter()
            .position(|(u, s)| *u == user && s == stream)
            .expect("slot present");
        self.precoder_len() + idx
    }

    pub fn epigraph_col(&self, user: usize) -> Option<usize> {
        self.epigraph_users
            .iter()
            .position(|u| *u == user)
            .map(|i| self.precoder_len() + self.common_slots.len() + i)
    }
}

/// A conic program plus enough structure to map solutions back to precoders
/// and common-rate splits.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ConvexProblem {
    pub format_version: u32,
    pub num_vars: usize,
    pub objective: Vec<f64>,
    /// Constant added to `q^T z` when reporting objective values.
    pub objective_offset: f64,
    /// Triplets `(row, col, value)` of `A`.
    pub a_triplets: Vec<(usize, usize, f64)>,
    pub b: Vec<f64>,
    pub blocks: Vec<ConstraintBlock>,
    pub vars: VariableMap,
}

/// Block counts by role (for structural assertions).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct ProblemSummary {
    pub power: usize,
    pub stream_wmse: usize,
    /// Distinct multi-user streams covered by WMSE blocks.
    pub common_streams: usize,
    pub private_epigraphs: usize,
    pub qos: usize,
    pub sign_rows: usize,
    pub forced_zero_rows: usize,
}

impl ConvexProblem {
    pub fn num_rows(&self) -> usize {
        self.b.len()
    }

    pub fn summary(&self) -> ProblemSummary {
        let mut s = ProblemSummary::default();
        let mut streams = Vec::new();
        for block in &self.blocks {
            match &block.role {
                BlockRole::Power => s.power += 1,
                BlockRole::StreamWmse { stream, .. } => {
                    s.stream_wmse += 1;
                    if !streams.contains(stream) {
                        streams.push(*stream);
                    }
                }
                BlockRole::PrivateEpigraph { .. } => s.private_epigraphs += 1,
                BlockRole::Qos { .. } => s.qos += 1,
                BlockRole::SignX => s.sign_rows += block.cone.dim(),
                BlockRole::ForcedZero => s.forced_zero_rows += block.cone.dim(),
            }
        }
        s.common_streams = streams.len();
        s
    }

    /// Rebuild the complex precoders from a primal point.
    pub fn extract_precoders(&self, z: &[f64]) -> PrecoderSet {
        let mut map = std::collections::BTreeMap::new();
        for stream in &self.vars.streams {
            let p: Vec<Complex64> = (0..self.vars.nt)
                .map(|n| {
                    let col = self.vars.precoder_col(stream, n);
                    Complex64::new(z[col], z[col + 1])
                })
                .collect();
            map.insert(*stream, p);
        }
        PrecoderSet::new(map)
    }

    /// Common-rate portions `c = -x` from a primal point (tiny positive `x`
    /// from solver tolerance clipped to zero).
    pub fn extract_split(&self, z: &[f64]) -> CommonRateSplit {
        let mut split = CommonRateSplit::empty();
        for (i, (user, stream)) in self.vars.common_slots.iter().enumerate() {
            let x = z[self.vars.precoder_len() + i];
            split.set(*stream, *user, (-x).max(0.0));
        }
        split
    }

    /// Evaluate `q^T z + offset`.
    pub fn objective_value(&self, z: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(z)
            .map(|(q, zi)| q * zi)
            .sum::<f64>()
            + self.objective_offset
    }

    /// Residual `s = b - A z` stacked over all blocks.
    pub fn slack(&self, z: &[f64]) -> Vec<f64> {
        let mut s = self.b.clone();
        for &(r, c, v) in &self.a_triplets {
            s[r] -= v * z[c];
        }
        s
    }

    /// Worst primal constraint violation over all cones (0 when feasible).
    pub fn primal_violation(&self, z: &[f64]) -> f64 {
        let s = self.slack(z);
        let mut worst: f64 = 0.0;
        for block in &self.blocks {
            let seg = &s[block.offset..block.offset + block.cone.dim()];
            let v = match block.cone {
                ConeSpec::Zero(_) => seg.iter().fold(0.0f64, |m, x| m.max(x.abs())),
                ConeSpec::Nonnegative(_) => seg.iter().fold(0.0f64, |m, x| m.max(-x)),
                ConeSpec::SecondOrder(_) => {
                    let tail: f64 = seg[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                    (tail - seg[0]).max(0.0)
                }
            };
            worst = worst.max(v);
        }
        worst
    }
}

/// Incremental builder used by the subproblem assembler.
pub struct ProblemBuilder {
    vars: VariableMap,
    objective: Vec<f64>,
    objective_offset: f64,
    a_triplets: Vec<(usize, usize, f64)>,
    b: Vec<f64>,
    blocks: Vec<ConstraintBlock>,
}

/// One affine expression `coeffs . z + constant`.
#[derive(Clone, Default, Debug)]
pub struct Affine {
    pub coeffs: Vec<(usize, f64)>,
    pub constant: f64,
}

impl Affine {
    pub fn term(mut self, col: usize, v: f64) -> Self {
        self.coeffs.push((col, v));
        self
    }

    pub fn constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }
}

impl ProblemBuilder {
    pub fn new(vars: VariableMap) -> Self {
        let n = vars.num_vars();
        ProblemBuilder {
            vars,
            objective: vec![0.0; n],
            objective_offset: 0.0,
            a_triplets: Vec::new(),
            b: Vec::new(),
            blocks: Vec::new(),
        }
    }

    pub fn vars(&self) -> &VariableMap {
        &self.vars
    }

    pub fn add_objective(&mut self, col: usize, coeff: f64) {
        self.objective[col] += coeff;
    }

    pub fn add_objective_offset(&mut self, c: f64) {
        self.objective_offset += c;
    }

    fn push_row(&mut self, coeffs: &[(usize, f64)], rhs: f64) {
        let row = self.b.len();
        for &(col, v) in coeffs {
            if v != 0.0 {
                self.a_triplets.push((row, col, v));
            }
        }
        self.b.push(rhs);
    }

    /// `expr <= 0` as one nonnegative-cone row (`s = -expr >= 0`).
    pub fn add_le_zero(&mut self, role: BlockRole, expr: Affine) {
        let offset = self.b.len();
        self.push_row(&expr.coeffs, -expr.constant);
        self.blocks.push(ConstraintBlock {
            role,
            cone: ConeSpec::Nonnegative(1),
            offset,
        });
    }

    /// `expr = 0` rows in one zero-cone block.
    pub fn add_eq_zero(&mut self, role: BlockRole, exprs: &[Affine]) {
        let offset = self.b.len();
        for e in exprs {
            self.push_row(&e.coeffs, -e.constant);
        }
        self.blocks.push(ConstraintBlock {
            role,
            cone: ConeSpec::Zero(exprs.len()),
            offset,
        });
    }

    /// `||rows . z + consts|| <= bound` as a second-order cone.
    pub fn add_norm_le(&mut self, role: BlockRole, rows: &[Affine], bound: Affine) {
        let offset = self.b.len();
        // s_0 = bound: b = const, A row = -coeffs.
        let neg: Vec<(usize, f64)> = bound.coeffs.iter().map(|&(c, v)| (c, -v)).collect();
        self.push_row(&neg, bound.constant);
        for row in rows {
            let neg: Vec<(usize, f64)> = row.coeffs.iter().map(|&(c, v)| (c, -v)).collect();
            self.push_row(&neg, row.constant);
        }
        self.blocks.push(ConstraintBlock {
            role,
            cone: ConeSpec::SecondOrder(rows.len() + 1),
            offset,
        });
    }

    /// `||rows . z||^2 <= rhs(z)` via the rotated-cone identity
    /// `||(1 - rhs, 2 rows)|| <= 1 + rhs`.
    pub fn add_quad_le(&mut self, role: BlockRole, rows: &[Affine], rhs: Affine) {
        let bound = Affine {
            coeffs: rhs.coeffs.clone(),
            constant: rhs.constant + 1.0,
        };
        let mut cone_rows = Vec::with_capacity(rows.len() + 1);
        cone_rows.push(Affine {
            coeffs: rhs.coeffs.iter().map(|&(c, v)| (c, -v)).collect(),
            constant: 1.0 - rhs.constant,
        });
        for r in rows {
            cone_rows.push(Affine {
                coeffs: r.coeffs.iter().map(|&(c, v)| (c, 2.0 * v)).collect(),
                constant: 2.0 * r.constant,
            });
        }
        self.add_norm_le(role, &cone_rows, bound);
    }

    pub fn finish(self) -> ConvexProblem {
        ConvexProblem {
            format_version: PROBLEM_FORMAT_VERSION,
            num_vars: self.vars.num_vars(),
            objective: self.objective,
            objective_offset: self.objective_offset,
            a_triplets: self.a_triplets,
            b: self.b,
            blocks: self.blocks,
            vars: self.vars,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_vars() -> VariableMap {
        VariableMap {
            nt: 1,
            streams: vec![StreamKey::singleton(1)],
            common_slots: vec![],
            epigraph_users: vec![1],
        }
    }

    #[test]
    fn quad_encoding_certifies_feasibility_correctly() {
        // ||z0||^2 <= z2 with variables (re, im, t).
        let mut b = ProblemBuilder::new(tiny_vars());
        let rows = vec![Affine::default().term(0, 1.0)];
        b.add_quad_le(
            BlockRole::PrivateEpigraph { user: 1 },
            &rows,
            Affine::default().term(2, 1.0),
        );
        let p = b.finish();
        assert_eq!(p.primal_violation(&[2.0, 0.0, 4.0]), 0.0);
        assert!(p.primal_violation(&[2.0, 0.0, 3.9]) > 0.0);
    }

    #[test]
    fn slack_and_objective_round_trip() {
        let mut b = ProblemBuilder::new(tiny_vars());
        b.add_objective(2, 1.0);
        b.add_objective_offset(0.5);
        b.add_le_zero(BlockRole::SignX, Affine::default().term(0, 1.0).constant(-1.0));
        let p = b.finish();
        assert_eq!(p.objective_value(&[0.0, 0.0, 2.0]), 2.5);
        // x0 <= 1 is satisfied at 0.5, violated at 1.5.
        assert_eq!(p.primal_violation(&[0.5, 0.0, 0.0]), 0.0);
        assert!(p.primal_violation(&[1.5, 0.0, 0.0]) > 0.4);
    }

    #[test]
    fn standard_form_dump_round_trips() {
        let mut b = ProblemBuilder::new(tiny_vars());
        b.add_norm_le(
            BlockRole::Power,
            &[Affine::default().term(0, 1.0), Affine::default().term(1, 1.0)],
            Affine::default().constant(2.0),
        );
        let p = b.finish();
        let json = serde_json::to_string(&p).unwrap();
        let back: ConvexProblem = serde_json::from_str(&json).unwrap();
        assert_eq!(p, back);
        assert!(json.contains("\"format_version\":1"));
    }
}
