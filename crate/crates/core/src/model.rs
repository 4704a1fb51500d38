//! Shared domain types: stream keys, decoding layouts, channels, precoders
//! and rate bookkeeping.
//!
//! Every transmission strategy in this crate (MU-LP, SC-SIC variants,
//! rate-splitting variants, multicast) is expressed as a [`StreamLayout`]: a
//! set of streams, each keyed by the nonempty subset of users that decodes
//! it, plus a total decoding order per stream level. A stream whose subset
//! has `l` users is an *l-order* stream; receivers run SIC from the highest
//! level down to their private stream, treating everything they never decode
//! as noise.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Errors from constructing domain values.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("stream key must contain at least one user")]
    EmptyStreamKey,
    #[error("user index {0} outside 1..={1}")]
    UserOutOfRange(usize, usize),
    #[error("duplicate user {0}")]
    DuplicateUser(usize),
    #[error("grouping is not a partition of the user set: {0}")]
    BadGrouping(String),
    #[error("order is not a permutation of the user set")]
    BadOrder,
    #[error("strategy requires {0}")]
    MissingArgument(&'static str),
    #[error("channel vectors must share one length, got {0} and {1}")]
    ChannelLengthMismatch(usize, usize),
    #[error("non-finite channel entry for user {0}")]
    NonFiniteChannel(usize),
    #[error("{0}")]
    InvalidParameter(String),
    #[error("level {level} order must list exactly the level-{level} streams")]
    BadLevelOrder { level: usize },
}

// ---------------------------------------------------------------------------
// Stream keys
// ---------------------------------------------------------------------------

/// A stream identity: the nonempty set of users that decode it.
///
/// Users are indexed `1..=K`. Keys order as (level descending, user list
/// lexicographic), which fixes the canonical iteration order of every map
/// keyed by streams.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    mask: u64,
}

impl StreamKey {
    pub const MAX_USERS: usize = 63;

    /// Key from 1-based user indices (any order, no duplicates).
    pub fn from_users(users: &[usize]) -> Result<Self, ModelError> {
        if users.is_empty() {
            return Err(ModelError::EmptyStreamKey);
        }
        let mut mask = 0u64;
        for &u in users {
            if u == 0 || u > Self::MAX_USERS {
                return Err(ModelError::UserOutOfRange(u, Self::MAX_USERS));
            }
            let bit = 1u64 << (u - 1);
            if mask & bit != 0 {
                return Err(ModelError::DuplicateUser(u));
            }
            mask |= bit;
        }
        Ok(StreamKey { mask })
    }

    /// The private stream of one user.
    pub fn singleton(user: usize) -> Self {
        StreamKey::from_users(&[user]).expect("valid singleton")
    }

    /// The stream decoded by all of `1..=k`.
    pub fn full(k: usize) -> Self {
        assert!(k >= 1 && k <= Self::MAX_USERS);
        StreamKey {
            mask: (1u64 << k) - 1,
        }
    }

    /// Number of users decoding this stream (the stream order).
    pub fn level(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn contains(&self, user: usize) -> bool {
        user >= 1 && user <= Self::MAX_USERS && self.mask & (1u64 << (user - 1)) != 0
    }

    /// Ascending 1-based user indices.
    pub fn users(&self) -> Vec<usize> {
        (1..=Self::MAX_USERS).filter(|&u| self.contains(u)).collect()
    }

    pub fn is_subset_of(&self, other: &StreamKey) -> bool {
        self.mask & !other.mask == 0
    }
}

impl Ord for StreamKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Level descending, then user list lexicographic ascending.
        other
            .level()
            .cmp(&self.level())
            .then_with(|| self.users().cmp(&other.users()))
    }
}

impl PartialOrd for StreamKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for StreamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let users: Vec<String> = self.users().iter().map(|u| u.to_string()).collect();
        write!(f, "{}", users.join("+"))
    }
}

impl fmt::Debug for StreamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s[{}]", self)
    }
}

impl Serialize for StreamKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.users().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StreamKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let users = Vec::<usize>::deserialize(deserializer)?;
        StreamKey::from_users(&users).map_err(D::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Stream layouts
// ---------------------------------------------------------------------------

/// Multiple-access strategy tags.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum StrategyKind {
    /// Multi-user linear precoding: private streams only, interference
    /// treated as noise.
    MuLp,
    /// Superposition coding with SIC over one global decoding order.
    ScSic,
    /// SC-SIC inside each user group, groups treated as mutual noise.
    ScSicPerGroup,
    /// Every nonempty subset carries a stream.
    GeneralizedRs,
    /// One common stream for all users plus private streams.
    OneLayerRs,
    /// Common stream, per-group streams and private streams.
    TwoLayerHrs,
    /// A single stream decoded by everyone.
    Multicast,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::MuLp,
        StrategyKind::ScSic,
        StrategyKind::ScSicPerGroup,
        StrategyKind::GeneralizedRs,
        StrategyKind::OneLayerRs,
        StrategyKind::TwoLayerHrs,
        StrategyKind::Multicast,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StrategyKind::MuLp => "mu-lp",
            StrategyKind::ScSic => "sc-sic",
            StrategyKind::ScSicPerGroup => "sc-sic-per-group",
            StrategyKind::GeneralizedRs => "rs",
            StrategyKind::OneLayerRs => "1-layer-rs",
            StrategyKind::TwoLayerHrs => "2-layer-hrs",
            StrategyKind::Multicast => "multicast",
        }
    }

    pub fn parse(name: &str) -> Result<Self, ModelError> {
        let canon = name.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL
            .iter()
            .copied()
            .find(|s| s.name() == canon)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|s| s.name()).collect();
                ModelError::InvalidParameter(format!(
                    "unknown strategy `{name}`; known: {}",
                    known.join(", ")
                ))
            })
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The set of active streams with per-level decoding orders and, per stream,
/// the users allowed to carry a share of its rate.
///
/// Rate carriers default to the whole subset. SC-SIC layouts restrict each
/// chain stream's carrier to the single user whose message it encodes, which
/// is what turns the generic evaluator into the SC-SIC rate expressions.
#[derive(Clone, PartialEq, Debug)]
pub struct StreamLayout {
    num_users: usize,
    /// Decode order within each level; every active stream appears exactly
    /// once under its own level.
    level_orders: BTreeMap<usize, Vec<StreamKey>>,
    carriers: BTreeMap<StreamKey, Vec<usize>>,
}

/// JSON shape of a layout: stream-keyed maps become entry lists so keys stay
/// user lists rather than strings.
#[derive(Serialize, Deserialize)]
struct StreamLayoutDoc {
    num_users: usize,
    level_orders: Vec<(usize, Vec<StreamKey>)>,
    carriers: Vec<(StreamKey, Vec<usize>)>,
}

impl Serialize for StreamLayout {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        StreamLayoutDoc {
            num_users: self.num_users,
            level_orders: self
                .level_orders
                .iter()
                .map(|(l, v)| (*l, v.clone()))
                .collect(),
            carriers: self.carriers.iter().map(|(k, v)| (*k, v.clone())).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for StreamLayout {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = StreamLayoutDoc::deserialize(d)?;
        let keys: Vec<StreamKey> = doc
            .level_orders
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        let mut layout =
            StreamLayout::new(doc.num_users, keys).map_err(D::Error::custom)?;
        for (level, order) in doc.level_orders {
            layout = layout
                .with_level_order(level, order)
                .map_err(D::Error::custom)?;
        }
        Ok(layout.with_carriers(doc.carriers.into_iter().collect()))
    }
}

impl StreamLayout {
    /// Layout with the default (lexicographic) order per level and all
    /// subset members as rate carriers.
    pub fn new<I: IntoIterator<Item = StreamKey>>(
        num_users: usize,
        keys: I,
    ) -> Result<Self, ModelError> {
        let mut set = BTreeSet::new();
        for key in keys {
            for u in key.users() {
                if u > num_users {
                    return Err(ModelError::UserOutOfRange(u, num_users));
                }
            }
            set.insert(key);
        }
        if set.is_empty() {
            return Err(ModelError::EmptyStreamKey);
        }
        let mut level_orders: BTreeMap<usize, Vec<StreamKey>> = BTreeMap::new();
        for key in &set {
            level_orders.entry(key.level()).or_default().push(*key);
        }
        for order in level_orders.values_mut() {
            order.sort_by_key(|k| k.users());
        }
        let carriers = set.iter().map(|k| (*k, k.users())).collect();
        Ok(StreamLayout {
            num_users,
            level_orders,
            carriers,
        })
    }

    /// Replace the decoding order of one level; `order` must list exactly the
    /// active level-`level` streams.
    pub fn with_level_order(mut self, level: usize, order: Vec<StreamKey>) -> Result<Self, ModelError> {
        let current = self
            .level_orders
            .get(&level)
            .ok_or(ModelError::BadLevelOrder { level })?;
        let mut sorted = order.clone();
        sorted.sort_by_key(|k| k.users());
        let mut existing = current.clone();
        existing.sort_by_key(|k| k.users());
        if sorted != existing {
            return Err(ModelError::BadLevelOrder { level });
        }
        self.level_orders.insert(level, order);
        Ok(self)
    }

    /// Restrict which users may carry stream rate (SC-SIC chains).
    fn with_carriers(mut self, carriers: BTreeMap<StreamKey, Vec<usize>>) -> Self {
        for (key, users) in carriers {
            debug_assert!(users.iter().all(|u| key.contains(*u)));
            self.carriers.insert(key, users);
        }
        self
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn users(&self) -> impl Iterator<Item = usize> {
        1..=self.num_users
    }

    pub fn num_streams(&self) -> usize {
        self.level_orders.values().map(Vec::len).sum()
    }

    pub fn contains_stream(&self, key: &StreamKey) -> bool {
        self.level_orders
            .get(&key.level())
            .is_some_and(|v| v.contains(key))
    }

    /// All streams in canonical order (level descending, lexicographic).
    pub fn streams(&self) -> Vec<StreamKey> {
        let mut keys: Vec<StreamKey> = self
            .level_orders
            .values()
            .flat_map(|v| v.iter().copied())
            .collect();
        keys.sort();
        keys
    }

    /// Streams decoded by more than one user, canonical order.
    pub fn multiuser_streams(&self) -> Vec<StreamKey> {
        self.streams().into_iter().filter(|k| k.level() >= 2).collect()
    }

    /// Decode order of a level (total order over that level's streams).
    pub fn level_order(&self, level: usize) -> Option<&[StreamKey]> {
        self.level_orders.get(&level).map(Vec::as_slice)
    }

    pub fn levels(&self) -> impl Iterator<Item = usize> + '_ {
        self.level_orders.keys().copied()
    }

    /// The streams user `k` decodes, in SIC order: level descending, within a
    /// level the subsequence of that level's order restricted to `k`.
    pub fn decode_sequence(&self, user: usize) -> Vec<StreamKey> {
        let mut seq = Vec::new();
        for (_, order) in self.level_orders.iter().rev() {
            seq.extend(order.iter().copied().filter(|key| key.contains(user)));
        }
        seq
    }

    /// Streams already cancelled when `user` decodes `stream`.
    pub fn decoded_before(&self, user: usize, stream: &StreamKey) -> Vec<StreamKey> {
        self.decode_sequence(user)
            .into_iter()
            .take_while(|k| k != stream)
            .collect()
    }

    /// Whether user `k` has a private (singleton) stream in this layout.
    pub fn has_private(&self, user: usize) -> bool {
        self.contains_stream(&StreamKey::singleton(user))
    }

    /// Users allowed to carry a share of `stream`'s rate.
    pub fn carriers(&self, stream: &StreamKey) -> &[usize] {
        self.carriers
            .get(stream)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// The common-rate slots: one `(user, stream)` pair per carrier of each
    /// multi-user stream, canonical order.
    pub fn common_slots(&self) -> Vec<(usize, StreamKey)> {
        let mut slots = Vec::new();
        for key in self.multiuser_streams() {
            for &user in self.carriers(&key) {
                slots.push((user, key));
            }
        }
        slots
    }
}

/// Build the layout for a strategy.
///
/// `grouping` is required for SC-SIC per group and 2-layer HRS; `order` (a
/// permutation of `1..=k`, decoded-first first) is required for the SC-SIC
/// variants, where per-group orders are its restrictions.
pub fn layout_for_strategy(
    strategy: StrategyKind,
    k: usize,
    grouping: Option<&[Vec<usize>]>,
    order: Option<&[usize]>,
) -> Result<StreamLayout, ModelError> {
    if k == 0 {
        return Err(ModelError::InvalidParameter("K must be >= 1".into()));
    }
    match strategy {
        StrategyKind::MuLp => {
            StreamLayout::new(k, (1..=k).map(StreamKey::singleton))
        }
        StrategyKind::Multicast => StreamLayout::new(k, [StreamKey::full(k)]),
        StrategyKind::OneLayerRs => {
            let mut keys = vec![StreamKey::full(k)];
            keys.extend((1..=k).map(StreamKey::singleton));
            StreamLayout::new(k, keys)
        }
        StrategyKind::GeneralizedRs => {
            let keys = (1u64..(1u64 << k)).map(|mask| StreamKey { mask });
            StreamLayout::new(k, keys)
        }
        StrategyKind::TwoLayerHrs => {
            let groups = grouping.ok_or(ModelError::MissingArgument("a user grouping"))?;
            validate_partition(groups, k)?;
            let mut keys = vec![StreamKey::full(k)];
            for g in groups {
                keys.push(StreamKey::from_users(g)?);
            }
            keys.extend((1..=k).map(StreamKey::singleton));
            StreamLayout::new(k, keys)
        }
        StrategyKind::ScSic => {
            let order = order.ok_or(ModelError::MissingArgument("a decoding order"))?;
            validate_permutation(order, k)?;
            let (keys, carriers) = chain_for_order(order)?;
            Ok(StreamLayout::new(k, keys)?.with_carriers(carriers))
        }
        StrategyKind::ScSicPerGroup => {
            let groups = grouping.ok_or(ModelError::MissingArgument("a user grouping"))?;
            validate_partition(groups, k)?;
            let order = order.ok_or(ModelError::MissingArgument("a decoding order"))?;
            validate_permutation(order, k)?;
            let mut keys = Vec::new();
            let mut carriers = BTreeMap::new();
            for g in groups {
                let group_order: Vec<usize> =
                    order.iter().copied().filter(|u| g.contains(u)).collect();
                let (chain, chain_carriers) = chain_for_order(&group_order)?;
                keys.extend(chain);
                carriers.extend(chain_carriers);
            }
            Ok(StreamLayout::new(k, keys)?.with_carriers(carriers))
        }
    }
}

/// SC-SIC chain induced by a decode order: the user decoded at position `i`
/// owns the stream keyed by the suffix starting at `i`, so each message rides
/// one stream of distinct order.
fn chain_for_order(
    order: &[usize],
) -> Result<(Vec<StreamKey>, BTreeMap<StreamKey, Vec<usize>>), ModelError> {
    let mut keys = Vec::with_capacity(order.len());
    let mut carriers = BTreeMap::new();
    for i in 0..order.len() {
        let key = StreamKey::from_users(&order[i..])?;
        carriers.insert(key, vec![order[i]]);
        keys.push(key);
    }
    Ok((keys, carriers))
}

fn validate_permutation(order: &[usize], k: usize) -> Result<(), ModelError> {
    if order.len() != k {
        return Err(ModelError::BadOrder);
    }
    let mut seen = vec![false; k + 1];
    for &u in order {
        if u == 0 || u > k || seen[u] {
            return Err(ModelError::BadOrder);
        }
        seen[u] = true;
    }
    Ok(())
}

fn validate_partition(groups: &[Vec<usize>], k: usize) -> Result<(), ModelError> {
    let mut seen = vec![false; k + 1];
    let mut total = 0usize;
    for g in groups {
        if g.is_empty() {
            return Err(ModelError::BadGrouping("empty group".into()));
        }
        for &u in g {
            if u == 0 || u > k {
                return Err(ModelError::BadGrouping(format!("user {u} outside 1..={k}")));
            }
            if seen[u] {
                return Err(ModelError::BadGrouping(format!("user {u} in two groups")));
            }
            seen[u] = true;
            total += 1;
        }
    }
    if total != k {
        return Err(ModelError::BadGrouping(format!("{total} of {k} users covered")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Channels and precoders
// ---------------------------------------------------------------------------

/// Serialize a complex vector as `[[re, im], ...]`.
mod complex_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|z| [z.re, z.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
struct ComplexVecDoc(#[serde(with = "complex_vec")] Vec<Complex64>);

/// Per-user channel vectors, noise-normalized (unit noise variance per user).
#[derive(Clone, PartialEq, Debug)]
pub struct ChannelSet {
    channels: Vec<Vec<Complex64>>,
}

impl ChannelSet {
    pub fn new(channels: Vec<Vec<Complex64>>) -> Result<Self, ModelError> {
        if channels.is_empty() {
            return Err(ModelError::InvalidParameter("need at least one user".into()));
        }
        let nt = channels[0].len();
        for (i, h) in channels.iter().enumerate() {
            if h.len() != nt {
                return Err(ModelError::ChannelLengthMismatch(nt, h.len()));
            }
            if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(ModelError::NonFiniteChannel(i + 1));
            }
        }
        Ok(ChannelSet { channels })
    }

    pub fn num_users(&self) -> usize {
        self.channels.len()
    }

    pub fn nt(&self) -> usize {
        self.channels[0].len()
    }

    /// Channel vector of a 1-based user.
    pub fn channel(&self, user: usize) -> &[Complex64] {
        &self.channels[user - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Complex64]> {
        self.channels.iter().map(Vec::as_slice)
    }
}

impl Serialize for ChannelSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let doc: Vec<ComplexVecDoc> = self.channels.iter().cloned().map(ComplexVecDoc).collect();
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ChannelSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = Vec::<ComplexVecDoc>::deserialize(d)?;
        ChannelSet::new(doc.into_iter().map(|c| c.0).collect()).map_err(D::Error::custom)
    }
}

/// Channel estimate plus the Gaussian error model used for imperfect CSIT.
///
/// Realizations are `h_k = est_k + err` with i.i.d. circular complex Gaussian
/// error entries of total variance `error_std[k-1]^2` (so each of the real
/// and imaginary parts has variance `sigma^2 / 2`).
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct CsitModel {
    pub estimate: ChannelSet,
    pub error_std: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl CsitModel {
    pub fn new(
        estimate: ChannelSet,
        error_std: Vec<f64>,
        samples: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if error_std.len() != estimate.num_users() {
            return Err(ModelError::InvalidParameter(
                "one error std per user required".into(),
            ));
        }
        if error_std.iter().any(|s| !(*s >= 0.0)) {
            return Err(ModelError::InvalidParameter("error std must be >= 0".into()));
        }
        if samples == 0 {
            return Err(ModelError::InvalidParameter("need at least one sample".into()));
        }
        Ok(CsitModel {
            estimate,
            error_std,
            samples,
            seed,
        })
    }
}

/// One precoding vector per active stream (entries carry square-root power).
#[derive(Clone, PartialEq, Debug)]
pub struct PrecoderSet {
    map: BTreeMap<StreamKey, Vec<Complex64>>,
}

impl PrecoderSet {
    pub fn new(map: BTreeMap<StreamKey, Vec<Complex64>>) -> Self {
        PrecoderSet { map }
    }

    /// All-zero precoders for a layout.
    pub fn zeros(layout: &StreamLayout, nt: usize) -> Self {
        let map = layout
            .streams()
            .into_iter()
            .map(|k| (k, vec![Complex64::ZERO; nt]))
            .collect();
        PrecoderSet { map }
    }

    pub fn get(&self, key: &StreamKey) -> &[Complex64] {
        self.map.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn set(&mut self, key: StreamKey, precoder: Vec<Complex64>) {
        self.map.insert(key, precoder);
    }

    /// Canonical (level descending, lexicographic) iteration.
    pub fn iter(&self) -> impl Iterator<Item = (&StreamKey, &[Complex64])> {
        self.map.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn stream_power(&self, key: &StreamKey) -> f64 {
        self.get(key).iter().map(|z| z.norm_sqr()).sum()
    }

    /// tr(P P^H), the consumed transmit power.
    pub fn total_power(&self) -> f64 {
        self.map
            .values()
            .flat_map(|v| v.iter())
            .map(|z| z.norm_sqr())
            .sum()
    }
}

impl Serialize for PrecoderSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Entry<'a> {
            users: &'a StreamKey,
            #[serde(with = "complex_vec")]
            precoder: Vec<Complex64>,
        }
        let doc: Vec<Entry> = self
            .map
            .iter()
            .map(|(k, v)| Entry {
                users: k,
                precoder: v.clone(),
            })
            .collect();
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PrecoderSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Entry {
            users: StreamKey,
            #[serde(with = "complex_vec")]
            precoder: Vec<Complex64>,
        }
        let doc = Vec::<Entry>::deserialize(d)?;
        Ok(PrecoderSet {
            map: doc.into_iter().map(|e| (e.users, e.precoder)).collect(),
        })
    }
}

// ---------------------------------------------------------------------------
// Rates
// ---------------------------------------------------------------------------

/// Per-user portions of each multi-user stream's rate (bit/s/Hz).
#[derive(Clone, PartialEq, Debug, Default, Serialize, Deserialize)]
pub struct CommonRateSplit {
    portions: BTreeMap<StreamKey, BTreeMap<usize, f64>>,
}

impl CommonRateSplit {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn set(&mut self, stream: StreamKey, user: usize, portion: f64) {
        self.portions.entry(stream).or_default().insert(user, portion);
    }

    pub fn portion(&self, stream: &StreamKey, user: usize) -> f64 {
        self.portions
            .get(stream)
            .and_then(|m| m.get(&user))
            .copied()
            .unwrap_or(0.0)
    }

    /// Sum of portions allocated on one stream.
    pub fn stream_total(&self, stream: &StreamKey) -> f64 {
        self.portions
            .get(stream)
            .map(|m| m.values().sum())
            .unwrap_or(0.0)
    }

    /// Sum of common-rate portions credited to one user.
    pub fn user_total(&self, user: usize) -> f64 {
        self.portions
            .values()
            .filter_map(|m| m.get(&user))
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&StreamKey, &BTreeMap<usize, f64>)> {
        self.portions.iter()
    }

    pub fn scale_stream(&mut self, stream: &StreamKey, factor: f64) {
        if let Some(m) = self.portions.get_mut(stream) {
            for v in m.values_mut() {
                *v *= factor;
            }
        }
    }
}

/// Everything the forward model produces for one (layout, precoders, channel)
/// triple: per-stream rates, the common-rate split, per-user totals and the
/// weighted sum rate.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RateOutcome {
    pub stream_rates: BTreeMap<StreamKey, f64>,
    /// Private-stream rate per user (zero when the layout gives a user no
    /// singleton stream).
    pub private_rates: Vec<f64>,
    pub split: CommonRateSplit,
    pub user_totals: Vec<f64>,
    pub weights: Vec<f64>,
    pub wsr: f64,
}

// ---------------------------------------------------------------------------
// Scenario configuration
// ---------------------------------------------------------------------------

/// How channels are produced for a scenario.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum ChannelSpec {
    /// Deterministic steered vectors: user 1 all-ones, user k+1 is
    /// `gamma_k * [1, e^{j theta_k}, ...]^H`.
    Structured { gammas: Vec<f64>, thetas: Vec<f64> },
    /// i.i.d. complex Gaussian entries, per-user variance, seeded.
    Random { variances: Vec<f64>, seed: u64 },
    /// Channels given verbatim.
    Explicit(ChannelSet),
}

/// Imperfect-CSIT configuration: error scales `s_k` give per-user error
/// variance `s_k * P_t^{-0.6}`; optimization averages over `m_opt` sampled
/// realizations and reporting uses a fresh ensemble of `m_eval`.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct CsitSpec {
    pub error_scales: Vec<f64>,
    pub m_opt: usize,
    pub m_eval: usize,
    pub seed: u64,
}

/// How decoding orders / groupings are chosen for order-dependent strategies.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub enum OrderPolicy {
    /// Enumerate all candidates, refuse above the cap.
    Enumerate,
    /// Use the configured order/grouping only.
    Fixed,
    /// SC-SIC only: decode in ascending channel-gain order.
    AscendingGain,
}

/// Full description of one optimization scenario.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub strategy: StrategyKind,
    pub nt: usize,
    pub num_users: usize,
    pub snr_db: f64,
    pub weights: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub channel: ChannelSpec,
    pub csit: Option<CsitSpec>,
    pub grouping: Option<Vec<Vec<usize>>>,
    pub order: Option<Vec<usize>>,
    pub order_policy: OrderPolicy,
    /// Candidate budget for order/grouping enumeration.
    pub enumeration_cap: usize,
    /// Initialization restarts; restart `r` uses the `r`-th canonical
    /// private-power fraction.
    pub restarts: usize,
    /// Explicit private-power fraction; overrides the restart schedule.
    pub init_alpha: Option<f64>,
    /// AO stopping tolerance on the WSR (bit/s/Hz).
    pub ao_tol: f64,
    pub max_ao_iter: usize,
    /// Tolerance handed to the conic solver for the inner subproblems.
    pub solver_tol: f64,
}

impl ScenarioConfig {
    /// `P_t = 10^{SNR_dB / 10}` with unit noise.
    pub fn power_budget(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.weights.len() != self.num_users || self.thresholds.len() != self.num_users {
            return Err(ModelError::InvalidParameter(
                "weights and thresholds must have one entry per user".into(),
            ));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(ModelError::InvalidParameter("weights must be >= 0".into()));
        }
        if self.thresholds.iter().any(|t| !(*t >= 0.0)) {
            return Err(ModelError::InvalidParameter("thresholds must be >= 0".into()));
        }
        if let Some(alpha) = self.init_alpha {
            if !(0.0..=1.0).contains(&alpha) {
                return Err(ModelError::InvalidParameter("alpha must be in [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// Baseline configuration with library defaults.
    pub fn new(strategy: StrategyKind, nt: usize, num_users: usize, snr_db: f64) -> Self {
        ScenarioConfig {
            strategy,
            nt,
            num_users,
            snr_db,
            weights: vec![1.0; num_users],
            thresholds: vec![0.0; num_users],
            channel: ChannelSpec::Random {
                variances: vec![1.0; num_users],
                seed: 0,
            },
            csit: None,
            grouping: None,
            order: None,
            order_policy: OrderPolicy::Enumerate,
            enumeration_cap: 64,
            restarts: 3,
            init_alpha: None,
            ao_tol: 1e-4,
            max_ao_iter: 200,
            solver_tol: 1e-9,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key(users: &[usize]) -> StreamKey {
        StreamKey::from_users(users).unwrap()
    }

    #[test]
    fn canonical_order_is_level_desc_then_lex() {
        let mut keys = vec![
            key(&[2]),
            key(&[1, 2, 3]),
            key(&[1, 3]),
            key(&[1]),
            key(&[2, 3]),
            key(&[3]),
            key(&[1, 2]),
        ];
        keys.sort();
        let shown: Vec<String> = keys.iter().map(|k| k.to_string()).collect();
        assert_eq!(shown, ["1+2+3", "1+2", "1+3", "2+3", "1", "2", "3"]);
    }

    #[test]
    fn stream_key_rejects_bad_input() {
        assert_eq!(StreamKey::from_users(&[]), Err(ModelError::EmptyStreamKey));
        assert_eq!(
            StreamKey::from_users(&[1, 1]),
            Err(ModelError::DuplicateUser(1))
        );
        assert!(matches!(
            StreamKey::from_users(&[0]),
            Err(ModelError::UserOutOfRange(0, _))
        ));
    }

    #[test]
    fn mu_lp_layout_is_private_only() {
        let layout = layout_for_strategy(StrategyKind::MuLp, 3, None, None).unwrap();
        assert_eq!(layout.streams(), vec![key(&[1]), key(&[2]), key(&[3])]);
    }

    #[test]
    fn generalized_rs_three_users_has_seven_streams() {
        let layout = layout_for_strategy(StrategyKind::GeneralizedRs, 3, None, None).unwrap();
        let shown: Vec<String> = layout.streams().iter().map(|k| k.to_string()).collect();
        assert_eq!(
            shown,
            ["1+2+3", "1+2", "1+3", "2+3", "1", "2", "3"],
        );
    }

    #[test]
    fn generalized_rs_stream_count_is_two_pow_k_minus_one() {
        for k in 1..=4 {
            let layout = layout_for_strategy(StrategyKind::GeneralizedRs, k, None, None).unwrap();
            assert_eq!(layout.num_streams(), (1 << k) - 1);
        }
    }

    #[test]
    fn sc_sic_chain_for_order_1_2_3() {
        let layout =
            layout_for_strategy(StrategyKind::ScSic, 3, None, Some(&[1, 2, 3])).unwrap();
        assert_eq!(
            layout.streams(),
            vec![key(&[1, 2, 3]), key(&[2, 3]), key(&[3])]
        );
        // Each chain stream's rate belongs to the user decoded at that point.
        assert_eq!(layout.carriers(&key(&[1, 2, 3])), &[1]);
        assert_eq!(layout.carriers(&key(&[2, 3])), &[2]);
        assert_eq!(layout.carriers(&key(&[3])), &[3]);
    }

    #[test]
    fn one_layer_and_multicast_and_hrs_layouts() {
        let one = layout_for_strategy(StrategyKind::OneLayerRs, 4, None, None).unwrap();
        assert_eq!(one.num_streams(), 5);
        assert!(one.contains_stream(&StreamKey::full(4)));

        let multi = layout_for_strategy(StrategyKind::Multicast, 3, None, None).unwrap();
        assert_eq!(multi.streams(), vec![key(&[1, 2, 3])]);

        let groups = vec![vec![1, 2], vec![3, 4]];
        let hrs = layout_for_strategy(StrategyKind::TwoLayerHrs, 4, Some(&groups), None).unwrap();
        assert_eq!(
            hrs.streams(),
            vec![
                key(&[1, 2, 3, 4]),
                key(&[1, 2]),
                key(&[3, 4]),
                key(&[1]),
                key(&[2]),
                key(&[3]),
                key(&[4])
            ]
        );
    }

    #[test]
    fn sc_sic_per_group_builds_group_chains() {
        let groups = vec![vec![1], vec![2, 3]];
        let layout = layout_for_strategy(
            StrategyKind::ScSicPerGroup,
            3,
            Some(&groups),
            Some(&[3, 1, 2]),
        )
        .unwrap();
        // Group {2,3} decodes 3 before 2 because 3 precedes 2 in the order.
        assert_eq!(layout.streams(), vec![key(&[2, 3]), key(&[1]), key(&[2])]);
        assert_eq!(layout.carriers(&key(&[2, 3])), &[3]);
    }

    #[test]
    fn strategy_argument_errors() {
        assert_eq!(
            layout_for_strategy(StrategyKind::ScSic, 3, None, None),
            Err(ModelError::MissingArgument("a decoding order"))
        );
        assert_eq!(
            layout_for_strategy(StrategyKind::ScSic, 3, None, Some(&[1, 1, 2])),
            Err(ModelError::BadOrder)
        );
        let bad = vec![vec![1, 2], vec![2, 3]];
        assert!(matches!(
            layout_for_strategy(StrategyKind::ScSicPerGroup, 3, Some(&bad), Some(&[1, 2, 3])),
            Err(ModelError::BadGrouping(_))
        ));
        assert!(StrategyKind::parse("no-such-scheme").is_err());
        assert_eq!(StrategyKind::parse("RS").unwrap(), StrategyKind::GeneralizedRs);
    }

    #[test]
    fn per_strategy_key_rules_hold_exhaustively_for_small_k() {
        for k in 1..=4usize {
            let mulp = layout_for_strategy(StrategyKind::MuLp, k, None, None).unwrap();
            assert!(mulp.streams().iter().all(|s| s.level() == 1));
            assert_eq!(mulp.num_streams(), k);

            let rs = layout_for_strategy(StrategyKind::GeneralizedRs, k, None, None).unwrap();
            assert_eq!(rs.num_streams(), (1usize << k) - 1);

            let order: Vec<usize> = (1..=k).collect();
            let chain = layout_for_strategy(StrategyKind::ScSic, k, None, Some(&order)).unwrap();
            let streams = chain.streams();
            assert_eq!(streams.len(), k);
            for w in streams.windows(2) {
                assert!(w[1].is_subset_of(&w[0]));
                assert_eq!(w[0].level(), w[1].level() + 1);
            }
        }
    }

    #[test]
    fn decode_sequence_runs_high_level_to_private() {
        let layout = layout_for_strategy(StrategyKind::GeneralizedRs, 3, None, None).unwrap();
        let seq = layout.decode_sequence(1);
        assert_eq!(
            seq,
            vec![key(&[1, 2, 3]), key(&[1, 2]), key(&[1, 3]), key(&[1])]
        );
    }

    #[test]
    fn level_order_override_and_validation() {
        let layout = layout_for_strategy(StrategyKind::GeneralizedRs, 3, None, None).unwrap();
        let reordered = layout
            .clone()
            .with_level_order(2, vec![key(&[2, 3]), key(&[1, 3]), key(&[1, 2])])
            .unwrap();
        assert_eq!(
            reordered.decode_sequence(1)[1..3],
            [key(&[1, 3]), key(&[1, 2])]
        );
        assert!(layout
            .with_level_order(2, vec![key(&[1, 2]), key(&[1, 3])])
            .is_err());
    }

    #[test]
    fn stream_key_serializes_as_sorted_user_list() {
        let k = key(&[3, 1]);
        assert_eq!(serde_json::to_string(&k).unwrap(), "[1,3]");
        let back: StreamKey = serde_json::from_str("[1,3]").unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn precoders_serialize_complex_entries_as_re_im_pairs() {
        let mut p = PrecoderSet::new(BTreeMap::new());
        p.set(key(&[1, 2]), vec![Complex64::new(0.5, -1.0)]);
        let json = serde_json::to_string(&p).unwrap();
        assert_eq!(json, r#"[{"users":[1,2],"precoder":[[0.5,-1.0]]}]"#);
        let back: PrecoderSet = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    proptest! {
        /// A user's induced decode order at a level is a subsequence of the
        /// global level order.
        #[test]
        fn induced_sequences_preserve_global_order(perm in proptest::sample::subsequence(vec![0usize,1,2,3,4,5], 6)) {
            // Use the permutation source to shuffle the level-2 order of the
            // 4-user generalized layout.
            let layout = layout_for_strategy(StrategyKind::GeneralizedRs, 4, None, None).unwrap();
            let mut order = layout.level_order(2).unwrap().to_vec();
            let len = order.len();
            for (i, &j) in perm.iter().enumerate() {
                order.swap(i % len, j % len);
            }
            let layout = layout.with_level_order(2, order.clone()).unwrap();
            for user in 1..=4usize {
                let induced: Vec<StreamKey> = layout
                    .decode_sequence(user)
                    .into_iter()
                    .filter(|k| k.level() == 2)
                    .collect();
                let positions: Vec<usize> = induced
                    .iter()
                    .map(|k| order.iter().position(|o| o == k).unwrap())
                    .collect();
                prop_assert!(positions.windows(2).all(|w| w[0] < w[1]));
            }
        }

        /// Layout and precoder documents round-trip through JSON.
        #[test]
        fn layout_roundtrips_through_json(k in 1usize..=4) {
            let layout = layout_for_strategy(StrategyKind::GeneralizedRs, k, None, None).unwrap();
            let json = serde_json::to_string(&layout).unwrap();
            let back: StreamLayout = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(layout, back);
        }
    }
}
