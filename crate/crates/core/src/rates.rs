//! Exact forward model: SINRs, per-stream rates, common-rate accounting and
//! the weighted sum rate for any layout.
//!
//! The SINR of user `k` decoding stream `A` puts the signal power of `p_A`
//! over noise plus three interference groups: same-level streams decoded
//! later at `k`, lower-level streams `k` still has to decode, and every
//! stream `k` never decodes. Equivalently: everything except the streams
//! already cancelled. Rates are `log2(1 + sinr)` in bit/s/Hz; a multi-user
//! stream's rate is the minimum over its subset so every member can decode
//! it.

use thiserror::Error;

use crate::linalg::inner;
use crate::model::{
    ChannelSet, CommonRateSplit, PrecoderSet, RateOutcome, StreamKey, StreamLayout,
};

#[derive(Debug, Error, PartialEq)]
pub enum RateError {
    #[error("user {user} does not decode stream {stream}")]
    UserNotInStream { user: usize, stream: String },
    #[error("stream {stream} not present in the layout")]
    UnknownStream { stream: String },
    #[error(
        "common-rate split on stream {stream} infeasible: allocated {allocated:.9} > rate {rate:.9}"
    )]
    InfeasibleSplit {
        stream: String,
        allocated: f64,
        rate: f64,
    },
    #[error("negative portion on stream {stream} for user {user}")]
    NegativePortion { stream: String, user: usize },
    #[error("portion on stream {stream} assigned to non-carrier user {user}")]
    NotACarrier { stream: String, user: usize },
}

/// Residual receive power at user `k` while decoding `stream`: noise plus
/// every stream not yet cancelled (the T-chain).
pub fn residual_power(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    user: usize,
    stream: &StreamKey,
) -> f64 {
    let h = channels.channel(user);
    let cancelled = layout.decoded_before(user, stream);
    let mut power = 1.0;
    for key in layout.streams() {
        if !cancelled.contains(&key) {
            power += inner(h, precoders.get(&key)).norm_sqr();
        }
    }
    power
}

/// SINR of user `k` decoding `stream` under the layout's decoding orders.
pub fn sinr(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    user: usize,
    stream: &StreamKey,
) -> Result<f64, RateError> {
    if !layout.contains_stream(stream) {
        return Err(RateError::UnknownStream {
            stream: stream.to_string(),
        });
    }
    if !stream.contains(user) {
        return Err(RateError::UserNotInStream {
            user,
            stream: stream.to_string(),
        });
    }
    let h = channels.channel(user);
    let signal = inner(h, precoders.get(stream)).norm_sqr();
    let total = residual_power(layout, precoders, channels, user, stream);
    Ok(signal / (total - signal))
}

/// Rate of user `k` on `stream`: `log2(1 + sinr)`.
pub fn user_stream_rate(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    user: usize,
    stream: &StreamKey,
) -> Result<f64, RateError> {
    Ok((1.0 + sinr(layout, precoders, channels, user, stream)?).log2())
}

/// Achievable rate of a stream: the minimum user rate over its subset, so
/// that every intended receiver can decode it.
pub fn stream_rate(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    stream: &StreamKey,
) -> Result<f64, RateError> {
    let users = stream.users();
    debug_assert!(!users.is_empty(), "stream keys are nonempty by construction");
    let mut rate = f64::INFINITY;
    for user in users {
        rate = rate.min(user_stream_rate(layout, precoders, channels, user, stream)?);
    }
    Ok(rate)
}

/// All per-stream rates in canonical order.
pub fn stream_rates(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
) -> Vec<(StreamKey, f64)> {
    layout
        .streams()
        .into_iter()
        .map(|key| {
            let r = stream_rate(layout, precoders, channels, &key).expect("layout stream");
            (key, r)
        })
        .collect()
}

/// Assemble the full rate outcome for a feasible common-rate split.
///
/// The split must allocate only to carrier users, be nonnegative, and sum to
/// at most each stream's achievable rate (boundary equality accepted).
pub fn total_rates(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    split: &CommonRateSplit,
    weights: &[f64],
) -> Result<RateOutcome, RateError> {
    let k = layout.num_users();
    let mut stream_rate_map = std::collections::BTreeMap::new();
    for (key, rate) in stream_rates(layout, precoders, channels) {
        stream_rate_map.insert(key, rate);
    }

    for key in layout.multiuser_streams() {
        let rate = stream_rate_map[&key];
        let carriers = layout.carriers(&key);
        for (user, &portion) in split
            .iter()
            .filter(|(s, _)| **s == key)
            .flat_map(|(_, m)| m.iter())
        {
            if portion < 0.0 {
                return Err(RateError::NegativePortion {
                    stream: key.to_string(),
                    user: *user,
                });
            }
            if portion > 0.0 && !carriers.contains(user) {
                return Err(RateError::NotACarrier {
                    stream: key.to_string(),
                    user: *user,
                });
            }
        }
        let allocated = split.stream_total(&key);
        if allocated > rate + 1e-9 {
            return Err(RateError::InfeasibleSplit {
                stream: key.to_string(),
                allocated,
                rate,
            });
        }
    }

    let mut private_rates = vec![0.0; k];
    for user in layout.users() {
        let key = StreamKey::singleton(user);
        if layout.contains_stream(&key) {
            private_rates[user - 1] = stream_rate_map[&key];
        }
    }

    let mut user_totals = vec![0.0; k];
    for user in layout.users() {
        user_totals[user - 1] = private_rates[user - 1] + split.user_total(user);
    }
    let wsr = user_totals
        .iter()
        .zip(weights)
        .map(|(r, w)| r * w)
        .sum();

    Ok(RateOutcome {
        stream_rates: stream_rate_map,
        private_rates,
        split: split.clone(),
        user_totals,
        weights: weights.to_vec(),
        wsr,
    })
}

/// WSR-greedy split: each multi-user stream's full rate goes to its
/// max-weight carrier (ties to the lowest user index).
pub fn greedy_split(
    layout: &StreamLayout,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    weights: &[f64],
) -> CommonRateSplit {
    let mut split = CommonRateSplit::empty();
    for key in layout.multiuser_streams() {
        let rate = stream_rate(layout, precoders, channels, &key).expect("layout stream");
        let best = layout
            .carriers(&key)
            .iter()
            .copied()
            .max_by(|a, b| {
                weights[a - 1]
                    .partial_cmp(&weights[b - 1])
                    .unwrap()
                    .then(b.cmp(a))
            })
            .expect("streams have at least one carrier");
        split.set(key, best, rate);
    }
    split
}
