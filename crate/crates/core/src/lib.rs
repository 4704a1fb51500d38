//! Downlink multi-antenna multiple-access optimization toolkit.
//!
//! A base station with `N_t` antennas serves `K` single-antenna users over
//! noise-normalized channels `y_k = h_k^H x + n_k`. The crate models SDMA
//! (MU-LP), NOMA (SC-SIC and SC-SIC per group), multicast and the family of
//! rate-splitting strategies (generalized, 1-layer, 2-layer hierarchical) as
//! instances of one stream layout abstraction, and maximizes weighted sum
//! rate under a transmit-power budget and per-user QoS constraints with the
//! WMMSE alternating algorithm. Imperfect CSIT is handled by sample-average
//! approximation over a Gaussian channel-error ensemble.
//!
//! Module map:
//! * [`model`]: stream keys/layouts, channels, precoders, rate bookkeeping,
//!   scenario configuration.
//! * [`channels`]: structured and random channel construction, CSIT error
//!   sampling.
//! * [`rates`]: the exact SINR/rate forward model shared by all strategies.
//! * [`wmmse`]: MSEs, MMSE equalizers/weights, the rate-WMMSE identity, and
//!   assembly of the convex precoder subproblem.
//! * [`problem`] / [`solver`]: conic standard form and interior-point solves.
//! * [`optimizer`]: precoder initialization, the AO loop, restarts and
//!   decoding-order/grouping enumeration.

pub mod channels;
pub mod linalg;
pub mod model;
pub mod optimizer;
pub mod problem;
pub mod rates;
pub mod solver;
pub mod wmmse;

pub use model::{
    ChannelSet, ChannelSpec, CommonRateSplit, CsitModel, CsitSpec, ModelError, OrderPolicy,
    PrecoderSet, RateOutcome, ScenarioConfig, StreamKey, StreamLayout, StrategyKind,
    layout_for_strategy,
};
pub use optimizer::{
    ao_maximize, ao_maximize_saa, best_over_orders, initialize_precoders, solve_scenario, AoRun,
    AoStatus, BestResult, OptError,
};
