//! Channel construction: deterministic steered ensembles, random Gaussian
//! ensembles and imperfect-CSIT error sampling.
//!
//! All randomness flows through ChaCha8 with one stream per (user,
//! realization) pair, so ensembles are reproducible across platforms and
//! independent of sampling order; parallel drivers can draw samples in any
//! order and obtain identical ensembles.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::model::{ChannelSet, CsitModel, ModelError};

/// Deterministic two-parameter channels: user 1 sees the all-ones vector and
/// user `k+1` sees `gamma_k * [1, e^{j theta_k}, ..., e^{j (Nt-1) theta_k}]^H`
/// (the conjugate transpose, so stored entries carry `e^{-j n theta}`).
///
/// `gamma` scales user strength (`gamma = 0.3` is the 5 dB-path-loss setting),
/// `theta` steers the angle between user channels: 0 aligned, pi/2 orthogonal
/// for the uniform phase ramp.
pub fn structured_channels(
    nt: usize,
    gammas: &[f64],
    thetas: &[f64],
) -> Result<ChannelSet, ModelError> {
    if !matches!(nt, 1 | 2 | 4) {
        return Err(ModelError::InvalidParameter(format!(
            "structured channels are defined for Nt in {{1, 2, 4}}, got {nt}"
        )));
    }
    if gammas.len() != thetas.len() {
        return Err(ModelError::ChannelLengthMismatch(gammas.len(), thetas.len()));
    }
    let mut channels = vec![vec![Complex64::new(1.0, 0.0); nt]];
    for (&gamma, &theta) in gammas.iter().zip(thetas) {
        let h: Vec<Complex64> = (0..nt)
            .map(|n| gamma * Complex64::from_polar(1.0, -(n as f64) * theta))
            .collect();
        channels.push(h);
    }
    ChannelSet::new(channels)
}

/// One complex Gaussian entry of total variance `sigma_sq` (re and im each
/// `N(0, sigma_sq / 2)`).
fn complex_gaussian(rng: &mut ChaCha8Rng, sigma_sq: f64) -> Complex64 {
    let scale = (sigma_sq / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// ChaCha8 stream dedicated to one (user, realization) pair.
fn user_stream(seed: u64, user: usize, realization: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream((realization << 20) | user as u64);
    rng
}

/// Random channels with i.i.d. `CN(0, sigma_k^2)` entries, realization 0.
pub fn random_channels(
    nt: usize,
    variances: &[f64],
    seed: u64,
) -> Result<ChannelSet, ModelError> {
    random_channel_realization(nt, variances, seed, 0)
}

/// Indexed realization of the same ensemble (for Monte Carlo sweeps).
pub fn random_channel_realization(
    nt: usize,
    variances: &[f64],
    seed: u64,
    realization: u64,
) -> Result<ChannelSet, ModelError> {
    if variances.is_empty() {
        return Err(ModelError::InvalidParameter("need at least one user".into()));
    }
    if variances.iter().any(|v| !(*v > 0.0)) {
        return Err(ModelError::InvalidParameter(
            "channel variances must be > 0".into(),
        ));
    }
    let channels = variances
        .iter()
        .enumerate()
        .map(|(i, &var)| {
            let mut rng = user_stream(seed, i + 1, realization);
            (0..nt).map(|_| complex_gaussian(&mut rng, var)).collect()
        })
        .collect();
    ChannelSet::new(channels)
}

/// Error standard deviation for the power-scaled CSIT model
/// `sigma_e^2 = scale * P_t^{-0.6}`.
pub fn csit_error_std(scale: f64, p_t: f64) -> f64 {
    (scale * p_t.powf(-0.6)).sqrt()
}

/// Draw the `model.samples` channel realizations `h_k = est_k + err_k` with
/// per-user error variance `error_std[k-1]^2`.
pub fn sample_csit_errors(model: &CsitModel) -> Vec<ChannelSet> {
    let nt = model.estimate.nt();
    let k = model.estimate.num_users();
    (0..model.samples as u64)
        .map(|m| {
            let channels = (1..=k)
                .map(|user| {
                    let sigma_sq = model.error_std[user - 1].powi(2);
                    let est = model.estimate.channel(user);
                    if sigma_sq == 0.0 {
                        return est.to_vec();
                    }
                    let mut rng = user_stream(model.seed, user, m);
                    (0..nt)
                        .map(|n| est[n] + complex_gaussian(&mut rng, sigma_sq))
                        .collect()
                })
                .collect();
            ChannelSet::new(channels).expect("estimate was valid")
        })
        .collect()
}
