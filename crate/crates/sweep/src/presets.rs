//! Named scenario bundles: two-user rate regions (structured, random and
//! imperfect-CSIT), three-user underloaded/overloaded curves, the SISO
//! comparison, the grouped four-user deployment and the ten-user overload.

use std::f64::consts::PI;

use rsma_core::model::{
    ChannelSpec, CsitSpec, OrderPolicy, ScenarioConfig, StrategyKind,
};

use crate::sweep::{
    coarse_weight_exponents, default_weight_exponents, CurveJob, JobSpec, RegionJob, SweepError,
};

const THETAS: [f64; 4] = [PI / 9.0, 2.0 * PI / 9.0, PI / 3.0, 4.0 * PI / 9.0];
const SNR_GRID: [f64; 7] = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0];
const OVERLOADED_THRESHOLDS: [f64; 7] = [0.02, 0.08, 0.19, 0.3, 0.4, 0.4, 0.4];
const FOURUSER_THRESHOLDS: [f64; 7] = [0.03, 0.1, 0.2, 0.3, 0.4, 0.4, 0.4];
const SISO_THRESHOLDS: [f64; 7] = [0.0, 0.0, 0.01, 0.03, 0.1, 0.2, 0.3];
const TENUSER_THRESHOLDS: [f64; 7] = [0.01, 0.03, 0.05, 0.1, 0.1, 0.1, 0.1];
const TENUSER_LOW_THRESHOLDS: [f64; 7] = [0.0, 0.001, 0.004, 0.01, 0.03, 0.06, 0.1];

/// Strategies compared in the two-user regions. Generalized RS with two
/// users is the single-common-stream split.
const TWOUSER_STRATEGIES: [StrategyKind; 3] = [
    StrategyKind::GeneralizedRs,
    StrategyKind::ScSic,
    StrategyKind::MuLp,
];

pub struct PresetInfo {
    pub name: &'static str,
    pub summary: &'static str,
}

pub const PRESETS: &[PresetInfo] = &[
    PresetInfo { name: "fig3-random", summary: "two-user regions, random channels var (1, 1), Nt=4, SNR 10/20 dB, 100-channel average" },
    PresetInfo { name: "fig4-random", summary: "two-user regions, random channels var (1, 0.09), Nt=2, SNR 10/20 dB, 100-channel average" },
    PresetInfo { name: "fig5", summary: "two-user regions, gamma=1, Nt=4, SNR=20 dB, theta sweep" },
    PresetInfo { name: "fig6", summary: "two-user regions, gamma=0.3, Nt=4, SNR=20 dB, theta sweep" },
    PresetInfo { name: "twouser-structured", summary: "full structured grid: gamma {1, 0.3} x theta x Nt {2, 4} x SNR {10, 20} dB" },
    PresetInfo { name: "fig7-imperfect", summary: "two-user average-rate regions, gamma=1, Nt=4, SNR=20 dB, CSIT error Pt^-0.6, coarse weight grid" },
    PresetInfo { name: "fig8-imperfect", summary: "two-user average-rate regions, gamma=0.3, Nt=4, SNR=20 dB, CSIT error scaled by gamma, coarse weight grid" },
    PresetInfo { name: "fig9-threeuser", summary: "three-user WSR vs SNR, weights (0.2, 0.3, 0.5), gamma (1, 0.3), Nt=4, no QoS" },
    PresetInfo { name: "fig10-threeuser", summary: "three-user WSR vs SNR, weights (0.4, 0.3, 0.3), gamma (1, 0.3), Nt=4, no QoS" },
    PresetInfo { name: "threeuser-underloaded", summary: "three-user WSR grid: three weight vectors x gamma pairs (1,1) (1,0.3) (0.3,0.1), Nt=4" },
    PresetInfo { name: "threeuser-ordering", summary: "SC-SIC with each of the six decoding orders, weights (0.2, 0.3, 0.5), gamma (1, 0.3)" },
    PresetInfo { name: "threeuser-overloaded", summary: "three-user WSR vs SNR, Nt=2, rising QoS schedule, includes SC-SIC per group" },
    PresetInfo { name: "fig13-siso", summary: "three-user SISO WSR vs SNR, var (1, 0.3, 0.1), 10-channel average, 1-layer RS vs SC-SIC" },
    PresetInfo { name: "fouruser-hrs", summary: "four-user overloaded WSR vs SNR, Nt=2, groups {1,2} {3,4}, inter-group angle pi/9" },
    PresetInfo { name: "fouruser-hrs-wide", summary: "four-user overloaded WSR vs SNR, inter-group angle pi/3" },
    PresetInfo { name: "fig15-tenuser", summary: "ten-user WSR vs SNR, Nt=2, equal variances, QoS schedule, ascending-gain SC-SIC" },
    PresetInfo { name: "tenuser-low-threshold", summary: "ten-user WSR vs SNR with the relaxed QoS schedule" },
    PresetInfo { name: "tenuser-descending", summary: "ten-user WSR vs SNR, variances 1.0 down to 0.1, relaxed QoS schedule" },
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|p| p.name).collect()
}

fn structured_two_user(nt: usize, gamma: f64, theta: f64, snr_db: f64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(StrategyKind::GeneralizedRs, nt, 2, snr_db);
    c.channel = ChannelSpec::Structured {
        gammas: vec![gamma],
        thetas: vec![theta],
    };
    c
}

fn structured_region(label: String, nt: usize, gamma: f64, theta: f64, snr_db: f64) -> JobSpec {
    JobSpec::Region(RegionJob {
        label,
        base: structured_two_user(nt, gamma, theta, snr_db),
        strategies: TWOUSER_STRATEGIES.to_vec(),
        weight_exponents: default_weight_exponents(),
        mc_channels: 1,
    })
}

fn theta_label(theta: f64) -> String {
    format!("theta{:.0}", theta.to_degrees().round())
}

fn random_region(label: String, nt: usize, variances: Vec<f64>, snr_db: f64, seed: u64) -> JobSpec {
    let mut base = ScenarioConfig::new(StrategyKind::GeneralizedRs, nt, 2, snr_db);
    base.channel = ChannelSpec::Random { variances, seed };
    JobSpec::Region(RegionJob {
        label,
        base,
        strategies: TWOUSER_STRATEGIES.to_vec(),
        weight_exponents: default_weight_exponents(),
        mc_channels: 100,
    })
}

fn imperfect_region(label: String, gamma: f64, theta: f64) -> JobSpec {
    let mut base = structured_two_user(4, gamma, theta, 20.0);
    base.csit = Some(CsitSpec {
        error_scales: vec![1.0, gamma],
        m_opt: 100,
        m_eval: 1000,
        seed: 7,
    });
    JobSpec::Region(RegionJob {
        label,
        base,
        strategies: TWOUSER_STRATEGIES.to_vec(),
        weight_exponents: coarse_weight_exponents(),
        mc_channels: 1,
    })
}

fn three_user_base(nt: usize, gammas: (f64, f64), theta1: f64, weights: Vec<f64>) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(StrategyKind::GeneralizedRs, nt, 3, 20.0);
    c.channel = ChannelSpec::Structured {
        gammas: vec![gammas.0, gammas.1],
        thetas: vec![theta1, 2.0 * theta1],
    };
    c.weights = weights;
    c
}

fn three_user_curve(
    label: String,
    nt: usize,
    gammas: (f64, f64),
    theta1: f64,
    weights: Vec<f64>,
    strategies: Vec<StrategyKind>,
    schedule: Vec<f64>,
) -> JobSpec {
    let mut base = three_user_base(nt, gammas, theta1, weights);
    if strategies.contains(&StrategyKind::ScSicPerGroup) {
        base.grouping = Some(vec![vec![1], vec![2, 3]]);
    }
    JobSpec::Curve(CurveJob {
        label,
        base,
        strategies,
        snr_db: SNR_GRID.to_vec(),
        threshold_schedule: schedule,
        mc_channels: 1,
    })
}

fn ten_user_curve(label: String, variances: Vec<f64>, schedule: Vec<f64>) -> JobSpec {
    let mut base = ScenarioConfig::new(StrategyKind::OneLayerRs, 2, 10, 30.0);
    base.channel = ChannelSpec::Random {
        variances,
        seed: 15,
    };
    base.order_policy = OrderPolicy::AscendingGain;
    JobSpec::Curve(CurveJob {
        label,
        base,
        strategies: vec![
            StrategyKind::OneLayerRs,
            StrategyKind::ScSic,
            StrategyKind::MuLp,
            StrategyKind::Multicast,
        ],
        snr_db: SNR_GRID.to_vec(),
        threshold_schedule: schedule,
        mc_channels: 10,
    })
}

/// Build the jobs of a named preset. Unknown names report the full list.
pub fn build(name: &str) -> Result<Vec<JobSpec>, SweepError> {
    let jobs = match name {
        "fig3-random" => vec![
            random_region("fig3-snr10".into(), 4, vec![1.0, 1.0], 10.0, 3),
            random_region("fig3-snr20".into(), 4, vec![1.0, 1.0], 20.0, 3),
        ],
        "fig4-random" => vec![
            random_region("fig4-snr10".into(), 2, vec![1.0, 0.09], 10.0, 4),
            random_region("fig4-snr20".into(), 2, vec![1.0, 0.09], 20.0, 4),
        ],
        "fig5" => THETAS
            .iter()
            .map(|&t| structured_region(format!("fig5-{}", theta_label(t)), 4, 1.0, t, 20.0))
            .collect(),
        "fig6" => THETAS
            .iter()
            .map(|&t| structured_region(format!("fig6-{}", theta_label(t)), 4, 0.3, t, 20.0))
            .collect(),
        "twouser-structured" => {
            let mut jobs = Vec::new();
            for &nt in &[2usize, 4] {
                for &gamma in &[1.0, 0.3] {
                    for &snr in &[10.0, 20.0] {
                        for &t in &THETAS {
                            jobs.push(structured_region(
                                format!(
                                    "twouser-nt{nt}-g{:02}-snr{snr:.0}-{}",
                                    (gamma * 10.0) as u32,
                                    theta_label(t)
                                ),
                                nt,
                                gamma,
                                t,
                                snr,
                            ));
                        }
                    }
                }
            }
            jobs
        }
        "fig7-imperfect" => THETAS
            .iter()
            .map(|&t| imperfect_region(format!("fig7-{}", theta_label(t)), 1.0, t))
            .collect(),
        "fig8-imperfect" => THETAS
            .iter()
            .map(|&t| imperfect_region(format!("fig8-{}", theta_label(t)), 0.3, t))
            .collect(),
        "fig9-threeuser" => THETAS
            .iter()
            .map(|&t| {
                three_user_curve(
                    format!("fig9-{}", theta_label(t)),
                    4,
                    (1.0, 0.3),
                    t,
                    vec![0.2, 0.3, 0.5],
                    vec![
                        StrategyKind::GeneralizedRs,
                        StrategyKind::OneLayerRs,
                        StrategyKind::ScSic,
                        StrategyKind::MuLp,
                    ],
                    Vec::new(),
                )
            })
            .collect(),
        "fig10-threeuser" => THETAS
            .iter()
            .map(|&t| {
                three_user_curve(
                    format!("fig10-{}", theta_label(t)),
                    4,
                    (1.0, 0.3),
                    t,
                    vec![0.4, 0.3, 0.3],
                    vec![
                        StrategyKind::GeneralizedRs,
                        StrategyKind::OneLayerRs,
                        StrategyKind::ScSic,
                        StrategyKind::MuLp,
                    ],
                    Vec::new(),
                )
            })
            .collect(),
        "threeuser-underloaded" => {
            let mut jobs = Vec::new();
            for (wi, weights) in [
                vec![0.2, 0.3, 0.5],
                vec![0.4, 0.3, 0.3],
                vec![0.6, 0.3, 0.1],
            ]
            .into_iter()
            .enumerate()
            {
                for (gi, gammas) in [(1.0, 1.0), (1.0, 0.3), (0.3, 0.1)].into_iter().enumerate() {
                    for &t in &THETAS {
                        jobs.push(three_user_curve(
                            format!("threeuser-w{wi}-g{gi}-{}", theta_label(t)),
                            4,
                            gammas,
                            t,
                            weights.clone(),
                            vec![
                                StrategyKind::GeneralizedRs,
                                StrategyKind::OneLayerRs,
                                StrategyKind::ScSic,
                                StrategyKind::MuLp,
                            ],
                            Vec::new(),
                        ));
                    }
                }
            }
            jobs
        }
        "threeuser-ordering" => {
            let orders: [[usize; 3]; 6] = [
                [1, 2, 3],
                [2, 1, 3],
                [1, 3, 2],
                [3, 1, 2],
                [2, 3, 1],
                [3, 2, 1],
            ];
            orders
                .iter()
                .enumerate()
                .map(|(i, order)| {
                    let mut base =
                        three_user_base(4, (1.0, 0.3), PI / 9.0, vec![0.2, 0.3, 0.5]);
                    base.strategy = StrategyKind::ScSic;
                    base.order = Some(order.to_vec());
                    base.order_policy = OrderPolicy::Fixed;
                    JobSpec::Curve(CurveJob {
                        label: format!("scsic-order{}", i + 1),
                        base,
                        strategies: vec![StrategyKind::ScSic],
                        snr_db: SNR_GRID.to_vec(),
                        threshold_schedule: Vec::new(),
                        mc_channels: 1,
                    })
                })
                .collect()
        }
        "threeuser-overloaded" => THETAS
            .iter()
            .map(|&t| {
                three_user_curve(
                    format!("overloaded-{}", theta_label(t)),
                    2,
                    (1.0, 0.3),
                    t,
                    vec![0.4, 0.3, 0.3],
                    vec![
                        StrategyKind::GeneralizedRs,
                        StrategyKind::OneLayerRs,
                        StrategyKind::ScSic,
                        StrategyKind::ScSicPerGroup,
                        StrategyKind::MuLp,
                    ],
                    OVERLOADED_THRESHOLDS.to_vec(),
                )
            })
            .collect(),
        "fig13-siso" => {
            let mut base = ScenarioConfig::new(StrategyKind::OneLayerRs, 1, 3, 30.0);
            base.channel = ChannelSpec::Random {
                variances: vec![1.0, 0.3, 0.1],
                seed: 13,
            };
            vec![JobSpec::Curve(CurveJob {
                label: "fig13-siso".into(),
                base,
                strategies: vec![StrategyKind::OneLayerRs, StrategyKind::ScSic],
                snr_db: SNR_GRID.to_vec(),
                threshold_schedule: SISO_THRESHOLDS.to_vec(),
                mc_channels: 10,
            })]
        }
        "fouruser-hrs" | "fouruser-hrs-wide" => {
            let inter = if name == "fouruser-hrs" { PI / 9.0 } else { PI / 3.0 };
            [0.0, PI / 18.0, PI / 9.0, PI / 6.0]
                .iter()
                .map(|&t1| {
                    let t2 = t1 + inter;
                    let t3 = t1 + t2;
                    let mut base = ScenarioConfig::new(StrategyKind::TwoLayerHrs, 2, 4, 20.0);
                    base.channel = ChannelSpec::Structured {
                        gammas: vec![0.3, 1.0, 0.3],
                        thetas: vec![t1, t2, t3],
                    };
                    base.weights = vec![0.25; 4];
                    base.grouping = Some(vec![vec![1, 2], vec![3, 4]]);
                    JobSpec::Curve(CurveJob {
                        label: format!("fouruser-{}", theta_label(t1)),
                        base,
                        strategies: vec![
                            StrategyKind::TwoLayerHrs,
                            StrategyKind::OneLayerRs,
                            StrategyKind::ScSicPerGroup,
                            StrategyKind::MuLp,
                        ],
                        snr_db: SNR_GRID.to_vec(),
                        threshold_schedule: FOURUSER_THRESHOLDS.to_vec(),
                        mc_channels: 1,
                    })
                })
                .collect()
        }
        "fig15-tenuser" => vec![ten_user_curve(
            "fig15-tenuser".into(),
            vec![1.0; 10],
            TENUSER_THRESHOLDS.to_vec(),
        )],
        "tenuser-low-threshold" => vec![ten_user_curve(
            "tenuser-low".into(),
            vec![1.0; 10],
            TENUSER_LOW_THRESHOLDS.to_vec(),
        )],
        "tenuser-descending" => vec![ten_user_curve(
            "tenuser-descending".into(),
            (0..10).map(|i| 1.0 - 0.1 * i as f64).collect(),
            TENUSER_LOW_THRESHOLDS.to_vec(),
        )],
        other => {
            return Err(SweepError::Setup(format!(
                "unknown preset `{other}`; available presets: {}",
                preset_names().join(", ")
            )))
        }
    };
    Ok(jobs)
}
