use rsma_core::model::*;
use rsma_core::optimizer::*;
use rsma_core::channels::structured_channels;
use std::f64::consts::PI;

fn main() {
    let h = structured_channels(2, &[0.3], &[PI / 9.0]).unwrap();
    let weights = [1.0, 10f64.powf(0.6)];
    let p_t = 100.0;
    let opts = AoOptions { tol: 1e-7, max_iter: 4000, ..Default::default() };
    let rs = layout_for_strategy(StrategyKind::GeneralizedRs, 2, None, None).unwrap();
    for alpha in [0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.99] {
        let run = ao_maximize(&rs, &h, &weights, &[0.0; 2], p_t, initialize_precoders(&rs, &h, p_t, alpha), &opts).unwrap();
        println!("rs a={alpha}: wsr {:.6} ({} iters, {:?})", run.outcome.wsr, run.iterations, run.status);
    }
}
