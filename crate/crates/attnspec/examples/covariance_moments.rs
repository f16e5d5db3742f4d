//! Bulk moments of the gap-removed covariance kernel vs the
//! free-convolution prediction: mean (sigma_a sigma_v / sqrt(gamma))^(2l),
//! variance l (1 + gamma) (sigma_a sigma_v / sqrt(gamma))^(4l).
//!
//!     cargo run --release --example covariance_moments

use attnspec::ensembles::orthonormal_input;
use attnspec::freeprob::covariance_prediction;
use attnspec::model::{covariance, forward, ModelConfig};
use attnspec::rng::RngStream;
use attnspec::spectra::{empirical_moments, MomentMode, MomentReport};
use attnspec::spectrum::singular_values;

fn main() -> attnspec::Result<()> {
    let t = 500;
    let trials = 10;
    for ell in [1usize, 2, 3] {
        let mut mean_acc = 0.0;
        let mut var_acc = 0.0;
        for seed in 0..trials {
            let mut cfg = ModelConfig::new(t, t, ell, seed)?;
            cfg.remove_gap = true;
            let mut rng = RngStream::new(seed, 0);
            let x0 = orthonormal_input(t, t, &mut rng)?;
            let trace = forward(&cfg, &x0)?;
            let sigma = covariance(&trace, ell)?;
            let spectrum = singular_values(&sigma)?;
            let m = empirical_moments(&spectrum, 2, 1.0, MomentMode::PlainSingular)?;
            mean_acc += m[0];
            var_acc += m[1] - m[0] * m[0];
        }
        let prediction = covariance_prediction(ell as u32, 1.0, 1.0, 1.0)?;
        let report = MomentReport::new(
            mean_acc / trials as f64,
            var_acc / trials as f64,
            &prediction,
        );
        println!(
            "layer {ell}: mean {:.4} vs {:.1} (rel {:.3}), var {:.4} vs {:.1} (rel {:.3})",
            report.empirical_mean,
            report.predicted_mean,
            report.rel_err_mean,
            report.empirical_variance,
            report.predicted_variance,
            report.rel_err_variance
        );
    }
    Ok(())
}
