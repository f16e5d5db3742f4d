//! Stochastic gradient norms where no closed form exists.
//!
//! The Hutchinson estimator (probe directions on the value matrix, central
//! finite differences through the forward pass) is validated against the
//! closed form on the pure product model, then applied to the skip and
//! LayerNorm variants.
//!
//!     cargo run --release --example hutchinson_gradients

use attnspec::ensembles::orthonormal_input;
use attnspec::model::{
    forward, gradient_frob_sq_closed_form, gradient_frob_sq_hutchinson, ModelConfig,
};
use attnspec::rng::RngStream;

fn main() -> attnspec::Result<()> {
    let t = 100;
    let probes = 64;
    let fd_eps = 1e-4;

    let cfg = ModelConfig::new(t, t, 2, 11)?;
    let mut rng = RngStream::new(cfg.seed, 0);
    let x0 = orthonormal_input(t, t, &mut rng)?;

    let trace = forward(&cfg, &x0)?;
    let exact = gradient_frob_sq_closed_form(&trace, 1)?;
    let est = gradient_frob_sq_hutchinson(&cfg, &x0, 1, probes, fd_eps)?;
    println!("pure product, L=2, T=d={t}:");
    println!("  closed form        {exact:.6e}");
    println!(
        "  hutchinson ({} probes) {:.6e} +- {:.2e}  (z = {:+.2})",
        probes,
        est.estimate,
        est.std_error,
        (est.estimate - exact) / est.std_error
    );

    for (label, skip, layernorm) in [
        ("skip", true, false),
        ("LayerNorm", false, true),
        ("skip + LayerNorm", true, true),
    ] {
        let mut variant = cfg.clone();
        variant.skip = skip;
        variant.layernorm = layernorm;
        let est = gradient_frob_sq_hutchinson(&variant, &x0, 1, probes, fd_eps)?;
        println!("\n{label}: no closed form;");
        println!(
            "  hutchinson ({} probes) {:.6e} +- {:.2e}",
            probes, est.estimate, est.std_error
        );
    }
    Ok(())
}
