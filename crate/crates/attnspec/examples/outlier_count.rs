//! Eigenvalue outliers of key-query attention across layers.
//!
//! At the first layer the attention matrix has a single outlier (the
//! stochastic eigenvalue at 1). Deeper key-query attention matrices are
//! content-dependent and can grow additional outliers, which single-outlier
//! gap removal does not address; this example counts them layer by layer.
//!
//!     cargo run --release --example outlier_count

use attnspec::ensembles::orthonormal_input;
use attnspec::model::{forward, AttentionKind, ModelConfig};
use attnspec::rng::RngStream;
use attnspec::spectrum::eigenvalues;

fn main() -> attnspec::Result<()> {
    let t = 100;
    let depth = 6;
    let threshold = 0.5;

    for remove_gap in [false, true] {
        let mut cfg = ModelConfig::new(t, t, depth, 23)?;
        cfg.attention = AttentionKind::KeyQuery;
        cfg.sigma_qk = 1.0;
        cfg.remove_gap = remove_gap;
        let mut rng = RngStream::new(cfg.seed, 0);
        let x0 = orthonormal_input(t, t, &mut rng)?;
        let trace = forward(&cfg, &x0)?;

        println!(
            "key-query attention, T = {t}, threshold {threshold}, gap removal {}:",
            if remove_gap { "on" } else { "off" }
        );
        for l in 1..=depth {
            let spectrum = eigenvalues(trace.attention(l))?;
            let eigs = spectrum.eigenvalues().expect("square");
            let outliers = eigs.iter().filter(|z| z.norm() > threshold).count();
            println!(
                "  layer {l}: {outliers} outliers, |lambda_1| = {:.4}, |lambda_2| = {:.4}",
                eigs[0].norm(),
                eigs[1].norm()
            );
        }
    }
    Ok(())
}
