//! Moments of the input-output Jacobian's squared singular values.
//!
//! The Jacobian of the gap-removed product model is the Kronecker product of
//! the attention-side and value-side products; its k-th squared singular
//! value moment factorizes into normalised trace powers of the two sides and
//! is predicted by (sigma_a sigma_v)^(2lk) FC_l(k)^2 with FC the
//! Fuss-Catalan numbers.
//!
//!     cargo run --release --example jacobian_moments

use attnspec::ensembles::orthonormal_input;
use attnspec::freeprob::{fuss_catalan, jacobian_moment, jacobian_prediction};
use attnspec::model::{forward, ModelConfig};
use attnspec::rng::RngStream;
use attnspec::spectra::jacobian_moment_estimate;

fn main() -> attnspec::Result<()> {
    println!("Fuss-Catalan numbers FC_l(k):");
    print!("{:>4}", "l\\k");
    for k in 0..=5u64 {
        print!("{k:>8}");
    }
    println!();
    for ell in 1..=4u64 {
        print!("{ell:>4}");
        for k in 0..=5 {
            print!("{:>8}", fuss_catalan(ell, k)?);
        }
        println!();
    }

    let t = 500;
    let trials = 5;
    println!(
        "\nempirical vs predicted moments at T = d = {t} ({} seeds):",
        trials
    );
    for ell in [1usize, 2] {
        for k in [1u32, 2] {
            let mut acc = 0.0;
            for seed in 0..trials {
                let mut cfg = ModelConfig::new(t, t, ell, seed)?;
                cfg.remove_gap = true;
                let mut rng = RngStream::new(seed, 0);
                let x0 = orthonormal_input(t, t, &mut rng)?;
                let trace = forward(&cfg, &x0)?;
                let mut a_prod = trace.attention(1).clone();
                let mut w_prod = trace.value(1).clone();
                for l in 2..=ell {
                    a_prod = trace.attention(l).matmul(&a_prod);
                    w_prod = w_prod.matmul(trace.value(l));
                }
                acc += jacobian_moment_estimate(&a_prod, &w_prod, k)?;
            }
            let est = acc / trials as f64;
            let predicted = jacobian_moment(ell as u32, k, 1.0, 1.0)?;
            println!(
                "  l = {ell}, k = {k}: {est:>8.4} vs {predicted} (rel {:.3})",
                (est - predicted).abs() / predicted
            );
        }
        let p = jacobian_prediction(ell as u32, 1.0, 1.0)?;
        println!(
            "  l = {ell} prediction: mean {}, variance {}",
            p.mean, p.variance
        );
    }
    Ok(())
}
