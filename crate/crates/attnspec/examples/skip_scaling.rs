//! Skip-connection scaling at initialisation.
//!
//! With the conventional N(0, 1/d) value initialisation the attention branch
//! enters each residual sum a factor sqrt(d) weaker than the skip branch,
//! so layers barely transform the signal; N(0, 1) values keep the two
//! branches commensurate. Printed per layer: ||A X W||_F / ||X||_F.
//!
//!     cargo run --release --example skip_scaling

use attnspec::ensembles::orthonormal_input;
use attnspec::model::{forward, ModelConfig, ValueScaling};
use attnspec::rng::RngStream;

fn branch_ratios(scaling: ValueScaling) -> attnspec::Result<Vec<f64>> {
    let t = 250;
    let mut cfg = ModelConfig::new(t, t, 4, 31)?;
    cfg.skip = true;
    cfg.value_scaling = scaling;
    let mut rng = RngStream::new(cfg.seed, 0);
    let x0 = orthonormal_input(t, t, &mut rng)?;
    let trace = forward(&cfg, &x0)?;
    (1..=cfg.depth)
        .map(|l| {
            let branch = trace
                .attention(l)
                .matmul(trace.signal(l - 1))
                .matmul(trace.value(l));
            Ok(branch.frobenius_norm() / trace.signal(l - 1).frobenius_norm())
        })
        .collect()
}

fn main() -> attnspec::Result<()> {
    let unit = branch_ratios(ValueScaling::UnitVariance)?;
    let he = branch_ratios(ValueScaling::He)?;

    println!("attention-branch to skip-branch norm ratio per layer (T = d = 250):");
    println!(
        "{:>8} {:>16} {:>16}",
        "layer", "N(0,1) values", "N(0,1/d) values"
    );
    for (l, (u, h)) in unit.iter().zip(&he).enumerate() {
        println!("{:>8} {:>16.4} {:>16.4}", l + 1, u, h);
    }
    println!(
        "\nratio of the two columns is about sqrt(d) = {:.1}: He-scaled values\nreduce each layer to a near-identity update",
        (250f64).sqrt()
    );
    Ok(())
}
