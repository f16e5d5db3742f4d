//! The spectral gap of Random Markov matrices.
//!
//! Samples a row-stochastic random matrix at several sizes and prints the
//! two largest singular values: s1 stays near 1 while the rest of the
//! spectrum shrinks like 2 sigma_a / sqrt(T), so the gap ratio s1/s2 grows
//! like sqrt(T). The leading eigenvalue is exactly 1 (all-ones eigenvector).
//!
//!     cargo run --release --example spectral_gap

use attnspec::ensembles::sample_markov;
use attnspec::rng::RngStream;
use attnspec::spectra::summarize;

fn main() -> attnspec::Result<()> {
    let sigma_a = 1.0;
    println!(
        "{:>6} {:>10} {:>14} {:>12} {:>10}",
        "T", "s1", "sqrt(T)*s2", "gap s1/s2", "outliers"
    );
    for t in [125usize, 250, 500, 1000] {
        let mut rng = RngStream::new(7, 0);
        let a = sample_markov(t, sigma_a, &mut rng)?;
        let s = summarize(&a, 0.5)?;
        println!(
            "{:>6} {:>10.4} {:>14.4} {:>12.2} {:>10}",
            t,
            s.s1,
            (t as f64).sqrt() * s.s2,
            s.gap_ratio,
            s.eigen_outlier_count.unwrap(),
        );
    }
    println!(
        "\nlimits: s1 -> 1, sqrt(T) s2 -> 2 sigma_a = {}",
        2.0 * sigma_a
    );
    Ok(())
}
