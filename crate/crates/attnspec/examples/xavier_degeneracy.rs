//! Xavier-scaled key-query attention degenerates to uniform attention.
//!
//! With orthonormal inputs and sigma_qk^2 = 1/d_qk the logits vanish as the
//! width grows, so softmax returns rows that are uniform up to O(1/d):
//! max |T A - 1| shrinks with d. With sigma_qk = 1 the attention matrix
//! stays a genuine Random Markov matrix instead.
//!
//!     cargo run --release --example xavier_degeneracy

use attnspec::ensembles::{key_query_attention, orthonormal_input};
use attnspec::rng::RngStream;
use attnspec::spectra::summarize;

fn main() -> attnspec::Result<()> {
    println!(
        "{:>6} {:>18} {:>14} {:>16}",
        "d", "max|T A - 1|", "s1", "sqrt(T)*s2"
    );
    for d in [125usize, 250, 500] {
        let mut rng = RngStream::new(3, 0);
        let x0 = orthonormal_input(d, d, &mut rng)?;
        let mut att = RngStream::new(3, 1);
        let xavier = key_query_attention(&x0, (1.0 / d as f64).sqrt(), d, &mut att)?;
        let dev = xavier.map(|v| d as f64 * v - 1.0).max_abs();
        let s = summarize(&xavier, 0.5)?;
        println!(
            "{:>6} {:>18.5} {:>14.4} {:>16.4}",
            d,
            dev,
            s.s1,
            (d as f64).sqrt() * s.s2
        );
    }

    println!("\nsame sizes with sigma_qk = 1 (no degeneracy):");
    println!(
        "{:>6} {:>18} {:>14} {:>16}",
        "d", "max|T A - 1|", "s1", "sqrt(T)*s2"
    );
    for d in [125usize, 250, 500] {
        let mut rng = RngStream::new(3, 0);
        let x0 = orthonormal_input(d, d, &mut rng)?;
        let mut att = RngStream::new(3, 1);
        let markov_like = key_query_attention(&x0, 1.0, d, &mut att)?;
        let dev = markov_like.map(|v| d as f64 * v - 1.0).max_abs();
        let s = summarize(&markov_like, 0.5)?;
        println!(
            "{:>6} {:>18.5} {:>14.4} {:>16.4}",
            d,
            dev,
            s.s1,
            (d as f64).sqrt() * s.s2
        );
    }
    Ok(())
}
