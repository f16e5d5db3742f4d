//! Rank collapse in depth across architecture variants.
//!
//! Tracks the stable rank of the token covariance layer by layer for random
//! Markov attention with and without gap removal, identity attention, and
//! the skip / LayerNorm variants. Collapse in depth is inherent to repeated
//! multiplication; the fix (and only the fix) slows it at every depth.
//!
//!     cargo run --release --example rank_collapse_depth

use attnspec::ensembles::orthonormal_input;
use attnspec::model::{covariance, forward, AttentionKind, ModelConfig};
use attnspec::rng::RngStream;
use attnspec::spectra::stable_rank;

fn profile(label: &str, mut cfg: ModelConfig) -> attnspec::Result<()> {
    cfg.depth = 6;
    let mut rng = RngStream::new(cfg.seed, 0);
    let x0 = orthonormal_input(cfg.t, cfg.d, &mut rng)?;
    let trace = forward(&cfg, &x0)?;
    print!("{label:<24}");
    for l in 1..=cfg.depth {
        let sr = stable_rank(&covariance(&trace, l)?)?;
        print!(" {sr:>8.2}");
    }
    println!();
    Ok(())
}

fn main() -> attnspec::Result<()> {
    let t = 256;
    let seed = 17;

    print!("{:<24}", "variant \\ layer");
    for l in 1..=6 {
        print!(" {l:>8}");
    }
    println!();

    let base = ModelConfig::new(t, t, 1, seed)?;

    profile("markov", base.clone())?;

    let mut fixed = base.clone();
    fixed.remove_gap = true;
    profile("markov + fix", fixed)?;

    let mut identity = base.clone();
    identity.attention = AttentionKind::Identity;
    profile("identity attention", identity)?;

    let mut skip = base.clone();
    skip.skip = true;
    profile("markov + skip", skip)?;

    let mut skip_fix = base.clone();
    skip_fix.skip = true;
    skip_fix.remove_gap = true;
    profile("markov + skip + fix", skip_fix)?;

    let mut ln = base.clone();
    ln.layernorm = true;
    profile("markov + LN", ln)?;

    let mut ln_fix = base.clone();
    ln_fix.layernorm = true;
    ln_fix.remove_gap = true;
    profile("markov + LN + fix", ln_fix)?;

    println!("\n(stable rank of the token covariance at T = {t}; input rank {t})");
    Ok(())
}
