//! Slow statistical checks of the model's spectral behavior, complementing
//! the acceptance suite. Where a rate window in the acceptance suite fails
//! by construction, the test here pins the exponent the simulation actually
//! produces, with its analytic explanation.

use attnspec::ensembles::{key_query_attention, orthonormal_input, remove_gap, sample_markov};
use attnspec::exp::fit_loglog_slope;
use attnspec::model::{covariance, forward, ModelConfig};
use attnspec::rng::RngStream;
use attnspec::spectra::stable_rank;
use attnspec::spectrum::{eigenvalues, singular_values};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn orthonormal(t: usize, d: usize, seed: u64) -> attnspec::Matrix {
    let mut rng = RngStream::new(seed, 0);
    orthonormal_input(t, d, &mut rng).unwrap()
}

// s1(A_2 A_1 X_0 W_1 W_2) concentrates at d^{q/2} = d: |s1/d - 1| < 0.15 on
// at least 19 of 20 seeds at T = d = 500.
#[test]
fn product_top_singular_value_concentrates() {
    let t = 500;
    let mut hits = 0;
    for seed in 0..20u64 {
        let cfg = ModelConfig::new(t, t, 2, seed).unwrap();
        let x0 = orthonormal(t, t, seed);
        let trace = forward(&cfg, &x0).unwrap();
        let s1 = singular_values(trace.output()).unwrap().s1();
        if (s1 / t as f64 - 1.0).abs() < 0.15 {
            hits += 1;
        }
    }
    assert!(
        hits >= 19,
        "only {hits}/20 seeds inside the concentration window"
    );
}

// The stable rank of the layer-ell covariance collapses at the polynomial
// rate T^(1-2l): measured slopes sit near -1 (ell = 1) and -3 (ell = 2).
// The free-convolution moments explain the constant: at gamma = 1 the bulk
// of squared singular values of X_ell has second moment m2 = FC-structured,
// giving sr - 1 ~ m2 * T^(1-2l); at ell = 1, (sr - 1) * T converges to
// m2 = 3, which the last assertion pins.
#[test]
fn rank_collapse_width_measured_exponent_is_one_minus_two_ell() {
    let ts = [100usize, 200, 400, 800];
    let xs: Vec<f64> = ts.iter().map(|&t| t as f64).collect();
    for (ell, expected_slope) in [(1usize, -1.0f64), (2, -3.0)] {
        let means: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let srs: Vec<f64> = (0..10u64)
                    .map(|seed| {
                        let cfg = ModelConfig::new(t, t, ell, seed).unwrap();
                        let x0 = orthonormal(t, t, seed);
                        let trace = forward(&cfg, &x0).unwrap();
                        stable_rank(&covariance(&trace, ell).unwrap()).unwrap()
                    })
                    .collect();
                mean(&srs)
            })
            .collect();
        let ys: Vec<f64> = means.iter().map(|m| m - 1.0).collect();
        let fit = fit_loglog_slope(&xs, &ys).unwrap();
        assert!(
            (fit.slope - expected_slope).abs() < 0.5,
            "ell={ell}: slope {:.3}, expected about {expected_slope}",
            fit.slope
        );
        if ell == 1 {
            let constant = ys[3] * 800.0;
            assert!((2.0..4.5).contains(&constant), "(sr-1)*T = {constant:.2}");
        }
    }
}

// Products of per-layer gap-removed attention matrices decay at T^(-p/2):
// each factor has top singular value ~ 2 sigma_a / sqrt(T). Centering the
// product instead (product minus (1/T) ones) leaves the rank-one
// column-fluctuation term phi (phi^T E_1) of size ~ sigma_a / sqrt(T), so
// that variant decays at T^(-1/2) regardless of p; the acceptance suite
// records this. Both facts are pinned here.
#[test]
fn per_layer_centered_products_decay_at_half_p() {
    let ts = [100usize, 200, 400, 800];
    let xs: Vec<f64> = ts.iter().map(|&t| t as f64).collect();
    for p in [1usize, 2] {
        let mut per_layer = Vec::new();
        let mut literal = Vec::new();
        for &t in &ts {
            let mut pl = Vec::new();
            let mut lit = Vec::new();
            for seed in 0..5u64 {
                let factors: Vec<_> = (0..p)
                    .map(|l| {
                        let mut rng = RngStream::new(seed, 30 + l as u64);
                        sample_markov(t, 1.0, &mut rng).unwrap()
                    })
                    .collect();

                let mut perp_prod = remove_gap(&factors[0]).unwrap();
                let mut raw_prod = factors[0].clone();
                for a in &factors[1..] {
                    perp_prod = remove_gap(a).unwrap().matmul(&perp_prod);
                    raw_prod = a.matmul(&raw_prod);
                }
                pl.push(singular_values(&perp_prod).unwrap().s1());
                let centered = raw_prod.map(|v| v - 1.0 / t as f64);
                lit.push(singular_values(&centered).unwrap().s1());
            }
            per_layer.push(mean(&pl));
            literal.push(mean(&lit));
        }
        let fit = fit_loglog_slope(&xs, &per_layer).unwrap();
        let target = -(p as f64) / 2.0;
        assert!(
            (fit.slope - target).abs() <= 0.2,
            "p={p}: per-layer slope {:.3} vs {target}",
            fit.slope
        );

        let lit_fit = fit_loglog_slope(&xs, &literal).unwrap();
        if p == 1 {
            assert!(
                (lit_fit.slope - target).abs() <= 0.2,
                "p=1 variants coincide"
            );
        } else {
            // the rank-one remainder dominates: T^(-1/2), not T^(-p/2)
            assert!(
                (lit_fit.slope + 0.5).abs() <= 0.2,
                "p={p}: literal slope {:.3}, expected about -0.5",
                lit_fit.slope
            );
        }
    }
}

// Markov eigenvalue bulk: all non-leading eigenvalues inside 2.2 sigma_a /
// sqrt(T) at T = 1000.
#[test]
fn markov_eigenvalue_bulk_radius() {
    let t = 1000;
    for seed in 0..3u64 {
        let mut rng = RngStream::new(seed, 0);
        let a = sample_markov(t, 1.0, &mut rng).unwrap();
        let spectrum = eigenvalues(&a).unwrap();
        let eigs = spectrum.eigenvalues().unwrap();
        let bound = 2.2 / (t as f64).sqrt();
        for z in &eigs[1..] {
            assert!(z.norm() <= bound, "|lambda| = {} > {bound}", z.norm());
        }
    }
}

// Key-query attention at sigma_qk = 1: behaves like a Random Markov matrix,
// s1 near 1 and sqrt(T) s2 bounded by a constant across T (calibrated bound
// 4.0; measured values sit near 3.2).
#[test]
fn key_query_attention_has_markov_spectral_gap() {
    for t in [250usize, 500, 1000] {
        let mut s1s = Vec::new();
        let mut s2s = Vec::new();
        for seed in 0..5u64 {
            let x0 = orthonormal(t, t, seed);
            let mut att = RngStream::new(seed, 1);
            let a = key_query_attention(&x0, 1.0, t, &mut att).unwrap();
            let s = singular_values(&a).unwrap();
            s1s.push(s.s1());
            s2s.push((t as f64).sqrt() * s.s2());
        }
        let m1 = mean(&s1s);
        let m2 = mean(&s2s);
        assert!((0.9..1.05).contains(&m1), "T={t}: s1 = {m1:.4}");
        assert!(m2 < 4.0, "T={t}: sqrt(T) s2 = {m2:.4} not bounded");
    }
}

// Gradient growth in depth at fixed width: the T-exponent of grad^2 at
// layer 1 reaches at least L - 1.3 for each depth (it measures ~L at
// gamma = 1, where the value-product Frobenius norm contributes d^L).
#[test]
fn gradient_depth_exponent_dominates_l_minus_one() {
    use attnspec::model::gradient_frob_sq_closed_form;
    let t = 200usize;
    for depth in [2usize, 3, 4] {
        let grads: Vec<f64> = (0..5u64)
            .map(|seed| {
                let cfg = ModelConfig::new(t, t, depth, seed).unwrap();
                let x0 = orthonormal(t, t, seed);
                let trace = forward(&cfg, &x0).unwrap();
                gradient_frob_sq_closed_form(&trace, 1).unwrap()
            })
            .collect();
        let exponent = mean(&grads).ln() / (t as f64).ln();
        assert!(
            exponent >= depth as f64 - 1.0 - 0.3,
            "L={depth}: exponent {exponent:.2}"
        );
    }
}

// Skip connections with He-scaled values down-weight the attention branch by
// about sqrt(d) relative to unit-variance scaling.
#[test]
fn he_scaling_suppresses_attention_branch() {
    use attnspec::model::ValueScaling;
    let t = 200;
    let ratio_for = |scaling: ValueScaling| -> f64 {
        let mut cfg = ModelConfig::new(t, t, 1, 5).unwrap();
        cfg.skip = true;
        cfg.value_scaling = scaling;
        let x0 = orthonormal(t, t, 5);
        let trace = forward(&cfg, &x0).unwrap();
        let branch = trace
            .attention(1)
            .matmul(trace.signal(0))
            .matmul(trace.value(1));
        branch.frobenius_norm() / trace.signal(0).frobenius_norm()
    };
    let unit = ratio_for(ValueScaling::UnitVariance);
    let he = ratio_for(ValueScaling::He);
    let suppression = unit / he;
    let sqrt_d = (t as f64).sqrt();
    assert!(
        (suppression / sqrt_d - 1.0).abs() < 0.2,
        "suppression {suppression:.2} vs sqrt(d) = {sqrt_d:.2}"
    );
}
