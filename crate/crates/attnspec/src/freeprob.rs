//! Closed-form theoretical oracles: Fuss-Catalan numbers, moments of free
//! multiplicative convolutions of Marchenko-Pastur laws, the covariance and
//! Jacobian bulk predictions, and the quartercircle law.
//!
//! The moment formulas: for `M = MP(g_1, s_1) x ... x MP(g_n, s_n)` (free
//! multiplicative convolution, factor order as listed),
//!
//! ```text
//! E(Z)   = prod_i s_i^2
//! Var(Z) = (prod_i s_i^2)^2 * (g_1 + g_1 g_2 + ... + g_1 g_2 ... g_n)
//! ```
//!
//! The variance formula reads the factors in order; callers must pass them
//! in the order of the product being modelled, and this module never
//! reorders them.

use crate::error::{Error, Result};

/// Largest supported `l*k + k` for exact Fuss-Catalan evaluation.
pub const FUSS_CATALAN_MAX_N: u64 = 60;

/// Fuss-Catalan number `FC_l(k) = C(l k + k, k) / (l k + 1)` in exact
/// integer arithmetic.
pub fn fuss_catalan(ell: u64, k: u64) -> Result<u128> {
    if ell == 0 {
        return Err(Error::InvalidArgument(
            "fuss_catalan requires l >= 1".into(),
        ));
    }
    let n = ell * k + k;
    if n > FUSS_CATALAN_MAX_N {
        return Err(Error::Range(format!(
            "fuss_catalan supports l*k + k <= {FUSS_CATALAN_MAX_N}, got {n}"
        )));
    }
    let b = binomial(n as u128, k as u128);
    let denom = (ell * k + 1) as u128;
    debug_assert_eq!(b % denom, 0, "Fuss-Catalan numbers are integers");
    Ok(b / denom)
}

/// Exact binomial coefficient; every partial product is itself a binomial,
/// so the division is exact at each step.
fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc * (n - k + i) / i;
    }
    acc
}

/// One Marchenko-Pastur factor `MP(gamma, sigma)` with `gamma` in (0, 1].
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MPFactor {
    gamma: f64,
    sigma: f64,
}

impl MPFactor {
    /// Rejects `gamma` outside (0, 1]: the model enforces T <= d, and the
    /// atom adjustment needed for gamma > 1 is out of scope.
    pub fn new(gamma: f64, sigma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma must be in (0, 1], got {gamma}"
            )));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "sigma must be positive, got {sigma}"
            )));
        }
        Ok(Self { gamma, sigma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// Mean/variance prediction for a limiting spectral distribution.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MomentPrediction {
    pub mean: f64,
    pub variance: f64,
    /// Which closed form produced this prediction.
    pub context: String,
}

/// Mean and variance of the free multiplicative convolution of the given
/// Marchenko-Pastur factors, in the given order.
pub fn free_conv_moments(factors: &[MPFactor]) -> Result<MomentPrediction> {
    if factors.is_empty() {
        return Err(Error::InvalidArgument("need at least one MP factor".into()));
    }
    let mean: f64 = factors.iter().map(|f| f.sigma * f.sigma).product();
    let mut partial = 1.0;
    let mut gamma_sum = 0.0;
    for f in factors {
        partial *= f.gamma;
        gamma_sum += partial;
    }
    Ok(MomentPrediction {
        mean,
        variance: mean * mean * gamma_sum,
        context: format!("free convolution of {} MP factors", factors.len()),
    })
}

/// The factor list describing the squared singular values of the
/// gap-removed signal at layer `l`: `l` copies of `MP(1, sigma_a)`, one
/// `MP(gamma, sigma_v / sqrt(gamma))`, then `l - 1` more copies of
/// `MP(1, sigma_v / sqrt(gamma))`.
pub fn covariance_factors(
    ell: u32,
    sigma_a: f64,
    sigma_v: f64,
    gamma: f64,
) -> Result<Vec<MPFactor>> {
    if ell == 0 {
        return Err(Error::InvalidArgument("layer index must be >= 1".into()));
    }
    let sv = sigma_v / gamma.sqrt();
    let mut factors = Vec::with_capacity(2 * ell as usize);
    for _ in 0..ell {
        factors.push(MPFactor::new(1.0, sigma_a)?);
    }
    factors.push(MPFactor::new(gamma, sv)?);
    for _ in 0..ell - 1 {
        factors.push(MPFactor::new(1.0, sv)?);
    }
    Ok(factors)
}

/// Bulk of the covariance kernel's singular value distribution at layer `l`:
/// mean `(sigma_a sigma_v / sqrt(gamma))^(2l)`, variance
/// `l (1 + gamma) (sigma_a sigma_v / sqrt(gamma))^(4l)`.
pub fn covariance_prediction(
    ell: u32,
    sigma_a: f64,
    sigma_v: f64,
    gamma: f64,
) -> Result<MomentPrediction> {
    if ell == 0 {
        return Err(Error::InvalidArgument("layer index must be >= 1".into()));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be in (0, 1], got {gamma}"
        )));
    }
    if sigma_a <= 0.0 || sigma_v <= 0.0 {
        return Err(Error::InvalidArgument("sigmas must be positive".into()));
    }
    let base = sigma_a * sigma_v / gamma.sqrt();
    let mean = base.powi(2 * ell as i32);
    let variance = ell as f64 * (1.0 + gamma) * base.powi(4 * ell as i32);
    Ok(MomentPrediction {
        mean,
        variance,
        context: format!(
            "covariance bulk at layer {ell} (sigma_a={sigma_a}, sigma_v={sigma_v}, gamma={gamma})"
        ),
    })
}

/// k-th moment of the squared singular value distribution of the
/// gap-removed Jacobian at layer `l`:
/// `(sigma_a sigma_v)^(2 l k) * FC_l(k)^2`.
pub fn jacobian_moment(ell: u32, k: u32, sigma_a: f64, sigma_v: f64) -> Result<f64> {
    let fc = fuss_catalan(ell as u64, k as u64)? as f64;
    let base = sigma_a * sigma_v;
    Ok(base.powi((2 * ell * k) as i32) * fc * fc)
}

/// Bulk of the Jacobian's squared singular value distribution at layer `l`:
/// mean `(sigma_a sigma_v)^(2l)`, variance `l (l + 2) (sigma_a sigma_v)^(4l)`.
pub fn jacobian_prediction(ell: u32, sigma_a: f64, sigma_v: f64) -> Result<MomentPrediction> {
    if ell == 0 {
        return Err(Error::InvalidArgument("layer index must be >= 1".into()));
    }
    if sigma_a <= 0.0 || sigma_v <= 0.0 {
        return Err(Error::InvalidArgument("sigmas must be positive".into()));
    }
    let base = sigma_a * sigma_v;
    Ok(MomentPrediction {
        mean: base.powi(2 * ell as i32),
        variance: ell as f64 * (ell as f64 + 2.0) * base.powi(4 * ell as i32),
        context: format!("jacobian bulk at layer {ell} (sigma_a={sigma_a}, sigma_v={sigma_v})"),
    })
}

/// CDF of the quartercircle law on `[0, 2 sigma]` with density
/// `x -> sqrt(4 sigma^2 - x^2) / (pi sigma^2)`, via the arcsine
/// antiderivative, clamped to `[0, 1]`.
pub fn quartercircle_cdf(x: f64, sigma: f64) -> f64 {
    assert!(sigma > 0.0, "sigma must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    let edge = 2.0 * sigma;
    if x >= edge {
        return 1.0;
    }
    let s2 = sigma * sigma;
    let f = (x * (4.0 * s2 - x * x).sqrt() / 2.0 + 2.0 * s2 * (x / edge).asin())
        / (std::f64::consts::PI * s2);
    f.clamp(0.0, 1.0)
}

/// Density of the quartercircle law (0 outside `[0, 2 sigma]`).
pub fn quartercircle_pdf(x: f64, sigma: f64) -> f64 {
    assert!(sigma > 0.0, "sigma must be positive");
    if x < 0.0 || x > 2.0 * sigma {
        return 0.0;
    }
    (4.0 * sigma * sigma - x * x).sqrt() / (std::f64::consts::PI * sigma * sigma)
}

/// Inverse CDF by bisection on the monotone closed form.
pub fn quartercircle_quantile(p: f64, sigma: f64) -> f64 {
    assert!(sigma > 0.0, "sigma must be positive");
    assert!((0.0..=1.0).contains(&p), "p must be a probability");
    let (mut lo, mut hi) = (0.0, 2.0 * sigma);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if quartercircle_cdf(mid, sigma) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * sigma {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn fuss_catalan_examples() {
        for ell in 1..=6 {
            assert_eq!(fuss_catalan(ell, 0).unwrap(), 1, "FC_l(0) = 1");
        }
        assert_eq!(fuss_catalan(1, 3).unwrap(), 5);
        assert_eq!(fuss_catalan(2, 2).unwrap(), 3);
        assert!(matches!(fuss_catalan(0, 1), Err(Error::InvalidArgument(_))));
        assert!(matches!(fuss_catalan(30, 30), Err(Error::Range(_))));
    }

    #[test]
    fn fuss_catalan_matches_catalan_numbers() {
        // Catalan numbers via the recurrence C_{k+1} = C_k * 2(2k+1)/(k+2)
        let mut catalan: u128 = 1;
        for k in 0..=15u64 {
            assert_eq!(fuss_catalan(1, k).unwrap(), catalan, "k={k}");
            catalan = catalan * 2 * (2 * k as u128 + 1) / (k as u128 + 2);
        }
    }

    #[test]
    fn fuss_catalan_second_moment_identity() {
        // FC_l(2) = l + 1
        for ell in 1..=6u64 {
            assert_eq!(fuss_catalan(ell, 2).unwrap(), ell as u128 + 1);
        }
    }

    #[test]
    fn free_conv_single_factor() {
        let p = free_conv_moments(&[MPFactor::new(1.0, 1.0).unwrap()]).unwrap();
        assert!((p.mean - 1.0).abs() < 1e-15);
        assert!((p.variance - 1.0).abs() < 1e-15);

        // plain Marchenko-Pastur: mean sigma^2, variance gamma sigma^4
        let (gamma, sigma) = (0.4, 1.7);
        let p = free_conv_moments(&[MPFactor::new(gamma, sigma).unwrap()]).unwrap();
        assert!((p.mean - sigma * sigma).abs() < 1e-12);
        assert!((p.variance - gamma * sigma.powi(4)).abs() < 1e-12);

        assert!(free_conv_moments(&[]).is_err());
    }

    #[test]
    fn covariance_prediction_matches_free_convolution() {
        let mut rng = RngStream::new(123, 0);
        for _ in 0..100 {
            let ell = 1 + (rng.next_u64() % 5) as u32;
            let sigma_a = 0.5 + rng.uniform();
            let sigma_v = 0.5 + rng.uniform();
            let gamma = 0.05 + 0.95 * rng.uniform();
            let direct = covariance_prediction(ell, sigma_a, sigma_v, gamma).unwrap();
            let factors = covariance_factors(ell, sigma_a, sigma_v, gamma).unwrap();
            let conv = free_conv_moments(&factors).unwrap();
            assert!(
                (direct.mean - conv.mean).abs() <= 1e-10 * conv.mean.abs(),
                "mean {} vs {}",
                direct.mean,
                conv.mean
            );
            assert!(
                (direct.variance - conv.variance).abs() <= 1e-10 * conv.variance.abs(),
                "variance {} vs {}",
                direct.variance,
                conv.variance
            );
        }
    }

    // the variance formula reads the gamma sequence only, so permuting the
    // gamma = 1 factors among themselves (keeping the rectangular factor's
    // position fixed) changes neither moment
    #[test]
    fn variance_invariant_under_permuting_square_factors() {
        let (ell, sigma_a, sigma_v, gamma) = (3u32, 0.8, 1.3, 0.6);
        let factors = covariance_factors(ell, sigma_a, sigma_v, gamma).unwrap();
        let reference = free_conv_moments(&factors).unwrap();

        let mut swapped = factors.clone();
        swapped.swap(0, ell as usize + 1); // both have gamma = 1
        swapped.swap(1, 2);
        let moments = free_conv_moments(&swapped).unwrap();
        assert!((moments.mean - reference.mean).abs() < 1e-12 * reference.mean);
        assert!((moments.variance - reference.variance).abs() < 1e-12 * reference.variance);
        let expected_var = ell as f64 * (1.0 + gamma) * reference.mean * reference.mean;
        assert!((reference.variance - expected_var).abs() < 1e-12 * expected_var);
    }

    #[test]
    fn covariance_prediction_examples() {
        let p = covariance_prediction(1, 1.0, 1.0, 1.0).unwrap();
        assert!((p.mean - 1.0).abs() < 1e-15 && (p.variance - 2.0).abs() < 1e-15);
        let p = covariance_prediction(2, 1.0, 1.0, 1.0).unwrap();
        assert!((p.mean - 1.0).abs() < 1e-15 && (p.variance - 4.0).abs() < 1e-15);
    }

    #[test]
    fn jacobian_prediction_examples() {
        let p = jacobian_prediction(1, 1.0, 1.0).unwrap();
        assert!((p.mean - 1.0).abs() < 1e-15 && (p.variance - 3.0).abs() < 1e-15);
        let p = jacobian_prediction(2, 1.0, 1.0).unwrap();
        assert!((p.mean - 1.0).abs() < 1e-15 && (p.variance - 8.0).abs() < 1e-15);
    }

    // m2 - m1^2 must reproduce the stated variance through FC_l(2) = l + 1
    #[test]
    fn jacobian_variance_consistent_with_moments() {
        let mut rng = RngStream::new(9, 0);
        for ell in 1..=6u32 {
            let sigma_a = 0.6 + rng.uniform();
            let sigma_v = 0.6 + rng.uniform();
            let m1 = jacobian_moment(ell, 1, sigma_a, sigma_v).unwrap();
            let m2 = jacobian_moment(ell, 2, sigma_a, sigma_v).unwrap();
            let pred = jacobian_prediction(ell, sigma_a, sigma_v).unwrap();
            let var = m2 - m1 * m1;
            assert!(
                (var - pred.variance).abs() <= 1e-10 * pred.variance,
                "ell={ell}: {var} vs {}",
                pred.variance
            );
        }
    }

    #[test]
    fn quartercircle_cdf_support_and_closed_form_points() {
        assert_eq!(quartercircle_cdf(-1.0, 1.0), 0.0);
        assert_eq!(quartercircle_cdf(0.0, 1.0), 0.0);
        assert_eq!(quartercircle_cdf(2.0, 1.0), 1.0);
        assert_eq!(quartercircle_cdf(3.0, 1.0), 1.0);

        // x = sigma * sqrt(2): CDF = 1/2 + 1/pi
        for sigma in [1.0, 0.6, 2.5] {
            let v = quartercircle_cdf(sigma * (2.0f64).sqrt(), sigma);
            let expected = 0.5 + 1.0 / std::f64::consts::PI;
            assert!((v - expected).abs() < 1e-12, "sigma={sigma}: {v}");
        }
    }

    // frozen from the quantile root-find and confirmed by the quadrature
    // oracle below: F(0.80794) = 0.5 for sigma = 1
    #[test]
    fn quartercircle_median() {
        let med = quartercircle_quantile(0.5, 1.0);
        assert!((med - 0.80794).abs() < 1e-4, "median {med}");
        assert!((quartercircle_cdf(med, 1.0) - 0.5).abs() < 1e-9);
        assert!(
            (quartercircle_quantile(0.5, 2.5) - 2.5 * med).abs() < 1e-4,
            "scales with sigma"
        );
    }

    // Simpson quadrature of the density is the independent oracle for the
    // closed-form antiderivative.
    #[test]
    fn quartercircle_cdf_matches_quadrature() {
        let sigma = 1.3;
        let simpson = |a: f64, b: f64, n: usize| -> f64 {
            let h = (b - a) / n as f64;
            let mut acc = quartercircle_pdf(a, sigma) + quartercircle_pdf(b, sigma);
            for i in 1..n {
                let w = if i % 2 == 0 { 2.0 } else { 4.0 };
                acc += w * quartercircle_pdf(a + i as f64 * h, sigma);
            }
            acc * h / 3.0
        };
        for frac in [0.1, 0.25, 0.5, 0.75, 0.9, 0.999] {
            let x = 2.0 * sigma * frac;
            let by_quadrature = simpson(0.0, x, 4000);
            let closed = quartercircle_cdf(x, sigma);
            assert!(
                (by_quadrature - closed).abs() < 1e-6,
                "x={x}: quadrature {by_quadrature} vs closed {closed}"
            );
        }
    }

    #[test]
    fn quartercircle_cdf_nondecreasing_and_matches_density() {
        let sigma = 1.0;
        let n = 1000;
        let mut prev = 0.0;
        for i in 0..=n {
            let x = 2.0 * sigma * i as f64 / n as f64;
            let f = quartercircle_cdf(x, sigma);
            assert!(f >= prev - 1e-15, "CDF decreasing at {x}");
            prev = f;
            if i > 0 && i < n {
                let h = 1e-6;
                let deriv =
                    (quartercircle_cdf(x + h, sigma) - quartercircle_cdf(x - h, sigma)) / (2.0 * h);
                assert!(
                    (deriv - quartercircle_pdf(x, sigma)).abs() < 1e-6,
                    "derivative mismatch at {x}"
                );
            }
        }
    }
}
