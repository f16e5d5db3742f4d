//! Derived spectral statistics: stable rank, spectral-gap summaries,
//! eigenvalue outlier counts, empirical moments and distribution distances.

use crate::error::{Error, Result};
use crate::freeprob::{quartercircle_cdf, MomentPrediction};
use crate::matrix::Matrix;
use crate::spectrum::{eigenvalues, singular_values, trace_power, Spectrum};

/// One-stop spectral summary of a matrix.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SpectralSummary {
    pub s1: f64,
    pub s2: f64,
    /// `s1 / s2`, infinite when s2 = 0.
    pub gap_ratio: f64,
    /// `||M||_F^2 / s1^2`, in `[1, min(rows, cols)]`.
    pub stable_rank: f64,
    /// Number of eigenvalues with modulus above the threshold; square
    /// matrices only.
    pub eigen_outlier_count: Option<usize>,
    /// Full singular value spectrum, descending.
    pub singular_values: Vec<f64>,
}

/// Stable rank `sr(M) = ||M||_F^2 / ||M||^2 = sum_i s_i^2 / s_1^2`.
pub fn stable_rank(m: &Matrix) -> Result<f64> {
    if m.is_zero() {
        return Err(Error::UndefinedInput(
            "stable rank of the zero matrix".into(),
        ));
    }
    let s = singular_values(m)?;
    Ok(s.sum_sq() / (s.s1() * s.s1()))
}

/// Compute every field of [`SpectralSummary`]. Eigenvalue outliers are
/// counted for square inputs only; `outlier_threshold` must be positive.
pub fn summarize(m: &Matrix, outlier_threshold: f64) -> Result<SpectralSummary> {
    if outlier_threshold <= 0.0 {
        return Err(Error::InvalidArgument(
            "outlier threshold must be positive".into(),
        ));
    }
    let (spectrum, outliers) = if m.is_square() {
        let sp = eigenvalues(m)?;
        let count = sp
            .eigenvalues()
            .expect("square input")
            .iter()
            .filter(|z| z.norm() > outlier_threshold)
            .count();
        (sp, Some(count))
    } else {
        (singular_values(m)?, None)
    };
    let s1 = spectrum.s1();
    let s2 = spectrum.s2();
    let sum_sq = spectrum.sum_sq();
    // rank tolerance: singular values below max(m, n) * eps * s1 are noise
    // from the factorization, so an exactly rank-one matrix reports an
    // infinite gap
    let tol = m.rows().max(m.cols()) as f64 * f64::EPSILON * s1;
    Ok(SpectralSummary {
        s1,
        s2,
        gap_ratio: if s2 <= tol { f64::INFINITY } else { s1 / s2 },
        stable_rank: if s1 == 0.0 {
            f64::NAN
        } else {
            sum_sq / (s1 * s1)
        },
        eigen_outlier_count: outliers,
        singular_values: spectrum.singular_values().to_vec(),
    })
}

/// Whether [`empirical_moments`] averages powers of the singular values or
/// of their squares. The switch is explicit because covariance checks use
/// plain singular values of `Sigma` while Jacobian checks use squared
/// singular values of the operator; silent inference invites unit errors.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentMode {
    /// `(1/n) sum_i (rescale * s_i)^(2k)`
    SquaredSingular,
    /// `(1/n) sum_i (rescale * s_i)^k`
    PlainSingular,
}

/// Empirical moments `k = 1..=k_max` of a (rescaled) spectrum.
pub fn empirical_moments(
    spectrum: &Spectrum,
    k_max: u32,
    rescale: f64,
    mode: MomentMode,
) -> Result<Vec<f64>> {
    if k_max == 0 {
        return Err(Error::InvalidArgument("k_max must be >= 1".into()));
    }
    if rescale <= 0.0 {
        return Err(Error::InvalidArgument("rescale must be positive".into()));
    }
    let svals = spectrum.singular_values();
    if svals.is_empty() {
        return Err(Error::InvalidInput("empty spectrum".into()));
    }
    let n = svals.len() as f64;
    Ok((1..=k_max)
        .map(|k| {
            let p = match mode {
                MomentMode::SquaredSingular => 2 * k as i32,
                MomentMode::PlainSingular => k as i32,
            };
            svals.iter().map(|s| (rescale * s).powi(p)).sum::<f64>() / n
        })
        .collect())
}

/// Exact sup-distance between the empirical CDF of the singular values and
/// the quartercircle CDF on `[0, 2 sigma]`. Always in `[0, 1]`.
pub fn ks_distance_quartercircle(spectrum: &Spectrum, sigma: f64) -> Result<f64> {
    if sigma <= 0.0 {
        return Err(Error::InvalidArgument("sigma must be positive".into()));
    }
    let mut xs = spectrum.singular_values().to_vec();
    if xs.is_empty() {
        return Err(Error::InvalidInput("empty spectrum".into()));
    }
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite singular values"));
    let n = xs.len() as f64;
    let mut dist = 0.0f64;
    for (i, &x) in xs.iter().enumerate() {
        let f = quartercircle_cdf(x, sigma);
        dist = dist.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    Ok(dist.clamp(0.0, 1.0))
}

/// k-th moment of the squared singular value distribution of
/// `(sqrt(T) A_prod) (x) (d^{-1/2} W_prod)` computed from the two factors,
/// never materializing the Td x Td Kronecker product:
///
/// `[T^k (1/T) tr((A A^T)^k)] * [d^{-k} (1/d) tr((W W^T)^k)]`.
///
/// `a_prod` is the T x T product of gap-removed attention matrices and
/// `w_prod` the d x d product of value matrices. The normalisation constants
/// are fixed here: `sqrt(T)` on the attention side, `d^{-1/2}` on the value
/// side, matching how the factors concentrate.
pub fn jacobian_moment_estimate(a_prod: &Matrix, w_prod: &Matrix, k: u32) -> Result<f64> {
    if !a_prod.is_square() || !w_prod.is_square() {
        return Err(Error::Shape("jacobian factors must be square".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be >= 1".into()));
    }
    let t = a_prod.rows() as f64;
    let d = w_prod.rows() as f64;
    let a_moment = t.powi(k as i32) * trace_power(a_prod, k)? / t;
    let w_moment = d.powi(-(k as i32)) * trace_power(w_prod, k)? / d;
    Ok(a_moment * w_moment)
}

/// Empirical moments paired with a theoretical prediction.
#[derive(Clone, Debug, serde::Serialize)]
pub struct MomentReport {
    pub empirical_mean: f64,
    pub empirical_variance: f64,
    pub predicted_mean: f64,
    pub predicted_variance: f64,
    pub rel_err_mean: f64,
    pub rel_err_variance: f64,
    pub context: String,
}

impl MomentReport {
    pub fn new(
        empirical_mean: f64,
        empirical_variance: f64,
        prediction: &MomentPrediction,
    ) -> Self {
        Self {
            empirical_mean,
            empirical_variance,
            predicted_mean: prediction.mean,
            predicted_variance: prediction.variance,
            rel_err_mean: (empirical_mean - prediction.mean).abs() / prediction.mean.abs(),
            rel_err_variance: (empirical_variance - prediction.variance).abs()
                / prediction.variance.abs(),
            context: prediction.context.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{remove_gap, sample_markov, uniform_attention};
    use crate::freeprob::quartercircle_quantile;
    use crate::rng::RngStream;

    #[test]
    fn stable_rank_examples() {
        assert!((stable_rank(&Matrix::identity(6)).unwrap() - 6.0).abs() < 1e-12);

        // rank-one outer product
        let u = Matrix::from_rows(&[&[1.0], &[2.0], &[-1.0]]).unwrap();
        let outer = u.matmul(&u.transpose());
        assert!((stable_rank(&outer).unwrap() - 1.0).abs() < 1e-10);

        let d = Matrix::from_rows(&[&[2.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]).unwrap();
        assert!((stable_rank(&d).unwrap() - 1.5).abs() < 1e-12);

        assert!(matches!(
            stable_rank(&Matrix::zeros(3, 3)),
            Err(Error::UndefinedInput(_))
        ));
    }

    #[test]
    fn stable_rank_scale_invariant() {
        let mut rng = RngStream::new(15, 0);
        let m = Matrix::from_fn(10, 10, |_, _| rng.normal()).unwrap();
        let base = stable_rank(&m).unwrap();
        for c in [0.5, -3.0] {
            let scaled = stable_rank(&m.scale(c)).unwrap();
            assert!((scaled - base).abs() < 1e-10, "c={c}: {scaled} vs {base}");
        }
    }

    #[test]
    fn summarize_uniform_attention() {
        let u = uniform_attention(16).unwrap();
        let s = summarize(&u, 0.5).unwrap();
        assert!((s.s1 - 1.0).abs() < 1e-12);
        assert!(s.s2.abs() < 1e-12);
        assert!(s.gap_ratio.is_infinite());
        assert_eq!(s.eigen_outlier_count, Some(1));
    }

    #[test]
    fn summarize_markov_outliers() {
        let t = 1000;
        let mut rng = RngStream::new(40, 0);
        let a = sample_markov(t, 1.0, &mut rng).unwrap();
        let s = summarize(&a, 0.5).unwrap();
        assert_eq!(s.eigen_outlier_count, Some(1), "one outlier at lambda = 1");
        assert_eq!(s.s1, s.singular_values[0]);

        let perp = remove_gap(&a).unwrap();
        let sp = summarize(&perp, 0.5).unwrap();
        assert_eq!(
            sp.eigen_outlier_count,
            Some(0),
            "no outlier after gap removal"
        );
    }

    #[test]
    fn empirical_moment_examples() {
        let ones = Matrix::identity(5);
        let sp = singular_values(&ones).unwrap();
        for k in 1..=3 {
            let m = empirical_moments(&sp, k, 1.0, MomentMode::SquaredSingular).unwrap();
            assert!(m.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }

        let m = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 0.0]]).unwrap();
        let sp = singular_values(&m).unwrap();
        let moments = empirical_moments(&sp, 1, 1.0, MomentMode::SquaredSingular).unwrap();
        assert!((moments[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ks_distance_bounds_and_construction() {
        // singular values placed exactly at quartercircle quantiles
        let n = 200;
        let svals: Vec<f64> = (0..n)
            .map(|i| quartercircle_quantile((i as f64 + 0.5) / n as f64, 1.0))
            .collect();
        let m = Matrix::from_fn(n, n, |i, j| if i == j { svals[i] } else { 0.0 }).unwrap();
        let sp = singular_values(&m).unwrap();
        let d = ks_distance_quartercircle(&sp, 1.0).unwrap();
        assert!(d < 1.0 / n as f64, "quantile construction distance {d}");

        let zeros = singular_values(&Matrix::zeros(4, 4)).unwrap();
        let d = ks_distance_quartercircle(&zeros, 1.0).unwrap();
        assert!((d - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobian_moment_identity_factors() {
        // sqrt(T)-normalised identity on the A side, d^{-1/2} on the W side
        let t = 6;
        let d = 8;
        let a = Matrix::identity(t).scale(1.0 / (t as f64).sqrt());
        let w = Matrix::identity(d).scale((d as f64).sqrt());
        for k in 1..=3 {
            let m = jacobian_moment_estimate(&a, &w, k).unwrap();
            assert!((m - 1.0).abs() < 1e-12, "k={k}: {m}");
        }
    }

    // the estimate must equal the literal Kronecker computation
    #[test]
    fn jacobian_moment_matches_materialized_kronecker() {
        let t = 8;
        let d = 8;
        let mut rng = RngStream::new(3, 1);
        let a = Matrix::from_fn(t, t, |_, _| rng.normal()).unwrap();
        let w = Matrix::from_fn(d, d, |_, _| rng.normal()).unwrap();

        // K = (sqrt(T) A) (x) (d^{-1/2} W)
        let sa = a.scale((t as f64).sqrt());
        let sw = w.scale(1.0 / (d as f64).sqrt());
        let kron = Matrix::from_fn(t * d, t * d, |i, j| {
            sa.get(i / d, j / d) * sw.get(i % d, j % d)
        })
        .unwrap();

        for k in 1..=3u32 {
            let est = jacobian_moment_estimate(&a, &w, k).unwrap();
            let direct = trace_power(&kron, k).unwrap() / (t * d) as f64;
            assert!(
                (est - direct).abs() <= 1e-8 * direct.abs().max(1.0),
                "k={k}: {est} vs {direct}"
            );
        }
    }
}
