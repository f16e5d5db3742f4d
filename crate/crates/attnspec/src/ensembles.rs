//! Samplers for the random-matrix ensembles: i.i.d. Gaussian, Random Markov,
//! key-query attention, Haar-orthonormal inputs, and the exact uniform /
//! identity attention constructions, plus the gap-removal transform.
//!
//! A Random Markov matrix is the row-normalisation of an i.i.d. table of
//! non-negative entries with positive mean and finite variance. We draw the
//! underlying entries lognormal with mean 1 and variance `sigma_a^2`
//! (`s^2 = ln(1 + sigma_a^2)`, `mu = -s^2/2`), then divide each row by its
//! sum so the row-sum invariant is exact to rounding. The softmax variant
//! draws Gaussian logits with the same `(mu, s^2)` and applies a row-wise
//! softmax; the two constructions are identical in distribution and differ
//! only in floating-point path.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

/// Which random-matrix ensemble to draw from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    GaussianIid,
    RandomMarkov,
    /// Softmax form: row-wise softmax of Gaussian logits.
    RandomMarkovSoftmax,
    KeyQueryAttention,
    UniformAttention,
    IdentityAttention,
    OrthonormalRows,
}

impl EnsembleKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::GaussianIid => "gaussian_iid",
            Self::RandomMarkov => "random_markov",
            Self::RandomMarkovSoftmax => "random_markov_softmax",
            Self::KeyQueryAttention => "key_query_attention",
            Self::UniformAttention => "uniform_attention",
            Self::IdentityAttention => "identity_attention",
            Self::OrthonormalRows => "orthonormal_rows",
        }
    }
}

impl fmt::Display for EnsembleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "gaussian_iid" => Self::GaussianIid,
            "random_markov" => Self::RandomMarkov,
            "random_markov_softmax" => Self::RandomMarkovSoftmax,
            "key_query_attention" => Self::KeyQueryAttention,
            "uniform_attention" => Self::UniformAttention,
            "identity_attention" => Self::IdentityAttention,
            "orthonormal_rows" => Self::OrthonormalRows,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown ensemble kind `{other}`"
                )))
            }
        })
    }
}

/// Recipe for sampling one random matrix.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct EnsembleSpec {
    pub kind: EnsembleKind,
    pub rows: usize,
    pub cols: usize,
    /// sigma for Gaussian entries, sigma_a for Markov kinds, sigma_qk for
    /// key-query attention. Ignored by the exact constructions.
    pub sigma: f64,
    /// Key-query head dimension; ignored by other kinds.
    pub d_qk: usize,
    pub seed: u64,
}

impl EnsembleSpec {
    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Shape("ensemble dimensions must be positive".into()));
        }
        match self.kind {
            EnsembleKind::RandomMarkov
            | EnsembleKind::RandomMarkovSoftmax
            | EnsembleKind::UniformAttention
            | EnsembleKind::IdentityAttention
            | EnsembleKind::KeyQueryAttention => {
                // attention matrices are T x T over the tokens; for key-query
                // `cols` is the embedding dimension of the sampled input
                if self.kind != EnsembleKind::KeyQueryAttention && self.rows != self.cols {
                    return Err(Error::Shape(format!(
                        "{} requires rows == cols, got {}x{}",
                        self.kind, self.rows, self.cols
                    )));
                }
                if self.kind == EnsembleKind::KeyQueryAttention && self.rows > self.cols {
                    return Err(Error::Shape(
                        "key_query_attention requires T <= d for the orthonormal input".into(),
                    ));
                }
            }
            EnsembleKind::OrthonormalRows => {
                if self.rows > self.cols {
                    return Err(Error::Shape(format!(
                        "orthonormal_rows requires rows <= cols, got {}x{}",
                        self.rows, self.cols
                    )));
                }
            }
            EnsembleKind::GaussianIid => {}
        }
        if self.sigma < 0.0 {
            return Err(Error::InvalidArgument("sigma must be non-negative".into()));
        }
        if self.d_qk == 0 {
            return Err(Error::InvalidArgument("d_qk must be positive".into()));
        }
        Ok(())
    }

    /// Draw the matrix this spec describes. Identical specs produce bitwise
    /// identical matrices. Key-query attention samples its own
    /// Haar-orthonormal input of shape `rows x cols` on stream 0 and the
    /// weight matrices on stream 1.
    pub fn sample(&self) -> Result<Matrix> {
        self.validate()?;
        let mut rng = RngStream::new(self.seed, 0);
        match self.kind {
            EnsembleKind::GaussianIid => {
                Ok(sample_gaussian(self.rows, self.cols, self.sigma, &mut rng)?)
            }
            EnsembleKind::RandomMarkov => sample_markov(self.rows, self.sigma, &mut rng),
            EnsembleKind::RandomMarkovSoftmax => {
                sample_markov_softmax(self.rows, self.sigma, &mut rng)
            }
            EnsembleKind::UniformAttention => uniform_attention(self.rows),
            EnsembleKind::IdentityAttention => identity_attention(self.rows),
            EnsembleKind::OrthonormalRows => orthonormal_input(self.rows, self.cols, &mut rng),
            EnsembleKind::KeyQueryAttention => {
                let x0 = orthonormal_input(self.rows, self.cols, &mut rng)?;
                let mut wrng = RngStream::new(self.seed, 1);
                key_query_attention(&x0, self.sigma, self.d_qk, &mut wrng)
            }
        }
    }
}

/// i.i.d. N(0, sigma^2) entries, filled in row-major order.
pub fn sample_gaussian(
    rows: usize,
    cols: usize,
    sigma: f64,
    rng: &mut RngStream,
) -> Result<Matrix> {
    if sigma < 0.0 {
        return Err(Error::InvalidArgument("sigma must be non-negative".into()));
    }
    Matrix::from_fn(rows, cols, |_, _| sigma * rng.normal())
}

/// Lognormal parameters giving mean 1 and variance `sigma_a^2`.
fn lognormal_params(sigma_a: f64) -> (f64, f64) {
    let s_sq = (1.0 + sigma_a * sigma_a).ln();
    (-s_sq / 2.0, s_sq.sqrt())
}

/// Random Markov matrix: i.i.d. lognormal entries with mean 1 and variance
/// `sigma_a^2`, each row divided by its sum.
pub fn sample_markov(t: usize, sigma_a: f64, rng: &mut RngStream) -> Result<Matrix> {
    if t < 2 {
        return Err(Error::InvalidArgument(format!(
            "Markov matrices need T >= 2, got {t}"
        )));
    }
    if sigma_a <= 0.0 {
        return Err(Error::InvalidArgument("sigma_a must be positive".into()));
    }
    let (mu, s) = lognormal_params(sigma_a);
    let mut data = vec![0.0; t * t];
    for i in 0..t {
        let row = &mut data[i * t..(i + 1) * t];
        for v in row.iter_mut() {
            *v = rng.lognormal(mu, s);
        }
        let sum: f64 = row.iter().sum();
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    Matrix::new(t, t, data)
}

/// Softmax-form Markov sampler: Gaussian logits, row-wise softmax.
/// Same distribution as [`sample_markov`].
pub fn sample_markov_softmax(t: usize, sigma_a: f64, rng: &mut RngStream) -> Result<Matrix> {
    if t < 2 {
        return Err(Error::InvalidArgument(format!(
            "Markov matrices need T >= 2, got {t}"
        )));
    }
    if sigma_a <= 0.0 {
        return Err(Error::InvalidArgument("sigma_a must be positive".into()));
    }
    let (mu, s) = lognormal_params(sigma_a);
    let mut data = vec![0.0; t * t];
    for i in 0..t {
        let row = &mut data[i * t..(i + 1) * t];
        for v in row.iter_mut() {
            *v = mu + s * rng.normal();
        }
        softmax_row(row);
    }
    Matrix::new(t, t, data)
}

fn softmax_row(row: &mut [f64]) {
    let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    for v in row.iter_mut() {
        *v = (*v - max).exp();
    }
    let sum: f64 = row.iter().sum();
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// Haar-distributed matrix with orthonormal rows (`X X^T = I_T`), obtained by
/// QR of a Gaussian sample with the `R_ii > 0` sign convention.
pub fn orthonormal_input(t: usize, d: usize, rng: &mut RngStream) -> Result<Matrix> {
    if t > d {
        return Err(Error::Shape(format!(
            "orthonormal rows require T <= d, got T={t}, d={d}"
        )));
    }
    // QR of the d x T transpose: thin Q has orthonormal columns.
    let g = sample_gaussian(d, t, 1.0, rng)?;
    let qr = g.as_faer().qr();
    let q = qr.compute_thin_Q();
    let r = qr.thin_R();
    let mut data = vec![0.0; t * d];
    for i in 0..t {
        // row i of X is column i of Q, sign-fixed by R_ii > 0
        let sign = if r[(i, i)] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..d {
            data[i * d + j] = sign * q[(j, i)];
        }
    }
    Matrix::new(t, d, data)
}

/// Standard key-query dot-product attention with fresh N(0, sigma_qk^2)
/// query/key weights: row-wise softmax of `X Wq Wk^T X^T / sqrt(d_qk)`.
/// Draws Wq fully, then Wk, both row-major.
pub fn key_query_attention(
    x: &Matrix,
    sigma_qk: f64,
    d_qk: usize,
    rng: &mut RngStream,
) -> Result<Matrix> {
    if d_qk == 0 {
        return Err(Error::InvalidArgument("d_qk must be positive".into()));
    }
    if sigma_qk < 0.0 {
        return Err(Error::InvalidArgument(
            "sigma_qk must be non-negative".into(),
        ));
    }
    let d = x.cols();
    let wq = sample_gaussian(d, d_qk, sigma_qk, rng)?;
    let wk = sample_gaussian(d, d_qk, sigma_qk, rng)?;
    let q = x.matmul(&wq);
    let k = x.matmul(&wk);
    let logits = q.matmul(&k.transpose()).scale(1.0 / (d_qk as f64).sqrt());
    let t = x.rows();
    let mut data = logits.as_slice().to_vec();
    for i in 0..t {
        softmax_row(&mut data[i * t..(i + 1) * t]);
    }
    Matrix::new(t, t, data)
}

/// Uniform attention `(1/T) * ones(T, T)`.
pub fn uniform_attention(t: usize) -> Result<Matrix> {
    if t == 0 {
        return Err(Error::InvalidArgument("T must be positive".into()));
    }
    Matrix::from_fn(t, t, |_, _| 1.0 / t as f64)
}

/// Identity attention.
pub fn identity_attention(t: usize) -> Result<Matrix> {
    if t == 0 {
        return Err(Error::InvalidArgument("T must be positive".into()));
    }
    Ok(Matrix::identity(t))
}

/// Tolerance on row sums accepted by [`remove_gap`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-8;

/// Remove the spectral gap: `A - (1/T) * ones`. Requires every row of `a`
/// to sum to 1 within [`ROW_SUM_TOLERANCE`]; rows of the result sum to 0.
pub fn remove_gap(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::Shape("gap removal requires a square matrix".into()));
    }
    let t = a.rows();
    for (i, sum) in a.row_sums().into_iter().enumerate() {
        if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::Precondition(format!(
                "row {i} sums to {sum}, not 1; input is not a Markov matrix"
            )));
        }
    }
    Ok(a.map(|v| v - 1.0 / t as f64))
}
