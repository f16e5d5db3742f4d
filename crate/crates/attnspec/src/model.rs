//! The attention-only forward model and its gradient-norm measurements.
//!
//! One layer maps the signal `X` (T x d) to `A * X * W`, where `A` is a T x T
//! attention matrix and `W` a d x d value matrix. Optional modifications:
//! gap removal replaces `A` with `A - (1/T) * ones` before anything else, a
//! skip connection adds the previous signal, and LayerNorm standardises each
//! row of the layer output. Without skip and LayerNorm the map from values
//! to output is linear and the squared Frobenius norm of `dX_L / dW_l`
//! factors through a Kronecker product; with them, a Hutchinson
//! finite-difference estimator takes over.
//!
//! All randomness is drawn from per-layer streams keyed by the config seed,
//! so a perturbed replay (as in the Hutchinson estimator) sees exactly the
//! same attention and value draws.

use std::fmt;
use std::str::FromStr;

use crate::ensembles::{
    identity_attention, key_query_attention, remove_gap, sample_gaussian, sample_markov,
    uniform_attention,
};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::RngStream;

/// Attention mechanism used at every layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionKind {
    /// Independent Random Markov matrix per layer.
    RandomMarkov,
    /// Content-dependent: logits recomputed from the current signal.
    KeyQuery,
    Uniform,
    Identity,
}

impl AttentionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::RandomMarkov => "random_markov",
            Self::KeyQuery => "key_query",
            Self::Uniform => "uniform",
            Self::Identity => "identity",
        }
    }
}

impl fmt::Display for AttentionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttentionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "random_markov" => Self::RandomMarkov,
            "key_query" => Self::KeyQuery,
            "uniform" => Self::Uniform,
            "identity" => Self::Identity,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown attention kind `{other}`"
                )))
            }
        })
    }
}

/// How value matrices are scaled when a skip connection is present.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueScaling {
    /// Entries N(0, sigma_v^2); keeps the attention branch commensurate with
    /// the skip branch.
    UnitVariance,
    /// Entries N(0, sigma_v^2 / d); the conventional choice, which
    /// down-weights the attention branch by sqrt(d).
    He,
}

impl ValueScaling {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::UnitVariance => "unit_variance",
            Self::He => "he",
        }
    }
}

impl FromStr for ValueScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "unit_variance" => Self::UnitVariance,
            "he" => Self::He,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown value scaling `{other}`"
                )))
            }
        })
    }
}

/// Full description of one forward model.
#[derive(Clone, Debug, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    /// Number of tokens.
    pub t: usize,
    /// Embedding dimension; the ratio T/d must stay in (0, 1].
    pub d: usize,
    /// Key-query head dimension.
    pub d_qk: usize,
    /// Depth (number of layers), >= 1.
    pub depth: usize,
    pub sigma_a: f64,
    pub sigma_v: f64,
    pub sigma_qk: f64,
    pub attention: AttentionKind,
    pub remove_gap: bool,
    pub skip: bool,
    pub layernorm: bool,
    pub value_scaling: ValueScaling,
    pub seed: u64,
}

impl ModelConfig {
    /// New config with defaults: `d_qk = d`, unit sigmas, Random Markov
    /// attention, no gap removal, no skip, no LayerNorm.
    pub fn new(t: usize, d: usize, depth: usize, seed: u64) -> Result<Self> {
        let cfg = Self {
            t,
            d,
            d_qk: d,
            depth,
            sigma_a: 1.0,
            sigma_v: 1.0,
            sigma_qk: 1.0,
            attention: AttentionKind::RandomMarkov,
            remove_gap: false,
            skip: false,
            layernorm: false,
            value_scaling: ValueScaling::UnitVariance,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn gamma(&self) -> f64 {
        self.t as f64 / self.d as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.t < 2 || self.d == 0 || self.d_qk == 0 {
            return Err(Error::InvalidArgument(format!(
                "need T >= 2 and positive d, d_qk; got T={}, d={}, d_qk={}",
                self.t, self.d, self.d_qk
            )));
        }
        if self.depth == 0 {
            return Err(Error::InvalidArgument("depth must be >= 1".into()));
        }
        if self.t > self.d {
            return Err(Error::InvalidArgument(format!(
                "gamma = T/d = {}/{} exceeds 1",
                self.t, self.d
            )));
        }
        if self.sigma_a <= 0.0 || self.sigma_v <= 0.0 {
            return Err(Error::InvalidArgument(
                "sigma_a and sigma_v must be positive".into(),
            ));
        }
        if self.sigma_qk < 0.0 {
            return Err(Error::InvalidArgument(
                "sigma_qk must be non-negative".into(),
            ));
        }
        Ok(())
    }

    fn sigma_v_effective(&self) -> f64 {
        match self.value_scaling {
            ValueScaling::UnitVariance => self.sigma_v,
            ValueScaling::He => self.sigma_v / (self.d as f64).sqrt(),
        }
    }

    /// Stream id for the attention draw of layer `l` (1-based).
    fn attention_stream(&self, l: usize) -> u64 {
        (2 * l - 1) as u64
    }

    /// Stream id for the value draw of layer `l` (1-based).
    fn value_stream(&self, l: usize) -> u64 {
        (2 * l) as u64
    }

    /// Stream id for Hutchinson probe `p`.
    fn probe_stream(&self, p: usize) -> u64 {
        (2 * self.depth + 1 + p) as u64
    }

    /// Stream id conventionally used for sampling the input signal.
    pub fn input_stream() -> u64 {
        0
    }

    /// The value matrix of layer `l` as drawn by [`forward`].
    pub fn value_matrix(&self, l: usize) -> Result<Matrix> {
        let mut rng = RngStream::new(self.seed, self.value_stream(l));
        sample_gaussian(self.d, self.d, self.sigma_v_effective(), &mut rng)
    }
}

/// Layer-by-layer record of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    config: ModelConfig,
    /// `signals[l]` is X_l; length depth + 1.
    signals: Vec<Matrix>,
    /// `attentions[l - 1]` is the attention applied at layer l, after gap
    /// removal when the config asks for it.
    attentions: Vec<Matrix>,
    /// `values[l - 1]` is the value matrix of layer l.
    values: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn signal(&self, layer: usize) -> &Matrix {
        &self.signals[layer]
    }

    pub fn output(&self) -> &Matrix {
        self.signals.last().expect("depth >= 1")
    }

    pub fn attention(&self, layer: usize) -> &Matrix {
        &self.attentions[layer - 1]
    }

    pub fn value(&self, layer: usize) -> &Matrix {
        &self.values[layer - 1]
    }

    pub fn depth(&self) -> usize {
        self.attentions.len()
    }
}

/// Frobenius-norm window outside of which a forward pass is declared
/// divergent. Exact zeros are allowed (uniform attention with the gap
/// removed annihilates the signal).
const NORM_OVERFLOW: f64 = 1e150;
const NORM_UNDERFLOW: f64 = 1e-150;

/// Run the forward model on `x0` (T x d).
pub fn forward(cfg: &ModelConfig, x0: &Matrix) -> Result<ForwardTrace> {
    forward_impl(cfg, x0, None)
}

/// Forward pass with the value matrix of one layer replaced. This is the
/// replay hook used by the Hutchinson estimator and by tests that pin a
/// value matrix exactly; everything else (attention draws included) is
/// bitwise identical to [`forward`] with the same config.
pub fn forward_with_value_override(
    cfg: &ModelConfig,
    x0: &Matrix,
    layer: usize,
    w: &Matrix,
) -> Result<ForwardTrace> {
    if layer == 0 || layer > cfg.depth {
        return Err(Error::InvalidArgument(format!(
            "override layer {layer} outside 1..={}",
            cfg.depth
        )));
    }
    if w.rows() != cfg.d || w.cols() != cfg.d {
        return Err(Error::Shape(format!(
            "value override must be {0}x{0}, got {1}x{2}",
            cfg.d,
            w.rows(),
            w.cols()
        )));
    }
    forward_impl(cfg, x0, Some((layer, w)))
}

fn forward_impl(
    cfg: &ModelConfig,
    x0: &Matrix,
    value_override: Option<(usize, &Matrix)>,
) -> Result<ForwardTrace> {
    cfg.validate()?;
    if x0.rows() != cfg.t || x0.cols() != cfg.d {
        return Err(Error::Shape(format!(
            "input must be {}x{}, got {}x{}",
            cfg.t,
            cfg.d,
            x0.rows(),
            x0.cols()
        )));
    }

    let mut signals = Vec::with_capacity(cfg.depth + 1);
    let mut attentions = Vec::with_capacity(cfg.depth);
    let mut values = Vec::with_capacity(cfg.depth);
    signals.push(x0.clone());

    for l in 1..=cfg.depth {
        let prev = signals.last().expect("non-empty");

        let mut att_rng = RngStream::new(cfg.seed, cfg.attention_stream(l));
        let mut a = match cfg.attention {
            AttentionKind::RandomMarkov => sample_markov(cfg.t, cfg.sigma_a, &mut att_rng)?,
            AttentionKind::KeyQuery => {
                key_query_attention(prev, cfg.sigma_qk, cfg.d_qk, &mut att_rng)?
            }
            AttentionKind::Uniform => uniform_attention(cfg.t)?,
            AttentionKind::Identity => identity_attention(cfg.t)?,
        };
        if cfg.remove_gap {
            a = remove_gap(&a)?;
        }

        let w = match value_override {
            Some((ol, w)) if ol == l => w.clone(),
            _ => cfg.value_matrix(l)?,
        };

        let mut x = a.matmul(prev).matmul(&w);
        if cfg.skip {
            x = x.add(prev);
        }
        if cfg.layernorm {
            x = layer_norm_rows(&x);
        }

        let norm = x.frobenius_norm();
        if !norm.is_finite() || norm > NORM_OVERFLOW || (norm > 0.0 && norm < NORM_UNDERFLOW) {
            return Err(Error::Numerical(format!(
                "signal norm {norm:e} at layer {l} left the representable window"
            )));
        }

        attentions.push(a);
        values.push(w);
        signals.push(x);
    }

    Ok(ForwardTrace {
        config: cfg.clone(),
        signals,
        attentions,
        values,
    })
}

/// Epsilon inside the LayerNorm standard deviation, matching common
/// implementations at initialisation (no learnable affine).
pub const LAYERNORM_EPS: f64 = 1e-5;

fn layer_norm_rows(x: &Matrix) -> Matrix {
    let d = x.cols() as f64;
    let mut data = Vec::with_capacity(x.rows() * x.cols());
    for i in 0..x.rows() {
        let row = x.row(i);
        let mean = row.iter().sum::<f64>() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let inv = 1.0 / (var + LAYERNORM_EPS).sqrt();
        data.extend(row.iter().map(|v| (v - mean) * inv));
    }
    Matrix::new(x.rows(), x.cols(), data).expect("layer norm keeps entries finite")
}

/// Token covariance at a layer: `Sigma_l = X_l X_l^T`, symmetrised.
pub fn covariance(trace: &ForwardTrace, layer: usize) -> Result<Matrix> {
    if layer > trace.config.depth {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} out of range 0..={}",
            trace.config.depth
        )));
    }
    let x = trace.signal(layer);
    let m = x.matmul(&x.transpose());
    let mt = m.transpose();
    Ok(m.add(&mt).scale(0.5))
}

/// Closed-form `|| dX_L / dW_l ||_F^2` for the pure product model.
///
/// The derivative is `P1 (x) P2` with `P1 = A_L ... A_1 X_0 W_1 ... W_{l-1}`
/// and `P2 = W_{l+1} ... W_L`, so its squared Frobenius norm is
/// `||P1||_F^2 * ||P2||_F^2`. Only valid without skip connections and
/// LayerNorm; gap-removed attention matrices are used as stored.
pub fn gradient_frob_sq_closed_form(trace: &ForwardTrace, layer: usize) -> Result<f64> {
    let cfg = &trace.config;
    if cfg.skip || cfg.layernorm {
        return Err(Error::UnsupportedConfiguration(
            "closed-form gradient norms require the pure product model (no skip, no LayerNorm)"
                .into(),
        ));
    }
    if layer == 0 || layer > cfg.depth {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} outside 1..={}",
            cfg.depth
        )));
    }

    // P1 = A_L ... A_1 X_0 W_1 ... W_{l-1}
    let mut p1 = trace.signal(0).clone();
    for l in 1..=cfg.depth {
        p1 = trace.attention(l).matmul(&p1);
    }
    for l in 1..layer {
        p1 = p1.matmul(trace.value(l));
    }

    // ||P2||_F^2 with P2 = W_{l+1} ... W_L (identity when l = L)
    let p2_frob_sq = if layer == cfg.depth {
        cfg.d as f64
    } else {
        let mut p2 = trace.value(layer + 1).clone();
        for l in layer + 2..=cfg.depth {
            p2 = p2.matmul(trace.value(l));
        }
        p2.frobenius_norm_sq()
    };

    Ok(p1.frobenius_norm_sq() * p2_frob_sq)
}

/// Hutchinson estimate of a gradient norm, with its Monte-Carlo standard
/// error (0 when a single probe is used).
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct HutchinsonEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub probes: usize,
}

/// Stochastic `|| dX_L / dW_l ||_F^2` via `E_V ||J vec(V)||^2` with standard
/// normal probe directions and central finite differences of the forward
/// pass. Works for every architecture variant, including skip and LayerNorm
/// where no closed form exists.
pub fn gradient_frob_sq_hutchinson(
    cfg: &ModelConfig,
    x0: &Matrix,
    layer: usize,
    probes: usize,
    fd_eps: f64,
) -> Result<HutchinsonEstimate> {
    if probes == 0 {
        return Err(Error::InvalidArgument("need at least one probe".into()));
    }
    if fd_eps <= 0.0 {
        return Err(Error::InvalidArgument("fd_eps must be positive".into()));
    }
    if layer == 0 || layer > cfg.depth {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} outside 1..={}",
            cfg.depth
        )));
    }

    let w_base = cfg.value_matrix(layer)?;
    let mut samples = Vec::with_capacity(probes);
    for p in 0..probes {
        let mut probe_rng = RngStream::new(cfg.seed, cfg.probe_stream(p));
        let v = sample_gaussian(cfg.d, cfg.d, 1.0, &mut probe_rng)?;
        let w_plus = w_base.add(&v.scale(fd_eps));
        let w_minus = w_base.sub(&v.scale(fd_eps));
        let x_plus = forward_with_value_override(cfg, x0, layer, &w_plus)?;
        let x_minus = forward_with_value_override(cfg, x0, layer, &w_minus)?;
        let directional = x_plus
            .output()
            .sub(x_minus.output())
            .scale(1.0 / (2.0 * fd_eps));
        directional.validate_finite().map_err(|_| {
            Error::Numerical("non-finite directional derivative in Hutchinson probe".into())
        })?;
        samples.push(directional.frobenius_norm_sq());
    }

    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let std_error = if samples.len() > 1 {
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };

    Ok(HutchinsonEstimate {
        estimate: mean,
        std_error,
        probes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::orthonormal_input;
    use crate::spectra::stable_rank;

    fn orthonormal(cfg: &ModelConfig) -> Matrix {
        let mut rng = RngStream::new(cfg.seed, ModelConfig::input_stream());
        orthonormal_input(cfg.t, cfg.d, &mut rng).unwrap()
    }

    #[test]
    fn identity_attention_identity_values_is_identity_map() {
        let mut cfg = ModelConfig::new(8, 8, 1, 5).unwrap();
        cfg.attention = AttentionKind::Identity;
        let x0 = orthonormal(&cfg);
        let trace = forward_with_value_override(&cfg, &x0, 1, &Matrix::identity(8)).unwrap();
        assert!(trace.output().sub(&x0).max_abs() < 1e-15);
    }

    #[test]
    fn gap_removed_uniform_attention_annihilates() {
        let mut cfg = ModelConfig::new(16, 16, 1, 5).unwrap();
        cfg.attention = AttentionKind::Uniform;
        cfg.remove_gap = true;
        let x0 = orthonormal(&cfg);
        let trace = forward(&cfg, &x0).unwrap();
        assert!(trace.output().is_zero());
    }

    #[test]
    fn gap_removed_trace_attentions_have_zero_row_sums() {
        let mut cfg = ModelConfig::new(32, 32, 3, 8).unwrap();
        cfg.remove_gap = true;
        let x0 = orthonormal(&cfg);
        let trace = forward(&cfg, &x0).unwrap();
        for l in 1..=cfg.depth {
            for sum in trace.attention(l).row_sums() {
                assert!(sum.abs() < 1e-10, "layer {l} row sum {sum}");
            }
        }
    }

    #[test]
    fn rank_collapses_in_width_for_two_layers() {
        let cfg = ModelConfig::new(500, 500, 2, 303).unwrap();
        let x0 = orthonormal(&cfg);
        let trace = forward(&cfg, &x0).unwrap();
        let sigma = covariance(&trace, 2).unwrap();
        let sr = stable_rank(&sigma).unwrap();
        assert!(sr < 1.05, "sr(Sigma_2) = {sr}");
    }

    #[test]
    fn covariance_contract() {
        let cfg = ModelConfig::new(32, 48, 1, 7).unwrap();
        let x0 = orthonormal(&cfg);
        let trace = forward(&cfg, &x0).unwrap();

        let sigma0 = covariance(&trace, 0).unwrap();
        assert!(sigma0.sub(&Matrix::identity(32)).max_abs() < 1e-10);

        let sigma1 = covariance(&trace, 1).unwrap();
        assert!(sigma1.sub(&sigma1.transpose()).max_abs() < 1e-12);
        let eigs = sigma1
            .as_faer()
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .unwrap();
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eigs.iter().cloned().fold(0.0f64, f64::max);
        assert!(min >= -1e-9 * max, "lambda_min {min}, lambda_max {max}");

        assert!(covariance(&trace, 2).is_err());
    }

    #[test]
    fn forward_rejects_wrong_input_shape() {
        let cfg = ModelConfig::new(8, 8, 1, 0).unwrap();
        let x0 = Matrix::zeros(8, 9);
        assert!(matches!(forward(&cfg, &x0), Err(Error::Shape(_))));
    }

    #[test]
    fn layernorm_rows_standardised() {
        let mut cfg = ModelConfig::new(16, 32, 1, 9).unwrap();
        cfg.layernorm = true;
        let x0 = orthonormal(&cfg);
        let trace = forward(&cfg, &x0).unwrap();
        let x1 = trace.output();
        for i in 0..x1.rows() {
            let row = x1.row(i);
            let mean = row.iter().sum::<f64>() / row.len() as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / row.len() as f64;
            assert!(mean.abs() < 1e-12, "row mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "row var {var}");
        }
    }

    #[test]
    fn single_layer_gradient_is_d_times_signal_norm() {
        let cfg = ModelConfig::new(24, 32, 1, 11).unwrap();
        let x0 = orthonormal(&cfg);
        let trace = forward(&cfg, &x0).unwrap();
        let grad = gradient_frob_sq_closed_form(&trace, 1).unwrap();
        let a1x0 = trace.attention(1).matmul(&x0);
        let expected = cfg.d as f64 * a1x0.frobenius_norm_sq();
        assert!(
            (grad - expected).abs() < 1e-9 * expected,
            "{grad} vs {expected}"
        );
    }

    #[test]
    fn closed_form_rejects_skip_and_layernorm() {
        let mut cfg = ModelConfig::new(8, 8, 2, 0).unwrap();
        cfg.skip = true;
        let x0 = orthonormal(&cfg);
        let trace = forward(&cfg, &x0).unwrap();
        assert!(matches!(
            gradient_frob_sq_closed_form(&trace, 1),
            Err(Error::UnsupportedConfiguration(_))
        ));
    }

    #[test]
    fn hutchinson_is_deterministic_per_seed() {
        let cfg = ModelConfig::new(16, 16, 2, 21).unwrap();
        let x0 = orthonormal(&cfg);
        let a = gradient_frob_sq_hutchinson(&cfg, &x0, 1, 1, 1e-4).unwrap();
        let b = gradient_frob_sq_hutchinson(&cfg, &x0, 1, 1, 1e-4).unwrap();
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert_eq!(a.std_error, 0.0);
    }

    #[test]
    fn hutchinson_matches_closed_form_within_three_standard_errors() {
        let cfg = ModelConfig::new(100, 100, 2, 77).unwrap();
        let x0 = orthonormal(&cfg);
        let trace = forward(&cfg, &x0).unwrap();
        let exact = gradient_frob_sq_closed_form(&trace, 1).unwrap();
        let est = gradient_frob_sq_hutchinson(&cfg, &x0, 1, 64, 1e-4).unwrap();
        assert!(
            (est.estimate - exact).abs() <= 3.0 * est.std_error,
            "estimate {} +- {} vs exact {}",
            est.estimate,
            est.std_error,
            exact
        );
    }

    // central differences are exact on the pure product model (linear in W_l)
    #[test]
    fn hutchinson_insensitive_to_step_size_on_linear_model() {
        let cfg = ModelConfig::new(32, 32, 2, 5).unwrap();
        let x0 = orthonormal(&cfg);
        let a = gradient_frob_sq_hutchinson(&cfg, &x0, 1, 8, 1e-4).unwrap();
        let b = gradient_frob_sq_hutchinson(&cfg, &x0, 1, 8, 5e-5).unwrap();
        assert!(
            (a.estimate - b.estimate).abs() < 0.01 * a.estimate,
            "{} vs {}",
            a.estimate,
            b.estimate
        );
    }

    // top singular value grows like d^(L/2) = 10^L without the fix, so the
    // 1e150 norm guard trips around L = 150 at d = 100
    #[test]
    fn deep_no_fix_forward_diverges_and_is_reported() {
        let cfg = ModelConfig::new(100, 100, 160, 3).unwrap();
        let x0 = orthonormal(&cfg);
        match forward(&cfg, &x0) {
            Err(Error::Numerical(msg)) => assert!(msg.contains("layer")),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
