//! A numerical laboratory for softmax-based attention at initialisation.
//!
//! Attention matrices drawn at initialisation behave like Random Markov
//! matrices: row-stochastic random matrices whose spectrum splits into a
//! leading singular value near 1 and a bulk of size `O(1/sqrt(T))`. That
//! spectral gap drives stable-rank collapse of the token covariance as the
//! number of tokens grows and makes gradient norms explode with depth.
//! Removing the gap (subtracting the rank-one mean `(1/T) * ones`) resolves
//! both effects. This crate provides:
//!
//! - [`matrix`] / [`spectrum`]: a dense f64 matrix carrier with exact SVD,
//!   non-symmetric eigenvalues, and trace powers,
//! - [`ensembles`]: samplers for Gaussian, Random Markov, key-query
//!   attention, and Haar-orthonormal ensembles, plus gap removal,
//! - [`model`]: the attention-only forward model, skip/LayerNorm variants,
//!   closed-form and Hutchinson gradient norms,
//! - [`spectra`]: stable rank, spectral-gap summaries, outlier counts,
//!   empirical moments and Kolmogorov-Smirnov distances,
//! - [`freeprob`]: closed-form predictions (Fuss-Catalan numbers,
//!   Marchenko-Pastur free-convolution moments, quartercircle law),
//! - [`exp`]: a seeded, trial-parallel experiment runner writing CSV/JSON
//!   and SVG figures.
//!
//! Every sampler is keyed by an explicit `(seed, stream_id)` pair, so any
//! reported number can be regenerated bitwise. See the `examples/` directory
//! for one runnable program per capability, and `attnspec --help` for the
//! command-line runner.

pub mod ensembles;
pub mod error;
pub mod exp;
pub mod freeprob;
pub mod matrix;
pub mod model;
pub mod rng;
pub mod spectra;
pub mod spectrum;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use rng::RngStream;
pub use spectrum::Spectrum;
