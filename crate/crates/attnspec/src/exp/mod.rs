//! Experiment runner: config parsing, seeded scenario sweeps with
//! trial-level parallelism, CSV/JSON reporting and SVG figures.

mod config;
mod fit;
mod runner;
mod svg;

pub use config::{parse_config, ParseError};
pub use fit::{fit_loglog_slope, LoglogFit};
pub use runner::{run, RunSummary};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::Error;
use crate::model::ModelConfig;

/// The experiment families, each mirroring one measurement from the study.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Singular value histogram of the gap-removed attention with the
    /// quartercircle overlay, plus the eigenvalue scatter with its unit
    /// outlier.
    BulkHistogram,
    /// Stable rank of the token covariance as T grows.
    RankWidth,
    /// Stable rank of the token covariance as depth grows.
    RankDepth,
    /// Gradient norm at layer 1 as width grows.
    GradWidth,
    /// Gradient norm at layer 1 as depth grows.
    GradDepth,
    /// Empirical covariance-bulk moments vs the free-probability prediction.
    MomentCheckCov,
    /// Empirical Jacobian-bulk moments vs the Fuss-Catalan prediction.
    MomentCheckJac,
    /// Degeneracy of Xavier-scaled key-query attention.
    XavierDegeneracy,
    /// Eigenvalue outlier counts across layers.
    OutlierCount,
    /// Attention-branch vs skip-branch norms under the two value scalings.
    SkipScalingIsometry,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::BulkHistogram => "bulk_histogram",
            Self::RankWidth => "rank_width",
            Self::RankDepth => "rank_depth",
            Self::GradWidth => "grad_width",
            Self::GradDepth => "grad_depth",
            Self::MomentCheckCov => "moment_check_cov",
            Self::MomentCheckJac => "moment_check_jac",
            Self::XavierDegeneracy => "xavier_degeneracy",
            Self::OutlierCount => "outlier_count",
            Self::SkipScalingIsometry => "skip_scaling_isometry",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "bulk_histogram" => Self::BulkHistogram,
            "rank_width" => Self::RankWidth,
            "rank_depth" => Self::RankDepth,
            "grad_width" => Self::GradWidth,
            "grad_depth" => Self::GradDepth,
            "moment_check_cov" => Self::MomentCheckCov,
            "moment_check_jac" => Self::MomentCheckJac,
            "xavier_degeneracy" => Self::XavierDegeneracy,
            "outlier_count" => Self::OutlierCount,
            "skip_scaling_isometry" => Self::SkipScalingIsometry,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown scenario `{other}`"
                )))
            }
        })
    }
}

/// Which model field a sweep varies. Sweeping T keeps gamma fixed by
/// co-varying d (and d_qk when it tracks d in the template).
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
pub enum SweepParam {
    Tokens,
    Depth,
    SigmaA,
    SigmaV,
    DQk,
}

impl SweepParam {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Tokens => "T",
            Self::Depth => "L",
            Self::SigmaA => "sigma_a",
            Self::SigmaV => "sigma_v",
            Self::DQk => "d_qk",
        }
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(match s {
            "T" => Self::Tokens,
            "L" => Self::Depth,
            "sigma_a" => Self::SigmaA,
            "sigma_v" => Self::SigmaV,
            "d_qk" => Self::DQk,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown sweep parameter `{other}`"
                )))
            }
        })
    }
}

/// A parameter sweep: the varied field and its values.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// A fully validated experiment description.
#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    /// Template model; sweeps derive per-value configs from it.
    pub model: ModelConfig,
    pub sweep: Option<Sweep>,
    pub trials: usize,
    pub base_seed: u64,
    pub output_dir: PathBuf,
    pub outlier_threshold: f64,
    /// Echo of the source config text, embedded in every output file.
    pub echo: String,
}

/// Row status in the long-format CSV.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    Diverged,
}

impl RowStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Ok => "ok",
            Self::Diverged => "diverged",
        }
    }
}

/// One metric observation; the CSV schema is
/// `scenario,param,value,trial,seed,metric,metric_value,status,wall_ms`.
#[derive(Clone, Debug)]
pub struct ResultRow {
    pub scenario: Scenario,
    pub param: &'static str,
    pub value: f64,
    pub trial: usize,
    /// Model seed for this trial; rerunning the scenario with this seed
    /// regenerates the metric bitwise.
    pub seed: u64,
    pub metric: String,
    pub metric_value: f64,
    pub status: RowStatus,
    pub wall_ms: f64,
}
