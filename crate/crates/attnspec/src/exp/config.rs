//! Flat `key = value` experiment configs.
//!
//! One assignment per line, `#` starts a comment, keys are fixed. Required:
//! `scenario`, `T`, `seed`, `out`. Everything else defaults: `d = T`,
//! `d_qk = d`, `L = 1`, unit sigmas, `attention = random_markov`, all flags
//! false, `skip_value_scaling = unit_variance`, `trials = 10`,
//! `outlier_threshold = 0.5`, no sweep.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::model::{AttentionKind, ModelConfig, ValueScaling};

use super::{ExperimentSpec, Scenario, Sweep, SweepParam};

/// A config rejection, with the offending line when one is known.
#[derive(Debug)]
pub struct ParseError {
    pub line: Option<usize>,
    pub message: String,
}

impl ParseError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            message: message.into(),
        }
    }

    fn global(message: impl Into<String>) -> Self {
        Self {
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(n) => write!(f, "config line {n}: {}", self.message),
            None => write!(f, "config: {}", self.message),
        }
    }
}

impl std::error::Error for ParseError {}

const KNOWN_KEYS: &[&str] = &[
    "scenario",
    "T",
    "d",
    "d_qk",
    "L",
    "sigma_a",
    "sigma_v",
    "sigma_qk",
    "attention",
    "remove_gap",
    "skip",
    "layernorm",
    "skip_value_scaling",
    "sweep_param",
    "sweep_values",
    "trials",
    "seed",
    "outlier_threshold",
    "out",
];

struct Raw<'a> {
    entries: BTreeMap<&'a str, (usize, &'a str)>,
}

impl<'a> Raw<'a> {
    fn get(&self, key: &str) -> Option<&(usize, &'a str)> {
        self.entries.get(key)
    }

    fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ParseError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(&(line, text)) => text
                .parse::<T>()
                .map(Some)
                .map_err(|e| ParseError::at(line, format!("bad value for `{key}`: {e}"))),
        }
    }
}

fn parse_bool(raw: &Raw<'_>, key: &str) -> Result<Option<bool>, ParseError> {
    match raw.get(key) {
        None => Ok(None),
        Some(&(line, "true")) => {
            let _ = line;
            Ok(Some(true))
        }
        Some(&(line, "false")) => {
            let _ = line;
            Ok(Some(false))
        }
        Some(&(line, other)) => Err(ParseError::at(
            line,
            format!("bad value for `{key}`: expected true or false, got `{other}`"),
        )),
    }
}

/// Parse and validate a config. Unknown keys, duplicates, malformed values
/// and invariant violations are rejected with the offending line.
pub fn parse_config(text: &str) -> Result<ExperimentSpec, ParseError> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ParseError::at(
                lineno,
                format!("expected `key = value`, got `{content}`"),
            ));
        };
        let key = key.trim();
        let value = value.trim();
        if !KNOWN_KEYS.contains(&key) {
            return Err(ParseError::at(lineno, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(ParseError::at(lineno, format!("empty value for `{key}`")));
        }
        if let Some(&(first, _)) = entries.get(key) {
            return Err(ParseError::at(
                lineno,
                format!("duplicate key `{key}` (first set on line {first})"),
            ));
        }
        entries.insert(key, (lineno, value));
    }
    let raw = Raw { entries };

    let scenario = match raw.get("scenario") {
        None => return Err(ParseError::global("missing required key `scenario`")),
        Some(&(line, text)) => text
            .parse::<Scenario>()
            .map_err(|e| ParseError::at(line, e.to_string()))?,
    };
    let t: usize = raw
        .parse("T")?
        .ok_or_else(|| ParseError::global("missing required key `T`"))?;
    let seed: u64 = raw
        .parse("seed")?
        .ok_or_else(|| ParseError::global("missing required key `seed`"))?;
    let out: String = match raw.get("out") {
        None => return Err(ParseError::global("missing required key `out`")),
        Some(&(_, text)) => text.to_string(),
    };

    let d: usize = raw.parse("d")?.unwrap_or(t);
    let d_qk: usize = raw.parse("d_qk")?.unwrap_or(d);
    let depth: usize = raw.parse("L")?.unwrap_or(1);
    let sigma_a: f64 = raw.parse("sigma_a")?.unwrap_or(1.0);
    let sigma_v: f64 = raw.parse("sigma_v")?.unwrap_or(1.0);
    let sigma_qk: f64 = raw.parse("sigma_qk")?.unwrap_or(1.0);
    let trials: usize = raw.parse("trials")?.unwrap_or(10);
    let outlier_threshold: f64 = raw.parse("outlier_threshold")?.unwrap_or(0.5);

    let attention = match raw.get("attention") {
        None => AttentionKind::RandomMarkov,
        Some(&(line, text)) => text
            .parse::<AttentionKind>()
            .map_err(|e| ParseError::at(line, e.to_string()))?,
    };
    let value_scaling = match raw.get("skip_value_scaling") {
        None => ValueScaling::UnitVariance,
        Some(&(line, text)) => text
            .parse::<ValueScaling>()
            .map_err(|e| ParseError::at(line, e.to_string()))?,
    };
    let remove_gap = parse_bool(&raw, "remove_gap")?.unwrap_or(false);
    let skip = parse_bool(&raw, "skip")?.unwrap_or(false);
    let layernorm = parse_bool(&raw, "layernorm")?.unwrap_or(false);

    if t > d {
        let line = raw.get("T").map(|&(l, _)| l).unwrap_or(1);
        return Err(ParseError::at(
            line,
            format!("gamma = T/d = {t}/{d} exceeds 1; the model requires T <= d"),
        ));
    }
    if trials == 0 {
        let line = raw.get("trials").map(|&(l, _)| l).unwrap_or(1);
        return Err(ParseError::at(line, "trials must be >= 1"));
    }
    if outlier_threshold <= 0.0 {
        let line = raw.get("outlier_threshold").map(|&(l, _)| l).unwrap_or(1);
        return Err(ParseError::at(line, "outlier_threshold must be positive"));
    }

    let sweep = match (raw.get("sweep_param"), raw.get("sweep_values")) {
        (None, None) => None,
        (Some(&(line, _)), None) => {
            return Err(ParseError::at(line, "sweep_param without sweep_values"))
        }
        (None, Some(&(line, _))) => {
            return Err(ParseError::at(line, "sweep_values without sweep_param"))
        }
        (Some(&(pline, ptext)), Some(&(vline, vtext))) => {
            let param = ptext
                .parse::<SweepParam>()
                .map_err(|e| ParseError::at(pline, e.to_string()))?;
            let mut values = Vec::new();
            for piece in vtext.split(',') {
                let piece = piece.trim();
                let v: f64 = piece
                    .parse()
                    .map_err(|_| ParseError::at(vline, format!("bad sweep value `{piece}`")))?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(ParseError::at(
                        vline,
                        format!("sweep value `{piece}` must be positive"),
                    ));
                }
                let integral = matches!(
                    param,
                    SweepParam::Tokens | SweepParam::Depth | SweepParam::DQk
                );
                if integral && v.fract() != 0.0 {
                    return Err(ParseError::at(
                        vline,
                        format!(
                            "sweep value `{piece}` must be an integer for {}",
                            param.as_str()
                        ),
                    ));
                }
                values.push(v);
            }
            if values.len() < 2 {
                return Err(ParseError::at(vline, "a sweep needs at least two values"));
            }
            Some(Sweep { param, values })
        }
    };

    let model = ModelConfig {
        t,
        d,
        d_qk,
        depth,
        sigma_a,
        sigma_v,
        sigma_qk,
        attention,
        remove_gap,
        skip,
        layernorm,
        value_scaling,
        seed,
    };
    model
        .validate()
        .map_err(|e| ParseError::global(e.to_string()))?;

    Ok(ExperimentSpec {
        scenario,
        model,
        sweep,
        trials,
        base_seed: seed,
        output_dir: out.into(),
        outlier_threshold,
        echo: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_documented_defaults() {
        let spec = parse_config("scenario = bulk_histogram\nT = 500\nseed = 1\nout = .\n").unwrap();
        assert_eq!(spec.scenario, Scenario::BulkHistogram);
        assert_eq!(spec.model.t, 500);
        assert_eq!(spec.model.d, 500);
        assert_eq!(spec.model.d_qk, 500);
        assert_eq!(spec.model.depth, 1);
        assert_eq!(spec.model.sigma_a, 1.0);
        assert_eq!(spec.model.attention, AttentionKind::RandomMarkov);
        assert!(!spec.model.remove_gap);
        assert_eq!(spec.trials, 10);
        assert_eq!(spec.outlier_threshold, 0.5);
        assert!(spec.sweep.is_none());
    }

    #[test]
    fn gamma_above_one_rejected() {
        let err = parse_config("scenario = rank_width\nT = 500\nd = 250\nseed = 1\nout = .\n")
            .unwrap_err();
        assert!(err.message.contains("gamma"), "{err}");
    }

    #[test]
    fn duplicate_key_names_both_lines() {
        let err = parse_config("scenario = rank_width\nT = 100\nT = 200\nseed = 1\nout = .\n")
            .unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("line 2"), "{err}");
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        let err = parse_config("scenario = rank_width\nT = 100\nwidth = 5\nseed = 1\nout = .\n")
            .unwrap_err();
        assert_eq!(err.line, Some(3));
        assert!(err.message.contains("unknown key"), "{err}");
    }

    #[test]
    fn malformed_value_cites_line() {
        let err = parse_config("scenario = rank_width\nT = many\nseed = 1\nout = .\n").unwrap_err();
        assert_eq!(err.line, Some(2));
    }

    #[test]
    fn sweep_parsing() {
        let spec = parse_config(
            "scenario = rank_width\nT = 100\nseed = 1\nout = .\nsweep_param = T\nsweep_values = 100, 200, 400, 800\n",
        )
        .unwrap();
        let sweep = spec.sweep.unwrap();
        assert_eq!(sweep.param, SweepParam::Tokens);
        assert_eq!(sweep.values, vec![100.0, 200.0, 400.0, 800.0]);

        let err = parse_config(
            "scenario = rank_width\nT = 100\nseed = 1\nout = .\nsweep_param = T\nsweep_values = 100, 2.5\n",
        )
        .unwrap_err();
        assert!(err.message.contains("integer"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let spec = parse_config(
            "# experiment\nscenario = outlier_count # per-layer counts\n\nT = 100\nseed = 7\nout = results\n",
        )
        .unwrap();
        assert_eq!(spec.scenario, Scenario::OutlierCount);
        assert_eq!(spec.base_seed, 7);
    }
}
