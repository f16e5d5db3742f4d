//! Thin command-line front end over the library.
//!
//! Subcommands:
//!   run      --config <file>            execute a scenario described by a config
//!   spectrum --kind <ensemble> --T <n>  one-shot spectral summary of one sample
//!   predict  --prop cov|jac --ell <n>   print a closed-form moment prediction
//!
//! Exit codes: 0 success, 1 argument/config parse error, 2 numerical
//! divergence (of all trials for `run`).

use std::collections::HashMap;
use std::process::ExitCode;

use attnspec::ensembles::{remove_gap, EnsembleKind, EnsembleSpec};
use attnspec::error::Error;
use attnspec::exp::{parse_config, run};
use attnspec::freeprob::{covariance_prediction, jacobian_prediction};
use attnspec::rng::RNG_ALGORITHM;
use attnspec::spectra::summarize;

const USAGE: &str = "usage:
  attnspec run --config <file>
  attnspec spectrum --kind <ensemble> --T <n> [--d <n>] [--d-qk <n>] [--sigma-a <x>]
           [--sigma-qk <x>] [--seed <n>] [--remove-gap] [--threshold <x>] --out <dir>
  attnspec predict --prop <cov|jac> --ell <n> [--sigma-a <x>] [--sigma-v <x>] [--gamma <x>]

ensembles: gaussian_iid, random_markov, random_markov_softmax,
           key_query_attention, uniform_attention, identity_attention,
           orthonormal_rows";

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let Some((cmd, rest)) = args.split_first() else {
        eprintln!("{USAGE}");
        return ExitCode::from(1);
    };
    let result = match cmd.as_str() {
        "run" => cmd_run(rest),
        "spectrum" => cmd_spectrum(rest),
        "predict" => cmd_predict(rest),
        "--help" | "-h" | "help" => {
            println!("{USAGE}");
            return ExitCode::SUCCESS;
        }
        other => {
            eprintln!("unknown subcommand `{other}`\n{USAGE}");
            return ExitCode::from(1);
        }
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}

/// Parse `--flag value` pairs plus boolean flags. Unknown flags are errors.
fn parse_flags(
    args: &[String],
    value_flags: &[&str],
    bool_flags: &[&str],
) -> Result<HashMap<String, String>, String> {
    let mut map = HashMap::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let name = arg
            .strip_prefix("--")
            .ok_or_else(|| format!("unexpected argument `{arg}`"))?;
        if bool_flags.contains(&name) {
            map.insert(name.to_string(), "true".to_string());
        } else if value_flags.contains(&name) {
            let value = it.next().ok_or_else(|| format!("--{name} needs a value"))?;
            map.insert(name.to_string(), value.clone());
        } else {
            return Err(format!("unknown flag `--{name}`\n{USAGE}"));
        }
    }
    Ok(map)
}

fn get_parsed<T: std::str::FromStr>(
    flags: &HashMap<String, String>,
    name: &str,
    default: Option<T>,
) -> Result<T, String> {
    match flags.get(name) {
        Some(text) => text
            .parse::<T>()
            .map_err(|_| format!("bad value for --{name}: `{text}`")),
        None => default.ok_or_else(|| format!("missing required flag --{name}")),
    }
}

fn cmd_run(args: &[String]) -> Result<ExitCode, String> {
    let flags = parse_flags(args, &["config"], &[])?;
    let path: String = get_parsed(&flags, "config", None)?;
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read {path}: {e}"))?;
    let spec = match parse_config(&text) {
        Ok(spec) => spec,
        Err(e) => return Err(e.to_string()),
    };
    match run(&spec) {
        Ok(summary) => {
            for file in &summary.files {
                println!("wrote {}", file.display());
            }
            println!(
                "{}: {} trials, {} diverged",
                spec.scenario, summary.total_trials, summary.diverged_trials
            );
            if summary.diverged_trials == summary.total_trials {
                Ok(ExitCode::from(2))
            } else {
                Ok(ExitCode::SUCCESS)
            }
        }
        Err(Error::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_spectrum(args: &[String]) -> Result<ExitCode, String> {
    let flags = parse_flags(
        args,
        &[
            "kind",
            "T",
            "d",
            "d-qk",
            "sigma-a",
            "sigma-qk",
            "seed",
            "threshold",
            "out",
        ],
        &["remove-gap"],
    )?;
    let kind: EnsembleKind = get_parsed(&flags, "kind", None)?;
    let t: usize = get_parsed(&flags, "T", None)?;
    let d: usize = get_parsed(&flags, "d", Some(t))?;
    let d_qk: usize = get_parsed(&flags, "d-qk", Some(d))?;
    let sigma_a: f64 = get_parsed(&flags, "sigma-a", Some(1.0))?;
    let sigma_qk: f64 = get_parsed(&flags, "sigma-qk", Some(1.0))?;
    let seed: u64 = get_parsed(&flags, "seed", Some(0))?;
    let threshold: f64 = get_parsed(&flags, "threshold", Some(0.5))?;
    let out: String = get_parsed(&flags, "out", None)?;
    let strip_gap = flags.contains_key("remove-gap");

    let sigma = match kind {
        EnsembleKind::KeyQueryAttention => sigma_qk,
        _ => sigma_a,
    };
    let spec = EnsembleSpec {
        kind,
        rows: t,
        cols: d,
        sigma,
        d_qk,
        seed,
    };

    let outcome = (|| -> attnspec::Result<serde_json::Value> {
        let mut m = spec.sample()?;
        if strip_gap {
            m = remove_gap(&m)?;
        }
        let summary = summarize(&m, threshold)?;
        Ok(serde_json::json!({
            "artifact": "attnspec",
            "version": env!("CARGO_PKG_VERSION"),
            "prng": RNG_ALGORITHM,
            "ensemble": spec,
            "remove_gap": strip_gap,
            "outlier_threshold": threshold,
            "summary": summary,
        }))
    })();

    match outcome {
        Ok(doc) => {
            std::fs::create_dir_all(&out).map_err(|e| format!("cannot create {out}: {e}"))?;
            let path = std::path::Path::new(&out).join("spectrum.json");
            let text = serde_json::to_string_pretty(&doc).expect("serializable");
            std::fs::write(&path, &text).map_err(|e| format!("cannot write spectrum.json: {e}"))?;
            println!("{text}");
            println!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Err(Error::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            Ok(ExitCode::from(2))
        }
        Err(e) => Err(e.to_string()),
    }
}

fn cmd_predict(args: &[String]) -> Result<ExitCode, String> {
    let flags = parse_flags(args, &["prop", "ell", "sigma-a", "sigma-v", "gamma"], &[])?;
    let prop: String = get_parsed(&flags, "prop", None)?;
    let ell: u32 = get_parsed(&flags, "ell", None)?;
    let sigma_a: f64 = get_parsed(&flags, "sigma-a", Some(1.0))?;
    let sigma_v: f64 = get_parsed(&flags, "sigma-v", Some(1.0))?;
    let gamma: f64 = get_parsed(&flags, "gamma", Some(1.0))?;

    let prediction = match prop.as_str() {
        "cov" => covariance_prediction(ell, sigma_a, sigma_v, gamma),
        "jac" => jacobian_prediction(ell, sigma_a, sigma_v),
        other => return Err(format!("--prop must be cov or jac, got `{other}`")),
    }
    .map_err(|e| e.to_string())?;

    println!(
        "{}",
        serde_json::to_string_pretty(&prediction).expect("serializable")
    );
    Ok(ExitCode::SUCCESS)
}
