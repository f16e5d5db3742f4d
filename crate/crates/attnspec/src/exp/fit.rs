//! Ordinary least squares on log-log axes, turning asymptotic rates into
//! testable slopes.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct LoglogFit {
    pub slope: f64,
    pub intercept: f64,
    /// Largest absolute residual in log space.
    pub max_residual: f64,
}

/// Fit `log y = slope * log x + intercept`. Requires at least three strictly
/// positive points.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<LoglogFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput(
            "xs and ys must have equal length".into(),
        ));
    }
    if xs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "need >= 3 points, got {}",
            xs.len()
        )));
    }
    if xs
        .iter()
        .chain(ys.iter())
        .any(|&v| !(v > 0.0) || !v.is_finite())
    {
        return Err(Error::InvalidInput(
            "log-log fit requires strictly positive finite values".into(),
        ));
    }

    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all x values coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_residual = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - (slope * x + intercept)).abs())
        .fold(0.0f64, f64::max);
    Ok(LoglogFit {
        slope,
        intercept,
        max_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_has_slope_two() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x).collect();
        let fit = fit_loglog_slope(&xs, &ys).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-10);
        assert!(fit.max_residual < 1e-10);
    }

    #[test]
    fn constant_has_slope_zero() {
        let xs = [1.0, 3.0, 9.0];
        let ys = [5.0, 5.0, 5.0];
        let fit = fit_loglog_slope(&xs, &ys).unwrap();
        assert!(fit.slope.abs() < 1e-12);
    }

    #[test]
    fn inverse_cubic_has_slope_minus_three() {
        let xs = [2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x| 7.0 / (x * x * x)).collect();
        let fit = fit_loglog_slope(&xs, &ys).unwrap();
        assert!((fit.slope + 3.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_loglog_slope(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_loglog_slope(&[1.0, 2.0, 0.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_loglog_slope(&[1.0, 2.0, 3.0], &[1.0, -2.0, 3.0]).is_err());
    }
}
