//! Convergence-rate study: Monte Carlo mean losses across a grid of sample
//! sizes, with least-squares slopes of `log(MSE)` against `log n` for both
//! the oracle and the adaptive estimator.

use serde::{Deserialize, Serialize};

use crate::bounds::optimal_rate_exponent;
use crate::error::{Error, Result};

use super::config::ExperimentConfig;
use super::replicate::{monte_carlo, MonteCarloReport};

/// Ordinary least-squares line fit with the slope's standard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
}

/// Least-squares fit of `y = intercept + slope * x`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension("fit_line: mismatched lengths".into()));
    }
    let m = xs.len();
    if m < 2 {
        return Err(Error::Config("fit_line needs at least two points".into()));
    }
    let mf = m as f64;
    let x_bar = xs.iter().sum::<f64>() / mf;
    let y_bar = ys.iter().sum::<f64>() / mf;
    let sxx: f64 = xs.iter().map(|x| (x - x_bar) * (x - x_bar)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("fit_line: degenerate abscissae".into()));
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| (x - x_bar) * (y - y_bar))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let syy: f64 = ys.iter().map(|y| (y - y_bar) * (y - y_bar)).sum();
    let rss: f64 = xs
        .iter()
        .zip(ys.iter())
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - rss / syy };
    let slope_stderr = if m > 2 {
        (rss / (mf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
    })
}

/// Fit of `log y` against `log x`.
pub fn fit_loglog(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.iter().any(|(x, y)| !(*x > 0.0) || !(*y > 0.0)) {
        return Err(Error::Domain(
            "log-log fit needs strictly positive coordinates".into(),
        ));
    }
    let xs: Vec<f64> = points.iter().map(|(x, _)| x.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, y)| y.ln()).collect();
    fit_line(&xs, &ys)
}

/// One sample size of a rate study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub d_m: usize,
    pub mean_oracle_loss: f64,
    pub se_oracle_loss: f64,
    pub mean_adaptive_loss: f64,
    pub se_adaptive_loss: f64,
}

impl RatePoint {
    fn from_report(report: &MonteCarloReport) -> Self {
        Self {
            n: report.n,
            d_m: report.d_m,
            mean_oracle_loss: report.aggregates.mean_oracle_loss,
            se_oracle_loss: report.aggregates.se_oracle_loss,
            mean_adaptive_loss: report.aggregates.mean_adaptive_loss,
            se_adaptive_loss: report.aggregates.se_adaptive_loss,
        }
    }
}

/// Result of a rate study across the configured sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateStudyReport {
    pub config_hash: String,
    /// `4μp/(4μp + 2p + 1)`: the exponent the oracle slope should track
    /// (with a negative sign).
    pub target_exponent: f64,
    pub points: Vec<RatePoint>,
    pub oracle_fit: SlopeFit,
    pub adaptive_fit: SlopeFit,
}

/// Requires at least three sample sizes reaching across two decades
/// (the order of magnitude of `max n` must exceed that of `min n` by 2).
fn validate_n_grid(n_list: &[usize]) -> Result<()> {
    if n_list.len() < 3 {
        return Err(Error::Config(
            "rate study needs at least three sample sizes".into(),
        ));
    }
    let min = *n_list.iter().min().expect("nonempty");
    let max = *n_list.iter().max().expect("nonempty");
    let decades = (max as f64).log10().floor() - (min as f64).log10().floor();
    if decades < 2.0 {
        return Err(Error::Config(format!(
            "rate study needs sample sizes spanning two decades, got {min}..{max}"
        )));
    }
    Ok(())
}

/// Runs one Monte Carlo experiment per sample size and fits both slopes.
pub fn rate_study(cfg: &ExperimentConfig) -> Result<RateStudyReport> {
    cfg.validate()?;
    validate_n_grid(&cfg.problem.n_list)?;
    let mut points = Vec::with_capacity(cfg.problem.n_list.len());
    for &n in &cfg.problem.n_list {
        let report = monte_carlo(cfg, n)?;
        points.push(RatePoint::from_report(&report));
    }
    let oracle_fit = fit_loglog(
        &points
            .iter()
            .map(|p| (p.n as f64, p.mean_oracle_loss))
            .collect::<Vec<_>>(),
    )?;
    let adaptive_fit = fit_loglog(
        &points
            .iter()
            .map(|p| (p.n as f64, p.mean_adaptive_loss))
            .collect::<Vec<_>>(),
    )?;
    Ok(RateStudyReport {
        config_hash: cfg.hash(),
        target_exponent: optimal_rate_exponent(cfg.problem.p, cfg.problem.mu),
        points,
        oracle_fit,
        adaptive_fit,
    })
}
