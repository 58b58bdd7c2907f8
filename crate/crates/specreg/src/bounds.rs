//! Computable right-hand sides of the risk statements: the bias-variance
//! bound, the oracle inequality with its remainder series, the
//! concentration tail, the Landweber and multistep rate bounds, and the
//! optimal-rate exponent.
//!
//! Each bound reports its value together with the named inputs and the
//! per-term breakdown, so a stored report can be audited and recomputed.
//! Two free constants come from the theory without a formula: the norm
//! constant `C` of the oracle inequality and the tail constant `d` of the
//! concentration lemma. Both are explicit inputs with default 1.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which closed form of the rate-bound bias constant to use. The corollary
/// statements carry first-power constants while their derivations produce
/// the squared forms; the squared (derivation) forms are the default and
/// the statement forms stay available behind this switch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConstantVariant {
    #[default]
    Derivation,
    Statement,
}

/// Kinds of reportable bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    BiasVariance,
    Oracle,
    LandweberRate,
    MultistepRate,
    Tail,
    OptimalRateExponent,
}

/// A computed bound with its inputs and per-term breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub inputs: BTreeMap<String, f64>,
    pub value: f64,
    pub breakdown: Vec<(String, f64)>,
}

impl BoundReport {
    pub fn term(&self, name: &str) -> Option<f64> {
        self.breakdown
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

fn inputs_from(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Bias-variance risk bound `2 ω_μ(k)² ρ² + 2 σ² Tr(Q_k²(A*A) A A*)`.
pub fn bias_variance_bound(
    omega_mu_k: f64,
    source_rho: f64,
    sigma2: f64,
    trace_term: f64,
) -> Result<BoundReport> {
    for (name, v) in [
        ("omega_mu_k", omega_mu_k),
        ("source_rho", source_rho),
        ("sigma2", sigma2),
        ("trace_term", trace_term),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::Domain(format!("{name} must be finite and >= 0, got {v}")));
        }
    }
    let bias_term = 2.0 * omega_mu_k * omega_mu_k * source_rho * source_rho;
    let variance_term = 2.0 * sigma2 * trace_term;
    let value = bias_term + variance_term;
    Ok(BoundReport {
        kind: BoundKind::BiasVariance,
        inputs: inputs_from(&[
            ("omega_mu_k", omega_mu_k),
            ("source_rho", source_rho),
            ("sigma2", sigma2),
            ("trace_term", trace_term),
        ]),
        value,
        breakdown: vec![
            ("bias_term".into(), bias_term),
            ("variance_term".into(), variance_term),
        ],
    })
}

/// Variance constant `c₂ = (2p+1)^{-1} ((2p+1)/(2p-1))^{(2p+1)/(4p)}`.
pub fn variance_rate_constant(p: f64) -> Result<f64> {
    if !(p > 0.5) {
        return Err(Error::Domain(format!(
            "variance integral diverges unless p > 1/2, got {p}"
        )));
    }
    let ratio = (2.0 * p + 1.0) / (2.0 * p - 1.0);
    Ok(ratio.powf((2.0 * p + 1.0) / (4.0 * p)) / (2.0 * p + 1.0))
}

/// Landweber risk-rate bound
/// `2 c₁ k^{-2μ} + 2 c₂ (σ²/n) (τk)^{(2p+1)/2p}` with
/// `c₁ = ρ² (μ/(τe))^{2μ}` (derivation form).
#[allow(clippy::too_many_arguments)]
pub fn landweber_rate_bound(
    k: usize,
    mu: f64,
    p: f64,
    tau: f64,
    source_rho: f64,
    sigma2: f64,
    n: usize,
    variant: RateConstantVariant,
) -> Result<BoundReport> {
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    if k == 0 || n == 0 {
        return Err(Error::Domain("k and n must be at least 1".into()));
    }
    let c2 = variance_rate_constant(p)?;
    let base = mu / (tau * std::f64::consts::E);
    let c1 = match variant {
        RateConstantVariant::Derivation => source_rho * source_rho * base.powf(2.0 * mu),
        RateConstantVariant::Statement => source_rho * source_rho * base.powf(mu),
    };
    let kf = k as f64;
    let bias_term = 2.0 * c1 * kf.powf(-2.0 * mu);
    let variance_term =
        2.0 * c2 * sigma2 / n as f64 * (tau * kf).powf((2.0 * p + 1.0) / (2.0 * p));
    let value = bias_term + variance_term;
    Ok(BoundReport {
        kind: BoundKind::LandweberRate,
        inputs: inputs_from(&[
            ("k", k as f64),
            ("mu", mu),
            ("p", p),
            ("tau", tau),
            ("source_rho", source_rho),
            ("sigma2", sigma2),
            ("n", n as f64),
        ]),
        value,
        breakdown: vec![
            ("c1".into(), c1),
            ("c2".into(), c2),
            ("bias_term".into(), bias_term),
            ("variance_term".into(), variance_term),
        ],
    })
}

/// Multistep risk-rate bound
/// `2 c₁ S_k^{-2μ} + 2 c₂ (σ²/n) S_k^{(2p+1)/2p}` for
/// `S_k = Σ_i τ_{ik}^{-1}`, with `c₁ = ρ² μ^{2μ} (μ+1)^{-2}`
/// (derivation form).
pub fn multistep_rate_bound(
    schedule_sum: f64,
    mu: f64,
    p: f64,
    source_rho: f64,
    sigma2: f64,
    n: usize,
    variant: RateConstantVariant,
) -> Result<BoundReport> {
    if !(schedule_sum > 0.0) {
        return Err(Error::Domain(format!(
            "schedule sum must be positive, got {schedule_sum}"
        )));
    }
    if !(mu > 0.0) {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    if n == 0 {
        return Err(Error::Domain("n must be at least 1".into()));
    }
    let c2 = variance_rate_constant(p)?;
    let c1 = match variant {
        RateConstantVariant::Derivation => {
            source_rho * source_rho * mu.powf(2.0 * mu) / ((mu + 1.0) * (mu + 1.0))
        }
        RateConstantVariant::Statement => source_rho * source_rho * mu.powf(mu) / (mu + 1.0),
    };
    let bias_term = 2.0 * c1 * schedule_sum.powf(-2.0 * mu);
    let variance_term =
        2.0 * c2 * sigma2 / n as f64 * schedule_sum.powf((2.0 * p + 1.0) / (2.0 * p));
    let value = bias_term + variance_term;
    Ok(BoundReport {
        kind: BoundKind::MultistepRate,
        inputs: inputs_from(&[
            ("schedule_sum", schedule_sum),
            ("mu", mu),
            ("p", p),
            ("source_rho", source_rho),
            ("sigma2", sigma2),
            ("n", n as f64),
        ]),
        value,
        breakdown: vec![
            ("c1".into(), c1),
            ("c2".into(), c2),
            ("bias_term".into(), bias_term),
            ("variance_term".into(), variance_term),
        ],
    })
}

/// Per-index inputs of the oracle-inequality right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OraclePerK {
    pub k: usize,
    /// `‖f̃_m - f_k‖²` at the deterministic candidate (the noiseless filter
    /// output).
    pub bias_sq: f64,
    /// `pen(α_k)`.
    pub pen: f64,
    /// `Tr(R_kᵗR_k) / ρ²(R_k)`.
    pub trace_ratio: f64,
    /// `n ρ²(R_k)` (independent of `n` for orthonormal designs).
    pub n_rho2: f64,
    /// Complexity weight `L_k`.
    pub l_k: f64,
}

/// Oracle-inequality right-hand side
/// `(1-ν)^{-1} inf_k [C (1+ν) bias²_k + 2 pen_k] + C₁(d)/n` with
/// `C₁(d) = 4σ² Σ_k (n ρ²_k / d) [√(d r L_k (Tr/ρ² + 1)) + 1]
///           exp(-√(d r L_k (Tr/ρ² + 1)))`.
#[allow(clippy::too_many_arguments)]
pub fn oracle_rhs(
    per_k: &[OraclePerK],
    nu: f64,
    c_upper: f64,
    d: f64,
    r: f64,
    sigma2: f64,
    n: usize,
) -> Result<BoundReport> {
    if !(nu > 0.0 && nu < 1.0) {
        return Err(Error::Config(format!("nu must lie in (0, 1), got {nu}")));
    }
    if !(d > 0.0) {
        return Err(Error::Config(format!("d must be positive, got {d}")));
    }
    if !(r > 2.0) {
        return Err(Error::Config(format!("r must exceed 2, got {r}")));
    }
    if per_k.is_empty() {
        return Err(Error::Config("oracle_rhs needs at least one candidate".into()));
    }
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }

    let mut inf_term = f64::INFINITY;
    let mut inf_k = 0usize;
    let mut remainder_sum = 0.0;
    for row in per_k {
        let candidate = c_upper * (1.0 + nu) * row.bias_sq + 2.0 * row.pen;
        if candidate < inf_term {
            inf_term = candidate;
            inf_k = row.k;
        }
        let arg = (d * r * row.l_k * (row.trace_ratio + 1.0)).sqrt();
        remainder_sum += row.n_rho2 / d * (arg + 1.0) * (-arg).exp();
    }
    let c1_of_d = 4.0 * sigma2 * remainder_sum;
    let value = inf_term / (1.0 - nu) + c1_of_d / n as f64;
    if !value.is_finite() {
        return Err(Error::Numeric("oracle_rhs is not finite".into()));
    }
    Ok(BoundReport {
        kind: BoundKind::Oracle,
        inputs: inputs_from(&[
            ("nu", nu),
            ("c", c_upper),
            ("d", d),
            ("r", r),
            ("sigma2", sigma2),
            ("n", n as f64),
        ]),
        value,
        breakdown: vec![
            ("inf_term".into(), inf_term),
            ("inf_k".into(), inf_k as f64),
            ("c1_of_d".into(), c1_of_d),
            ("c1_over_n".into(), c1_of_d / n as f64),
        ],
    })
}

/// Concentration tail
/// `exp(-√(d (u/ρ + (r/2) L (Tr/ρ + 1))))` bounding
/// `P(‖Aε‖² ≥ σ² (r/2)(1+L)(Tr + ρ) + σ² u)`.
pub fn concentration_tail(trace: f64, radius: f64, r: f64, l: f64, u: f64, d: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("radius must be positive, got {radius}")));
    }
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("u must be >= 0, got {u}")));
    }
    if !(d > 0.0) || !(l >= 0.0) || !(r >= 0.0) || !(trace >= 0.0) {
        return Err(Error::Domain(
            "tail bound needs d > 0 and nonnegative r, L, trace".into(),
        ));
    }
    let inside = d * (u / radius + r / 2.0 * l * (trace / radius + 1.0));
    Ok((-inside.sqrt()).exp())
}

/// Report form of [`concentration_tail`] for emission.
pub fn concentration_tail_report(
    trace: f64,
    radius: f64,
    r: f64,
    l: f64,
    u: f64,
    d: f64,
) -> Result<BoundReport> {
    let value = concentration_tail(trace, radius, r, l, u, d)?;
    // The threshold is reported per unit sigma^2.
    let threshold = r / 2.0 * (1.0 + l) * (trace + radius) + u;
    Ok(BoundReport {
        kind: BoundKind::Tail,
        inputs: inputs_from(&[
            ("trace", trace),
            ("radius", radius),
            ("r", r),
            ("l", l),
            ("u", u),
            ("d", d),
        ]),
        value,
        breakdown: vec![("threshold_per_sigma2".into(), threshold)],
    })
}

/// Optimal convergence-rate exponent `4μp / (4μp + 2p + 1)`, so the risk
/// decays as `n^{-exponent}`. Matches the Hilbert-scale form
/// `2s/(2s + 2p + 1)` with `s = 2μp`.
pub fn optimal_rate_exponent(p: f64, mu: f64) -> f64 {
    debug_assert!(p > 0.5, "rate exponent needs p > 1/2");
    debug_assert!(mu >= 0.0);
    4.0 * mu * p / (4.0 * mu * p + 2.0 * p + 1.0)
}
