//! Spectral filter families `Q_k(λ)`, their residual polynomials
//! `r_k(λ) = 1 - λ Q_k(λ)`, and qualification bounds `ω_μ(k)`.
//!
//! Two families are provided. The Landweber filter
//! `Q_k(λ) = λ^{-1}(1 - (1 - τλ)^k)` is the iteration polynomial of the
//! relaxed fixed-point iteration; the nonlinear multistep family has
//! residual `r_k(λ) = Π_{i=1}^k (1 - λ/τ_{ik})` for a nondecreasing
//! per-step schedule `0 < τ_{1k} ≤ … ≤ τ_{kk} ≤ λ_1`.
//!
//! Evaluation is cancellation-safe at small `λ`: the Landweber filter uses
//! the direct geometric sum for `k ≤ 64` and an `expm1`-based closed form
//! beyond that, while the multistep recurrence
//! `Q_i = Q_{i-1}(1 - λ/τ_i) + 1/τ_i` never forms the difference
//! `(1 - Π(…))/λ` explicitly.

use crate::error::{Error, Result};

/// Direct geometric-sum evaluation is used up to this iteration count.
const DIRECT_SUM_MAX_K: usize = 64;

/// Per-step relaxation schedule of the multistep family.
#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleRule {
    /// `τ_{ik} ≡ τ` for all steps.
    Constant { tau: f64 },
    /// `τ_{ik} = min(first · ratio^{i-1}, λ_1)` with `ratio ≥ 1`.
    Geometric { first: f64, ratio: f64 },
    /// Explicit per-k schedules; entry `k-1` must have length `k`.
    Explicit { schedules: Vec<Vec<f64>> },
}

/// Filter family kind.
#[derive(Debug, Clone, PartialEq)]
pub enum FilterKind {
    Landweber { tau: f64 },
    Multistep { schedule: ScheduleRule },
}

/// A spectral filter family indexed by the iteration count `k ≤ k_max`,
/// valid on the spectral interval `[0, λ_1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    kind: FilterKind,
    k_max: usize,
    lambda1: f64,
}

impl FilterSpec {
    /// Landweber filter with relaxation `τ`; requires `τ λ_1 ≤ 1`.
    pub fn landweber(tau: f64, k_max: usize, lambda1: f64) -> Result<Self> {
        if !(lambda1 > 0.0) || !lambda1.is_finite() {
            return Err(Error::Config(format!("lambda1 must be positive, got {lambda1}")));
        }
        if !(tau > 0.0) || tau * lambda1 > 1.0 + 1e-12 {
            return Err(Error::Config(format!(
                "relaxation must satisfy 0 < tau <= 1/lambda1 = {}, got {tau}",
                1.0 / lambda1
            )));
        }
        if k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        Ok(Self {
            kind: FilterKind::Landweber { tau },
            k_max,
            lambda1,
        })
    }

    /// Landweber with the default relaxation `τ = 1/(2 λ_1) = 1/(2‖A‖²)`.
    pub fn default_landweber(lambda1: f64, k_max: usize) -> Result<Self> {
        Self::landweber(0.5 / lambda1, k_max, lambda1)
    }

    /// Multistep filter; validates the schedule against `λ_1`.
    pub fn multistep(schedule: ScheduleRule, k_max: usize, lambda1: f64) -> Result<Self> {
        if !(lambda1 > 0.0) || !lambda1.is_finite() {
            return Err(Error::Config(format!("lambda1 must be positive, got {lambda1}")));
        }
        if k_max == 0 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        match &schedule {
            ScheduleRule::Constant { tau } => {
                if !(*tau > 0.0) || *tau > lambda1 * (1.0 + 1e-12) {
                    return Err(Error::Config(format!(
                        "constant schedule requires 0 < tau <= lambda1 = {lambda1}, got {tau}"
                    )));
                }
            }
            ScheduleRule::Geometric { first, ratio } => {
                if !(*first > 0.0) || *first > lambda1 * (1.0 + 1e-12) {
                    return Err(Error::Config(format!(
                        "geometric schedule start must lie in (0, lambda1], got {first}"
                    )));
                }
                if !(*ratio >= 1.0) {
                    return Err(Error::Config(format!(
                        "geometric schedule ratio must be >= 1, got {ratio}"
                    )));
                }
            }
            ScheduleRule::Explicit { schedules } => {
                if schedules.len() < k_max {
                    return Err(Error::Config(format!(
                        "explicit schedules cover k <= {}, but k_max = {k_max}",
                        schedules.len()
                    )));
                }
                for (idx, sched) in schedules.iter().enumerate().take(k_max) {
                    let k = idx + 1;
                    if sched.len() != k {
                        return Err(Error::Config(format!(
                            "schedule for k = {k} has {} entries",
                            sched.len()
                        )));
                    }
                    let mut prev = 0.0;
                    for &t in sched {
                        if !(t > 0.0) || t < prev || t > lambda1 * (1.0 + 1e-12) {
                            return Err(Error::Config(format!(
                                "schedule for k = {k} must be nondecreasing in (0, lambda1]"
                            )));
                        }
                        prev = t;
                    }
                }
            }
        }
        Ok(Self {
            kind: FilterKind::Multistep { schedule },
            k_max,
            lambda1,
        })
    }

    /// Multistep with the constant schedule `τ_{ik} ≡ λ_1` (the slowest
    /// admissible choice).
    pub fn default_multistep(lambda1: f64, k_max: usize) -> Result<Self> {
        Self::multistep(ScheduleRule::Constant { tau: lambda1 }, k_max, lambda1)
    }

    pub fn kind(&self) -> &FilterKind {
        &self.kind
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// Landweber relaxation parameter, when applicable.
    pub fn tau(&self) -> Option<f64> {
        match &self.kind {
            FilterKind::Landweber { tau } => Some(*tau),
            FilterKind::Multistep { .. } => None,
        }
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.k_max {
            return Err(Error::Index(format!(
                "iteration index {k} outside 1..={}",
                self.k_max
            )));
        }
        Ok(())
    }

    fn check_lambda(lambda: f64) -> Result<()> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(())
    }

    /// Multistep schedule for iteration count `k`.
    fn schedule_for(&self, k: usize) -> Option<Vec<f64>> {
        match &self.kind {
            FilterKind::Landweber { .. } => None,
            FilterKind::Multistep { schedule } => Some(match schedule {
                ScheduleRule::Constant { tau } => vec![*tau; k],
                ScheduleRule::Geometric { first, ratio } => (0..k)
                    .map(|i| (first * ratio.powi(i as i32)).min(self.lambda1))
                    .collect(),
                ScheduleRule::Explicit { schedules } => schedules[k - 1].clone(),
            }),
        }
    }

    /// Sum of inverse relaxation steps `S_k = Σ_i τ_{ik}^{-1}`; for the
    /// Landweber family this is `τ k` (the multistep view of the same
    /// iteration). Drives the multistep rate bound.
    pub fn schedule_sum(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        Ok(match &self.kind {
            FilterKind::Landweber { tau } => tau * k as f64,
            FilterKind::Multistep { schedule } => match schedule {
                ScheduleRule::Constant { tau } => k as f64 / tau,
                _ => self
                    .schedule_for(k)
                    .expect("multistep schedule")
                    .iter()
                    .map(|t| 1.0 / t)
                    .sum(),
            },
        })
    }

    /// Filter value `Q_k(λ)`; at `λ = 0` the analytic limit (`τk` for
    /// Landweber, `Σ τ_{ik}^{-1}` for multistep).
    pub fn q_value(&self, k: usize, lambda: f64) -> Result<f64> {
        self.check_index(k)?;
        Self::check_lambda(lambda)?;
        Ok(match &self.kind {
            FilterKind::Landweber { tau } => landweber_q(*tau, k, lambda),
            FilterKind::Multistep { schedule } => match schedule {
                // Constant schedule factorizes exactly like Landweber with
                // relaxation 1/tau.
                ScheduleRule::Constant { tau } => landweber_q(1.0 / tau, k, lambda),
                _ => {
                    let sched = self.schedule_for(k).expect("multistep schedule");
                    multistep_q(&sched, lambda)
                }
            },
        })
    }

    /// Residual value `r_k(λ) = 1 - λ Q_k(λ)`.
    pub fn residual_value(&self, k: usize, lambda: f64) -> Result<f64> {
        self.check_index(k)?;
        Self::check_lambda(lambda)?;
        Ok(match &self.kind {
            FilterKind::Landweber { tau } => residual_power(tau * lambda, k),
            FilterKind::Multistep { schedule } => match schedule {
                ScheduleRule::Constant { tau } => residual_power(lambda / tau, k),
                _ => self
                    .schedule_for(k)
                    .expect("multistep schedule")
                    .iter()
                    .map(|t| 1.0 - lambda / t)
                    .product(),
            },
        })
    }

    /// `sup_λ |Q_k(λ)| = Q_k(0)` under the monotonicity hypotheses.
    pub fn sup_q(&self, k: usize) -> Result<f64> {
        self.check_index(k)?;
        match &self.kind {
            FilterKind::Landweber { tau } => Ok(tau * k as f64),
            FilterKind::Multistep { .. } => self.schedule_sum(k),
        }
    }

    /// Both closed-form qualification bounds on `sup λ^μ |r_k(λ)|`.
    pub fn qualification_variants(&self, mu: f64, k: usize) -> Result<QualificationVariants> {
        self.check_index(k)?;
        if !(mu > 0.0) {
            return Err(Error::Domain(format!(
                "qualification exponent mu must be positive, got {mu}"
            )));
        }
        let q_zero = self.sup_q(k)?;
        let q_zero_form = mu.powf(mu) / (mu + 1.0) * q_zero.powf(-mu);
        let residual_maximizer_form = match &self.kind {
            FilterKind::Landweber { tau } => {
                Some((mu / (tau * std::f64::consts::E)).powf(mu) * (k as f64).powf(-mu))
            }
            FilterKind::Multistep { .. } => None,
        };
        Ok(QualificationVariants {
            residual_maximizer_form,
            q_zero_form,
        })
    }

    /// Qualification bound `ω_μ(k)`: the tighter of the available closed
    /// forms (the residual-maximizer form for Landweber, the `Q_k(0)^{-μ}`
    /// form for the multistep family).
    pub fn qualification_bound(&self, mu: f64, k: usize) -> Result<f64> {
        Ok(self.qualification_variants(mu, k)?.tighter())
    }

    /// Indices of eigenvalues above the first relaxation step `τ_{1k}`,
    /// where the multistep residual factors may leave `[0, 1)`. Empty for
    /// Landweber filters with `τ λ_1 ≤ 1`.
    pub fn flagged_eigenvalues(&self, k: usize, lambdas: &[f64]) -> Vec<usize> {
        match self.schedule_for(k.min(self.k_max).max(1)) {
            None => Vec::new(),
            Some(sched) => {
                let tau1 = sched[0];
                lambdas
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| **l > tau1)
                    .map(|(j, _)| j)
                    .collect()
            }
        }
    }
}

/// The two implemented closed forms for `ω_μ(k)`; where both apply the
/// tighter one is reported and both stay available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualificationVariants {
    /// `(μ/(τe))^μ k^{-μ}`, from maximizing `λ^μ (1-τλ)^k` (Landweber only).
    pub residual_maximizer_form: Option<f64>,
    /// `μ^μ (μ+1)^{-1} Q_k(0)^{-μ}`.
    pub q_zero_form: f64,
}

impl QualificationVariants {
    pub fn tighter(&self) -> f64 {
        match self.residual_maximizer_form {
            Some(v) => v.min(self.q_zero_form),
            None => self.q_zero_form,
        }
    }
}

/// Qualification of a filter family: the map `k → ω_μ(k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Qualification {
    pub mu: f64,
    pub filter: FilterSpec,
}

impl Qualification {
    pub fn new(mu: f64, filter: FilterSpec) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::Domain(format!("mu must be positive, got {mu}")));
        }
        Ok(Self { mu, filter })
    }

    pub fn omega(&self, k: usize) -> Result<f64> {
        self.filter.qualification_bound(self.mu, k)
    }
}

/// `(1 - x)^k` without drift for large `k`.
fn residual_power(x: f64, k: usize) -> f64 {
    let base = 1.0 - x;
    if k <= DIRECT_SUM_MAX_K || base <= 0.0 {
        base.powi(k as i32)
    } else {
        (k as f64 * base.ln()).exp()
    }
}

/// Landweber filter value; direct sum for small `k`, `expm1` closed form
/// beyond that to avoid cancellation at small `τλ`.
fn landweber_q(tau: f64, k: usize, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return tau * k as f64;
    }
    if k <= DIRECT_SUM_MAX_K {
        landweber_q_sum(tau, k, lambda)
    } else {
        landweber_q_closed(tau, k, lambda)
    }
}

/// Direct geometric sum `τ Σ_{j<k} (1-τλ)^j`.
pub(crate) fn landweber_q_sum(tau: f64, k: usize, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return tau * k as f64;
    }
    let base = 1.0 - tau * lambda;
    let mut acc = 0.0;
    let mut pow = 1.0;
    for _ in 0..k {
        acc += pow;
        pow *= base;
    }
    tau * acc
}

/// Closed form `(1 - (1-τλ)^k)/λ` in `expm1`/`ln_1p` arithmetic.
pub(crate) fn landweber_q_closed(tau: f64, k: usize, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return tau * k as f64;
    }
    let x = tau * lambda;
    if x >= 1.0 {
        // (1 - (1-x)^k)/lambda with 1-x <= 0: fall back to the power form.
        return (1.0 - (1.0 - x).powi(k as i32)) / lambda;
    }
    -f64::exp_m1(k as f64 * f64::ln_1p(-x)) / lambda
}

/// Multistep recurrence `Q_i = Q_{i-1}(1 - λ/τ_i) + 1/τ_i`, which keeps
/// `λ Q_i + r_i = 1` exactly without forming the small difference.
fn multistep_q(schedule: &[f64], lambda: f64) -> f64 {
    let mut q = 0.0;
    for &t in schedule {
        q = q * (1.0 - lambda / t) + 1.0 / t;
    }
    q
}
