//! Experiment configuration: a single JSON document with problem, filter,
//! penalty, and run blocks. Every field has a default, so a minimal or
//! empty document describes the default experiment; optional fields
//! (`d_m`, `tau`, `k_max`) resolve per sample size at build time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NoiseKind;
use crate::selector::LSequence;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemBlock {
    /// Ill-posedness exponent of the spectrum `σ_j = j^{-p}`.
    pub p: f64,
    /// Fixed model dimension; `null` resolves to `⌈n^{1/(2p+1)}⌉`.
    pub d_m: Option<usize>,
    /// Sample sizes to run.
    pub n_list: Vec<usize>,
    /// Smoothness exponent of the source condition.
    pub mu: f64,
    /// Source-set radius `ρ`.
    pub source_rho: f64,
    pub noise_kind: NoiseKind,
    pub sigma: f64,
    /// Extra truth mass outside the model span (dimension count and norm).
    pub tail_dims: usize,
    pub tail_scale: f64,
}

impl Default for ProblemBlock {
    fn default() -> Self {
        Self {
            p: 1.0,
            d_m: None,
            n_list: vec![250, 1000, 4000, 16000],
            mu: 0.5,
            source_rho: 1.0,
            noise_kind: NoiseKind::Gaussian,
            sigma: 0.1,
            tail_dims: 0,
            tail_scale: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKindConfig {
    Landweber,
    Multistep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleConfig {
    /// `τ_{ik} ≡ λ_1`, the slowest admissible constant schedule.
    ConstantLambda1,
    /// Explicit constant value.
    Constant(f64),
    /// Geometric growth from `first` (default `λ_1/4`) with the given
    /// ratio, clamped at `λ_1`.
    Geometric { first: Option<f64>, ratio: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterBlock {
    pub kind: FilterKindConfig,
    /// Landweber relaxation; `null` resolves to `1/(2λ_1)`.
    pub tau: Option<f64>,
    pub schedule: ScheduleConfig,
    /// Candidate-set ceiling; `null` resolves to `min(n, 10^4)`.
    pub k_max: Option<usize>,
}

impl Default for FilterBlock {
    fn default() -> Self {
        Self {
            kind: FilterKindConfig::Landweber,
            tau: None,
            schedule: ScheduleConfig::ConstantLambda1,
            k_max: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Source {
    /// Use the configured noise variance (σ² is treated as known).
    Known,
    /// Plug-in estimate from the top-half spectrum residuals.
    Plugin,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyBlock {
    pub r: f64,
    pub l_rule: LSequence,
    pub sigma2: Sigma2Source,
}

impl Default for PenaltyBlock {
    fn default() -> Self {
        Self {
            r: 2.5,
            l_rule: LSequence::Log,
            sigma2: Sigma2Source::Known,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunBlock {
    pub replicates: usize,
    pub base_seed: u64,
    /// Worker threads for the replicate fan-out; 0 uses the global pool.
    pub workers: usize,
    pub out_dir: String,
    pub format: OutputFormat,
    /// Dump the per-k selection trace of every replicate.
    pub dump_traces: bool,
}

impl Default for RunBlock {
    fn default() -> Self {
        Self {
            replicates: 200,
            base_seed: 20260809,
            workers: 0,
            out_dir: "out".into(),
            format: OutputFormat::Csv,
            dump_traces: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemBlock,
    pub filter: FilterBlock,
    pub penalty: PenaltyBlock,
    pub run: RunBlock,
    /// Oracle-inequality reporting constant ν ∈ (0, 1).
    pub nu: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemBlock::default(),
            filter: FilterBlock::default(),
            penalty: PenaltyBlock::default(),
            run: RunBlock::default(),
            nu: 0.5,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form, identifying a run setup.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if !(p.p > 0.5) {
            return Err(Error::Config(format!(
                "problem.p must exceed 1/2, got {}",
                p.p
            )));
        }
        if !(p.mu >= 0.0) {
            return Err(Error::Config(format!("problem.mu must be >= 0, got {}", p.mu)));
        }
        if !(p.source_rho > 0.0) {
            return Err(Error::Config(format!(
                "problem.source_rho must be positive, got {}",
                p.source_rho
            )));
        }
        if !(p.sigma >= 0.0) {
            return Err(Error::Config(format!(
                "problem.sigma must be >= 0, got {}",
                p.sigma
            )));
        }
        if p.n_list.is_empty() {
            return Err(Error::Config("problem.n_list is empty".into()));
        }
        if p.n_list.iter().any(|n| *n == 0) {
            return Err(Error::Config("problem.n_list entries must be >= 1".into()));
        }
        if let Some(d) = p.d_m {
            if d == 0 {
                return Err(Error::Config("problem.d_m must be >= 1".into()));
            }
            if let Some(&n) = p.n_list.iter().find(|&&n| d + p.tail_dims > n) {
                return Err(Error::Config(format!(
                    "problem.d_m = {d} (+ {} tail) is infeasible for n = {n}",
                    p.tail_dims
                )));
            }
        }
        if !(p.tail_scale >= 0.0) {
            return Err(Error::Config("problem.tail_scale must be >= 0".into()));
        }

        if let Some(tau) = self.filter.tau {
            if !(tau > 0.0) {
                return Err(Error::Config(format!("filter.tau must be positive, got {tau}")));
            }
        }
        if let Some(k_max) = self.filter.k_max {
            if k_max == 0 {
                return Err(Error::Config("filter.k_max must be >= 1".into()));
            }
        }
        if let ScheduleConfig::Geometric { first, ratio } = &self.filter.schedule {
            if let Some(f) = first {
                if !(*f > 0.0) {
                    return Err(Error::Config("schedule.first must be positive".into()));
                }
            }
            if !(*ratio >= 1.0) {
                return Err(Error::Config(format!(
                    "schedule.ratio must be >= 1, got {ratio}"
                )));
            }
        }

        if !(self.penalty.r > 2.0) {
            return Err(Error::Config(format!(
                "penalty.r must exceed 2, got {}",
                self.penalty.r
            )));
        }
        if let Sigma2Source::Fixed(v) = self.penalty.sigma2 {
            if !(v >= 0.0) {
                return Err(Error::Config("penalty.sigma2 must be >= 0".into()));
            }
        }
        if let LSequence::Constant(c) = self.penalty.l_rule {
            if !(c >= 0.0) {
                return Err(Error::Config("penalty.l_rule constant must be >= 0".into()));
            }
        }

        if self.run.replicates == 0 {
            return Err(Error::Config("run.replicates must be >= 1".into()));
        }
        if !(self.nu > 0.0 && self.nu < 1.0) {
            return Err(Error::Config(format!("nu must lie in (0, 1), got {}", self.nu)));
        }
        Ok(())
    }

    /// Model dimension for a given sample size (the configured value, or
    /// the minimum admissible dimension rule).
    pub fn resolve_d_m(&self, n: usize) -> usize {
        self.problem
            .d_m
            .unwrap_or_else(|| crate::model::min_dimension(n, self.problem.p))
    }

    /// Candidate-set ceiling for a given sample size.
    pub fn resolve_k_max(&self, n: usize) -> usize {
        self.filter.k_max.unwrap_or_else(|| n.min(10_000)).max(1)
    }
}

impl ProblemBlock {
    pub fn noise_model(&self) -> Result<crate::model::NoiseModel> {
        crate::model::NoiseModel::new(self.noise_kind, self.sigma)
    }
}
