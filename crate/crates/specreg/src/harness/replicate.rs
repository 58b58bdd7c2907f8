//! Seeded Monte Carlo replication: one replicate draws noise, selects the
//! stopping index, and measures losses against the projected truth; a run
//! fans replicates out over a bounded worker pool with an ordered
//! reduction, so parallel and serial execution produce identical reports.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::model::{make_diagonal_problem, DiagonalProblemParams, Problem};
use crate::selector::{estimate_sigma2_plugin, FilterGrid, PenaltyConfig, SelectionTrace};

use super::config::{ExperimentConfig, FilterKindConfig, ScheduleConfig, Sigma2Source};

/// Everything shared by the replicates of one `(config, n)` run.
pub struct ProblemContext {
    pub problem: Problem,
    pub filter: FilterSpec,
    pub grid: FilterGrid,
    pub k_grid: Vec<usize>,
    pub n: usize,
    pub d_m: usize,
    pub k_max: usize,
    /// Resolved Landweber relaxation, when the filter is Landweber.
    pub tau: Option<f64>,
    cfg: ExperimentConfig,
}

impl ProblemContext {
    pub fn build(cfg: &ExperimentConfig, n: usize) -> Result<Self> {
        cfg.validate()?;
        let d_m = cfg.resolve_d_m(n);
        let k_max = cfg.resolve_k_max(n);

        let mut params = DiagonalProblemParams::new(cfg.problem.p, d_m, n, cfg.run.base_seed);
        params.mu = cfg.problem.mu;
        params.source_rho = cfg.problem.source_rho;
        params.noise = cfg.problem.noise_model()?;
        params.tail_dims = cfg.problem.tail_dims;
        params.tail_scale = cfg.problem.tail_scale;
        let problem = make_diagonal_problem(&params)?;

        let lambda1 = problem.system.lambda_max();
        let filter = match cfg.filter.kind {
            FilterKindConfig::Landweber => {
                let tau = cfg.filter.tau.unwrap_or(0.5 / lambda1);
                FilterSpec::landweber(tau, k_max, lambda1)?
            }
            FilterKindConfig::Multistep => {
                let schedule = match &cfg.filter.schedule {
                    ScheduleConfig::ConstantLambda1 => {
                        crate::filters::ScheduleRule::Constant { tau: lambda1 }
                    }
                    ScheduleConfig::Constant(tau) => {
                        crate::filters::ScheduleRule::Constant { tau: *tau }
                    }
                    ScheduleConfig::Geometric { first, ratio } => {
                        crate::filters::ScheduleRule::Geometric {
                            first: first.unwrap_or(lambda1 / 4.0),
                            ratio: *ratio,
                        }
                    }
                };
                FilterSpec::multistep(schedule, k_max, lambda1)?
            }
        };

        let k_grid: Vec<usize> = (1..=k_max).collect();
        let grid = FilterGrid::new(&problem.system, &filter, &k_grid)?;
        let tau = filter.tau();
        Ok(Self {
            problem,
            filter,
            grid,
            k_grid,
            n,
            d_m,
            k_max,
            tau,
            cfg: cfg.clone(),
        })
    }

    /// Penalty configuration for one replicate; the variance source may be
    /// data-dependent (plug-in), so it can differ across replicates.
    fn penalty_for(&self, y: &DVector<f64>) -> Result<PenaltyConfig> {
        let sigma2 = match self.cfg.penalty.sigma2 {
            Sigma2Source::Known => self.problem.noise_sigma().powi(2),
            Sigma2Source::Fixed(v) => v,
            Sigma2Source::Plugin => estimate_sigma2_plugin(&self.problem.system, y)?,
        };
        PenaltyConfig::new(
            self.cfg.penalty.r,
            self.cfg.penalty.l_rule,
            sigma2,
            self.k_grid.clone(),
        )
    }
}

/// Outcome of a single replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub index: usize,
    pub seed: u64,
    pub k_hat: usize,
    /// `‖f̃_m - f̂_{k̂}‖²` against the projected truth.
    pub loss_khat: f64,
    /// Loss against the unprojected truth (adds the tail mass).
    pub loss_khat_full: f64,
    /// `argmin_k` of the realized loss over the candidate grid.
    pub oracle_k: usize,
    pub loss_oracle: f64,
    pub objective_at_khat: f64,
}

fn losses_over_grid(ctx: &ProblemContext, data_coeffs: &DVector<f64>) -> Vec<f64> {
    let truth = &ctx.problem.truth_coeffs;
    let rank = ctx.grid.lambdas().len();
    ctx.k_grid
        .iter()
        .enumerate()
        .map(|(gi, _)| {
            let mut loss = 0.0;
            for j in 0..rank {
                let diff = truth[j] - ctx.grid.estimate_coefficient(gi, j, data_coeffs[j]);
                loss += diff * diff;
            }
            loss
        })
        .collect()
}

/// Runs one replicate in a shared context and returns its selection trace.
pub fn run_replicate_traced(
    ctx: &ProblemContext,
    index: usize,
    seed: u64,
) -> Result<(ReplicateResult, SelectionTrace)> {
    let eps = ctx.problem.noise.sample(ctx.n, seed);
    let y = ctx.problem.observe_truth(&eps)?;
    let data_coeffs = ctx.problem.system.data_coefficients(&y)?;
    let pc = ctx.penalty_for(&y)?;
    let trace = ctx.grid.select(&data_coeffs, &pc)?;

    let losses = losses_over_grid(ctx, &data_coeffs);
    let (oracle_pos, loss_oracle) = losses
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid");
    let khat_pos = ctx
        .k_grid
        .iter()
        .position(|&k| k == trace.k_hat)
        .expect("k_hat lies on the grid");
    let tail_sq = ctx.problem.tail.as_ref().map_or(0.0, |t| t.norm_sq());
    let result = ReplicateResult {
        index,
        seed,
        k_hat: trace.k_hat,
        loss_khat: losses[khat_pos],
        loss_khat_full: losses[khat_pos] + tail_sq,
        oracle_k: ctx.k_grid[oracle_pos],
        loss_oracle,
        objective_at_khat: trace.objective_at_k_hat(),
    };
    Ok((result, trace))
}

/// Runs one replicate in a shared context.
pub fn run_replicate_in(ctx: &ProblemContext, index: usize, seed: u64) -> Result<ReplicateResult> {
    run_replicate_traced(ctx, index, seed).map(|(r, _)| r)
}

/// Builds the problem for `(cfg, n)` and runs a single replicate;
/// deterministic in `(cfg, n, seed)`.
pub fn run_replicate(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<ReplicateResult> {
    let ctx = ProblemContext::build(cfg, n)?;
    run_replicate_in(&ctx, 0, seed)
}

/// Aggregate statistics of a Monte Carlo run. Standard errors are the
/// sample standard deviation over replicates divided by `√R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub mean_adaptive_loss: f64,
    pub se_adaptive_loss: f64,
    pub median_adaptive_loss: f64,
    pub mean_oracle_loss: f64,
    pub se_oracle_loss: f64,
    pub median_oracle_loss: f64,
    pub mean_adaptive_loss_full: f64,
    /// Ratio of adaptive to oracle mean loss (≥ 1 by construction).
    pub adaptive_to_oracle_ratio: f64,
    /// Histogram of selected indices as `(k̂, count)`, ordered by `k̂`.
    pub k_hat_histogram: Vec<(usize, usize)>,
}

pub(crate) fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let r = values.len();
    let mean = values.iter().sum::<f64>() / r as f64;
    if r < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1) as f64;
    (mean, (var / r as f64).sqrt())
}

pub(crate) fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let m = sorted.len();
    if m == 0 {
        f64::NAN
    } else if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

impl Aggregates {
    pub fn from_rows(rows: &[ReplicateResult]) -> Self {
        let adaptive: Vec<f64> = rows.iter().map(|r| r.loss_khat).collect();
        let oracle: Vec<f64> = rows.iter().map(|r| r.loss_oracle).collect();
        let full: Vec<f64> = rows.iter().map(|r| r.loss_khat_full).collect();
        let (mean_adaptive, se_adaptive) = mean_and_se(&adaptive);
        let (mean_oracle, se_oracle) = mean_and_se(&oracle);
        let (mean_full, _) = mean_and_se(&full);

        let mut histogram = std::collections::BTreeMap::new();
        for r in rows {
            *histogram.entry(r.k_hat).or_insert(0usize) += 1;
        }
        Self {
            mean_adaptive_loss: mean_adaptive,
            se_adaptive_loss: se_adaptive,
            median_adaptive_loss: median(&adaptive),
            mean_oracle_loss: mean_oracle,
            se_oracle_loss: se_oracle,
            median_oracle_loss: median(&oracle),
            mean_adaptive_loss_full: mean_full,
            adaptive_to_oracle_ratio: mean_adaptive / mean_oracle,
            k_hat_histogram: histogram.into_iter().collect(),
        }
    }
}

/// Full record of one Monte Carlo experiment at a fixed sample size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub config_hash: String,
    pub n: usize,
    pub d_m: usize,
    pub k_max: usize,
    pub tau: Option<f64>,
    pub replicates: usize,
    pub base_seed: u64,
    pub rows: Vec<ReplicateResult>,
    pub aggregates: Aggregates,
}

/// Runs `R` replicates with seeds `base_seed + i` and aggregates them.
/// Replicates are independent; the reduction is ordered by index, so the
/// report does not depend on the worker count.
pub fn monte_carlo(cfg: &ExperimentConfig, n: usize) -> Result<MonteCarloReport> {
    let ctx = ProblemContext::build(cfg, n)?;
    monte_carlo_in(&ctx, cfg)
}

/// [`monte_carlo`] on an already-built context.
pub fn monte_carlo_in(ctx: &ProblemContext, cfg: &ExperimentConfig) -> Result<MonteCarloReport> {
    if cfg.run.replicates < 2 {
        return Err(Error::Config(
            "monte_carlo needs at least 2 replicates".into(),
        ));
    }
    let rows = run_replicates(ctx, cfg.run.replicates, cfg.run.base_seed, cfg.run.workers)?;
    let aggregates = Aggregates::from_rows(&rows);
    Ok(MonteCarloReport {
        config_hash: cfg.hash(),
        n: ctx.n,
        d_m: ctx.d_m,
        k_max: ctx.k_max,
        tau: ctx.tau,
        replicates: cfg.run.replicates,
        base_seed: cfg.run.base_seed,
        rows,
        aggregates,
    })
}

fn run_replicates(
    ctx: &ProblemContext,
    replicates: usize,
    base_seed: u64,
    workers: usize,
) -> Result<Vec<ReplicateResult>> {
    let job = |i: usize| run_replicate_in(ctx, i, base_seed.wrapping_add(i as u64));
    if workers == 1 {
        (0..replicates).map(job).collect()
    } else if workers == 0 {
        (0..replicates).into_par_iter().map(job).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| (0..replicates).into_par_iter().map(job).collect())
    }
}
