//! Regularized estimators `f_k = Q_k(A*A) A* y`, the explicit Landweber
//! iteration, the trace/spectral-radius penalty, and the adaptive choice of
//! the stopping index.
//!
//! The stopping index minimizes the filtered residual plus penalty
//!
//! ```text
//! k̂ = argmin_k  ‖R_k (y - A f_k)‖²  +  r σ² (1 + L_k) [Tr(R_kᵗR_k) + ρ²(R_k)]
//! ```
//!
//! with the candidate estimate `f_k = R_k y` plugged into the residual, so
//! the search reduces to a one-dimensional scan over `k`. Ties break toward
//! the smallest `k`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::FilterSpec;
use crate::spectral::{adjoint_apply, DesignMatrix, SingularSystem};

/// A regularized estimate, stored as coefficients in the right singular
/// basis `{φ_j}` together with the iteration index that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub coeffs: DVector<f64>,
    pub k: usize,
}

impl Estimate {
    /// The estimate as a parameter-space vector `Σ_j c_j φ_j`.
    pub fn to_param(&self, s: &SingularSystem) -> Result<DVector<f64>> {
        s.from_basis(&self.coeffs)
    }
}

/// Spectral form of the estimator: coefficient `j` is
/// `Q_k(λ_j) σ_j ⟨y, ψ_j⟩_n`.
pub fn estimate_spectral(
    s: &SingularSystem,
    y: &DVector<f64>,
    filter: &FilterSpec,
    k: usize,
) -> Result<Estimate> {
    let coeffs = s.data_coefficients(y)?;
    estimate_from_coefficients(s, &coeffs, filter, k)
}

/// Same as [`estimate_spectral`] but starting from precomputed data
/// coefficients `c_j = ⟨y, ψ_j⟩_n`.
pub fn estimate_from_coefficients(
    s: &SingularSystem,
    data_coeffs: &DVector<f64>,
    filter: &FilterSpec,
    k: usize,
) -> Result<Estimate> {
    if data_coeffs.len() != s.rank() {
        return Err(Error::Dimension(format!(
            "estimate: {} data coefficients vs rank {}",
            data_coeffs.len(),
            s.rank()
        )));
    }
    let mut coeffs = data_coeffs.clone();
    for (j, sigma) in s.sigmas().iter().enumerate() {
        let q = filter.q_value(k, sigma * sigma)?;
        coeffs[j] *= q * sigma;
    }
    Ok(Estimate { coeffs, k })
}

/// Relaxed Landweber iteration `f_{j+1} = f_j - τ A*(A f_j - y)` driven to a
/// fixed step count. Keeping the iterate and stepping explicitly makes the
/// spectral cross-check cheap to run for every intermediate `k`.
pub struct LandweberIteration<'a> {
    design: &'a DesignMatrix,
    y: &'a DVector<f64>,
    tau: f64,
    state: DVector<f64>,
    steps: usize,
}

impl<'a> LandweberIteration<'a> {
    pub fn new(
        design: &'a DesignMatrix,
        y: &'a DVector<f64>,
        tau: f64,
        f0: DVector<f64>,
    ) -> Result<Self> {
        if y.len() != design.n() {
            return Err(Error::Dimension(format!(
                "landweber: observation length {} vs n = {}",
                y.len(),
                design.n()
            )));
        }
        if f0.len() != design.dim() {
            return Err(Error::Dimension(format!(
                "landweber: start length {} vs dimension {}",
                f0.len(),
                design.dim()
            )));
        }
        let norm_sq = operator_norm_squared(design);
        if !(tau > 0.0) || tau * norm_sq > 1.0 + 1e-6 {
            return Err(Error::Config(format!(
                "relaxation out of range: tau = {tau} but 1/‖A‖² ≈ {}",
                1.0 / norm_sq
            )));
        }
        Ok(Self {
            design,
            y,
            tau,
            state: f0,
            steps: 0,
        })
    }

    pub fn step(&mut self) -> Result<()> {
        let residual = self.design.apply(&self.state)? - self.y;
        let grad = adjoint_apply(self.design, &residual)?;
        self.state.axpy(-self.tau, &grad, 1.0);
        self.steps += 1;
        Ok(())
    }

    pub fn current(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

/// The `k`-step Landweber iterate from start `f0` (defaults to 0 when the
/// caller passes a zero vector, as required for convergence to the
/// minimum-norm solution). `k = 0` returns `f0` unchanged.
pub fn landweber_iterate(
    design: &DesignMatrix,
    y: &DVector<f64>,
    tau: f64,
    k: usize,
    f0: DVector<f64>,
) -> Result<DVector<f64>> {
    let mut iter = LandweberIteration::new(design, y, tau, f0)?;
    for _ in 0..k {
        iter.step()?;
    }
    Ok(iter.state)
}

/// Squared spectral norm `‖A‖² = σ_1²` of the design under the empirical
/// structure, estimated by power iteration on `A*A`.
fn operator_norm_squared(design: &DesignMatrix) -> f64 {
    let d = design.dim();
    let mut v = DVector::from_fn(d, |i, _| 1.0 + 0.01 * i as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..60 {
        let av = design.apply(&v).expect("dimensions fixed");
        let mut w = adjoint_apply(design, &av).expect("dimensions fixed");
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        w /= norm;
        lambda = norm;
        v = w;
    }
    lambda
}

/// Trace term `Tr(R_kᵗR_k) = (1/n) Σ_j Q_k(λ_j)² λ_j`.
pub fn trace_r(s: &SingularSystem, filter: &FilterSpec, k: usize) -> Result<f64> {
    let mut acc = 0.0;
    for sigma in s.sigmas() {
        let lambda = sigma * sigma;
        let q = filter.q_value(k, lambda)?;
        acc += q * q * lambda;
    }
    Ok(acc / s.n() as f64)
}

/// Spectral-radius term `ρ²(R_k) = (1/n) max_j Q_k(λ_j)² λ_j`.
pub fn radius_r(s: &SingularSystem, filter: &FilterSpec, k: usize) -> Result<f64> {
    let mut best = 0.0f64;
    for sigma in s.sigmas() {
        let lambda = sigma * sigma;
        let q = filter.q_value(k, lambda)?;
        best = best.max(q * q * lambda);
    }
    Ok(best / s.n() as f64)
}

/// Complexity sequence `L_k` of the penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LSequence {
    /// `L_k = 1 + ln(1 + k)`; grows slowly enough for the remainder series
    /// to stay summable while still going to infinity.
    Log,
    Constant(f64),
}

impl LSequence {
    pub fn value(&self, k: usize) -> f64 {
        match self {
            LSequence::Log => 1.0 + (1.0 + k as f64).ln(),
            LSequence::Constant(c) => *c,
        }
    }
}

/// Constants defining the penalty `pen(k) = r σ² (1 + L_k) [Tr + ρ²]` and
/// the candidate index set.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyConfig {
    pub r: f64,
    pub l: LSequence,
    pub sigma2: f64,
    pub k_grid: Vec<usize>,
}

impl PenaltyConfig {
    pub fn new(r: f64, l: LSequence, sigma2: f64, k_grid: Vec<usize>) -> Result<Self> {
        if !(r > 2.0) {
            return Err(Error::Config(format!(
                "penalty constant must satisfy r > 2, got {r}"
            )));
        }
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(Error::Config(format!("sigma2 must be >= 0, got {sigma2}")));
        }
        if k_grid.is_empty() {
            return Err(Error::Config("candidate index set is empty".into()));
        }
        if k_grid[0] == 0 || k_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "candidate index set must be strictly increasing and start at k >= 1".into(),
            ));
        }
        if let LSequence::Constant(c) = l {
            if !(c >= 0.0) {
                return Err(Error::Config(format!("L_k must be >= 0, got {c}")));
            }
        }
        Ok(Self { r, l, sigma2, k_grid })
    }

    /// The full grid `K = {1, …, k_n}` with defaults `r = 2.5` and
    /// `L_k = 1 + ln(1 + k)`.
    pub fn default_grid(sigma2: f64, k_max: usize) -> Result<Self> {
        Self::new(2.5, LSequence::Log, sigma2, (1..=k_max).collect())
    }
}

/// Penalty value `r σ² (1 + L_k) (trace + radius)`.
pub fn penalty(pc: &PenaltyConfig, trace_term: f64, radius_term: f64, k: usize) -> Result<f64> {
    if !(pc.r > 2.0) {
        return Err(Error::Config(format!(
            "penalty constant must satisfy r > 2, got {}",
            pc.r
        )));
    }
    Ok(pc.r * pc.sigma2 * (1.0 + pc.l.value(k)) * (trace_term + radius_term))
}

/// Filtered residual `‖R_k (y - A f_k)‖²` at the filter's own estimate
/// `f_k = R_k y`, which reduces to `Σ_j Q_k(λ_j)² λ_j r_k(λ_j)² c_j²`.
pub fn filtered_residual_sq(
    s: &SingularSystem,
    y: &DVector<f64>,
    filter: &FilterSpec,
    k: usize,
) -> Result<f64> {
    let coeffs = s.data_coefficients(y)?;
    let lambdas = s.lambdas();
    let mut acc = 0.0;
    for (j, lambda) in lambdas.iter().enumerate() {
        let q = filter.q_value(k, *lambda)?;
        let r = filter.residual_value(k, *lambda)?;
        acc += residual_term(q, r, *lambda, coeffs[j]);
    }
    Ok(acc)
}

#[inline]
fn residual_term(q: f64, r: f64, lambda: f64, c: f64) -> f64 {
    (q * q) * lambda * (r * r) * (c * c)
}

/// One row of the selection scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRecord {
    pub k: usize,
    pub filtered_residual_sq: f64,
    pub trace_term: f64,
    pub radius_term: f64,
    pub penalty: f64,
    pub objective: f64,
}

/// Complete record of a stopping-index selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub records: Vec<SelectionRecord>,
    pub k_hat: usize,
    /// Eigenvalue indices above the first multistep relaxation step, where
    /// the residual factors may leave `[0, 1)`.
    pub flagged_eigenvalues: Vec<usize>,
}

impl SelectionTrace {
    pub fn record_for(&self, k: usize) -> Option<&SelectionRecord> {
        self.records.iter().find(|r| r.k == k)
    }

    pub fn objective_at_k_hat(&self) -> f64 {
        self.record_for(self.k_hat)
            .map(|r| r.objective)
            .unwrap_or(f64::NAN)
    }
}

/// Filter values precomputed over a candidate grid: `Q_k(λ_j)` for every
/// grid index and eigenvalue, plus the trace and radius terms. Replicates
/// of a Monte Carlo run share one grid, so the per-replicate scan is a
/// handful of multiplications per `(k, j)` pair.
pub struct FilterGrid {
    k_grid: Vec<usize>,
    lambdas: Vec<f64>,
    sigmas: Vec<f64>,
    /// Row per grid entry: `Q_k(λ_j)` for each eigenvalue.
    q: Vec<Vec<f64>>,
    /// Row per grid entry: `r_k(λ_j)` in the exact product/power form,
    /// which stays meaningful long after `1 - λQ` rounds to zero.
    r: Vec<Vec<f64>>,
    trace: Vec<f64>,
    radius: Vec<f64>,
    flagged: Vec<usize>,
}

impl FilterGrid {
    pub fn new(s: &SingularSystem, filter: &FilterSpec, k_grid: &[usize]) -> Result<Self> {
        if k_grid.is_empty() {
            return Err(Error::Config("candidate index set is empty".into()));
        }
        let lambdas = s.lambdas();
        let sigmas = s.sigmas().to_vec();
        let n = s.n() as f64;
        let mut q = Vec::with_capacity(k_grid.len());
        let mut r = Vec::with_capacity(k_grid.len());
        let mut trace = Vec::with_capacity(k_grid.len());
        let mut radius = Vec::with_capacity(k_grid.len());
        for &k in k_grid {
            let mut q_row = Vec::with_capacity(lambdas.len());
            let mut r_row = Vec::with_capacity(lambdas.len());
            let mut tr = 0.0;
            let mut rad = 0.0f64;
            for &lambda in &lambdas {
                let qv = filter.q_value(k, lambda)?;
                let weight = qv * qv * lambda;
                tr += weight;
                rad = rad.max(weight);
                q_row.push(qv);
                r_row.push(filter.residual_value(k, lambda)?);
            }
            q.push(q_row);
            r.push(r_row);
            trace.push(tr / n);
            radius.push(rad / n);
        }
        let flagged = filter.flagged_eigenvalues(k_grid[0], &lambdas);
        Ok(Self {
            k_grid: k_grid.to_vec(),
            lambdas,
            sigmas,
            q,
            r,
            trace,
            radius,
            flagged,
        })
    }

    pub fn k_grid(&self) -> &[usize] {
        &self.k_grid
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    /// `Q_k(λ_j)` for grid row `gi`.
    pub fn q_row(&self, gi: usize) -> &[f64] {
        &self.q[gi]
    }

    pub fn trace_term(&self, gi: usize) -> f64 {
        self.trace[gi]
    }

    pub fn radius_term(&self, gi: usize) -> f64 {
        self.radius[gi]
    }

    /// Estimator coefficients in the singular basis at grid row `gi`:
    /// `Q_k(λ_j) σ_j c_j`.
    pub fn estimate_coefficient(&self, gi: usize, j: usize, data_coeff: f64) -> f64 {
        self.q[gi][j] * self.sigmas[j] * data_coeff
    }

    /// Per-eigenvalue filtered-residual contribution at grid row `gi`.
    pub fn residual_contribution(&self, gi: usize, j: usize, data_coeff: f64) -> f64 {
        residual_term(self.q[gi][j], self.r[gi][j], self.lambdas[j], data_coeff)
    }

    /// Selection scan over the grid for one data-coefficient vector.
    pub fn select(&self, data_coeffs: &DVector<f64>, pc: &PenaltyConfig) -> Result<SelectionTrace> {
        if data_coeffs.len() != self.lambdas.len() {
            return Err(Error::Dimension(format!(
                "select: {} data coefficients vs {} eigenvalues",
                data_coeffs.len(),
                self.lambdas.len()
            )));
        }
        let mut records = Vec::with_capacity(self.k_grid.len());
        let mut best: Option<(usize, f64)> = None;
        for (gi, &k) in self.k_grid.iter().enumerate() {
            let mut resid = 0.0;
            for j in 0..self.lambdas.len() {
                resid += self.residual_contribution(gi, j, data_coeffs[j]);
            }
            let pen = penalty(pc, self.trace[gi], self.radius[gi], k)?;
            let objective = resid + pen;
            if !objective.is_finite() {
                return Err(Error::Numeric(format!(
                    "selection objective is not finite at k = {k}"
                )));
            }
            records.push(SelectionRecord {
                k,
                filtered_residual_sq: resid,
                trace_term: self.trace[gi],
                radius_term: self.radius[gi],
                penalty: pen,
                objective,
            });
            let better = match best {
                None => true,
                Some((_, obj)) => objective < obj,
            };
            if better {
                best = Some((k, objective));
            }
        }
        let (k_hat, _) = best.expect("grid is nonempty");
        Ok(SelectionTrace {
            records,
            k_hat,
            flagged_eigenvalues: self.flagged.clone(),
        })
    }
}

/// Adaptive choice of the stopping index over the penalty's candidate grid.
pub fn select_k(
    s: &SingularSystem,
    y: &DVector<f64>,
    filter: &FilterSpec,
    pc: &PenaltyConfig,
) -> Result<SelectionTrace> {
    let coeffs = s.data_coefficients(y)?;
    select_k_from_coefficients(s, &coeffs, filter, pc)
}

/// [`select_k`] starting from precomputed data coefficients.
pub fn select_k_from_coefficients(
    s: &SingularSystem,
    data_coeffs: &DVector<f64>,
    filter: &FilterSpec,
    pc: &PenaltyConfig,
) -> Result<SelectionTrace> {
    let grid = FilterGrid::new(s, filter, &pc.k_grid)?;
    grid.select(data_coeffs, pc)
}

/// Plug-in variance estimate from the top-half spectrum: the data
/// coefficients on the smallest singular values are noise-dominated, and
/// `E[n c_j²] = σ² + n λ_j t_j²`. Disabled by default in the harness.
pub fn estimate_sigma2_plugin(s: &SingularSystem, y: &DVector<f64>) -> Result<f64> {
    if s.rank() < 2 {
        return Err(Error::Degenerate(
            "variance plug-in needs at least two singular values".into(),
        ));
    }
    let coeffs = s.data_coefficients(y)?;
    let start = s.rank() / 2;
    let count = s.rank() - start;
    let sum: f64 = (start..s.rank()).map(|j| coeffs[j] * coeffs[j]).sum();
    Ok(s.n() as f64 * sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_diagonal_problem, DiagonalProblemParams};
    use crate::spectral::svd;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_problem(n: usize, d: usize, seed: u64) -> (DesignMatrix, SingularSystem, DVector<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a =
            DesignMatrix::new(DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0))).unwrap();
        let s = svd(&a).unwrap();
        let y = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        (a, s, y)
    }

    fn diagonal_system(sigmas: &[f64], n: usize) -> SingularSystem {
        let d = sigmas.len();
        let left = DMatrix::from_fn(n, d, |i, j| if i == j { (n as f64).sqrt() } else { 0.0 });
        let right = DMatrix::identity(d, d);
        SingularSystem::from_parts(sigmas.to_vec(), left, right, n).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_estimate() {
        let (_, s, _) = random_problem(8, 3, 1);
        let filter = FilterSpec::default_landweber(s.lambda_max(), 50).unwrap();
        let est = estimate_spectral(&s, &DVector::zeros(8), &filter, 10).unwrap();
        assert_eq!(est.coeffs.norm(), 0.0);
    }

    #[test]
    fn first_iterate_matches_adjoint_in_basis() {
        let (a, s, y) = random_problem(8, 3, 2);
        let filter = FilterSpec::landweber(1.0 / s.lambda_max(), 10, s.lambda_max()).unwrap();
        // With tau = 1/lambda1 scaled so that Q_1 ≡ tau, the first estimate
        // is tau * (A*y) expressed in the singular basis.
        let est = estimate_spectral(&s, &y, &filter, 1).unwrap();
        let adj = adjoint_apply(&a, &y).unwrap();
        let adj_coeffs = s.to_basis(&adj).unwrap();
        let tau = filter.tau().unwrap();
        assert!((est.coeffs - adj_coeffs * tau).norm() <= 1e-12);
    }

    #[test]
    fn large_k_limit_reaches_pseudo_inverse() {
        let params = DiagonalProblemParams::new(1.0, 3, 12, 3);
        let problem = make_diagonal_problem(&params).unwrap();
        let s = &problem.system;
        let y = problem.observe_truth(&DVector::zeros(12)).unwrap();
        let filter = FilterSpec::default_landweber(s.lambda_max(), 10_000).unwrap();
        let est = estimate_spectral(s, &y, &filter, 10_000).unwrap();
        let dagger = crate::spectral::pseudo_inverse_solution(s, &y).unwrap();
        let diff = (est.to_param(s).unwrap() - dagger).norm();
        assert!(diff <= 1e-8, "limit gap {diff}");
    }

    #[test]
    fn iterate_zero_steps_returns_start() {
        let (a, _, y) = random_problem(6, 3, 4);
        let f0 = DVector::from_vec(vec![0.25, -1.0, 0.5]);
        let out = landweber_iterate(&a, &y, 0.1, 0, f0.clone()).unwrap();
        assert_eq!(out, f0);
    }

    #[test]
    fn one_step_from_zero_is_tau_adjoint() {
        let (a, _, y) = random_problem(6, 3, 5);
        let tau = 0.1;
        let out = landweber_iterate(&a, &y, tau, 1, DVector::zeros(3)).unwrap();
        let expect = adjoint_apply(&a, &y).unwrap() * tau;
        assert!((out - expect).norm() <= 1e-14);
    }

    #[test]
    fn iterative_path_matches_spectral_path() {
        let (a, s, y) = random_problem(4, 3, 6);
        let tau = 0.5 / s.lambda_max();
        let filter = FilterSpec::landweber(tau, 50, s.lambda_max()).unwrap();
        let iterated = landweber_iterate(&a, &y, tau, 50, DVector::zeros(3)).unwrap();
        let spectral = estimate_spectral(&s, &y, &filter, 50)
            .unwrap()
            .to_param(&s)
            .unwrap();
        assert!((iterated - spectral).norm() <= 1e-10);
    }

    #[test]
    fn iterative_spectral_equivalence_for_all_k() {
        let (a, s, y) = random_problem(16, 5, 7);
        let tau = 0.5 / s.lambda_max();
        let filter = FilterSpec::landweber(tau, 200, s.lambda_max()).unwrap();
        let mut iter = LandweberIteration::new(&a, &y, tau, DVector::zeros(5)).unwrap();
        for k in 1..=200usize {
            iter.step().unwrap();
            let spectral = estimate_spectral(&s, &y, &filter, k)
                .unwrap()
                .to_param(&s)
                .unwrap();
            let gap = (iter.current() - spectral).norm();
            assert!(gap <= 1e-10 * y.norm(), "k = {k}: gap {gap}");
        }
    }

    #[test]
    fn relaxation_out_of_range_rejected() {
        let (a, s, y) = random_problem(6, 3, 8);
        let too_big = 10.0 / s.lambda_max();
        assert!(matches!(
            landweber_iterate(&a, &y, too_big, 5, DVector::zeros(3)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            landweber_iterate(&a, &y, -0.1, 5, DVector::zeros(3)),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn trace_and_radius_unit_filter() {
        let s = diagonal_system(&[1.0, 0.5, 0.25], 4);
        let filter = FilterSpec::landweber(1.0, 10, 1.0).unwrap();
        // Q_1 ≡ 1 at tau = 1.
        let tr = trace_r(&s, &filter, 1).unwrap();
        let rad = radius_r(&s, &filter, 1).unwrap();
        let lambda_sum = 1.0 + 0.25 + 0.0625;
        assert_relative_eq!(tr, lambda_sum / 4.0, epsilon = 1e-14);
        assert_relative_eq!(rad, 1.0 / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn trace_hand_value_at_k_two() {
        // lambda = (1, 0.25, 0.0625), tau = 1, k = 2: Q = 2 - lambda.
        let s = diagonal_system(&[1.0, 0.5, 0.25], 4);
        let filter = FilterSpec::landweber(1.0, 10, 1.0).unwrap();
        let tr = trace_r(&s, &filter, 2).unwrap();
        let expected = (1.0 + 0.765625 + 0.234619140625) / 4.0;
        assert_relative_eq!(tr, expected, epsilon = 1e-14);
    }

    #[test]
    fn radius_trace_sandwich() {
        let (_, s, _) = random_problem(12, 5, 9);
        let filter = FilterSpec::default_landweber(s.lambda_max(), 100).unwrap();
        for k in [1usize, 5, 25, 100] {
            let tr = trace_r(&s, &filter, k).unwrap();
            let rad = radius_r(&s, &filter, k).unwrap();
            assert!(rad <= tr + 1e-15);
            assert!(tr <= s.rank() as f64 * rad + 1e-15);
        }
    }

    #[test]
    fn penalty_direct_product() {
        let pc = PenaltyConfig::new(2.1, LSequence::Constant(0.0), 1.0, vec![1, 2, 3]).unwrap();
        assert_relative_eq!(penalty(&pc, 0.6, 0.4, 2).unwrap(), 2.1, epsilon = 1e-15);
    }

    #[test]
    fn penalty_scales_with_sigma2_and_grows_with_k() {
        let s = diagonal_system(&[1.0, 0.6, 0.3], 8);
        let filter = FilterSpec::default_landweber(1.0, 50).unwrap();
        let pc1 = PenaltyConfig::default_grid(1.0, 50).unwrap();
        let pc2 = PenaltyConfig::default_grid(2.0, 50).unwrap();
        let mut prev = 0.0;
        for k in 1..=50usize {
            let tr = trace_r(&s, &filter, k).unwrap();
            let rad = radius_r(&s, &filter, k).unwrap();
            let p1 = penalty(&pc1, tr, rad, k).unwrap();
            let p2 = penalty(&pc2, tr, rad, k).unwrap();
            assert_relative_eq!(p2, 2.0 * p1, epsilon = 1e-12);
            assert!(p1 > prev, "penalty must increase in k");
            prev = p1;
        }
    }

    #[test]
    fn penalty_config_rejects_small_r() {
        assert!(matches!(
            PenaltyConfig::new(2.0, LSequence::Log, 1.0, vec![1]),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn filtered_residual_edge_cases() {
        let s = diagonal_system(&[1.0], 1);
        let filter = FilterSpec::landweber(1.0, 10, 1.0).unwrap();
        // lambda = 1, tau = 1, k = 1: Q = 1, r = 0.
        let y = DVector::from_vec(vec![1.0]);
        assert_eq!(filtered_residual_sq(&s, &y, &filter, 1).unwrap(), 0.0);
        assert_eq!(
            filtered_residual_sq(&s, &DVector::zeros(1), &filter, 1).unwrap(),
            0.0
        );
    }

    #[test]
    fn filtered_residual_decays_on_noiseless_data() {
        let params = DiagonalProblemParams::new(1.0, 4, 16, 10);
        let problem = make_diagonal_problem(&params).unwrap();
        let y = problem.observe_truth(&DVector::zeros(16)).unwrap();
        let filter = FilterSpec::default_landweber(problem.system.lambda_max(), 5000).unwrap();
        let early = filtered_residual_sq(&problem.system, &y, &filter, 1).unwrap();
        let late = filtered_residual_sq(&problem.system, &y, &filter, 5000).unwrap();
        assert!(late <= early);
        assert!(late <= 1e-10, "filtered residual should vanish, got {late}");
    }

    #[test]
    fn selection_noiseless_decaying_residual_picks_k_max() {
        // Eigenvalues within a factor 2 and tau = 1/lambda1 make the
        // noiseless filtered residual strictly decreasing in k.
        let s = diagonal_system(&[1.0, 0.66f64.sqrt()], 4);
        let filter = FilterSpec::landweber(1.0, 40, 1.0).unwrap();
        let pc = PenaltyConfig::new(2.5, LSequence::Log, 0.0, (1..=40).collect()).unwrap();
        let y = (s.left_vector(0) + s.left_vector(1)) * 0.5;
        let trace = select_k(&s, &y, &filter, &pc).unwrap();
        assert_eq!(trace.k_hat, 40);
    }

    #[test]
    fn selection_huge_variance_picks_k_min() {
        let params = DiagonalProblemParams::new(1.0, 5, 25, 11);
        let problem = make_diagonal_problem(&params).unwrap();
        let y = problem.observe_truth(&DVector::zeros(25)).unwrap();
        let filter = FilterSpec::default_landweber(problem.system.lambda_max(), 100).unwrap();
        let pc = PenaltyConfig::new(2.5, LSequence::Log, 1e9, (1..=100).collect()).unwrap();
        let trace = select_k(&problem.system, &y, &filter, &pc).unwrap();
        assert_eq!(trace.k_hat, 1);
    }

    #[test]
    fn selection_matches_exhaustive_rescan() {
        let params = DiagonalProblemParams::new(1.0, 5, 25, 12);
        let problem = make_diagonal_problem(&params).unwrap();
        let eps = problem.noise.sample(25, 13);
        let y = problem.observe_truth(&eps).unwrap();
        let s = &problem.system;
        let filter = FilterSpec::default_landweber(s.lambda_max(), 60).unwrap();
        let pc = PenaltyConfig::default_grid(problem.noise_sigma().powi(2), 60).unwrap();
        let trace = select_k(s, &y, &filter, &pc).unwrap();

        // Independent re-evaluation of both terms, k by k.
        let mut best_k = 0;
        let mut best = f64::INFINITY;
        for &k in &pc.k_grid {
            let resid = filtered_residual_sq(s, &y, &filter, k).unwrap();
            let pen = penalty(
                &pc,
                trace_r(s, &filter, k).unwrap(),
                radius_r(s, &filter, k).unwrap(),
                k,
            )
            .unwrap();
            if resid + pen < best {
                best = resid + pen;
                best_k = k;
            }
        }
        assert_eq!(trace.k_hat, best_k);
        let stored = trace.record_for(best_k).unwrap();
        assert_relative_eq!(stored.objective, best, max_relative = 1e-12);
    }

    #[test]
    fn selection_objective_recomposes_bitwise() {
        let params = DiagonalProblemParams::new(1.2, 4, 16, 14);
        let problem = make_diagonal_problem(&params).unwrap();
        let eps = problem.noise.sample(16, 15);
        let y = problem.observe_truth(&eps).unwrap();
        let filter = FilterSpec::default_landweber(problem.system.lambda_max(), 30).unwrap();
        let pc = PenaltyConfig::default_grid(problem.noise_sigma().powi(2), 30).unwrap();
        let trace = select_k(&problem.system, &y, &filter, &pc).unwrap();
        for rec in &trace.records {
            let pen = penalty(&pc, rec.trace_term, rec.radius_term, rec.k).unwrap();
            assert_eq!(pen.to_bits(), rec.penalty.to_bits());
            assert_eq!(
                (rec.filtered_residual_sq + rec.penalty).to_bits(),
                rec.objective.to_bits()
            );
        }
    }

    #[test]
    fn selection_argmin_invariant_under_joint_scaling() {
        let params = DiagonalProblemParams::new(1.0, 5, 25, 16);
        let problem = make_diagonal_problem(&params).unwrap();
        let eps = problem.noise.sample(25, 17);
        let y = problem.observe_truth(&eps).unwrap();
        let filter = FilterSpec::default_landweber(problem.system.lambda_max(), 50).unwrap();
        let sigma2 = problem.noise_sigma().powi(2);
        let pc = PenaltyConfig::default_grid(sigma2, 50).unwrap();
        let base = select_k(&problem.system, &y, &filter, &pc).unwrap();

        // Scale y and sigma by the same power of two: every objective term
        // scales by exactly c², so the argmin cannot move.
        let c = 2.0;
        let scaled_pc = PenaltyConfig::default_grid(sigma2 * c * c, 50).unwrap();
        let scaled =
            select_k(&problem.system, &(&y * c), &filter, &scaled_pc).unwrap();
        assert_eq!(base.k_hat, scaled.k_hat);
        for (a, b) in base.records.iter().zip(scaled.records.iter()) {
            assert_eq!(a.objective * c * c, b.objective);
        }
    }

    #[test]
    fn selection_rejects_non_finite_data() {
        let s = diagonal_system(&[1.0, 0.5], 4);
        let filter = FilterSpec::default_landweber(1.0, 10).unwrap();
        let pc = PenaltyConfig::default_grid(1.0, 10).unwrap();
        let mut y = DVector::zeros(4);
        y[0] = f64::INFINITY;
        assert!(matches!(
            select_k(&s, &y, &filter, &pc),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn bias_identity_in_spectral_basis() {
        let params = DiagonalProblemParams::new(1.0, 5, 20, 18);
        let problem = make_diagonal_problem(&params).unwrap();
        let s = &problem.system;
        let filter = FilterSpec::default_landweber(s.lambda_max(), 100).unwrap();
        let y = problem.observe_truth(&DVector::zeros(20)).unwrap();
        for k in [1usize, 7, 50] {
            let est = estimate_spectral(s, &y, &filter, k).unwrap();
            let loss: f64 = (est.coeffs - &problem.truth_coeffs).norm_squared();
            let identity: f64 = s
                .lambdas()
                .iter()
                .zip(problem.truth_coeffs.iter())
                .map(|(l, t)| {
                    let r = filter.residual_value(k, *l).unwrap();
                    r * r * t * t
                })
                .sum();
            assert_relative_eq!(loss, identity, max_relative = 1e-10, epsilon = 1e-14);
        }
    }

    #[test]
    fn variance_identity_small_monte_carlo() {
        let params = DiagonalProblemParams::new(1.0, 4, 16, 19);
        let problem = make_diagonal_problem(&params).unwrap();
        let s = &problem.system;
        let filter = FilterSpec::default_landweber(s.lambda_max(), 20).unwrap();
        let sigma2 = problem.noise_sigma().powi(2);
        let k = 10;
        let expected = sigma2 * trace_r(s, &filter, k).unwrap();
        let reps = 4000;
        let mut values = Vec::with_capacity(reps);
        for i in 0..reps {
            let eps = problem.noise.sample(16, 500 + i as u64);
            let coeffs = s.data_coefficients(&eps).unwrap();
            let mut norm_sq = 0.0;
            for (j, sigma) in s.sigmas().iter().enumerate() {
                let q = filter.q_value(k, sigma * sigma).unwrap();
                let c = q * sigma * coeffs[j];
                norm_sq += c * c;
            }
            values.push(norm_sq);
        }
        let mean = values.iter().sum::<f64>() / reps as f64;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!(
            (mean - expected).abs() <= 3.0 * se,
            "variance identity off: mean {mean} vs {expected} (se {se})"
        );
    }

    #[test]
    fn plugin_variance_estimate_is_sane() {
        let mut params = DiagonalProblemParams::new(1.5, 8, 64, 20);
        params.noise.sigma = 0.5;
        let problem = make_diagonal_problem(&params).unwrap();
        let reps = 2000;
        let mut acc = 0.0;
        for i in 0..reps {
            let eps = problem.noise.sample(64, 900 + i as u64);
            let y = problem.observe_truth(&eps).unwrap();
            acc += estimate_sigma2_plugin(&problem.system, &y).unwrap();
        }
        let mean = acc / reps as f64;
        let sigma2 = 0.25;
        // Signal leakage biases the estimate upward a little; it must sit
        // near sigma^2.
        assert!(
            mean > 0.8 * sigma2 && mean < 1.6 * sigma2,
            "plug-in variance {mean} vs true {sigma2}"
        );
    }
}
