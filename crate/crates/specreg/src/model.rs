//! Synthetic inverse-problem generation: polynomially ill-posed spectra,
//! source-condition truths, fixed uniform designs, and sub-exponential noise.
//!
//! The generator starts from the discrete trigonometric frame on the uniform
//! design `x_i = i/n`, orthonormalizes it under the empirical inner product,
//! and scales column `j` by `j^{-p}` so the singular values are exactly
//! `σ_j = j^{-p}`. The truth is produced through the source map
//! `f = (A*A)^μ ω` with `‖ω‖ ≤ ρ`, optionally plus a tail that lives outside
//! the model span to exercise the minimum-dimension rule.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, DesignMatrix, SingularSystem};

/// Noise laws satisfying the sub-exponential moment condition
/// `E(|ε|^q / σ^q) ≤ q!/2` at the orders exercised by the tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    /// Laplace rescaled to variance σ² (difference of two exponentials).
    ScaledLaplace,
}

/// Centered noise `ε` with `E ε² = σ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, sigma: f64) -> Result<Self> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")));
        }
        Ok(Self { kind, sigma })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(NoiseKind::Gaussian, sigma)
    }

    /// Draws `n` i.i.d. values; deterministic for a given seed. `σ = 0` is
    /// allowed as the degenerate noiseless case.
    pub fn sample(&self, n: usize, seed: u64) -> DVector<f64> {
        if self.sigma == 0.0 {
            return DVector::zeros(n);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self.kind {
            NoiseKind::Gaussian => {
                let normal = Normal::new(0.0, self.sigma).expect("validated sigma");
                DVector::from_fn(n, |_, _| normal.sample(&mut rng))
            }
            NoiseKind::ScaledLaplace => {
                // X - Y for X, Y ~ Exp(1) is standard Laplace (variance 2).
                let exp = Exp::new(1.0).expect("unit rate");
                let b = self.sigma / 2f64.sqrt();
                DVector::from_fn(n, |_, _| b * (exp.sample(&mut rng) - exp.sample(&mut rng)))
            }
        }
    }
}

/// Free-function form of [`NoiseModel::sample`].
pub fn sample_noise(nm: &NoiseModel, n: usize, seed: u64) -> DVector<f64> {
    nm.sample(n, seed)
}

/// Source condition `f = (A*A)^μ ω` with `‖ω‖ ≤ ρ`; `omega_coeffs` are the
/// coefficients of `ω` in the right singular basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceCondition {
    pub mu: f64,
    pub rho: f64,
    pub omega_coeffs: DVector<f64>,
}

impl SourceCondition {
    pub fn new(mu: f64, rho: f64, omega_coeffs: DVector<f64>) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(Error::Domain(format!("smoothness exponent mu must be >= 0, got {mu}")));
        }
        if !(rho > 0.0) {
            return Err(Error::Domain(format!("source radius rho must be > 0, got {rho}")));
        }
        let sc = Self { mu, rho, omega_coeffs };
        sc.check_radius()?;
        Ok(sc)
    }

    fn check_radius(&self) -> Result<()> {
        let norm = self.omega_coeffs.norm();
        if norm > self.rho * (1.0 + 1e-12) {
            return Err(Error::Domain(format!(
                "source violation: ‖ω‖ = {norm} exceeds ρ = {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Source map in the singular basis: coefficient `j` of the output is
/// `σ_j^{2μ} ⟨ω, φ_j⟩`. Returns the truth coefficients in the right basis.
pub fn make_source_element(s: &SingularSystem, sc: &SourceCondition) -> Result<DVector<f64>> {
    sc.check_radius()?;
    if sc.omega_coeffs.len() != s.rank() {
        return Err(Error::Dimension(format!(
            "make_source_element: {} omega coefficients vs rank {}",
            sc.omega_coeffs.len(),
            s.rank()
        )));
    }
    let mut out = sc.omega_coeffs.clone();
    for (j, sigma) in s.sigmas().iter().enumerate() {
        out[j] *= sigma.powf(2.0 * sc.mu);
    }
    Ok(out)
}

/// Part of the truth orthogonal to the model span. The columns extend the
/// empirically orthonormal design frame, each scaled through the continued
/// singular sequence, so the tail contributes to observations but is exactly
/// invisible to the model's singular system.
#[derive(Debug, Clone, PartialEq)]
pub struct TailComponent {
    /// `n × t`, empirically orthonormal and orthogonal to the design columns.
    pub columns: DMatrix<f64>,
    /// Continued singular values `σ_{d+l} = (d+l)^{-p}`.
    pub sigmas: Vec<f64>,
    /// Tail coefficients of the truth.
    pub coeffs: DVector<f64>,
}

impl TailComponent {
    /// `‖f̃ - Π f̃‖²`: squared distance from the truth to the model span.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.norm_squared()
    }

    /// Observation-space contribution `Σ_l σ_l c_l ψ_l(x_·)`.
    pub fn observation_term(&self) -> DVector<f64> {
        let mut scaled = self.coeffs.clone();
        for (l, s) in self.sigmas.iter().enumerate() {
            scaled[l] *= s;
        }
        &self.columns * scaled
    }
}

/// One simulated statistical inverse problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub design: DesignMatrix,
    pub system: SingularSystem,
    /// Truth coefficients in the right singular basis (the model part).
    pub truth_coeffs: DVector<f64>,
    pub noise: NoiseModel,
    /// Ill-posedness exponent of the spectrum `σ_j = j^{-p}`.
    pub p: f64,
    pub n: usize,
    pub mu: f64,
    pub source_rho: f64,
    pub tail: Option<TailComponent>,
}

impl Problem {
    pub fn noise_sigma(&self) -> f64 {
        self.noise.sigma
    }

    pub fn dim(&self) -> usize {
        self.design.dim()
    }

    /// Truth as a parameter-space vector `Σ_j t_j φ_j` (model part only).
    pub fn truth_param(&self) -> DVector<f64> {
        self.system
            .from_basis(&self.truth_coeffs)
            .expect("truth coefficients match the system rank")
    }

    /// Observation map `y = A f + ε` for an explicit parameter vector.
    pub fn observe(&self, f: &DVector<f64>, eps: &DVector<f64>) -> Result<DVector<f64>> {
        if eps.len() != self.n {
            return Err(Error::Dimension(format!(
                "observe: noise length {} vs n = {}",
                eps.len(),
                self.n
            )));
        }
        Ok(self.design.apply(f)? + eps)
    }

    /// Observations of the stored truth, including any tail contribution.
    pub fn observe_truth(&self, eps: &DVector<f64>) -> Result<DVector<f64>> {
        let mut y = self.observe(&self.truth_param(), eps)?;
        if let Some(tail) = &self.tail {
            y += tail.observation_term();
        }
        Ok(y)
    }

    /// Reproducibility record (spectra, truth, seeds) as a JSON document.
    pub fn to_doc(&self) -> ProblemDoc {
        ProblemDoc {
            p: self.p,
            n: self.n,
            d_m: self.dim(),
            mu: self.mu,
            source_rho: self.source_rho,
            noise: self.noise,
            sigmas: self.system.sigmas().to_vec(),
            truth_coeffs: self.truth_coeffs.iter().copied().collect(),
            tail_coeffs: self
                .tail
                .as_ref()
                .map(|t| t.coeffs.iter().copied().collect()),
        }
    }
}

/// Serializable summary of a generated problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDoc {
    pub p: f64,
    pub n: usize,
    pub d_m: usize,
    pub mu: f64,
    pub source_rho: f64,
    pub noise: NoiseModel,
    pub sigmas: Vec<f64>,
    pub truth_coeffs: Vec<f64>,
    pub tail_coeffs: Option<Vec<f64>>,
}

/// Rule for the source element `ω`.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaRule {
    /// `ω_j ∝ j^{-1/2-0.01}`, normalized to `‖ω‖ = ρ` (rough boundary of the
    /// source set). The default.
    BoundaryPower,
    /// Random signs on the boundary-power profile.
    RandomSigns,
    /// Explicit coefficients (must satisfy `‖ω‖ ≤ ρ`).
    Explicit(Vec<f64>),
}

/// Parameters of the diagonal problem generator.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalProblemParams {
    pub p: f64,
    pub d_m: usize,
    pub n: usize,
    pub mu: f64,
    pub source_rho: f64,
    pub noise: NoiseModel,
    pub omega: OmegaRule,
    /// Number of extra frame columns carrying truth mass outside the model.
    pub tail_dims: usize,
    /// Norm of the tail component `‖f̃ - Π f̃‖`.
    pub tail_scale: f64,
    pub seed: u64,
}

impl DiagonalProblemParams {
    /// Defaults: `μ = 1/2`, `ρ = 1`, Gaussian noise with `σ = 0.1`, no tail.
    pub fn new(p: f64, d_m: usize, n: usize, seed: u64) -> Self {
        Self {
            p,
            d_m,
            n,
            mu: 0.5,
            source_rho: 1.0,
            noise: NoiseModel {
                kind: NoiseKind::Gaussian,
                sigma: 0.1,
            },
            omega: OmegaRule::BoundaryPower,
            tail_dims: 0,
            tail_scale: 0.0,
            seed,
        }
    }
}

/// Column `c` of the discrete trigonometric frame on the uniform design
/// `x_i = i/n`: constant, then cos/sin pairs of increasing frequency.
fn trig_column(n: usize, c: usize) -> DVector<f64> {
    DVector::from_fn(n, |i, _| {
        let x = (i + 1) as f64 / n as f64;
        if c == 0 {
            1.0
        } else {
            let l = (c + 1) / 2;
            let phase = std::f64::consts::TAU * l as f64 * x;
            if c % 2 == 1 {
                phase.cos()
            } else {
                phase.sin()
            }
        }
    })
}

/// Empirically orthonormal columns drawn from the trigonometric frame.
/// Candidates are generated lazily; aliased or vanishing columns on the
/// discrete grid are skipped. The grid supports exactly `n` independent
/// columns, so `2n + 1` candidates always suffice.
fn orthonormal_trig_columns(n: usize, want: usize) -> Result<DMatrix<f64>> {
    let nf = n as f64;
    let mut accepted: Vec<DVector<f64>> = Vec::new();
    for c in 0..=2 * n {
        if accepted.len() == want {
            break;
        }
        spectral::mgs_push(&mut accepted, trig_column(n, c), nf);
    }
    if accepted.len() < want {
        return Err(Error::Degenerate(format!(
            "only {} independent design columns available for n = {n}",
            accepted.len()
        )));
    }
    let mut out = DMatrix::zeros(n, want);
    for (j, q) in accepted.iter().enumerate() {
        out.set_column(j, q);
    }
    Ok(out)
}

fn boundary_power_profile(len: usize, rho: f64) -> DVector<f64> {
    let raw = DVector::from_fn(len, |j, _| ((j + 1) as f64).powf(-0.51));
    let norm = raw.norm();
    raw * (rho / norm)
}

/// Builds a problem whose spectrum is exactly `σ_j = j^{-p}` on an
/// empirically orthonormal trigonometric design.
pub fn make_diagonal_problem(params: &DiagonalProblemParams) -> Result<Problem> {
    if !(params.p > 0.5) {
        return Err(Error::Domain(format!(
            "ill-posedness exponent must satisfy p > 1/2, got {}",
            params.p
        )));
    }
    if params.d_m < 1 {
        return Err(Error::Config("model dimension must be at least 1".into()));
    }
    let total = params.d_m + params.tail_dims;
    if total > params.n {
        return Err(Error::Config(format!(
            "infeasible design: d_m + tail = {total} exceeds n = {}",
            params.n
        )));
    }

    let frame = orthonormal_trig_columns(params.n, total)?;
    let mut design_cols = frame.columns(0, params.d_m).clone_owned();
    for j in 0..params.d_m {
        let sigma = ((j + 1) as f64).powf(-params.p);
        design_cols.column_mut(j).scale_mut(sigma);
    }
    let design = DesignMatrix::new(design_cols)?;
    let system = spectral::svd(&design)?;
    if system.rank() != params.d_m {
        return Err(Error::Numeric(format!(
            "generator produced rank {} instead of {}",
            system.rank(),
            params.d_m
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let omega = match &params.omega {
        OmegaRule::BoundaryPower => boundary_power_profile(params.d_m, params.source_rho),
        OmegaRule::RandomSigns => {
            let mut w = boundary_power_profile(params.d_m, params.source_rho);
            for v in w.iter_mut() {
                if rng.gen::<bool>() {
                    *v = -*v;
                }
            }
            w
        }
        OmegaRule::Explicit(coeffs) => {
            if coeffs.len() != params.d_m {
                return Err(Error::Dimension(format!(
                    "explicit omega has {} coefficients, expected {}",
                    coeffs.len(),
                    params.d_m
                )));
            }
            DVector::from_vec(coeffs.clone())
        }
    };
    let sc = SourceCondition::new(params.mu, params.source_rho, omega)?;
    let truth_coeffs = make_source_element(&system, &sc)?;

    let tail = if params.tail_dims > 0 && params.tail_scale > 0.0 {
        let columns = frame.columns(params.d_m, params.tail_dims).clone_owned();
        let sigmas: Vec<f64> = (0..params.tail_dims)
            .map(|l| ((params.d_m + l + 1) as f64).powf(-params.p))
            .collect();
        let coeffs = boundary_power_profile(params.tail_dims, params.tail_scale);
        Some(TailComponent {
            columns,
            sigmas,
            coeffs,
        })
    } else {
        None
    };

    Ok(Problem {
        design,
        system,
        truth_coeffs,
        noise: params.noise,
        p: params.p,
        n: params.n,
        mu: params.mu,
        source_rho: params.source_rho,
        tail,
    })
}

/// Smallest admissible model dimension `⌈n^{1/(2p+1)}⌉`.
///
/// A tiny rounding guard keeps exact powers (`1000^{1/3}`, `10000^{1/4}`)
/// from ceiling up to the next integer.
pub fn min_dimension(n: usize, p: f64) -> usize {
    debug_assert!(n >= 1 && p > 0.5);
    let t = (n as f64).powf(1.0 / (2.0 * p + 1.0));
    let r = t.round();
    let d = if (t - r).abs() < 1e-9 { r } else { t.ceil() };
    (d as usize).max(1)
}
