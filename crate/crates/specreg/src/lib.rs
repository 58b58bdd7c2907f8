//! Iterative spectral regularization for statistical linear inverse
//! problems.
//!
//! Given noisy observations `y(x_i) = (A f̃)(x_i) + ε_i` of a compact
//! operator applied to an unknown signal, this crate builds the projected,
//! discretized problem under the empirical inner product, regularizes its
//! pseudo-inverse with iterative spectral filters, and chooses the
//! stopping index adaptively by penalized model selection. It also
//! computes the non-asymptotic risk bounds attached to those estimators
//! (bias-variance, oracle inequality with remainder, concentration tail,
//! and power rates), and ships a seeded Monte Carlo harness that checks
//! the bounds and convergence-rate exponents empirically at desk scale.
//!
//! Module map:
//! - [`spectral`]: design matrices, SVD under the empirical inner product,
//!   projections, spectral calculus.
//! - [`model`]: synthetic problems with spectrum `σ_j = j^{-p}`,
//!   source-condition truths, sub-exponential noise.
//! - [`filters`]: Landweber and nonlinear multistep filter families, their
//!   residual polynomials and qualification bounds.
//! - [`selector`]: the regularized estimator, the explicit Landweber
//!   iteration, the trace/radius penalty, and the adaptive stopping index.
//! - [`bounds`]: computable right-hand sides of the risk statements.
//! - [`harness`]: config ingestion, Monte Carlo replication, rate studies,
//!   and report emission; the batch CLI is a thin wrapper over it.
//!
//! ```
//! use nalgebra::DVector;
//! use specreg::filters::FilterSpec;
//! use specreg::model::{make_diagonal_problem, DiagonalProblemParams};
//! use specreg::selector::{select_k, PenaltyConfig};
//!
//! // A 5-dimensional problem with spectrum j^{-1} on 50 design points.
//! let problem = make_diagonal_problem(&DiagonalProblemParams::new(1.0, 5, 50, 7)).unwrap();
//! let eps = problem.noise.sample(problem.n, 1234);
//! let y = problem.observe_truth(&eps).unwrap();
//!
//! let filter = FilterSpec::default_landweber(problem.system.lambda_max(), 200).unwrap();
//! let penalty = PenaltyConfig::default_grid(problem.noise_sigma().powi(2), 200).unwrap();
//! let trace = select_k(&problem.system, &y, &filter, &penalty).unwrap();
//! assert!(trace.k_hat >= 1 && trace.k_hat <= 200);
//! ```

pub mod bounds;
pub mod error;
pub mod filters;
pub mod harness;
pub mod model;
pub mod selector;
pub mod spectral;

pub use bounds::{BoundKind, BoundReport, RateConstantVariant};
pub use error::{Error, Result};
pub use filters::{FilterKind, FilterSpec, Qualification, ScheduleRule};
pub use harness::ExperimentConfig;
pub use model::{
    make_diagonal_problem, make_source_element, min_dimension, sample_noise,
    DiagonalProblemParams, NoiseKind, NoiseModel, Problem, SourceCondition,
};
pub use selector::{
    estimate_spectral, filtered_residual_sq, landweber_iterate, penalty, radius_r, select_k,
    trace_r, Estimate, LSequence, PenaltyConfig, SelectionTrace,
};
pub use spectral::{
    adjoint_apply, apply_spectral_function, empirical_inner, empirical_norm, project_onto_ym,
    pseudo_inverse_solution, svd, DesignMatrix, SingularSystem, SpectralFunction,
};
