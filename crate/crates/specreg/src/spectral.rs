//! Finite-dimensional operators under the empirical inner product: design
//! matrices, singular systems, orthogonal projections, and spectral calculus.
//!
//! Observation space `R^n` carries the empirical inner product
//! `<u, v>_n = (1/n) Σ u_i v_i` induced by the fixed design points, while
//! parameter space `R^d` carries the standard inner product. The adjoint is
//! fixed as `A* = (1/n) Aᵀ` so that `<Af, y>_n = <f, A*y>` holds exactly;
//! with that convention an empirically orthonormal design satisfies
//! `A*A = I`, and the singular system of `A` is the ordinary SVD of
//! `(1/√n) A` with the left vectors rescaled by `√n`.
//!
//! Everything here is immutable after construction and all operations are
//! pure, so values can be shared freely across worker threads.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Singular values below `RANK_TOL * sigma_1` are truncated to zero.
pub const RANK_TOL: f64 = 1e-12;

/// Largest allowed entrywise deviation of an empirical Gram matrix from the
/// identity for a basis to count as orthonormal.
pub const ORTHO_TOL: f64 = 1e-10;

/// Empirical inner product `(1/n) Σ u_i v_i`.
pub fn empirical_inner(u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Dimension(format!(
            "empirical_inner: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    if u.is_empty() {
        return Err(Error::Dimension("empirical_inner: empty vectors".into()));
    }
    Ok(u.dot(v) / u.len() as f64)
}

/// Empirical norm `sqrt(<u, u>_n)`.
pub fn empirical_norm(u: &DVector<f64>) -> f64 {
    if u.is_empty() {
        return 0.0;
    }
    (u.norm_squared() / u.len() as f64).sqrt()
}

/// A dense `n × d` design matrix. Row `i` holds the evaluations of the `d`
/// basis functions at design point `x_i`; the matrix is the operator taking
/// a coefficient vector in parameter space to its values at the design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    entries: DMatrix<f64>,
}

impl DesignMatrix {
    /// Wraps a dense matrix after checking shape and finiteness.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "design matrix must be at least 1x1, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("design matrix has non-finite entries".into()));
        }
        Ok(Self { entries })
    }

    /// Orthonormalizes the columns of `frame` under the empirical inner
    /// product (modified Gram-Schmidt, two passes). Columns that become
    /// numerically dependent are rejected with a degenerate-input error.
    pub fn orthonormalize(frame: DMatrix<f64>) -> Result<Self> {
        let cols = orthonormal_columns(&frame, frame.ncols())?;
        if cols.ncols() < frame.ncols() {
            return Err(Error::Degenerate(format!(
                "only {} of {} frame columns are independent under <,>_n",
                cols.ncols(),
                frame.ncols()
            )));
        }
        let design = Self::new(cols)?;
        debug_assert!(design.is_empirically_orthonormal(ORTHO_TOL));
        Ok(design)
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn dim(&self) -> usize {
        self.entries.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Forward map `A f`: evaluates the parameter vector at the design points.
    pub fn apply(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        if f.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "apply: parameter length {} vs design dimension {}",
                f.len(),
                self.dim()
            )));
        }
        Ok(&self.entries * f)
    }

    /// Checks the empirical Gram matrix `(1/n) AᵀA` against the identity.
    pub fn is_empirically_orthonormal(&self, tol: f64) -> bool {
        let n = self.n() as f64;
        let gram = self.entries.transpose() * &self.entries / n;
        let d = self.dim();
        (0..d).all(|i| {
            (0..d).all(|j| {
                let target = if i == j { 1.0 } else { 0.0 };
                (gram[(i, j)] - target).abs() <= tol
            })
        })
    }
}

/// Orthogonalizes `v` against the accepted columns under `<,>_n` (modified
/// Gram-Schmidt, two passes), normalizes, and pushes it unless it is
/// numerically dependent on the earlier columns. Returns whether the
/// candidate was accepted.
pub(crate) fn mgs_push(accepted: &mut Vec<DVector<f64>>, mut v: DVector<f64>, nf: f64) -> bool {
    let original = (v.norm_squared() / nf).sqrt();
    if original <= 1e-14 {
        return false;
    }
    // Two orthogonalization passes keep the Gram defect near machine eps.
    for _ in 0..2 {
        for q in accepted.iter() {
            let coef = v.dot(q) / nf;
            v.axpy(-coef, q, 1.0);
        }
    }
    let norm = (v.norm_squared() / nf).sqrt();
    if norm <= 1e-8 * original {
        return false;
    }
    v /= norm;
    accepted.push(v);
    true
}

/// Empirical modified Gram-Schmidt with rejection of dependent columns.
/// Returns the accepted orthonormal columns (at most `max_cols`).
pub(crate) fn orthonormal_columns(frame: &DMatrix<f64>, max_cols: usize) -> Result<DMatrix<f64>> {
    let n = frame.nrows();
    if n == 0 {
        return Err(Error::Dimension("empty frame".into()));
    }
    let nf = n as f64;
    let mut accepted: Vec<DVector<f64>> = Vec::new();
    for c in 0..frame.ncols() {
        if accepted.len() == max_cols {
            break;
        }
        mgs_push(&mut accepted, frame.column(c).clone_owned(), nf);
    }
    if accepted.is_empty() {
        return Err(Error::Degenerate("no independent frame columns".into()));
    }
    let mut out = DMatrix::zeros(n, accepted.len());
    for (j, q) in accepted.iter().enumerate() {
        out.set_column(j, q);
    }
    Ok(out)
}

/// Adjoint map `A* y = (1/n) Aᵀ y`, so that `<Af, y>_n = <f, A*y>`.
pub fn adjoint_apply(a: &DesignMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != a.n() {
        return Err(Error::Dimension(format!(
            "adjoint_apply: observation length {} vs sample count {}",
            y.len(),
            a.n()
        )));
    }
    Ok(a.matrix().transpose() * y / a.n() as f64)
}

/// Singular system `(σ_j; φ_j, ψ_j)` of a design matrix with respect to the
/// empirical inner product on observations and the standard inner product
/// on parameters: `A φ_j = σ_j ψ_j`, `A* ψ_j = σ_j φ_j`, and the `λ_j = σ_j²`
/// are the eigenvalues of `A*A`.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularSystem {
    sigmas: Vec<f64>,
    /// `n × d'`; column `j` is `ψ_j`, orthonormal under `<,>_n`.
    left: DMatrix<f64>,
    /// `d × d'`; column `j` is `φ_j`, orthonormal under the standard product.
    right: DMatrix<f64>,
    n: usize,
    degenerate: bool,
}

impl SingularSystem {
    /// Assembles a system from parts, validating ordering and orthonormality.
    pub fn from_parts(
        sigmas: Vec<f64>,
        left: DMatrix<f64>,
        right: DMatrix<f64>,
        n: usize,
    ) -> Result<Self> {
        let d = sigmas.len();
        if left.ncols() != d || right.ncols() != d {
            return Err(Error::Dimension(
                "singular system: vector counts do not match sigma count".into(),
            ));
        }
        if left.nrows() != n {
            return Err(Error::Dimension(
                "singular system: left vectors must have length n".into(),
            ));
        }
        if sigmas.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::Domain("singular values must be positive".into()));
        }
        if sigmas.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("singular values must be nonincreasing".into()));
        }
        let nf = n as f64;
        for i in 0..d {
            for j in i..d {
                let target = if i == j { 1.0 } else { 0.0 };
                let ln = left.column(i).dot(&left.column(j)) / nf;
                let rn = right.column(i).dot(&right.column(j));
                if (ln - target).abs() > 1e-8 || (rn - target).abs() > 1e-8 {
                    return Err(Error::Domain(
                        "singular vectors are not orthonormal in their inner products".into(),
                    ));
                }
            }
        }
        Ok(Self {
            sigmas,
            left,
            right,
            n,
            degenerate: d == 0,
        })
    }

    /// Number of retained singular triples.
    pub fn rank(&self) -> usize {
        self.sigmas.len()
    }

    /// True when the decomposed operator was numerically zero.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Dimension of the parameter space the right vectors live in.
    pub fn parameter_dim(&self) -> usize {
        self.right.nrows()
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn sigma_max(&self) -> f64 {
        self.sigmas.first().copied().unwrap_or(0.0)
    }

    /// Eigenvalues `λ_j = σ_j²` of `A*A`, nonincreasing.
    pub fn lambdas(&self) -> Vec<f64> {
        self.sigmas.iter().map(|s| s * s).collect()
    }

    pub fn lambda_max(&self) -> f64 {
        let s = self.sigma_max();
        s * s
    }

    pub fn left_vector(&self, j: usize) -> DVector<f64> {
        self.left.column(j).clone_owned()
    }

    pub fn right_vector(&self, j: usize) -> DVector<f64> {
        self.right.column(j).clone_owned()
    }

    /// Data coefficients `c_j = <y, ψ_j>_n` of an observation vector.
    pub fn data_coefficients(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.n {
            return Err(Error::Dimension(format!(
                "data_coefficients: observation length {} vs n = {}",
                y.len(),
                self.n
            )));
        }
        Ok(self.left.transpose() * y / self.n as f64)
    }

    /// Coefficients `<f, φ_j>` of a parameter vector in the right basis.
    pub fn to_basis(&self, f: &DVector<f64>) -> Result<DVector<f64>> {
        if f.len() != self.parameter_dim() {
            return Err(Error::Dimension(format!(
                "to_basis: parameter length {} vs dimension {}",
                f.len(),
                self.parameter_dim()
            )));
        }
        Ok(self.right.transpose() * f)
    }

    /// Reconstructs `Σ c_j φ_j` from coefficients in the right basis.
    pub fn from_basis(&self, coeffs: &DVector<f64>) -> Result<DVector<f64>> {
        if coeffs.len() != self.rank() {
            return Err(Error::Dimension(format!(
                "from_basis: {} coefficients vs rank {}",
                coeffs.len(),
                self.rank()
            )));
        }
        Ok(&self.right * coeffs)
    }
}

/// Singular value decomposition of a design matrix under the empirical
/// structure: the standard SVD of `(1/√n) A` with left vectors rescaled by
/// `√n`. Values below `RANK_TOL · σ_1` are truncated; an all-zero matrix
/// yields an empty system flagged degenerate.
pub fn svd(a: &DesignMatrix) -> Result<SingularSystem> {
    let n = a.n();
    let nf = n as f64;
    let b = a.matrix() / nf.sqrt();
    let svd = b.svd(true, true);
    let u = svd
        .u
        .ok_or_else(|| Error::Numeric("svd did not return left vectors".into()))?;
    let vt = svd
        .v_t
        .ok_or_else(|| Error::Numeric("svd did not return right vectors".into()))?;
    let values = &svd.singular_values;
    if values.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numeric("svd produced non-finite singular values".into()));
    }

    // nalgebra returns values sorted nonincreasing.
    debug_assert!((1..values.len()).all(|i| values[i - 1] >= values[i]));

    let sigma1 = values.max();
    let rank = values.iter().filter(|s| **s > RANK_TOL * sigma1).count();
    if sigma1 <= 0.0 || rank == 0 {
        return Ok(SingularSystem {
            sigmas: Vec::new(),
            left: DMatrix::zeros(n, 0),
            right: DMatrix::zeros(a.dim(), 0),
            n,
            degenerate: true,
        });
    }

    let mut sigmas = Vec::with_capacity(rank);
    let mut left = DMatrix::zeros(n, rank);
    let mut right = DMatrix::zeros(a.dim(), rank);
    for j in 0..rank {
        sigmas.push(values[j]);
        left.set_column(j, &(u.column(j) * nf.sqrt()));
        right.set_column(j, &vt.row(j).transpose());
    }
    Ok(SingularSystem {
        sigmas,
        left,
        right,
        n,
        degenerate: false,
    })
}

/// A piecewise continuous function `G` of a self-adjoint operator, valid on
/// the spectral interval `[0, support_bound]`.
pub struct SpectralFunction {
    support_bound: f64,
    eval: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl SpectralFunction {
    pub fn new(support_bound: f64, eval: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            support_bound,
            eval: Box::new(eval),
        }
    }

    pub fn support_bound(&self) -> f64 {
        self.support_bound
    }

    pub fn value(&self, lambda: f64) -> f64 {
        (self.eval)(lambda)
    }
}

/// Spectral calculus `G(A*A) f = Σ_j G(σ_j²) <f, φ_j> φ_j`.
pub fn apply_spectral_function(
    s: &SingularSystem,
    g: &SpectralFunction,
    f: &DVector<f64>,
) -> Result<DVector<f64>> {
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("apply_spectral_function: non-finite input".into()));
    }
    let mut coeffs = s.to_basis(f)?;
    for (j, sigma) in s.sigmas().iter().enumerate() {
        let lambda = sigma * sigma;
        if lambda > g.support_bound() {
            return Err(Error::Domain(format!(
                "eigenvalue {lambda} exceeds the support bound {}",
                g.support_bound()
            )));
        }
        let gl = g.value(lambda);
        if !gl.is_finite() {
            return Err(Error::Numeric(format!(
                "spectral function not finite at lambda = {lambda}"
            )));
        }
        coeffs[j] *= gl;
    }
    s.from_basis(&coeffs)
}

/// Orthogonal projection of `y` onto the empirical span of the basis
/// columns: `Σ_j <y, b_j>_n b_j`. The basis must be empirically orthonormal.
pub fn project_onto_ym(basis: &DesignMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    if !basis.is_empirically_orthonormal(ORTHO_TOL) {
        return Err(Error::Domain(
            "projection basis is not empirically orthonormal".into(),
        ));
    }
    if y.len() != basis.n() {
        return Err(Error::Dimension(format!(
            "project_onto_ym: observation length {} vs n = {}",
            y.len(),
            basis.n()
        )));
    }
    let coeffs = basis.matrix().transpose() * y / basis.n() as f64;
    Ok(basis.matrix() * coeffs)
}

/// Minimum-norm least-squares solution `Σ_j <y, ψ_j>_n / σ_j · φ_j`.
pub fn pseudo_inverse_solution(s: &SingularSystem, y: &DVector<f64>) -> Result<DVector<f64>> {
    if s.rank() == 0 {
        return Err(Error::Degenerate(
            "pseudo-inverse of a rank-zero operator".into(),
        ));
    }
    let mut coeffs = s.data_coefficients(y)?;
    for (j, sigma) in s.sigmas().iter().enumerate() {
        coeffs[j] /= sigma;
    }
    s.from_basis(&coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_design(n: usize, d: usize, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DesignMatrix::new(DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0))).unwrap()
    }

    #[test]
    fn empirical_inner_constant_vector() {
        let u = DVector::from_vec(vec![1.0; 4]);
        assert_eq!(empirical_inner(&u, &u).unwrap(), 1.0);
    }

    #[test]
    fn empirical_inner_orthogonal_pair() {
        let u = DVector::from_vec(vec![1.0, -1.0]);
        let v = DVector::from_vec(vec![1.0, 1.0]);
        assert_eq!(empirical_inner(&u, &v).unwrap(), 0.0);
    }

    #[test]
    fn empirical_inner_hand_sum() {
        let u = DVector::from_vec(vec![3.0, 4.0]);
        // (9 + 16) / 2
        assert_eq!(empirical_inner(&u, &u).unwrap(), 12.5);
        assert_eq!(empirical_norm(&u), 12.5f64.sqrt());
    }

    #[test]
    fn empirical_inner_length_mismatch() {
        let u = DVector::from_vec(vec![1.0]);
        let v = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(
            empirical_inner(&u, &v),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn adjoint_identity_one_dim() {
        let a = DesignMatrix::new(DMatrix::from_element(1, 1, 1.0)).unwrap();
        let y = DVector::from_vec(vec![2.0]);
        assert_eq!(adjoint_apply(&a, &y).unwrap()[0], 2.0);
    }

    #[test]
    fn adjoint_column_average() {
        let a = DesignMatrix::new(DMatrix::from_column_slice(2, 1, &[1.0, 1.0])).unwrap();
        let y = DVector::from_vec(vec![1.0, 3.0]);
        // (1/2)(1*1 + 1*3)
        assert_eq!(adjoint_apply(&a, &y).unwrap()[0], 2.0);
    }

    #[test]
    fn adjoint_pairing_random() {
        let a = random_design(9, 4, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let f = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let y = DVector::from_fn(9, |_, _| rng.gen_range(-1.0..1.0));
            let lhs = empirical_inner(&a.apply(&f).unwrap(), &y).unwrap();
            let rhs = adjoint_apply(&a, &y).unwrap().dot(&f);
            assert_relative_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn svd_of_scaled_identity() {
        let n = 2.0f64;
        let a = DesignMatrix::new(DMatrix::identity(2, 2) * n.sqrt()).unwrap();
        let s = svd(&a).unwrap();
        assert_eq!(s.rank(), 2);
        assert_relative_eq!(s.sigmas()[0], 1.0, epsilon = 1e-14);
        assert_relative_eq!(s.sigmas()[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn svd_of_scaled_orthonormal_frame() {
        // Empirically orthonormal 4x2 frame with columns scaled by (2, 1).
        let frame = DMatrix::from_fn(4, 2, |i, j| if j == 0 { 1.0 } else { [1.0, -1.0][i % 2] });
        let q = DesignMatrix::orthonormalize(frame).unwrap();
        let mut m = q.matrix().clone();
        m.column_mut(0).scale_mut(2.0);
        let s = svd(&DesignMatrix::new(m).unwrap()).unwrap();
        assert_relative_eq!(s.sigmas()[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(s.sigmas()[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn svd_reconstructs_operator() {
        let a = random_design(6, 4, 3);
        let s = svd(&a).unwrap();
        let mut rec = DMatrix::zeros(6, 4);
        for j in 0..s.rank() {
            rec += s.left_vector(j) * s.right_vector(j).transpose() * s.sigmas()[j];
        }
        for (x, y) in rec.iter().zip(a.matrix().iter()) {
            assert!((x - y).abs() <= 1e-9, "reconstruction off: {x} vs {y}");
        }
    }

    #[test]
    fn svd_triple_relations() {
        let a = random_design(8, 5, 11);
        let s = svd(&a).unwrap();
        let sigma1 = s.sigma_max();
        for j in 0..s.rank() {
            let lhs = a.apply(&s.right_vector(j)).unwrap();
            let rhs = s.left_vector(j) * s.sigmas()[j];
            assert!((lhs - rhs).norm() <= 1e-8 * sigma1);
            let back = adjoint_apply(&a, &s.left_vector(j)).unwrap();
            let expect = s.right_vector(j) * s.sigmas()[j];
            assert!((back - expect).norm() <= 1e-8 * sigma1);
        }
    }

    #[test]
    fn svd_zero_matrix_is_degenerate() {
        let a = DesignMatrix::new(DMatrix::zeros(3, 2)).unwrap();
        let s = svd(&a).unwrap();
        assert_eq!(s.rank(), 0);
        assert!(s.is_degenerate());
    }

    #[test]
    fn spectral_identity_projects() {
        let a = random_design(7, 3, 5);
        let s = svd(&a).unwrap();
        let g = SpectralFunction::new(s.lambda_max(), |_| 1.0);
        // f in span of the right basis: G ≡ 1 acts as the identity.
        let coeffs = DVector::from_vec(vec![0.3, -1.2, 0.8]);
        let f = s.from_basis(&coeffs).unwrap();
        let out = apply_spectral_function(&s, &g, &f).unwrap();
        assert!((out - f).norm() <= 1e-12);
    }

    #[test]
    fn spectral_lambda_matches_normal_operator() {
        let a = random_design(7, 3, 6);
        let s = svd(&a).unwrap();
        let g = SpectralFunction::new(s.lambda_max(), |l| l);
        let f = DVector::from_vec(vec![0.5, 0.25, -1.0]);
        let spectral = apply_spectral_function(&s, &g, &f).unwrap();
        let direct = adjoint_apply(&a, &a.apply(&f).unwrap()).unwrap();
        assert!((spectral - direct).norm() <= 1e-10);
    }

    #[test]
    fn spectral_inverse_matches_normal_equations() {
        let a = random_design(4, 3, 9);
        let s = svd(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let y = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
        let g = SpectralFunction::new(s.lambda_max(), |l| 1.0 / l);
        let via_filter = apply_spectral_function(&s, &g, &adjoint_apply(&a, &y).unwrap()).unwrap();
        // Independent oracle: solve the normal equations A*A f = A*y by LU.
        let normal = a.matrix().transpose() * a.matrix() / a.n() as f64;
        let rhs = adjoint_apply(&a, &y).unwrap();
        let direct = normal.lu().solve(&rhs).expect("normal equations solvable");
        assert!((via_filter - direct).norm() <= 1e-9);
    }

    #[test]
    fn spectral_function_support_violation() {
        let a = random_design(5, 2, 12);
        let s = svd(&a).unwrap();
        let g = SpectralFunction::new(s.lambda_max() * 0.5, |_| 1.0);
        let f = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(
            apply_spectral_function(&s, &g, &f),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn spectral_calculus_composes() {
        let a = random_design(9, 4, 13);
        let s = svd(&a).unwrap();
        let g1 = SpectralFunction::new(s.lambda_max(), |l| 1.0 + l);
        let g2 = SpectralFunction::new(s.lambda_max(), |l| (0.5 * l).exp());
        let g12 = SpectralFunction::new(s.lambda_max(), |l| (1.0 + l) * (0.5 * l).exp());
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..5 {
            let f = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
            let two_step =
                apply_spectral_function(&s, &g2, &apply_spectral_function(&s, &g1, &f).unwrap())
                    .unwrap();
            let one_step = apply_spectral_function(&s, &g12, &f).unwrap();
            assert!((two_step - one_step).norm() <= 1e-10);
        }
    }

    #[test]
    fn spectral_norm_identity() {
        let a = random_design(9, 4, 15);
        let s = svd(&a).unwrap();
        let g = SpectralFunction::new(s.lambda_max(), |l| 1.0 / (1.0 + l));
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let f = DVector::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
        let out = apply_spectral_function(&s, &g, &f).unwrap();
        let coeffs = s.to_basis(&f).unwrap();
        let expected: f64 = s
            .sigmas()
            .iter()
            .zip(coeffs.iter())
            .map(|(sig, c)| {
                let gl = g.value(sig * sig);
                gl * gl * c * c
            })
            .sum();
        // The right basis spans the full 4-dim parameter space here.
        assert_relative_eq!(out.norm_squared(), expected, epsilon = 1e-10);
    }

    #[test]
    fn projection_fixes_range_and_kills_complement() {
        let frame = DMatrix::from_fn(6, 2, |i, j| ((i + 1) as f64).powi(j as i32 + 1));
        let basis = DesignMatrix::orthonormalize(frame).unwrap();
        let y_in = basis.matrix() * DVector::from_vec(vec![1.5, -0.5]);
        let projected = project_onto_ym(&basis, &y_in).unwrap();
        assert!((projected - &y_in).norm() <= 1e-12);

        // Build a vector orthogonal (in <,>_n) to the basis columns.
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let y = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
        let tail = &y - project_onto_ym(&basis, &y).unwrap();
        let killed = project_onto_ym(&basis, &tail).unwrap();
        assert!(killed.norm() <= 1e-12);
    }

    #[test]
    fn projection_pythagoras() {
        let frame = DMatrix::from_fn(8, 3, |i, j| ((i as f64) * 0.7 + 1.0).powi(j as i32));
        let basis = DesignMatrix::orthonormalize(frame).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let y = DVector::from_fn(8, |_, _| rng.gen_range(-1.0..1.0));
        let proj = project_onto_ym(&basis, &y).unwrap();
        let resid = &y - &proj;
        let total = empirical_inner(&y, &y).unwrap();
        let split =
            empirical_inner(&proj, &proj).unwrap() + empirical_inner(&resid, &resid).unwrap();
        assert_relative_eq!(total, split, epsilon = 1e-12);
    }

    #[test]
    fn projection_idempotent_and_self_adjoint() {
        let frame = DMatrix::from_fn(8, 3, |i, j| ((i as f64) - 3.5).powi(j as i32));
        let basis = DesignMatrix::orthonormalize(frame).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let y = DVector::from_fn(8, |_, _| rng.gen_range(-1.0..1.0));
        let z = DVector::from_fn(8, |_, _| rng.gen_range(-1.0..1.0));
        let py = project_onto_ym(&basis, &y).unwrap();
        let ppy = project_onto_ym(&basis, &py).unwrap();
        assert!((&ppy - &py).norm() <= 1e-10);
        let pz = project_onto_ym(&basis, &z).unwrap();
        let lhs = empirical_inner(&py, &z).unwrap();
        let rhs = empirical_inner(&y, &pz).unwrap();
        assert_relative_eq!(lhs, rhs, epsilon = 1e-10);
    }

    #[test]
    fn projection_rejects_skew_basis() {
        let skew = DesignMatrix::new(DMatrix::from_fn(4, 2, |i, j| (i + j + 1) as f64)).unwrap();
        let y = DVector::from_vec(vec![1.0; 4]);
        assert!(matches!(
            project_onto_ym(&skew, &y),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn pseudo_inverse_recovers_noiseless_truth() {
        let a = random_design(8, 3, 30);
        let s = svd(&a).unwrap();
        let truth = s.from_basis(&DVector::from_vec(vec![1.0, -2.0, 0.5])).unwrap();
        let y = a.apply(&truth).unwrap();
        let rec = pseudo_inverse_solution(&s, &y).unwrap();
        assert!((rec - truth).norm() <= 1e-9);
    }

    #[test]
    fn pseudo_inverse_diagonal_division() {
        // Diagonal system sigma = (1, 0.5) on n = 2 with standard-basis vectors.
        let n = 2;
        let left = DMatrix::from_fn(n, 2, |i, j| if i == j { (n as f64).sqrt() } else { 0.0 });
        let right = DMatrix::identity(2, 2);
        let s = SingularSystem::from_parts(vec![1.0, 0.5], left.clone(), right, n).unwrap();
        // Observation whose data coefficients are (1, 1).
        let y = left.column(0) + left.column(1);
        let sol = pseudo_inverse_solution(&s, &y.clone_owned()).unwrap();
        assert_relative_eq!(sol[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sol[1], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pseudo_inverse_amplifies_high_frequency_noise() {
        let n = 2;
        let left = DMatrix::from_fn(n, 2, |i, j| if i == j { (n as f64).sqrt() } else { 0.0 });
        let right = DMatrix::identity(2, 2);
        let s = SingularSystem::from_parts(vec![1.0, 1e-3], left.clone(), right, n).unwrap();
        let delta = 1e-4;
        let y0 = left.column(0).clone_owned();
        let y1 = &y0 + left.column(1) * delta;
        let d = pseudo_inverse_solution(&s, &y1).unwrap() - pseudo_inverse_solution(&s, &y0).unwrap();
        assert_relative_eq!(d.norm(), delta / 1e-3, max_relative = 1e-10);
    }

    #[test]
    fn pseudo_inverse_rank_zero_errors() {
        let a = DesignMatrix::new(DMatrix::zeros(3, 2)).unwrap();
        let s = svd(&a).unwrap();
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!(matches!(
            pseudo_inverse_solution(&s, &y),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn degenerate_observation_gives_zero_everywhere() {
        let a = random_design(6, 3, 31);
        let s = svd(&a).unwrap();
        let y = DVector::zeros(6);
        assert_eq!(adjoint_apply(&a, &y).unwrap().norm(), 0.0);
        assert_eq!(pseudo_inverse_solution(&s, &y).unwrap().norm(), 0.0);
        assert_eq!(s.data_coefficients(&y).unwrap().norm(), 0.0);
    }
}
