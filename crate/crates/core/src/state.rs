//! Density operators of fixed rank, their tangent vectors, and non-Hermitian
//! generators `K = H − iΓ`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, anticommutator, check_hermitian, check_same_dim, commutator, cr, hermitian_eigen,
    hermitian_parts, hermitize, tr, CMatrix, MatrixJson, SpectralDecomposition, DEFAULT_CLUSTER_TOL,
    I,
};

/// Eigenvalues at or below this are treated as outside the support.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;
/// Absolute tolerance on `Tr ρ = 1` and on `Tr ρ̇ = 0`.
pub const TRACE_TOL: f64 = 1e-10;

/// Hermitian, positive-semidefinite, unit-trace matrix with a tracked rank.
///
/// The eigensystem is computed once on construction. Eigenvalues at or below
/// `rank_tol` are snapped to exactly zero in the cached spectrum so the kernel
/// forms a single cluster.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: CMatrix,
    rank: usize,
    rank_tol: f64,
    cluster_tol: f64,
    spectrum: SpectralDecomposition,
}

impl DensityOperator {
    pub fn new(matrix: CMatrix, rank_tol: f64) -> Result<Self> {
        Self::with_tolerances(matrix, rank_tol, DEFAULT_CLUSTER_TOL)
    }

    pub fn with_tolerances(matrix: CMatrix, rank_tol: f64, cluster_tol: f64) -> Result<Self> {
        if !(rank_tol > 0.0) {
            return Err(Error::InvalidArgument {
                name: "rank_tol",
                detail: format!("must be positive, got {rank_tol}"),
            });
        }
        if !(cluster_tol > 0.0) {
            return Err(Error::InvalidArgument {
                name: "cluster_tol",
                detail: format!("must be positive, got {cluster_tol}"),
            });
        }
        check_hermitian(&matrix, "density operator")?;
        let trace = tr(&matrix);
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace { trace });
        }
        let matrix = hermitize(&matrix);
        let (mut raw, vectors) = hermitian_eigen(&matrix);
        let min = raw.last().copied().unwrap_or(0.0);
        if min < -rank_tol {
            return Err(Error::Negative { min_eigenvalue: min });
        }
        let rank = raw.iter().filter(|&&l| l > rank_tol).count();
        for l in raw.iter_mut().filter(|l| **l <= rank_tol) {
            *l = 0.0;
        }
        let spectrum = linalg::cluster_eigensystem(raw, vectors, cluster_tol);
        Ok(DensityOperator {
            matrix,
            rank,
            rank_tol,
            cluster_tol,
            spectrum,
        })
    }

    /// Normalizes a positive operator (for example an un-normalized trajectory point).
    pub fn from_unnormalized(matrix: &CMatrix, rank_tol: f64, cluster_tol: f64) -> Result<Self> {
        let h = hermitize(matrix);
        let trace = tr(&h);
        if !(trace > 0.0) || !trace.is_finite() {
            return Err(Error::InvalidTrace { trace });
        }
        Self::with_tolerances(h * cr(1.0 / trace), rank_tol, cluster_tol)
    }

    /// Intermediate integrator point: hermitized and trace-normalized, with
    /// every eigenvalue at or below `rank_tol` (including small negative ones)
    /// snapped to zero instead of rejected.
    pub(crate) fn relaxed(matrix: &CMatrix, rank_tol: f64, cluster_tol: f64) -> Result<Self> {
        linalg::check_finite(matrix)?;
        let h = hermitize(matrix);
        let trace = tr(&h);
        if !(trace > 0.0) {
            return Err(Error::InvalidTrace { trace });
        }
        let matrix = h * cr(1.0 / trace);
        let (mut raw, vectors) = hermitian_eigen(&matrix);
        let rank = raw.iter().filter(|&&l| l > rank_tol).count();
        for l in raw.iter_mut().filter(|l| **l <= rank_tol) {
            *l = 0.0;
        }
        let spectrum = linalg::cluster_eigensystem(raw, vectors, cluster_tol);
        Ok(DensityOperator {
            matrix,
            rank,
            rank_tol,
            cluster_tol,
            spectrum,
        })
    }

    /// Projector onto a (not necessarily normalized) state vector.
    pub fn pure(psi: &[linalg::Complex]) -> Result<Self> {
        let v = nalgebra::DVector::from_column_slice(psi);
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::Empty);
        }
        let v = v / cr(norm);
        Self::new(&v * v.adjoint(), DEFAULT_RANK_TOL)
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self::new(linalg::identity(n) * cr(1.0 / n as f64), DEFAULT_RANK_TOL)
            .expect("maximally mixed state is valid")
    }

    /// Diagonal state from populations (renormalized).
    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        Self::from_unnormalized(&linalg::from_diagonal(populations), DEFAULT_RANK_TOL, DEFAULT_CLUSTER_TOL)
    }

    /// Same matrix, different clustering threshold.
    pub fn reclustered(&self, cluster_tol: f64) -> Result<Self> {
        Self::with_tolerances(self.matrix.clone(), self.rank_tol, cluster_tol)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn cluster_tol(&self) -> f64 {
        self.cluster_tol
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.dim()
    }

    pub fn spectrum(&self) -> &SpectralDecomposition {
        &self.spectrum
    }

    /// Eigenvalues, descending, with the kernel snapped to zero.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.spectrum.raw_eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.spectrum.eigenvectors
    }

    /// Smallest eigenvalue inside the support, before snapping.
    pub fn smallest_retained(&self) -> f64 {
        if self.rank == 0 {
            return 0.0;
        }
        let (values, _) = hermitian_eigen(&self.matrix);
        values[self.rank - 1]
    }

    /// Projector onto the support of the state.
    pub fn support_projector(&self) -> CMatrix {
        let v = self.eigenvectors().columns(0, self.rank);
        &v * v.adjoint()
    }

    /// `Tr(Aρ)`.
    pub fn expectation(&self, a: &CMatrix) -> f64 {
        linalg::tr_prod(a, &self.matrix)
    }

    /// `Tr(A²ρ) − Tr(Aρ)²`.
    pub fn variance(&self, a: &CMatrix) -> f64 {
        let mean = self.expectation(a);
        linalg::tr_prod(&(a * a), &self.matrix) - mean * mean
    }

    pub(crate) fn check_dim(&self, a: &CMatrix) -> Result<()> {
        if a.nrows() != self.dim() || a.ncols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", self.dim()),
                got: format!("{}x{}", a.nrows(), a.ncols()),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> StateJson {
        let m = MatrixJson::from_matrix(&self.matrix);
        StateJson {
            rows: m.rows,
            cols: m.cols,
            re: m.re,
            im: m.im,
            rank_tol: self.rank_tol,
        }
    }
}

/// Serialized state: the matrix exchange format plus `rank_tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub rank_tol: f64,
}

impl StateJson {
    pub fn matrix_json(&self) -> MatrixJson {
        MatrixJson {
            rows: self.rows,
            cols: self.cols,
            re: self.re.clone(),
            im: self.im.clone(),
        }
    }

    pub fn to_state(&self) -> Result<DensityOperator> {
        DensityOperator::new(self.matrix_json().to_matrix()?, self.rank_tol)
    }
}

/// Traceless Hermitian matrix attached to a base state.
#[derive(Debug, Clone)]
pub struct TangentVector {
    base: Arc<DensityOperator>,
    matrix: CMatrix,
}

impl TangentVector {
    pub fn new(base: Arc<DensityOperator>, matrix: CMatrix) -> Result<Self> {
        base.check_dim(&matrix)?;
        check_hermitian(&matrix, "tangent")?;
        let trace = tr(&matrix);
        if trace.abs() > TRACE_TOL {
            return Err(Error::NotTraceless { trace });
        }
        Ok(Self::unchecked(base, hermitize(&matrix)))
    }

    pub(crate) fn unchecked(base: Arc<DensityOperator>, matrix: CMatrix) -> Self {
        TangentVector { base, matrix }
    }

    pub fn zero(base: Arc<DensityOperator>) -> Self {
        let n = base.dim();
        Self::unchecked(base, CMatrix::zeros(n, n))
    }

    pub fn base(&self) -> &DensityOperator {
        &self.base
    }

    pub fn base_arc(&self) -> &Arc<DensityOperator> {
        &self.base
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn same_base(&self, other: &TangentVector) -> bool {
        Arc::ptr_eq(&self.base, &other.base)
            || (self.base.matrix() - other.base.matrix()).norm() <= 1e-12
    }

    pub fn scaled(&self, s: f64) -> TangentVector {
        Self::unchecked(self.base.clone(), &self.matrix * cr(s))
    }

    pub fn add(&self, other: &TangentVector) -> Result<TangentVector> {
        if !self.same_base(other) {
            return Err(Error::BaseMismatch);
        }
        Ok(Self::unchecked(self.base.clone(), &self.matrix + &other.matrix))
    }

    pub fn sub(&self, other: &TangentVector) -> Result<TangentVector> {
        self.add(&other.scaled(-1.0))
    }

    pub fn to_json(&self) -> TangentJson {
        let m = MatrixJson::from_matrix(&self.matrix);
        TangentJson {
            rows: m.rows,
            cols: m.cols,
            re: m.re,
            im: m.im,
            rank_tol: self.base.rank_tol(),
            base: MatrixJson::from_matrix(self.base.matrix()),
        }
    }
}

/// Serialized tangent: its matrix, the base state matrix, and `rank_tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TangentJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub rank_tol: f64,
    pub base: MatrixJson,
}

impl TangentJson {
    pub fn to_tangent(&self) -> Result<TangentVector> {
        let base = DensityOperator::new(self.base.to_matrix()?, self.rank_tol)?;
        let m = MatrixJson {
            rows: self.rows,
            cols: self.cols,
            re: self.re.clone(),
            im: self.im.clone(),
        };
        TangentVector::new(Arc::new(base), m.to_matrix()?)
    }
}

/// `K = H − iΓ` stored through its Hermitian parts.
#[derive(Debug, Clone, PartialEq)]
pub struct NonHermitianGenerator {
    pub h: CMatrix,
    pub gamma: CMatrix,
}

impl NonHermitianGenerator {
    pub fn new(h: CMatrix, gamma: CMatrix) -> Result<Self> {
        check_hermitian(&h, "H")?;
        check_hermitian(&gamma, "Gamma")?;
        check_same_dim(&h, &gamma)?;
        Ok(NonHermitianGenerator {
            h: hermitize(&h),
            gamma: hermitize(&gamma),
        })
    }

    /// Splits an arbitrary square matrix into `H = (K + K†)/2`, `Γ = (K† − K)/2i`.
    pub fn from_k(k: &CMatrix) -> Result<Self> {
        linalg::check_square(k)?;
        let (h, gamma) = hermitian_parts(k);
        Ok(NonHermitianGenerator { h, gamma })
    }

    pub fn zero(n: usize) -> Self {
        NonHermitianGenerator {
            h: CMatrix::zeros(n, n),
            gamma: CMatrix::zeros(n, n),
        }
    }

    pub fn hermitian(h: CMatrix) -> Result<Self> {
        let n = h.nrows();
        Self::new(h, CMatrix::zeros(n, n))
    }

    pub fn anti_hermitian(gamma: CMatrix) -> Result<Self> {
        let n = gamma.nrows();
        Self::new(CMatrix::zeros(n, n), gamma)
    }

    pub fn k(&self) -> CMatrix {
        &self.h - &self.gamma * I
    }

    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// `Γ̃_ρ = Γ − Tr(Γρ)`.
    pub fn centered_gamma(&self, rho: &DensityOperator) -> CMatrix {
        let mean = rho.expectation(&self.gamma);
        &self.gamma - linalg::identity(self.dim()) * cr(mean)
    }
}

/// `ρ̇ = −i(Kρ − ρK†) + i Tr((K − K†)ρ) ρ`.
pub fn tangent_from_generator(k: &CMatrix, rho: &Arc<DensityOperator>) -> Result<TangentVector> {
    rho.check_dim(k)?;
    let r = rho.matrix();
    let kd = k.adjoint();
    let drive = (k * r - r * &kd) * (-I);
    let norm_term = ((k - &kd) * r).trace() * I;
    Ok(TangentVector::unchecked(rho.clone(), hermitize(&(drive + r * norm_term))))
}

/// `ρ̇ = −i[H, ρ] − {Γ, ρ} + 2 Tr(Γρ) ρ`.
pub fn tangent_from_h_gamma(gen: &NonHermitianGenerator, rho: &Arc<DensityOperator>) -> Result<TangentVector> {
    rho.check_dim(&gen.h)?;
    let r = rho.matrix();
    let m = commutator(&gen.h, r) * (-I) - anticommutator(&gen.gamma, r)
        + r * cr(2.0 * rho.expectation(&gen.gamma));
    Ok(TangentVector::unchecked(rho.clone(), hermitize(&m)))
}

/// Coherent, classical, and lifting parts of a tangent vector.
#[derive(Debug, Clone)]
pub struct TangentDecomposition {
    pub coherent: TangentVector,
    pub classical: TangentVector,
    pub lifting: TangentVector,
}

impl TangentDecomposition {
    /// Incoherent part `classical + lifting`.
    pub fn incoherent(&self) -> TangentVector {
        TangentVector::unchecked(
            self.classical.base.clone(),
            &self.classical.matrix + &self.lifting.matrix,
        )
    }
}

/// Splits `v` using the clustered spectral projectors `Π_k` of its base state:
/// coherent `Σ_{k≠m} Π_k v Π_m`, classical `Σ_k Tr(Π_k v)/Tr(Π_k) Π_k`, and
/// lifting `Σ_k Π_k v Π_k` minus the classical part.
pub fn decompose_tangent(v: &TangentVector) -> TangentDecomposition {
    let n = v.base.dim();
    let spec = v.base.spectrum();
    let mut diagonal_blocks = CMatrix::zeros(n, n);
    let mut classical = CMatrix::zeros(n, n);
    for (p, &m) in spec.projectors.iter().zip(&spec.multiplicities) {
        let block = p * &v.matrix * p;
        let weight = tr(&block) / m as f64;
        classical += p * cr(weight);
        diagonal_blocks += block;
    }
    let coherent = &v.matrix - &diagonal_blocks;
    let lifting = diagonal_blocks - &classical;
    let base = v.base.clone();
    TangentDecomposition {
        coherent: TangentVector::unchecked(base.clone(), hermitize(&coherent)),
        classical: TangentVector::unchecked(base.clone(), hermitize(&classical)),
        lifting: TangentVector::unchecked(base, hermitize(&lifting)),
    }
}
