//! Complex-matrix primitives shared by every other module: clustered Hermitian
//! eigendecomposition, PSD square roots, Moore–Penrose pseudoinverse, and the
//! polar factorization.
//!
//! Matrices are dense `nalgebra::DMatrix<Complex64>`; the system sizes this
//! crate targets are a handful of levels, so no attempt is made at blocking or
//! sparse storage.

use nalgebra::{DMatrix, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Complex = Complex64;
pub type CMatrix = DMatrix<Complex64>;

/// Absolute Hermiticity tolerance (scaled by the largest entry when that exceeds one).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Default single-linkage threshold for merging eigenvalues.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;
/// Eigenvalues down to `-PSD_TOL` are clamped to zero by [`psd_sqrt`].
pub const PSD_TOL: f64 = 1e-10;

pub const I: Complex = Complex { re: 0.0, im: 1.0 };

#[inline]
pub fn c(re: f64, im: f64) -> Complex {
    Complex::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> Complex {
    Complex::new(re, 0.0)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Builds a matrix from real row-major entries.
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> CMatrix {
    CMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| cr(x)))
}

pub fn from_diagonal(diag: &[f64]) -> CMatrix {
    let n = diag.len();
    let mut m = CMatrix::zeros(n, n);
    for (k, &d) in diag.iter().enumerate() {
        m[(k, k)] = cr(d);
    }
    m
}

pub fn pauli_x() -> CMatrix {
    from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0])
}

pub fn pauli_y() -> CMatrix {
    CMatrix::from_row_slice(2, 2, &[cr(0.0), c(0.0, -1.0), c(0.0, 1.0), cr(0.0)])
}

pub fn pauli_z() -> CMatrix {
    from_diagonal(&[1.0, -1.0])
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// Real part of the trace.
pub fn tr(a: &CMatrix) -> f64 {
    a.trace().re
}

/// Real part of `Tr(a b)` without forming the product.
pub fn tr_prod(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Largest entry of `|A − A†|`.
pub fn hermitian_residual(a: &CMatrix) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(a: &CMatrix) -> CMatrix {
    (a + a.adjoint()) * cr(0.5)
}

/// Hermitian and anti-Hermitian split `A = H − iΓ`.
pub fn hermitian_parts(a: &CMatrix) -> (CMatrix, CMatrix) {
    let ad = a.adjoint();
    let h = (a + &ad) * cr(0.5);
    let g = (ad - a) * c(0.0, -0.5);
    (h, g)
}

pub(crate) fn check_finite(a: &CMatrix) -> Result<()> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::Empty);
    }
    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

pub(crate) fn check_square(a: &CMatrix) -> Result<()> {
    check_finite(a)?;
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    Ok(())
}

pub(crate) fn check_same_dim(a: &CMatrix, b: &CMatrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", a.nrows(), a.ncols()),
            got: format!("{}x{}", b.nrows(), b.ncols()),
        });
    }
    Ok(())
}

/// Rejects `a` unless it is Hermitian to [`HERMITIAN_TOL`] (relative to its scale).
pub fn check_hermitian(a: &CMatrix, what: &str) -> Result<()> {
    check_square(a)?;
    let residual = hermitian_residual(a);
    if residual > HERMITIAN_TOL * max_abs(a).max(1.0) {
        return Err(Error::NotHermitian {
            what: what.to_string(),
            residual,
        });
    }
    Ok(())
}

/// Eigenvalues (descending) and orthonormal eigenvectors (columns) of a Hermitian matrix.
///
/// Each eigenvector is rotated so that its largest-magnitude entry is real and
/// positive, which makes the output reproducible run to run.
pub fn hermitian_eigen(a: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = a.nrows();
    let eig = SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        let mut best = -1.0;
        for (k, z) in col.iter().enumerate() {
            // strict comparison keeps the first index among ties
            if z.norm() > best + 1e-14 {
                best = z.norm();
                pivot = k;
            }
        }
        let phase = if best > 0.0 {
            col[pivot].conj() / best
        } else {
            cr(1.0)
        };
        vectors.set_column(dst, &(col * phase));
    }
    (values, vectors)
}

/// `V diag(f(λ)) V†` for a Hermitian matrix with eigensystem `(values, vectors)`.
pub fn spectral_function(values: &[f64], vectors: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let n = vectors.nrows();
    let mut scaled = vectors.clone();
    for (k, &lam) in values.iter().enumerate() {
        let s = cr(f(lam));
        for i in 0..n {
            scaled[(i, k)] *= s;
        }
    }
    scaled * vectors.adjoint()
}

/// Spectral decomposition of a Hermitian operator with eigenvalues grouped
/// into distinct clusters.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Cluster means, descending.
    pub eigenvalues: Vec<f64>,
    /// One orthogonal projector per cluster.
    pub projectors: Vec<CMatrix>,
    pub multiplicities: Vec<usize>,
    /// Unclustered eigenvalues, descending.
    pub raw_eigenvalues: Vec<f64>,
    /// Eigenvectors as columns, aligned with `raw_eigenvalues`.
    pub eigenvectors: CMatrix,
    /// `cluster_of[i]` is the cluster index of raw eigenvalue `i`.
    pub cluster_of: Vec<usize>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvectors.nrows()
    }

    pub fn num_clusters(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Smallest gap between neighbouring distinct eigenvalues, `∞` for a single cluster.
    pub fn min_gap(&self) -> f64 {
        self.eigenvalues
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min)
    }

    /// Reassembles `Σ_k λ_k Π_k`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.dim();
        self.eigenvalues
            .iter()
            .zip(&self.projectors)
            .fold(CMatrix::zeros(n, n), |acc, (&l, p)| acc + p * cr(l))
    }
}

/// Clusters the spectrum of a Hermitian matrix by single linkage with absolute
/// threshold `cluster_tol` and returns one projector per cluster.
pub fn spectral_decompose(a: &CMatrix, cluster_tol: f64) -> Result<SpectralDecomposition> {
    if !(cluster_tol > 0.0) {
        return Err(Error::InvalidArgument {
            name: "cluster_tol",
            detail: format!("must be positive, got {cluster_tol}"),
        });
    }
    check_hermitian(a, "operator")?;
    let (raw, vectors) = hermitian_eigen(a);
    Ok(cluster_eigensystem(raw, vectors, cluster_tol))
}

pub(crate) fn cluster_eigensystem(
    raw: Vec<f64>,
    vectors: CMatrix,
    cluster_tol: f64,
) -> SpectralDecomposition {
    let n = raw.len();
    let mut cluster_of = vec![0usize; n];
    let mut bounds: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=n {
        if i == n || raw[i - 1] - raw[i] > cluster_tol {
            bounds.push((start, i));
            start = i;
        }
    }
    let mut eigenvalues = Vec::with_capacity(bounds.len());
    let mut projectors = Vec::with_capacity(bounds.len());
    let mut multiplicities = Vec::with_capacity(bounds.len());
    for (k, &(lo, hi)) in bounds.iter().enumerate() {
        let block = vectors.columns(lo, hi - lo);
        projectors.push(&block * block.adjoint());
        eigenvalues.push(raw[lo..hi].iter().sum::<f64>() / (hi - lo) as f64);
        multiplicities.push(hi - lo);
        cluster_of[lo..hi].iter_mut().for_each(|c| *c = k);
    }
    SpectralDecomposition {
        eigenvalues,
        projectors,
        multiplicities,
        raw_eigenvalues: raw,
        eigenvectors: vectors,
        cluster_of,
    }
}

/// Positive square root of a Hermitian PSD matrix.
pub fn psd_sqrt(a: &CMatrix) -> Result<CMatrix> {
    check_hermitian(a, "operator")?;
    let (values, vectors) = hermitian_eigen(a);
    let tol = PSD_TOL * max_abs(a).max(1.0);
    if let Some(&min) = values.last() {
        if min < -tol {
            return Err(Error::Negative {
                min_eigenvalue: min,
            });
        }
    }
    Ok(spectral_function(&values, &vectors, |l| l.max(0.0).sqrt()))
}

/// Thin singular value decomposition `A = U diag(s) V†`, singular values descending.
pub fn svd(a: &CMatrix) -> (CMatrix, Vec<f64>, CMatrix) {
    let dec = SVD::new(a.clone(), true, true);
    let u = dec.u.expect("left singular vectors requested");
    let v = dec.v_t.expect("right singular vectors requested").adjoint();
    (u, dec.singular_values.iter().copied().collect(), v)
}

/// Moore–Penrose pseudoinverse; singular values at or below `rank_tol` are treated as zero.
pub fn pseudo_inverse(w: &CMatrix, rank_tol: f64) -> CMatrix {
    let (u, s, v) = svd(w);
    let mut vs = v;
    for (k, &sigma) in s.iter().enumerate() {
        let inv = if sigma > rank_tol { 1.0 / sigma } else { 0.0 };
        let mut col = vs.column_mut(k);
        col *= cr(inv);
    }
    vs * u.adjoint()
}

/// Factors `A = P U` with `P = √(AA†)` and `U` unitary.
#[derive(Debug, Clone)]
pub struct PolarFactors {
    pub positive_part: CMatrix,
    pub unitary_part: CMatrix,
    /// Number of singular values above the support threshold.
    pub support_rank: usize,
    /// True when `A` was singular and `U` had to be completed off the support.
    pub completed: bool,
}

/// Left polar decomposition of a square matrix.
///
/// For singular input, `U` maps the kernel of `A` onto the orthogonal
/// complement of its range by the unitary part of `(1 − Π_range)(1 − Π_row)`,
/// which reduces to the identity when those two complements coincide. If that
/// map is itself degenerate the singular-vector bases are paired in order.
pub fn polar_decompose(a: &CMatrix) -> Result<PolarFactors> {
    check_square(a)?;
    let n = a.nrows();
    let (x, s, y) = svd(a);
    let tol = 1e-12 * s.first().copied().unwrap_or(0.0).max(1.0);
    let r = s.iter().filter(|&&v| v > tol).count();
    let mut xs = x.clone();
    for (k, &sigma) in s.iter().enumerate() {
        let mut col = xs.column_mut(k);
        col *= cr(sigma);
    }
    let positive = hermitize(&(xs * x.adjoint()));

    let xr = x.columns(0, r);
    let yr = y.columns(0, r);
    let mut unitary = &xr * yr.adjoint();
    if r < n {
        let id = identity(n);
        let off_range = &id - &xr * xr.adjoint();
        let off_row = &id - &yr * yr.adjoint();
        let bridge = &off_range * &off_row;
        let (bx, bs, by) = svd(&bridge);
        let k = n - r;
        let completion = if bs[k - 1] > 1e-8 {
            bx.columns(0, k) * by.columns(0, k).adjoint()
        } else {
            x.columns(r, k) * y.columns(r, k).adjoint()
        };
        unitary += completion;
    }
    Ok(PolarFactors {
        positive_part: positive,
        unitary_part: unitary,
        support_rank: r,
        completed: r < n,
    })
}

/// Eigenvalues of a general square matrix via the complex Schur form.
pub fn eigenvalues(a: &CMatrix) -> Result<Vec<Complex>> {
    check_square(a)?;
    let schur = Schur::try_new(a.clone(), 1e-15, 10_000).ok_or(Error::NoConvergence)?;
    let (_, t) = schur.unpack();
    Ok((0..a.nrows()).map(|i| t[(i, i)]).collect())
}

/// Trace distance `½‖A − B‖₁` between Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let (values, _) = hermitian_eigen(&(a - b));
    0.5 * values.iter().map(|v| v.abs()).sum::<f64>()
}

/// Matrix exchange format: `{ "rows", "cols", "re", "im" }` with row-major parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let mut re = Vec::with_capacity(m.len());
        let mut im = Vec::with_capacity(m.len());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            re,
            im,
        }
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let len = self.rows * self.cols;
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Empty);
        }
        if self.re.len() != len || self.im.len() != len {
            return Err(Error::DimensionMismatch {
                expected: format!("{len} entries"),
                got: format!("re {} / im {}", self.re.len(), self.im.len()),
            });
        }
        let m = CMatrix::from_row_iterator(
            self.rows,
            self.cols,
            self.re.iter().zip(&self.im).map(|(&r, &i)| c(r, i)),
        );
        check_finite(&m)?;
        Ok(m)
    }
}
