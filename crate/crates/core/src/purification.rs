//! Minimal purifications `W` (`n × r`, `WW† = ρ`), alignment of fiber
//! representatives, and the vertical/horizontal split of purification
//! velocities.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{cr, hermitize, identity, polar_decompose, pseudo_inverse, svd, CMatrix, DEFAULT_CLUSTER_TOL, I};
use crate::metric::{sld, sld_of_hamiltonian};
use crate::state::{DensityOperator, NonHermitianGenerator, TangentVector, DEFAULT_RANK_TOL, TRACE_TOL};

/// Allowed `Re Tr(W†Ẇ)` for a velocity tangent to the unit sphere.
pub const SPHERE_TANGENT_TOL: f64 = 1e-8;

/// Point of the fiber over `ρ = WW†`: unit Frobenius norm, full column rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Purification {
    w: CMatrix,
    rank_tol: f64,
}

impl Purification {
    pub fn new(w: CMatrix, rank_tol: f64) -> Result<Self> {
        crate::linalg::check_finite(&w)?;
        if w.ncols() == 0 || w.nrows() == 0 {
            return Err(Error::Empty);
        }
        if w.ncols() > w.nrows() {
            return Err(Error::DimensionMismatch {
                expected: format!("at most {} columns", w.nrows()),
                got: format!("{}x{}", w.nrows(), w.ncols()),
            });
        }
        let trace = w.norm_squared();
        if (trace - 1.0).abs() > TRACE_TOL {
            return Err(Error::InvalidTrace { trace });
        }
        let (_, s, _) = svd(&w);
        let smallest = s.last().copied().unwrap_or(0.0);
        if smallest <= rank_tol {
            return Err(Error::RankDeficient {
                op: "purification",
                rank: s.iter().filter(|&&v| v > rank_tol).count(),
                dim: w.ncols(),
            });
        }
        Ok(Purification { w, rank_tol })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.w
    }

    /// Dimension `n` of the system.
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// Number of columns `r`.
    pub fn rank(&self) -> usize {
        self.w.ncols()
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// `ρ = WW†`.
    pub fn state(&self) -> Result<DensityOperator> {
        DensityOperator::with_tolerances(&self.w * self.w.adjoint(), DEFAULT_RANK_TOL, DEFAULT_CLUSTER_TOL)
    }

    /// `⟨W, W'⟩ = Re Tr(W†W')`.
    pub fn inner(&self, other: &Purification) -> f64 {
        (self.w.adjoint() * &other.w).trace().re
    }

    /// `WV` for a unitary `V` acting on the ancilla (same fiber).
    pub fn act(&self, v: &CMatrix) -> Result<Purification> {
        if v.nrows() != self.rank() || v.ncols() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: format!("{0}x{0}", self.rank()),
                got: format!("{}x{}", v.nrows(), v.ncols()),
            });
        }
        Purification::new(&self.w * v, self.rank_tol)
    }
}

/// Minimal purification `[√λ₁|λ₁⟩, …, √λ_r|λ_r⟩]`, columns in descending eigenvalue order.
pub fn purify(rho: &DensityOperator) -> Purification {
    let r = rho.rank();
    let vectors = rho.eigenvectors();
    let lam = rho.eigenvalues();
    let mut w = vectors.columns(0, r).into_owned();
    for k in 0..r {
        let mut col = w.column_mut(k);
        col *= cr(lam[k].sqrt());
    }
    // rescale away the rounding left by the snapped kernel
    let norm = w.norm();
    w /= cr(norm);
    Purification {
        w,
        rank_tol: rho.rank_tol().min(DEFAULT_RANK_TOL),
    }
}

/// Result of [`align`].
#[derive(Debug, Clone)]
pub struct Alignment {
    pub purification: Purification,
    /// Rank of the overlap `W1†W2_raw`.
    pub overlap_rank: usize,
    /// The overlap was singular, so the polar unitary was completed off its
    /// support and is not unique.
    pub ambiguous: bool,
}

/// Representative `W2 = W2_raw U†` of the second fiber with `W1†W2 ≥ 0`,
/// where `W1†W2_raw = PU`.
pub fn align(w1: &Purification, w2_raw: &Purification) -> Result<Alignment> {
    if w1.w.shape() != w2_raw.w.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", w1.dim(), w1.rank()),
            got: format!("{}x{}", w2_raw.dim(), w2_raw.rank()),
        });
    }
    let overlap = w1.w.adjoint() * &w2_raw.w;
    let polar = polar_decompose(&overlap)?;
    let w2 = &w2_raw.w * polar.unitary_part.adjoint();
    Ok(Alignment {
        purification: Purification::new(w2, w2_raw.rank_tol)?,
        overlap_rank: polar.support_rank,
        ambiguous: polar.completed,
    })
}

/// `Ẇ = WA + LW` with `A` anti-Hermitian (vertical, along the fiber) and `L`
/// Hermitian with `Tr(Lρ) = 0` (horizontal).
#[derive(Debug, Clone)]
pub struct SplitTangent {
    pub vertical: CMatrix,
    pub horizontal: CMatrix,
    pub a: CMatrix,
    pub l: CMatrix,
}

/// `dπ_W(Ẇ) = ẆW† + WẆ†`.
pub fn project_velocity(wdot: &CMatrix, w: &Purification) -> CMatrix {
    hermitize(&(wdot * w.w.adjoint() + &w.w * wdot.adjoint()))
}

/// Euclidean inner product `½Tr(X†Y + Y†X)` on purification velocities.
pub fn euclidean_inner(x: &CMatrix, y: &CMatrix) -> f64 {
    (x.adjoint() * y).trace().re
}

/// Splits a velocity tangent to the unit sphere into fiber and horizontal parts.
pub fn split_tangent(wdot: &CMatrix, w: &Purification) -> Result<SplitTangent> {
    if wdot.shape() != w.w.shape() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{}", w.dim(), w.rank()),
            got: format!("{}x{}", wdot.nrows(), wdot.ncols()),
        });
    }
    let radial = euclidean_inner(&w.w, wdot);
    if radial.abs() > SPHERE_TANGENT_TOL {
        return Err(Error::NotATangent { residual: radial });
    }
    let rho = Arc::new(w.state()?);
    // the tolerated radial remnant `radial·W` is orthogonal to the fiber and
    // is carried by the horizontal part
    let tangential = wdot - &w.w * cr(radial);
    let rhodot = project_velocity(&tangential, w);
    let l = sld(&TangentVector::unchecked(rho.clone(), rhodot))? + identity(w.dim()) * cr(radial);
    let horizontal = &l * &w.w;
    let vertical = wdot - &horizontal;
    let a = pseudo_inverse(&w.w, w.rank_tol) * &vertical;
    let residual = (&w.w * &a - &vertical).norm();
    let skew = (&a + a.adjoint()).norm();
    let scale = wdot.norm().max(1.0);
    if residual > 1e-9 * scale || skew > 1e-9 * scale {
        return Err(Error::NotATangent {
            residual: residual.max(skew),
        });
    }
    Ok(SplitTangent {
        vertical,
        horizontal,
        a: (&a - a.adjoint()) * cr(0.5),
        l,
    })
}

/// Purification velocity `Ẇ = −iHW − Γ̃_ρW` of `(H, Γ)` and its horizontal
/// part `Ẇ_h = (L − Γ̃_ρ)W`, with `L` the SLD of `−i[H, ρ]`.
pub fn lift_generator(gen: &NonHermitianGenerator, w: &Purification) -> Result<(CMatrix, CMatrix)> {
    let rho = w.state()?;
    rho.check_dim(&gen.h)?;
    let gamma = gen.centered_gamma(&rho);
    let wdot = (&gen.h * &w.w) * (-I) - &gamma * &w.w;
    let l = sld_of_hamiltonian(&gen.h, &rho)?;
    let wdot_h = (l - gamma) * &w.w;
    Ok((wdot, wdot_h))
}
