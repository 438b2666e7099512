//! Monotone metrics on full-rank states, the (extended) Bures metric through
//! the symmetric logarithmic derivative, quantum Fisher information, fidelity,
//! entropy, and the Hamiltonian/gradient flow fields of an observable.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{anticommutator, commutator, cr, hermitize, identity, svd, tr_prod, CMatrix, I};
use crate::purification::purify;
use crate::state::{DensityOperator, TangentVector};

/// Residual allowed when checking that an SLD solves `Lρ + ρL = v`.
pub const SLD_RESIDUAL_TOL: f64 = 1e-8;

type KernelFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// Symmetric, order −1 homogeneous function `c(λ, μ) > 0` selecting a monotone metric.
#[derive(Clone)]
pub struct MonotoneKernel {
    name: String,
    eval: Arc<KernelFn>,
}

impl fmt::Debug for MonotoneKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonotoneKernel").field("name", &self.name).finish()
    }
}

impl MonotoneKernel {
    /// `c(λ, μ) = 2 / (λ + μ)`.
    pub fn bures() -> Self {
        MonotoneKernel {
            name: "bures".into(),
            eval: Arc::new(|l, m| 2.0 / (l + m)),
        }
    }

    /// `c(λ, μ) = (λ + μ) / (2λμ)`.
    pub fn right_log_derivative() -> Self {
        MonotoneKernel {
            name: "rld".into(),
            eval: Arc::new(|l, m| (l + m) / (2.0 * l * m)),
        }
    }

    /// Registers a user kernel after sampling symmetry, positivity, and
    /// homogeneity on a grid (relative tolerance 1e-10).
    pub fn custom(name: impl Into<String>, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let grid = [0.01, 0.07, 0.2, 0.35, 0.5, 0.9];
        let scales = [0.1, 0.5, 3.0];
        for &l in &grid {
            for &m in &grid {
                let v = f(l, m);
                let bad = |detail: String| Error::InvalidArgument { name: "kernel", detail };
                if !(v > 0.0) || !v.is_finite() {
                    return Err(bad(format!("c({l}, {m}) = {v} is not positive")));
                }
                if (v - f(m, l)).abs() > 1e-10 * v {
                    return Err(bad(format!("not symmetric at ({l}, {m})")));
                }
                for &a in &scales {
                    if (a * f(a * l, a * m) - v).abs() > 1e-10 * v {
                        return Err(bad(format!("not homogeneous of order -1 at ({l}, {m}), scale {a}")));
                    }
                }
            }
        }
        Ok(MonotoneKernel {
            name: name.into(),
            eval: Arc::new(f),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, lambda: f64, mu: f64) -> f64 {
        (self.eval)(lambda, mu)
    }
}

/// Named kernels; ships Bures and right-log-derivative.
#[derive(Debug, Clone)]
pub struct KernelRegistry {
    kernels: Vec<MonotoneKernel>,
}

impl Default for KernelRegistry {
    fn default() -> Self {
        KernelRegistry {
            kernels: vec![MonotoneKernel::bures(), MonotoneKernel::right_log_derivative()],
        }
    }
}

impl KernelRegistry {
    /// Adds a kernel, replacing any previous one with the same name.
    pub fn register(&mut self, kernel: MonotoneKernel) {
        self.kernels.retain(|k| k.name != kernel.name);
        self.kernels.push(kernel);
    }

    pub fn get(&self, name: &str) -> Option<&MonotoneKernel> {
        self.kernels.iter().find(|k| k.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &MonotoneKernel> {
        self.kernels.iter()
    }
}

fn in_eigenbasis(rho: &DensityOperator, a: &CMatrix) -> CMatrix {
    let v = rho.eigenvectors();
    v.adjoint() * a * v
}

fn from_eigenbasis(rho: &DensityOperator, a: &CMatrix) -> CMatrix {
    let v = rho.eigenvectors();
    v * a * v.adjoint()
}

/// `√(Σ_{jk} |v_jk|² c(λ_j, λ_k))` in the eigenbasis of the base state.
///
/// Only defined on full-rank states; use [`bures_inner`] on lower-rank manifolds.
pub fn monotone_norm(v: &TangentVector, kernel: &MonotoneKernel) -> Result<f64> {
    let rho = v.base();
    if !rho.is_full_rank() {
        return Err(Error::RankDeficient {
            op: "monotone_norm",
            rank: rho.rank(),
            dim: rho.dim(),
        });
    }
    let ve = in_eigenbasis(rho, v.matrix());
    let lam = rho.eigenvalues();
    let mut acc = 0.0;
    for j in 0..lam.len() {
        for k in 0..lam.len() {
            acc += ve[(j, k)].norm_sqr() * kernel.eval(lam[j], lam[k]);
        }
    }
    Ok(acc.sqrt())
}

/// Inner product of a monotone metric recovered by polarization.
pub fn monotone_inner(v: &TangentVector, w: &TangentVector, kernel: &MonotoneKernel) -> Result<f64> {
    let plus = monotone_norm(&v.add(w)?, kernel)?;
    let minus = monotone_norm(&v.sub(w)?, kernel)?;
    Ok(0.25 * (plus * plus - minus * minus))
}

/// Symmetric logarithmic derivative: Hermitian `L` with `Lρ + ρL = v` on the support.
///
/// Components with `λ_j + λ_k ≤ rank_tol` are set to zero; a residual above
/// [`SLD_RESIDUAL_TOL`] means `v` has a kernel–kernel block and is not tangent
/// to the fixed-rank manifold.
pub fn sld(v: &TangentVector) -> Result<CMatrix> {
    let rho = v.base();
    let lam = rho.eigenvalues();
    let mut le = in_eigenbasis(rho, v.matrix());
    let n = lam.len();
    for j in 0..n {
        for k in 0..n {
            let s = lam[j] + lam[k];
            le[(j, k)] = if s > rho.rank_tol() { le[(j, k)] / s } else { cr(0.0) };
        }
    }
    let l = hermitize(&from_eigenbasis(rho, &le));
    let residual = (anticommutator(&l, rho.matrix()) - v.matrix()).norm();
    if residual > SLD_RESIDUAL_TOL * v.matrix().norm().max(1.0) {
        return Err(Error::NotATangent { residual });
    }
    Ok(l)
}

/// Bures inner product `½ Tr(L_v w)`.
pub fn bures_inner(v: &TangentVector, w: &TangentVector) -> Result<f64> {
    if !v.same_base(w) {
        return Err(Error::BaseMismatch);
    }
    let l = sld(v)?;
    Ok(0.5 * tr_prod(&l, w.matrix()))
}

pub fn bures_norm(v: &TangentVector) -> Result<f64> {
    Ok(bures_inner(v, v)?.max(0.0).sqrt())
}

/// SLD of the unitary tangent `−i[H, ρ]`:
/// `L = i Σ_{jk} (λ_j − λ_k)/(λ_j + λ_k) Π_j H Π_k`, zero where `λ_j + λ_k = 0`.
pub fn sld_of_hamiltonian(h: &CMatrix, rho: &DensityOperator) -> Result<CMatrix> {
    rho.check_dim(h)?;
    let spec = rho.spectrum();
    let mean: Vec<f64> = spec.cluster_of.iter().map(|&k| spec.eigenvalues[k]).collect();
    let mut le = in_eigenbasis(rho, h);
    let n = mean.len();
    for j in 0..n {
        for k in 0..n {
            let s = mean[j] + mean[k];
            let same = spec.cluster_of[j] == spec.cluster_of[k];
            le[(j, k)] = if same || s <= rho.rank_tol() {
                cr(0.0)
            } else {
                le[(j, k)] * I * cr((mean[j] - mean[k]) / s)
            };
        }
    }
    Ok(hermitize(&from_eigenbasis(rho, &le)))
}

/// Quantum Fisher information `4 Tr(L² ρ)` of `ρ` with respect to `H`.
pub fn qfi(h: &CMatrix, rho: &DensityOperator) -> Result<f64> {
    let l = sld_of_hamiltonian(h, rho)?;
    Ok(4.0 * tr_prod(&(&l * &l), rho.matrix()).max(0.0))
}

/// Uhlmann fidelity `(Tr√(√ρ₁ ρ₂ √ρ₁))²` and Bures angle `arccos √F`.
pub fn fidelity_and_angle(rho1: &DensityOperator, rho2: &DensityOperator) -> Result<(f64, f64)> {
    rho1.check_dim(rho2.matrix())?;
    // √F is the trace norm of W1†W2 for any purifications; the minimal ones
    // avoid square roots of roundoff-level kernel eigenvalues
    let overlap = purify(rho1).matrix().adjoint() * purify(rho2).matrix();
    let (_, s, _) = svd(&overlap);
    let root_fid = s.iter().sum::<f64>().clamp(0.0, 1.0);
    Ok((root_fid * root_fid, root_fid.acos()))
}

/// Von Neumann entropy with natural logarithm.
pub fn von_neumann_entropy(rho: &DensityOperator) -> f64 {
    rho.eigenvalues()
        .iter()
        .filter(|&&l| l > rho.rank_tol())
        .map(|&l| -l * l.ln())
        .sum()
}

/// Rotation `−i[A, ρ]` and gradient `{A − Tr(Aρ), ρ}` fields of an observable.
pub fn flow_fields(a: &CMatrix, rho: &Arc<DensityOperator>) -> Result<(TangentVector, TangentVector)> {
    rho.check_dim(a)?;
    let r = rho.matrix();
    let rotation = commutator(a, r) * (-I);
    let centered = a - identity(rho.dim()) * cr(rho.expectation(a));
    let gradient = anticommutator(&centered, r);
    Ok((
        TangentVector::new(rho.clone(), hermitize(&rotation))?,
        TangentVector::new(rho.clone(), hermitize(&gradient))?,
    ))
}
