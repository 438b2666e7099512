//! Success-rate bookkeeping and the optimal generator along a prescribed
//! normalized trajectory.
//!
//! Splitting `Γ = Γ_u + Γ_c` with respect to the spectral projectors of `ρ`,
//! the coherent part `Γ_u` only rotates the state and can be traded for a
//! Hamiltonian term `H'` with `−i[H', ρ] = −{Γ_u, ρ}`. Dropping `Γ_u` and
//! shifting `Γ_c` down to a zero floor gives the smallest decay rate that
//! still produces the same normalized motion.

use crate::error::{Error, Result};
use crate::linalg::{cr, hermitian_eigen, hermitize, identity, CMatrix, I};
use crate::state::{tangent_from_h_gamma, DensityOperator, NonHermitianGenerator};

use super::schedule::GeneratorField;

/// Relative tolerance on the tangent mismatch between input and optimized generator.
const EQUIVALENCE_TOL: f64 = 1e-9;
/// Coarsening applied to the clustering threshold on the single retry.
const RECLUSTER_FACTOR: f64 = 100.0;

/// `γ = 2 Tr(Γρ)`.
pub fn decay_rate(gen: &NonHermitianGenerator, rho: &DensityOperator) -> f64 {
    2.0 * rho.expectation(&gen.gamma)
}

fn min_eigenvalue(a: &CMatrix) -> f64 {
    let (values, _) = hermitian_eigen(a);
    values.last().copied().unwrap_or(0.0)
}

/// `Γ − μ_min 𝟙`: the same normalized dynamics with the smallest decay.
pub fn shift_gamma_floor(gamma: &CMatrix) -> CMatrix {
    let mu = min_eigenvalue(gamma);
    hermitize(&(gamma - identity(gamma.nrows()) * cr(mu)))
}

/// Pieces of the optimization, kept for diagnostics and identity checks.
#[derive(Debug, Clone)]
pub struct Optimization {
    pub generator: NonHermitianGenerator,
    /// Input decay operator after the floor shift.
    pub gamma_shifted: CMatrix,
    /// `Γ_u = Σ_{j≠k} Π_j Γ Π_k`.
    pub gamma_coherent: CMatrix,
    /// `Γ_c = Σ_k Π_k Γ Π_k` (before its own floor shift).
    pub gamma_incoherent: CMatrix,
    /// `H' = −i Σ_{j≠k} (λ_j + λ_k)/(λ_j − λ_k) Π_k Γ Π_j`.
    pub hamiltonian_correction: CMatrix,
    /// Smallest eigenvalue of `Γ_c`.
    pub mu_c_min: f64,
}

fn attempt(gen: &NonHermitianGenerator, gamma: &CMatrix, rho: &DensityOperator) -> Optimization {
    let spec = rho.spectrum();
    let v = rho.eigenvectors();
    let lam = rho.eigenvalues();
    let ge = v.adjoint() * gamma * v;
    let n = lam.len();
    let mut gc = CMatrix::zeros(n, n);
    let mut gu = CMatrix::zeros(n, n);
    let mut hp = CMatrix::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            if spec.cluster_of[a] == spec.cluster_of[b] {
                gc[(a, b)] = ge[(a, b)];
            } else {
                gu[(a, b)] = ge[(a, b)];
                // row a lies in Π_k, column b in Π_j
                hp[(a, b)] = -I * ge[(a, b)] * cr((lam[b] + lam[a]) / (lam[b] - lam[a]));
            }
        }
    }
    let back = |m: &CMatrix| hermitize(&(v * m * v.adjoint()));
    let gamma_incoherent = back(&gc);
    let mu_c_min = min_eigenvalue(&gamma_incoherent);
    let gamma_opt = hermitize(&(&gamma_incoherent - identity(n) * cr(mu_c_min)));
    let hamiltonian_correction = back(&hp);
    Optimization {
        generator: NonHermitianGenerator {
            h: hermitize(&(&gen.h + &hamiltonian_correction)),
            gamma: gamma_opt,
        },
        gamma_shifted: gamma.clone(),
        gamma_coherent: back(&gu),
        gamma_incoherent,
        hamiltonian_correction,
        mu_c_min,
    }
}

fn tangent_mismatch(a: &NonHermitianGenerator, b: &NonHermitianGenerator, rho: &DensityOperator) -> (f64, f64) {
    let rho = std::sync::Arc::new(rho.clone());
    let ta = tangent_from_h_gamma(a, &rho).expect("dimension checked");
    let tb = tangent_from_h_gamma(b, &rho).expect("dimension checked");
    ((ta.matrix() - tb.matrix()).norm(), ta.matrix().norm())
}

/// Full optimization record; see [`optimize_generator`].
pub fn optimize_generator_detailed(gen: &NonHermitianGenerator, rho: &DensityOperator) -> Result<Optimization> {
    rho.check_dim(&gen.h)?;
    let gamma = shift_gamma_floor(&gen.gamma);
    let shifted = NonHermitianGenerator {
        h: gen.h.clone(),
        gamma: gamma.clone(),
    };
    let first = attempt(&shifted, &gamma, rho);
    let (residual, scale) = tangent_mismatch(&shifted, &first.generator, rho);
    if residual <= EQUIVALENCE_TOL * scale.max(1.0) {
        return Ok(first);
    }
    let coarse = rho.reclustered(rho.cluster_tol() * RECLUSTER_FACTOR)?;
    let second = attempt(&shifted, &gamma, &coarse);
    let (residual, scale) = tangent_mismatch(&shifted, &second.generator, rho);
    if residual <= EQUIVALENCE_TOL * scale.max(1.0) {
        return Ok(second);
    }
    Err(Error::Conditioning {
        detail: format!(
            "optimized generator changes the tangent by {residual:e} (spectral gap {:e})",
            rho.spectrum().min_gap()
        ),
    })
}

/// Generator with the same normalized motion at `ρ` and the smallest decay rate:
/// `Γ_opt = Γ_c − μ_c^(min) 𝟙`, `H_opt = H + H'`.
pub fn optimize_generator(gen: &NonHermitianGenerator, rho: &DensityOperator) -> Result<NonHermitianGenerator> {
    optimize_generator_detailed(gen, rho).map(|o| o.generator)
}

/// Wraps a field so that every evaluation is replaced by its optimized generator.
pub struct Optimized<F>(pub F);

impl<F: GeneratorField> GeneratorField for Optimized<F> {
    fn generator(&self, t: f64, rho: &DensityOperator) -> Result<NonHermitianGenerator> {
        optimize_generator(&self.0.generator(t, rho)?, rho)
    }

    fn horizon(&self) -> (f64, f64) {
        self.0.horizon()
    }
}
