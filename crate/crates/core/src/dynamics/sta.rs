//! Shortcut to adiabaticity along a Gibbs curve `ρ(t) = e^{−βH₀(t)}/Z(t)`.
//!
//! The counterdiabatic term `H₁` rotates the eigenbasis of `H₀(t)` in step
//! with the Hamiltonian; a decay operator diagonal in the same basis moves
//! the populations along the Boltzmann weights.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{
    check_hermitian, cr, hermitian_eigen, hermitize, spectral_function, CMatrix, DEFAULT_CLUSTER_TOL, I,
};
use crate::state::{DensityOperator, NonHermitianGenerator, DEFAULT_RANK_TOL};

use super::optimize::shift_gamma_floor;
use super::schedule::GeneratorField;

/// Step of the centered difference used when no analytic `Ḣ₀` is supplied.
pub const DERIVATIVE_STEP: f64 = 1e-6;

type MatrixFn = dyn Fn(f64) -> CMatrix + Send + Sync;

/// Hermitian `H₀(t)` on a horizon, optionally with its analytic derivative.
#[derive(Clone)]
pub struct HamiltonianSchedule {
    h0: Arc<MatrixFn>,
    h0_dot: Option<Arc<MatrixFn>>,
    t0: f64,
    t1: f64,
}

impl std::fmt::Debug for HamiltonianSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianSchedule")
            .field("t0", &self.t0)
            .field("t1", &self.t1)
            .field("analytic_derivative", &self.h0_dot.is_some())
            .finish()
    }
}

impl HamiltonianSchedule {
    pub fn new(t0: f64, t1: f64, h0: impl Fn(f64) -> CMatrix + Send + Sync + 'static) -> Result<Self> {
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(Error::InvalidArgument {
                name: "horizon",
                detail: format!("need finite t0 < t1, got [{t0}, {t1}]"),
            });
        }
        Ok(HamiltonianSchedule {
            h0: Arc::new(h0),
            h0_dot: None,
            t0,
            t1,
        })
    }

    pub fn with_derivative(mut self, h0_dot: impl Fn(f64) -> CMatrix + Send + Sync + 'static) -> Self {
        self.h0_dot = Some(Arc::new(h0_dot));
        self
    }

    /// `H₀(t) = A + t·B`, with the exact derivative `B`.
    pub fn linear(a: CMatrix, b: CMatrix, t0: f64, t1: f64) -> Result<Self> {
        check_hermitian(&a, "H0 offset")?;
        check_hermitian(&b, "H0 slope")?;
        let slope = b.clone();
        Ok(Self::new(t0, t1, move |t| &a + &b * cr(t))?.with_derivative(move |_| slope.clone()))
    }

    pub fn horizon(&self) -> (f64, f64) {
        (self.t0, self.t1)
    }

    pub fn h0(&self, t: f64) -> Result<CMatrix> {
        let h = (self.h0)(t);
        check_hermitian(&h, "H0")?;
        Ok(hermitize(&h))
    }

    pub fn h0_dot(&self, t: f64) -> Result<CMatrix> {
        let d = match &self.h0_dot {
            Some(f) => f(t),
            None => ((self.h0)(t + DERIVATIVE_STEP) - (self.h0)(t - DERIVATIVE_STEP)) * cr(0.5 / DERIVATIVE_STEP),
        };
        check_hermitian(&d, "dH0/dt")?;
        Ok(hermitize(&d))
    }
}

/// `e^{−βH₀}/Z`.
pub fn gibbs_state(h0: &CMatrix, beta: f64) -> Result<DensityOperator> {
    check_hermitian(h0, "H0")?;
    let (values, vectors) = hermitian_eigen(&hermitize(h0));
    let floor = values.last().copied().unwrap_or(0.0);
    let weights = spectral_function(&values, &vectors, |e| (-beta * (e - floor)).exp());
    DensityOperator::from_unnormalized(&weights, DEFAULT_RANK_TOL, DEFAULT_CLUSTER_TOL)
}

/// Generator reproducing the Gibbs curve of `H₀(t)` at inverse temperature `beta`.
///
/// `H = H₀ + H₁` with `⟨m|H₁|k⟩ = i⟨m|Ḣ₀|k⟩/(E_k − E_m)` (parallel gauge), and
/// `Γ = (β/2) Σ_k Ė_k Π_k + ½ d(log Z)/dt`, floor-shifted. Eigenvalue
/// derivatives come from first-order perturbation theory, `Ė_k = ⟨k|Ḣ₀|k⟩`.
pub fn sta_generator(
    schedule: &HamiltonianSchedule,
    beta: f64,
    t: f64,
    cluster_tol: f64,
) -> Result<NonHermitianGenerator> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidArgument {
            name: "beta",
            detail: format!("must be positive, got {beta}"),
        });
    }
    let h0 = schedule.h0(t)?;
    let dot = schedule.h0_dot(t)?;
    let (e, v) = hermitian_eigen(&h0);
    let gap = e.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    if gap <= cluster_tol {
        return Err(Error::DegenerateSpectrum { time: t, gap });
    }
    let n = e.len();
    let de = v.adjoint() * dot * &v;
    let e_dot: Vec<f64> = (0..n).map(|k| de[(k, k)].re).collect();
    let floor = e[n - 1];
    let boltzmann: Vec<f64> = e.iter().map(|&x| (-beta * (x - floor)).exp()).collect();
    let z: f64 = boltzmann.iter().sum();
    let dlog_z = -beta * e_dot.iter().zip(&boltzmann).map(|(d, w)| d * w).sum::<f64>() / z;

    let mut h1 = CMatrix::zeros(n, n);
    let mut gamma = CMatrix::zeros(n, n);
    for m in 0..n {
        gamma[(m, m)] = cr(0.5 * beta * e_dot[m] + 0.5 * dlog_z);
        for k in 0..n {
            if m != k {
                h1[(m, k)] = I * de[(m, k)] * cr(1.0 / (e[k] - e[m]));
            }
        }
    }
    let back = |a: &CMatrix| hermitize(&(&v * a * v.adjoint()));
    Ok(NonHermitianGenerator {
        h: hermitize(&(h0 + back(&h1))),
        gamma: shift_gamma_floor(&back(&gamma)),
    })
}

/// [`sta_generator`] as a state-independent field on the schedule's horizon.
#[derive(Debug, Clone)]
pub struct StaField {
    pub schedule: HamiltonianSchedule,
    pub beta: f64,
    pub cluster_tol: f64,
}

impl StaField {
    pub fn new(schedule: HamiltonianSchedule, beta: f64) -> Self {
        StaField {
            schedule,
            beta,
            cluster_tol: DEFAULT_CLUSTER_TOL,
        }
    }

    /// Gibbs state at `t`, the reference trajectory.
    pub fn reference(&self, t: f64) -> Result<DensityOperator> {
        gibbs_state(&self.schedule.h0(t)?, self.beta)
    }
}

impl GeneratorField for StaField {
    fn generator(&self, t: f64, _rho: &DensityOperator) -> Result<NonHermitianGenerator> {
        sta_generator(&self.schedule, self.beta, t, self.cluster_tol)
    }

    fn horizon(&self) -> (f64, f64) {
        self.schedule.horizon()
    }
}
