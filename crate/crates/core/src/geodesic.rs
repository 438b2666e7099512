//! Shortest Bures geodesics as projected great arcs of aligned purifications,
//! the evolution operator `G_g(τ)` that moves `W1` along the arc, and its
//! non-Hermitian generator `K_g(τ) = i Ġ_g G_g⁻¹`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{shift_gamma_floor, GeneratorField};
use crate::error::{Error, Result};
use crate::linalg::{
    c, cr, eigenvalues, identity, pauli_x, pauli_y, pauli_z, pseudo_inverse, svd, tr_prod, CMatrix,
    Complex, MatrixJson,
};
use crate::purification::{align, purify, Purification};
use crate::state::{DensityOperator, NonHermitianGenerator};

/// Plans with a smaller Bures angle are rejected as degenerate.
pub const MIN_ANGLE: f64 = 1e-8;
/// `G_g(τ)` is reported singular above this condition number.
pub const MAX_CONDITION: f64 = 1e12;
/// Default weight `ε` of `R = ε(1 − Π₁)`.
pub const DEFAULT_R_SCALE: f64 = 1.0;

/// Aligned endpoints of a shortest geodesic and the transport operator `M` with `M W1 = W2`.
#[derive(Debug, Clone)]
pub struct GeodesicPlan {
    w1: Purification,
    w2: Purification,
    theta: f64,
    m: CMatrix,
    r_scale: f64,
    ambiguous_alignment: bool,
}

impl GeodesicPlan {
    /// Aligns `w2_raw` to `w1` and builds the plan.
    pub fn from_purifications(w1: &Purification, w2_raw: &Purification, r_scale: f64) -> Result<Self> {
        if !(r_scale > 0.0) || !r_scale.is_finite() {
            return Err(Error::InvalidArgument {
                name: "r_scale",
                detail: format!("must be positive, got {r_scale}"),
            });
        }
        let aligned = align(w1, w2_raw)?;
        let w2 = aligned.purification;
        let theta = w1.inner(&w2).clamp(-1.0, 1.0).acos();
        if theta < MIN_ANGLE {
            return Err(Error::DegeneratePlan { theta });
        }
        let m = transport_operator(w1, &w2, r_scale);
        Ok(GeodesicPlan {
            w1: w1.clone(),
            w2,
            theta,
            m,
            r_scale,
            ambiguous_alignment: aligned.ambiguous,
        })
    }

    /// Plan between two states of equal rank through their minimal purifications.
    pub fn from_states(rho1: &DensityOperator, rho2: &DensityOperator, r_scale: f64) -> Result<Self> {
        rho1.check_dim(rho2.matrix())?;
        if rho1.rank() != rho2.rank() {
            return Err(Error::DimensionMismatch {
                expected: format!("rank {}", rho1.rank()),
                got: format!("rank {}", rho2.rank()),
            });
        }
        Self::from_purifications(&purify(rho1), &purify(rho2), r_scale)
    }

    pub fn w1(&self) -> &Purification {
        &self.w1
    }

    pub fn w2(&self) -> &Purification {
        &self.w2
    }

    /// Bures angle `arccos Re Tr(W1†W2)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn transport(&self) -> &CMatrix {
        &self.m
    }

    pub fn r_scale(&self) -> f64 {
        self.r_scale
    }

    /// The overlap `W1†W2_raw` was singular, so the aligned endpoint is one of several.
    pub fn ambiguous_alignment(&self) -> bool {
        self.ambiguous_alignment
    }

    pub fn dim(&self) -> usize {
        self.w1.dim()
    }

    fn check_tau(&self, tau: f64) -> Result<()> {
        let slack = 1e-12 * self.theta.max(1.0);
        if !(tau >= -slack && tau <= self.theta + slack) {
            return Err(Error::OutOfRange { tau, theta: self.theta });
        }
        Ok(())
    }

    pub fn to_json(&self) -> GeodesicPlanJson {
        GeodesicPlanJson {
            w1: MatrixJson::from_matrix(self.w1.matrix()),
            w2: MatrixJson::from_matrix(self.w2.matrix()),
            theta: self.theta,
            m: MatrixJson::from_matrix(&self.m),
            r_scale: self.r_scale,
        }
    }
}

/// Serialized plan: aligned endpoint purifications, angle, transport operator, and `ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicPlanJson {
    pub w1: MatrixJson,
    pub w2: MatrixJson,
    pub theta: f64,
    pub m: MatrixJson,
    pub r_scale: f64,
}

impl GeodesicPlanJson {
    /// Rebuilds the plan from the endpoints and checks the stored angle and `M`.
    pub fn to_plan(&self) -> Result<GeodesicPlan> {
        let w1 = Purification::new(self.w1.to_matrix()?, crate::state::DEFAULT_RANK_TOL)?;
        let w2 = Purification::new(self.w2.to_matrix()?, crate::state::DEFAULT_RANK_TOL)?;
        let plan = GeodesicPlan::from_purifications(&w1, &w2, self.r_scale)?;
        let m = self.m.to_matrix()?;
        if (plan.theta - self.theta).abs() > 1e-10 || (&plan.m - &m).norm() > 1e-10 * m.norm().max(1.0) {
            return Err(Error::InvalidArgument {
                name: "plan",
                detail: "stored theta or M disagrees with the endpoints".into(),
            });
        }
        Ok(plan)
    }
}

/// `M = X + X†(1 − Π₁) + iε(1 − Π₁)` with `X = W2W1⁺` and `Π₁ = W1W1⁺`.
///
/// `MW1 = W2`, the support block `Π₁XΠ₁` is positive semidefinite when
/// `W1†W2 ≥ 0`, and the skew block `iε(1 − Π₁)` keeps the spectrum off the
/// negative real axis. For full rank this is `W2W1⁻¹`.
pub fn transport_operator(w1: &Purification, w2: &Purification, r_scale: f64) -> CMatrix {
    let n = w1.dim();
    let pinv = pseudo_inverse(w1.matrix(), w1.rank_tol());
    let x = w2.matrix() * &pinv;
    let off = identity(n) - w1.matrix() * &pinv;
    &x + x.adjoint() * &off + &off * c(0.0, r_scale)
}

/// Point `W(τ) = (sin(θ−τ)W1 + sin τ W2)/sin θ` of the great arc and its projection.
pub fn geodesic_path(plan: &GeodesicPlan, tau: f64) -> Result<(Purification, DensityOperator)> {
    plan.check_tau(tau)?;
    let tau = tau.clamp(0.0, plan.theta);
    let s = plan.theta.sin();
    let w = (plan.w1.matrix() * cr((plan.theta - tau).sin()) + plan.w2.matrix() * cr(tau.sin())) * cr(1.0 / s);
    let w = Purification::new(w, plan.w1.rank_tol())?;
    let rho = w.state()?;
    Ok((w, rho))
}

/// `G_g(τ) = (sin(θ−τ)·1 + sin τ·M)/sin θ`, so that `W(τ) = G_g(τ)W1`.
pub fn evolution_operator(plan: &GeodesicPlan, tau: f64) -> Result<CMatrix> {
    plan.check_tau(tau)?;
    Ok((identity(plan.dim()) * cr((plan.theta - tau).sin()) + &plan.m * cr(tau.sin())) * cr(1.0 / plan.theta.sin()))
}

/// `K_g(τ)` together with the condition number of `G_g(τ)`.
#[derive(Debug, Clone)]
pub struct GeodesicGenerator {
    pub k: CMatrix,
    pub condition: f64,
}

/// `K_g(τ) = i(cos τ·M − cos(θ−τ)·1)(sin(θ−τ)·1 + sin τ·M)⁻¹`.
pub fn geodesic_generator(plan: &GeodesicPlan, tau: f64) -> Result<GeodesicGenerator> {
    plan.check_tau(tau)?;
    let n = plan.dim();
    let g = identity(n) * cr((plan.theta - tau).sin()) + &plan.m * cr(tau.sin());
    let dg = &plan.m * cr(tau.cos()) - identity(n) * cr((plan.theta - tau).cos());
    let (_, s, _) = svd(&g);
    let condition = s[0] / s[n - 1];
    if !(condition <= MAX_CONDITION) {
        return Err(Error::SingularEvolution { tau, condition });
    }
    // K G = i Ġ  ⇔  G† K† = −i Ġ†
    let lu = g.adjoint().lu();
    let kt = lu
        .solve(&(dg.adjoint() * c(0.0, -1.0)))
        .ok_or(Error::SingularEvolution { tau, condition })?;
    Ok(GeodesicGenerator {
        k: kt.adjoint(),
        condition,
    })
}

/// `K_g` as a field on `[0, θ]`, optionally with the decay part floor-shifted.
#[derive(Debug, Clone)]
pub struct GeodesicField {
    pub plan: Arc<GeodesicPlan>,
    pub shift_floor: bool,
}

impl GeodesicField {
    pub fn new(plan: GeodesicPlan, shift_floor: bool) -> Self {
        GeodesicField {
            plan: Arc::new(plan),
            shift_floor,
        }
    }
}

impl GeneratorField for GeodesicField {
    fn generator(&self, t: f64, _rho: &DensityOperator) -> Result<NonHermitianGenerator> {
        let mut gen = NonHermitianGenerator::from_k(&geodesic_generator(&self.plan, t)?.k)?;
        if self.shift_floor {
            gen.gamma = shift_gamma_floor(&gen.gamma);
        }
        Ok(gen)
    }

    fn horizon(&self) -> (f64, f64) {
        (0.0, self.plan.theta)
    }
}

/// Outcome of [`time_independent_check`].
#[derive(Debug, Clone, PartialEq)]
pub enum TimeIndependentVerdict {
    /// `K` has exactly two distinct eigenvalues and `(K − a)(K − b) = 0`, so a
    /// shift and rescaling brings it to `K² ∝ 1`.
    ExistsShortestForm { eigenvalues: (Complex, Complex) },
    /// No shift/rescaling gives `K² ∝ 1`.
    Fails {
        distinct_eigenvalues: usize,
        /// `‖(K − a)(K − b)‖` when two distinct eigenvalues exist (non-diagonalizable `K`).
        quadratic_residual: Option<f64>,
    },
}

impl TimeIndependentVerdict {
    pub fn exists(&self) -> bool {
        matches!(self, TimeIndependentVerdict::ExistsShortestForm { .. })
    }
}

/// Tests whether `K` admits a shift `c·1` with `(K − c)² ∝ 1`: exactly two
/// distinct eigenvalues (relative tolerance `tol`) and a diagonalizable `K`.
pub fn time_independent_check(k: &CMatrix, tol: f64) -> Result<TimeIndependentVerdict> {
    let values = eigenvalues(k)?;
    let scale = values.iter().map(|v| v.norm()).fold(1.0, f64::max);
    let mut distinct: Vec<Complex> = Vec::new();
    for v in values {
        if !distinct.iter().any(|d| (d - v).norm() <= tol * scale) {
            distinct.push(v);
        }
    }
    if distinct.len() != 2 {
        return Ok(TimeIndependentVerdict::Fails {
            distinct_eigenvalues: distinct.len(),
            quadratic_residual: None,
        });
    }
    let (a, b) = (distinct[0], distinct[1]);
    let n = k.nrows();
    let residual = ((k - identity(n) * a) * (k - identity(n) * b)).norm();
    if residual > tol.sqrt() * scale * scale {
        return Ok(TimeIndependentVerdict::Fails {
            distinct_eigenvalues: 2,
            quadratic_residual: Some(residual),
        });
    }
    Ok(TimeIndependentVerdict::ExistsShortestForm { eigenvalues: (a, b) })
}

/// Orthonormal pair of Bloch-space axes defining the `(x, z)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochFrame {
    pub x_axis: [f64; 3],
    pub z_axis: [f64; 3],
}

impl Default for BlochFrame {
    fn default() -> Self {
        BlochFrame {
            x_axis: [1.0, 0.0, 0.0],
            z_axis: [0.0, 0.0, 1.0],
        }
    }
}

impl BlochFrame {
    pub fn new(x_axis: [f64; 3], z_axis: [f64; 3]) -> Result<Self> {
        let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        if (dot(x_axis, x_axis) - 1.0).abs() > 1e-10
            || (dot(z_axis, z_axis) - 1.0).abs() > 1e-10
            || dot(x_axis, z_axis).abs() > 1e-10
        {
            return Err(Error::InvalidArgument {
                name: "frame",
                detail: "axes must be orthonormal".into(),
            });
        }
        Ok(BlochFrame { x_axis, z_axis })
    }
}

/// Bloch vector `(Tr ρσx, Tr ρσy, Tr ρσz)` of a qubit state.
pub fn bloch_vector(rho: &DensityOperator) -> Result<[f64; 3]> {
    if rho.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: "2x2".into(),
            got: format!("{0}x{0}", rho.dim()),
        });
    }
    let m = rho.matrix();
    Ok([tr_prod(&pauli_x(), m), tr_prod(&pauli_y(), m), tr_prod(&pauli_z(), m)])
}

/// `x²/(1 − z²)` in the given frame; constant along the flow of `K = iσ_z`
/// when the frame's `z` axis is the generator's.
pub fn qubit_ellipse_invariant(rho: &DensityOperator, frame: &BlochFrame) -> Result<f64> {
    let r = bloch_vector(rho)?;
    let proj = |a: [f64; 3]| a[0] * r[0] + a[1] * r[1] + a[2] * r[2];
    let (x, z) = (proj(frame.x_axis), proj(frame.z_axis));
    if z.abs() >= 1.0 - 1e-12 {
        return Err(Error::SingularFrame { z: z.abs() });
    }
    Ok(x * x / ((1.0 - z) * (1.0 + z)))
}
