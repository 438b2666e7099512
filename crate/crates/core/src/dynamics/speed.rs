use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{commutator, cr, identity, tr_prod, CMatrix, I};
use crate::metric::{fidelity_and_angle, qfi, sld_of_hamiltonian};
use crate::state::{DensityOperator, NonHermitianGenerator};

use super::integrate::TrajectoryRecord;

/// Bures speed `√Tr((L − Γ̃_ρ)² ρ)`: the length of the horizontal lift
/// `(L − Γ̃_ρ)W` of the velocity generated by `(H, Γ)`.
pub fn bures_speed(gen: &NonHermitianGenerator, rho: &DensityOperator) -> Result<f64> {
    let l = sld_of_hamiltonian(&gen.h, rho)?;
    let x = l - gen.centered_gamma(rho);
    Ok(tr_prod(&(&x * &x), rho.matrix()).max(0.0).sqrt())
}

/// The same speed assembled from `¼ F_Q + Δ²Γ − Tr({L, Γ}ρ)`.
pub fn bures_speed_fisher_form(gen: &NonHermitianGenerator, rho: &DensityOperator) -> Result<f64> {
    let l = sld_of_hamiltonian(&gen.h, rho)?;
    let cross = 2.0 * tr_prod(&(&l * &gen.gamma), rho.matrix());
    let sq = 0.25 * qfi(&gen.h, rho)? + rho.variance(&gen.gamma) - cross;
    Ok(sq.max(0.0).sqrt())
}

/// Upper bound on the Bures speed, `√(Δ²H + Δ²Γ − iTr([H, Γ]ρ))`: the
/// length of the (generally non-horizontal) lift `(−iH̃_ρ − Γ̃_ρ)W`.
pub fn weak_speed(gen: &NonHermitianGenerator, rho: &DensityOperator) -> Result<f64> {
    rho.check_dim(&gen.h)?;
    let cross = ((commutator(&gen.h, &gen.gamma) * rho.matrix()).trace() * (-I)).re;
    let sq = rho.variance(&gen.h) + rho.variance(&gen.gamma) + cross;
    Ok(sq.max(0.0).sqrt())
}

/// Whether the weak bound is tight at `ρ`: `Π H̃_ρ Π = 0` on the support,
/// i.e. `ΠHΠ ∝ Π`.
pub fn weak_bound_saturated(gen: &NonHermitianGenerator, rho: &DensityOperator, tol: f64) -> Result<bool> {
    rho.check_dim(&gen.h)?;
    let p = rho.support_projector();
    let centered = &gen.h - identity(rho.dim()) * cr(rho.expectation(&gen.h));
    let restricted: CMatrix = &p * centered * &p;
    Ok(restricted.norm() <= tol * gen.h.norm().max(1.0))
}

/// Speed limits read off a recorded trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpeedLimits {
    pub elapsed: f64,
    /// Bures angle between the first and last recorded states.
    pub angle: f64,
    /// `∫ v_B dt` (trapezoidal).
    pub length: f64,
    /// `∫ v_weak dt` (trapezoidal).
    pub weak_length: f64,
    /// `angle · T / ∫ v_B dt`.
    pub qsl: f64,
    /// `angle · T / ∫ v_weak dt`.
    pub qsl_weak: f64,
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// Angle below which a trajectory with zero path length counts as static.
const STATIC_ANGLE: f64 = 1e-6;

/// Bures-speed and weak speed limits from the record's states, speeds, and generators.
pub fn speed_limit_bounds(record: &TrajectoryRecord) -> Result<SpeedLimits> {
    if record.len() < 2 {
        return Err(Error::InvalidArgument {
            name: "record",
            detail: format!("need at least 2 points, got {}", record.len()),
        });
    }
    let weak = record
        .generators
        .iter()
        .zip(&record.states)
        .map(|(g, s)| weak_speed(g, s))
        .collect::<Result<Vec<_>>>()?;
    let elapsed = record.times[record.len() - 1] - record.times[0];
    let (_, angle) = fidelity_and_angle(&record.states[0], &record.states[record.len() - 1])?;
    let length = trapezoid(&record.times, &record.speeds);
    let weak_length = trapezoid(&record.times, &weak);
    if !(length > 0.0) {
        if angle <= STATIC_ANGLE {
            return Ok(SpeedLimits {
                elapsed,
                angle,
                length,
                weak_length,
                qsl: 0.0,
                qsl_weak: 0.0,
            });
        }
        return Err(Error::ZeroSpeed);
    }
    Ok(SpeedLimits {
        elapsed,
        angle,
        length,
        weak_length,
        qsl: angle * elapsed / length,
        qsl_weak: angle * elapsed / weak_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, GeneratorSchedule, IntegratorConfig};
    use crate::linalg::{pauli_x, pauli_z};

    #[test]
    fn zero_generator_has_zero_speed() {
        let rho = DensityOperator::diagonal(&[0.6, 0.4]).unwrap();
        let gen = NonHermitianGenerator::zero(2);
        assert_eq!(bures_speed(&gen, &rho).unwrap(), 0.0);
        assert_eq!(weak_speed(&gen, &rho).unwrap(), 0.0);
    }

    #[test]
    fn pure_decay_on_maximally_mixed_qubit() {
        let rho = DensityOperator::maximally_mixed(2);
        let gen = NonHermitianGenerator::anti_hermitian(pauli_z()).unwrap();
        assert!((bures_speed(&gen, &rho).unwrap() - 1.0).abs() < 1e-14);
        assert!((bures_speed_fisher_form(&gen, &rho).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn pure_states_saturate_weak_bound() {
        let rho = DensityOperator::pure(&[cr(0.6), cr(0.8)]).unwrap();
        let gen = NonHermitianGenerator::new(pauli_x() * cr(0.7), pauli_z() * cr(0.2)).unwrap();
        assert!(weak_bound_saturated(&gen, &rho, 1e-12).unwrap());
        let a = bures_speed(&gen, &rho).unwrap();
        let b = weak_speed(&gen, &rho).unwrap();
        assert!((a - b).abs() < 1e-12, "{a} {b}");
    }

    #[test]
    fn mixed_state_weak_bound_strict() {
        let rho = DensityOperator::diagonal(&[0.8, 0.2]).unwrap();
        let gen = NonHermitianGenerator::hermitian(pauli_x()).unwrap();
        assert!(!weak_bound_saturated(&gen, &rho, 1e-12).unwrap());
        assert!(bures_speed(&gen, &rho).unwrap() < weak_speed(&gen, &rho).unwrap() - 1e-3);
    }

    #[test]
    fn static_trajectory_gives_zero_bounds() {
        let rho = DensityOperator::diagonal(&[0.6, 0.4]).unwrap();
        let field = GeneratorSchedule::constant(NonHermitianGenerator::zero(2), 0.0, 1.0).unwrap();
        let rec = evolve(&rho, &field, &IntegratorConfig::with_step(0.1)).unwrap();
        let b = speed_limit_bounds(&rec).unwrap();
        assert_eq!((b.qsl, b.qsl_weak), (0.0, 0.0));
    }

    #[test]
    fn bounds_are_ordered() {
        let rho = DensityOperator::diagonal(&[0.7, 0.3]).unwrap();
        let gen = NonHermitianGenerator::new(pauli_x() * cr(0.9), pauli_z() * cr(0.4)).unwrap();
        let field = GeneratorSchedule::constant(gen, 0.0, 1.0).unwrap();
        let rec = evolve(&rho, &field, &IntegratorConfig::with_step(1e-3)).unwrap();
        let b = speed_limit_bounds(&rec).unwrap();
        assert!(b.elapsed >= b.qsl && b.qsl >= b.qsl_weak && b.qsl_weak > 0.0, "{b:?}");
    }
}
