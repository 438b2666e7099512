//! Random operators and states for property checks and randomized drivers.
//!
//! Everything takes an explicit `Rng` so a fixed seed reproduces the inputs.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, cr, identity, polar_decompose, CMatrix};
use crate::state::{tangent_from_generator, DensityOperator, TangentVector, DEFAULT_RANK_TOL};

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c(re, im) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let g = ginibre(rng, n, n);
    (&g + g.adjoint()) * cr(0.5)
}

/// Haar-distributed unitary (unitary factor of a Ginibre matrix).
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    polar_decompose(&ginibre(rng, n, n))
        .expect("square input")
        .unitary_part
}

/// Random rank-`rank` state `GG†/Tr(GG†)` with `G` an `n × rank` Ginibre matrix.
///
/// Spectra are almost surely nondegenerate on the support; draws with a gap
/// below `1e-4` (or a support eigenvalue below `1e-4`) are rejected so the
/// states stay well inside their stratum.
pub fn state<R: Rng + ?Sized>(rng: &mut R, n: usize, rank: usize) -> DensityOperator {
    loop {
        let g = ginibre(rng, n, rank);
        let m = &g * g.adjoint();
        let Ok(rho) = DensityOperator::from_unnormalized(&m, DEFAULT_RANK_TOL, crate::linalg::DEFAULT_CLUSTER_TOL)
        else {
            continue;
        };
        let lam = rho.eigenvalues();
        let gap_ok = lam[..rank].windows(2).all(|w| w[0] - w[1] > 1e-4);
        if rho.rank() == rank && lam[rank - 1] > 1e-4 && gap_ok {
            return rho;
        }
    }
}

/// State with the prescribed multiplicities (distinct random levels) in a Haar-random basis.
pub fn degenerate_state<R: Rng + ?Sized>(rng: &mut R, multiplicities: &[usize]) -> DensityOperator {
    let n: usize = multiplicities.iter().sum();
    let levels: Vec<f64> = loop {
        let l: Vec<f64> = multiplicities.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        let mut s = l.clone();
        s.sort_by(f64::total_cmp);
        if s.windows(2).all(|w| w[1] - w[0] > 0.02) {
            break l;
        }
    };
    let mut diag = Vec::with_capacity(n);
    for (&m, &l) in multiplicities.iter().zip(&levels) {
        diag.extend(std::iter::repeat_n(l, m));
    }
    let u = unitary(rng, n);
    let d = crate::linalg::from_diagonal(&diag);
    DensityOperator::from_unnormalized(&(&u * d * u.adjoint()), DEFAULT_RANK_TOL, crate::linalg::DEFAULT_CLUSTER_TOL)
        .expect("positive diagonal conjugated by a unitary")
}

/// Generic tangent at `rho`: the tangent generated by a random `K`.
pub fn tangent<R: Rng + ?Sized>(rng: &mut R, rho: &Arc<DensityOperator>) -> TangentVector {
    let k = ginibre(rng, rho.dim(), rho.dim());
    tangent_from_generator(&k, rho).expect("dimensions match")
}

/// Generic traceless Hermitian matrix; a tangent only when `rho` is full rank.
pub fn traceless_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let h = hermitian(rng, n);
    let t = h.trace() / cr(n as f64);
    h - identity(n) * t
}
