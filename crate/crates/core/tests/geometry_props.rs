use std::sync::Arc;

use nhgeom::linalg::{
    anticommutator, commutator, cr, hermitian_eigen, hermitize, polar_decompose, pseudo_inverse, psd_sqrt,
    spectral_decompose, tr_prod, CMatrix, I,
};
use nhgeom::metric::{
    bures_inner, bures_norm, flow_fields, monotone_inner, monotone_norm, qfi, sld, sld_of_hamiltonian,
    von_neumann_entropy, MonotoneKernel,
};
use nhgeom::purification::{project_velocity, purify, split_tangent, Purification};
use nhgeom::sampling;
use nhgeom::state::{decompose_tangent, DensityOperator, TangentVector, DEFAULT_RANK_TOL};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn kernels() -> [MonotoneKernel; 2] {
    [MonotoneKernel::bures(), MonotoneKernel::right_log_derivative()]
}

/// Polarization leaves roundoff of order ε(‖v‖² + ‖w‖²), so components that
/// vanish analytically are skipped.
fn assert_orthogonal(v: &TangentVector, w: &TangentVector, kernel: &MonotoneKernel) {
    let total = v.matrix().norm() + w.matrix().norm();
    if v.matrix().norm() < 1e-12 * total || w.matrix().norm() < 1e-12 * total {
        return;
    }
    let inner = monotone_inner(v, w, kernel).unwrap();
    let scale = monotone_norm(v, kernel).unwrap() * monotone_norm(w, kernel).unwrap();
    assert!(inner.abs() <= 1e-10 * scale.max(1e-300), "{} {inner:e} vs {scale:e}", kernel.name());
}

fn multiplicities() -> impl Strategy<Value = Vec<usize>> {
    prop_oneof![
        Just(vec![2]),
        Just(vec![2, 1]),
        Just(vec![1, 2]),
        Just(vec![3, 1]),
        Just(vec![2, 2]),
        Just(vec![2, 1, 1]),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectral_decomposition_is_complete(seed in any::<u64>(), n in 1usize..6) {
        let a = sampling::hermitian(&mut rng(seed), n);
        let spec = spectral_decompose(&a, 1e-8).unwrap();
        prop_assert!((spec.reconstruct() - &a).norm() < 1e-12 * a.norm().max(1.0));
        let sum: CMatrix = spec.projectors.iter().fold(CMatrix::zeros(n, n), |acc, p| acc + p);
        prop_assert!((sum - CMatrix::identity(n, n)).norm() < 1e-12);
        for p in &spec.projectors {
            prop_assert!((p * p - p).norm() < 1e-12);
        }
    }

    #[test]
    fn factorizations_hold(seed in any::<u64>(), n in 1usize..5, cols in 1usize..5) {
        let mut r = rng(seed);
        let g = sampling::ginibre(&mut r, n, cols);
        let gg = &g * g.adjoint();
        let root = psd_sqrt(&gg).unwrap();
        prop_assert!((&root * &root - &gg).norm() < 1e-10 * gg.norm().max(1.0));
        let plus = pseudo_inverse(&g, 1e-12);
        prop_assert!((&g * &plus * &g - &g).norm() < 1e-10);
        prop_assert!((&plus * &g * &plus - &plus).norm() < 1e-10 * plus.norm().max(1.0));
        prop_assert!(((&g * &plus).adjoint() - &g * &plus).norm() < 1e-10);
        let sq = sampling::ginibre(&mut r, n, n);
        let polar = polar_decompose(&sq).unwrap();
        prop_assert!((&polar.positive_part * &polar.unitary_part - &sq).norm() < 1e-10);
        let u = &polar.unitary_part;
        prop_assert!((u * u.adjoint() - CMatrix::identity(n, n)).norm() < 1e-10);
        prop_assert!(*hermitian_eigen(&polar.positive_part).0.last().unwrap() > -1e-12);
    }

    #[test]
    fn decomposition_reconstructs(seed in any::<u64>(), n in 2usize..5) {
        let mut r = rng(seed);
        let rho = Arc::new(sampling::state(&mut r, n, n));
        let v = sampling::tangent(&mut r, &rho);
        let d = decompose_tangent(&v);
        let sum = d.coherent.matrix() + d.classical.matrix() + d.lifting.matrix();
        prop_assert!((sum - v.matrix()).norm() <= 1e-12 * v.matrix().norm().max(1.0));
        // nondegenerate spectrum: nothing to lift
        prop_assert!(d.lifting.matrix().norm() < 1e-12);
    }

    #[test]
    fn coherent_and_incoherent_are_orthogonal(seed in any::<u64>(), n in 2usize..5) {
        let mut r = rng(seed);
        let rho = Arc::new(sampling::state(&mut r, n, n));
        let v = sampling::tangent(&mut r, &rho);
        let d = decompose_tangent(&v);
        for kernel in &kernels() {
            assert_orthogonal(&d.coherent, &d.incoherent(), kernel);
        }
        let b = bures_inner(&d.coherent, &d.incoherent()).unwrap();
        prop_assert!(b.abs() <= 1e-10 * bures_norm(&d.coherent).unwrap() * bures_norm(&d.incoherent()).unwrap() + 1e-300);
    }

    #[test]
    fn degenerate_states_split_orthogonally(seed in any::<u64>(), mult in multiplicities()) {
        let mut r = rng(seed);
        let rho = Arc::new(sampling::degenerate_state(&mut r, &mult));
        let v = sampling::tangent(&mut r, &rho);
        let d = decompose_tangent(&v);
        let sum = d.coherent.matrix() + d.classical.matrix() + d.lifting.matrix();
        prop_assert!((sum - v.matrix()).norm() <= 1e-12 * v.matrix().norm().max(1.0));
        for kernel in &kernels() {
            assert_orthogonal(&d.classical, &d.lifting, kernel);
            assert_orthogonal(&d.coherent, &d.incoherent(), kernel);
        }
    }

    #[test]
    fn pure_states_have_only_coherent_tangents(seed in any::<u64>(), n in 2usize..5) {
        let mut r = rng(seed);
        let rho = Arc::new(sampling::state(&mut r, n, 1));
        let v = sampling::tangent(&mut r, &rho);
        let d = decompose_tangent(&v);
        prop_assert!(d.classical.matrix().norm() < 1e-12);
        prop_assert!(d.lifting.matrix().norm() < 1e-12);
    }

    #[test]
    fn sld_solves_lyapunov_equation(seed in any::<u64>(), n in 2usize..5, deficit in 0usize..2) {
        let mut r = rng(seed);
        let rank = (n - deficit).max(1);
        let rho = Arc::new(sampling::state(&mut r, n, rank));
        let v = sampling::tangent(&mut r, &rho);
        let l = sld(&v).unwrap();
        prop_assert!((anticommutator(&l, rho.matrix()) - v.matrix()).norm() <= 1e-10 * v.matrix().norm().max(1.0));
        let w = sampling::tangent(&mut r, &rho);
        let (a, b) = (bures_inner(&v, &w).unwrap(), bures_inner(&w, &v).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn bures_kernel_matches_sld_route(seed in any::<u64>(), n in 2usize..5) {
        let mut r = rng(seed);
        let rho = Arc::new(sampling::state(&mut r, n, n));
        let v = sampling::tangent(&mut r, &rho);
        // the kernel 2/(λ+μ) carries twice the SLD normalization
        let kernel_norm = monotone_norm(&v, &MonotoneKernel::bures()).unwrap();
        let sld_norm = bures_norm(&v).unwrap();
        prop_assert!((kernel_norm - 2.0 * sld_norm).abs() <= 1e-10 * kernel_norm.max(1.0));
    }

    #[test]
    fn qfi_matches_spectral_formula(seed in any::<u64>(), n in 2usize..5, deficit in 0usize..2) {
        let mut r = rng(seed);
        let rho = sampling::state(&mut r, n, (n - deficit).max(1));
        let h = sampling::hermitian(&mut r, n);
        let l = sld_of_hamiltonian(&h, &rho).unwrap();
        let unitary = commutator(&h, rho.matrix()) * (-I);
        prop_assert!((anticommutator(&l, rho.matrix()) - &unitary).norm() <= 1e-10 * unitary.norm().max(1.0));
        let (lam, vecs) = hermitian_eigen(rho.matrix());
        let he = vecs.adjoint() * &h * &vecs;
        let mut spectral = 0.0;
        for j in 0..n {
            for k in 0..n {
                let s = lam[j] + lam[k];
                if s > 1e-12 {
                    spectral += 2.0 * (lam[j] - lam[k]).powi(2) / s * he[(j, k)].norm_sqr();
                }
            }
        }
        let q = qfi(&h, &rho).unwrap();
        prop_assert!((q - spectral).abs() <= 1e-10 * q.max(1.0));
        prop_assert!((tr_prod(&(&l * &l), rho.matrix()) - 0.25 * spectral).abs() <= 1e-10 * q.max(1.0));
    }

    #[test]
    fn flow_fields_are_orthogonal(seed in any::<u64>(), n in 2usize..5) {
        let mut r = rng(seed);
        let rho = Arc::new(sampling::state(&mut r, n, n));
        let a = sampling::hermitian(&mut r, n);
        let (rotation, gradient) = flow_fields(&a, &rho).unwrap();
        prop_assert!(tr_prod(&a, rotation.matrix()).abs() < 1e-12 * a.norm().max(1.0));
        let inner = bures_inner(&rotation, &gradient).unwrap();
        prop_assert!(inner.abs() < 1e-10 * (bures_norm(&rotation).unwrap() * bures_norm(&gradient).unwrap()).max(1.0));
        // the gradient field is the Bures gradient of ⟨A⟩: (grad, v)_B = ½ Tr(A v)
        let v = sampling::tangent(&mut r, &rho);
        let lhs = bures_inner(&gradient, &v).unwrap();
        prop_assert!((lhs - 0.5 * tr_prod(&a, v.matrix())).abs() < 1e-10 * lhs.abs().max(1.0));
    }

    #[test]
    fn horizontal_lift_realizes_bures_norm(seed in any::<u64>(), n in 2usize..5, deficit in 0usize..3) {
        let mut r = rng(seed);
        let rank = n.saturating_sub(deficit).max(1);
        let rho = Arc::new(sampling::state(&mut r, n, rank));
        let v = sampling::tangent(&mut r, &rho);
        let expected = bures_inner(&v, &v).unwrap();
        let base = purify(&rho);
        // any fiber point W·U, with an arbitrary vertical component added
        let u = sampling::unitary(&mut r, rank);
        let w = Purification::new(base.matrix() * &u, 1e-10).unwrap();
        let g = sampling::ginibre(&mut r, rank, rank);
        let a = (&g - g.adjoint()) * cr(0.5);
        let l = sld(&v).unwrap();
        let wdot = &l * w.matrix() + w.matrix() * &a;
        prop_assert!((project_velocity(&wdot, &w) - v.matrix()).norm() < 1e-10 * v.matrix().norm().max(1.0));
        let split = split_tangent(&wdot, &w).unwrap();
        let h2 = split.horizontal.norm_squared();
        prop_assert!((h2 - expected).abs() <= 1e-8 * expected.max(1.0), "{h2} vs {expected}");
        prop_assert!((project_velocity(&split.vertical, &w)).norm() < 1e-9 * wdot.norm().max(1.0));
        prop_assert!((&split.a + split.a.adjoint()).norm() < 1e-9);
    }

    #[test]
    fn coherent_motion_preserves_entropy(seed in any::<u64>(), n in 2usize..5) {
        let mut r = rng(seed);
        let rho = Arc::new(sampling::state(&mut r, n, n));
        let v = sampling::tangent(&mut r, &rho);
        let coherent = decompose_tangent(&v).coherent;
        let eps = 1e-5;
        let step = |s: f64| {
            let m = hermitize(&(rho.matrix() + coherent.matrix() * cr(s)));
            von_neumann_entropy(&DensityOperator::new(m, DEFAULT_RANK_TOL).unwrap())
        };
        let derivative = (step(eps) - step(-eps)) / (2.0 * eps);
        prop_assert!(derivative.abs() < 1e-8, "{derivative:e}");
    }

    #[test]
    fn lifting_lowers_entropy(seed in any::<u64>(), mult in multiplicities()) {
        let mut r = rng(seed);
        let rho = Arc::new(sampling::degenerate_state(&mut r, &mult));
        let v = sampling::tangent(&mut r, &rho);
        let lifting = decompose_tangent(&v).lifting;
        prop_assume!(lifting.matrix().norm() > 1e-6);
        let s0 = von_neumann_entropy(&rho);
        for eps in [1e-3, -1e-3] {
            let m = hermitize(&(rho.matrix() + lifting.matrix() * cr(eps / lifting.matrix().norm())));
            let s = von_neumann_entropy(&DensityOperator::new(m, DEFAULT_RANK_TOL).unwrap());
            prop_assert!(s < s0, "{s} !< {s0}");
        }
    }
}
