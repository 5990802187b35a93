mod common;

use std::f64::consts::PI;

use common::*;
use gsff_core::bvp1d::{
    boundary_symplectic, cauchy_data, eigenvalue_condition, eigenvalues_in_window, flatten,
    symplectic_residual, transfer_matrix, FirstOrderSystem, Potential,
};
use gsff_core::harness::{catalog_entry, random_scenario};
use gsff_core::linalg::{block_diag, from_real_rows, CMat};
use gsff_core::sample;
use gsff_core::sympcore::{fredholm_index, SubspaceFrame, SubspaceKind};
use proptest::prelude::*;

fn jacobi_sigma() -> CMat {
    from_real_rows(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

/// `span{e2, e4}`: the first component vanishes at both ends.
fn dirichlet_frame() -> SubspaceFrame {
    let mut f = CMat::zeros(4, 2);
    f[(1, 0)] = 1.0.into();
    f[(3, 1)] = 1.0.into();
    SubspaceFrame::new(4, f, &tol()).unwrap()
}

fn assert_close(a: &[f64], b: &[f64], eps: f64, what: &str) {
    assert_eq!(a.len(), b.len(), "{what}: {a:?} vs {b:?}");
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() < eps, "{what}: {a:?} vs {b:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transfer_matrices_are_conjugate_symplectic(
        seed in 0u64..10_000, m in 1usize..=2, s in 0.0f64..1.0, mu in -7.0f64..7.0,
    ) {
        let sc = random_scenario(seed, m).build(&tol()).unwrap();
        let t = transfer_matrix(&sc.system, s, mu).unwrap();
        prop_assert!(symplectic_residual(sc.system.sigma(), &t) < 1e-8);
    }

    #[test]
    fn cauchy_data_is_lagrangian_and_fredholm(seed in 0u64..10_000, m in 1usize..=2, s in 0.0f64..1.0) {
        let sc = random_scenario(seed, m).build(&tol()).unwrap();
        let space = boundary_symplectic(sc.system.sigma(), &tol()).unwrap();
        let c = cauchy_data(&sc.system, s, 0.0).unwrap();
        prop_assert_eq!(space.classify(&c, &tol()).unwrap(), SubspaceKind::Lagrangian);
        let b = sc.boundary.eval(s);
        prop_assert_eq!(space.classify(&b, &tol()).unwrap(), SubspaceKind::Lagrangian);
        prop_assert_eq!(fredholm_index(&b, &c, &tol()).unwrap(), 0);
    }
}

#[test]
fn spectra_are_invariant_under_unitary_conjugation() {
    for seed in 0..12u64 {
        let m = 1 + (seed % 2) as usize;
        let sc = random_scenario(seed, m).build(&tol()).unwrap();
        let s = 0.1 + 0.8 * (seed as f64 / 12.0);
        let mut r = sample::rng(seed ^ 0xabc);
        let q = sample::unitary(&mut r, m);
        let conj = sc.system.conjugated(&q, &tol()).unwrap();
        // solutions transform as y = Q^H x, and so do the boundary values
        let qq = block_diag(&q.adjoint(), &q.adjoint());
        let b = sc.boundary.eval(s);
        let b2 = SubspaceFrame::new(2 * m, &qq * b.frame(), &tol()).unwrap();
        let a = flatten(&eigenvalues_in_window(&sc.system, s, &b, 6.0).unwrap());
        let c = flatten(&eigenvalues_in_window(&conj, s, &b2, 6.0).unwrap());
        assert_close(&a, &c, 1e-8, &format!("seed {seed}"));
    }
}

#[test]
fn found_eigenvalues_satisfy_the_condition() {
    for seed in 0..6u64 {
        let sc = random_scenario(seed, 2).build(&tol()).unwrap();
        let b = sc.boundary.eval(0.3);
        for e in eigenvalues_in_window(&sc.system, 0.3, &b, 5.0).unwrap() {
            assert!(eigenvalue_condition(&sc.system, 0.3, &b, e.value).unwrap() < 1e-6);
        }
    }
}

#[test]
fn jacobi_system_matches_finite_differences() {
    let c = 6.5;
    for s in [0.0, 0.17, 0.5, 0.83, 1.0] {
        let sys = FirstOrderSystem::new(
            jacobi_sigma(),
            Potential::Affine {
                v0: CMat::zeros(2, 2),
                v1: CMat::identity(2, 2).scale(c),
            },
            &tol(),
        )
        .unwrap();
        let shooting = flatten(&eigenvalues_in_window(&sys, s, &dirichlet_frame(), 7.0).unwrap());
        let fd = staggered_eigenvalues(2000, move |_| c * s, move |_| c * s, -7.0, 7.0);
        assert_close(&shooting, &fd, 1e-6, &format!("s = {s}"));
        // and the explicit spectrum c s + kπ
        let exact: Vec<f64> = (-5..=5)
            .map(|k| c * s + k as f64 * PI)
            .filter(|v| v.abs() <= 7.0)
            .collect();
        assert_close(&shooting, &exact, 1e-8, &format!("s = {s}"));
    }
}

#[test]
fn variable_potential_matches_finite_differences() {
    let p = |t: f64| 1.5 * (2.0 * PI * t).cos() + 0.4;
    let q = |t: f64| -0.8 * (PI * t).sin();
    let sys = FirstOrderSystem::new(
        jacobi_sigma(),
        Potential::custom(true, move |_, t| {
            gsff_core::linalg::diag_real(&[p(t), q(t)])
        }),
        &tol(),
    )
    .unwrap();
    let shooting = flatten(&eigenvalues_in_window(&sys, 0.5, &dirichlet_frame(), 7.0).unwrap());
    let fd = staggered_eigenvalues(2000, p, q, -7.0, 7.0);
    assert!(!fd.is_empty());
    assert_close(&shooting, &fd, 1e-6, "variable potential");
}

#[test]
fn catalog_cauchy_frames_are_lagrangian() {
    for label in ["R1", "P1", "J1", "Z1", "L1"] {
        let sc = catalog_entry(label).unwrap().build(&tol()).unwrap();
        let space = boundary_symplectic(sc.system.sigma(), &tol()).unwrap();
        for i in 0..=8 {
            let s = i as f64 / 8.0;
            let c = cauchy_data(&sc.system, s, 0.0).unwrap();
            assert!(space.is_lagrangian(&c, &tol()).unwrap(), "{label} at {s}");
        }
    }
}
