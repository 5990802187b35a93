//! Property checks shared by the proptest suites and the acceptance driver.
//! Each returns `Err` with a description of the violation.

use std::f64::consts::PI;

use gsff_core::linalg::{block_diag, diag_real, expi_hermitian, max_abs, CMat};
use gsff_core::maslov::{
    crossing_form_q, lagrangian_complement, maslov_index, maslov_via_crossings, winding_oracle,
    LagrangianPath, SymplecticFamily,
};
use gsff_core::sample;
use gsff_core::specflow::{
    sf_partition, sf_partition_with, CoOrientation, MatrixPathSource, OperatorPath, PartitionOptions,
};
use gsff_core::sympcore::SymplecticSpace;
use rand::Rng;

use super::*;

pub type Check = Result<(), String>;

fn same<T: PartialEq + std::fmt::Debug>(what: &str, a: T, b: T) -> Check {
    if a == b {
        Ok(())
    } else {
        Err(format!("{what}: {a:?} != {b:?}"))
    }
}

pub fn sf(path: &OperatorPath) -> i64 {
    sf_partition(path, &tol()).unwrap().0
}

pub fn sf_reversed(path: &OperatorPath) -> i64 {
    sf_partition_with(
        &MatrixPathSource { path, tol: tol() },
        PartitionOptions {
            sample_hint: path.sample_hint(),
            orientation: CoOrientation::Reversed,
            ..Default::default()
        },
    )
    .unwrap()
    .total
}

pub fn catenation(seed: u64, n: usize, cut: f64) -> Check {
    let p = trig_path(seed, n);
    same(
        "SF[0,1] vs SF[0,c] + SF[c,1]",
        sf(&p),
        sf(&p.restrict(0.0, cut)) + sf(&p.restrict(cut, 1.0)),
    )
}

/// Flow around the boundary of a two-parameter family.
pub fn homotopy_loop(seed: u64, n: usize) -> Check {
    let mut r = sample::rng(seed);
    let h: Vec<CMat> = (0..4).map(|_| sample::hermitian(&mut r, n)).collect();
    let path = OperatorPath::hermitian(n, move |u| {
        let (s, t) = square_point(u);
        &h[0] + h[1].scale((2.0 * PI * s).cos() * 1.5) + h[2].scale((PI * t).sin() * 1.5) + h[3].scale(s * t)
    })
    .with_sample_hint(128);
    same("SF around the square", sf(&path), 0)
}

pub fn fixed_endpoint_homotopy(seed: u64, n: usize) -> Check {
    let p = trig_path(seed, n);
    let mut r = sample::rng(seed ^ 0x5eed);
    let k = sample::hermitian(&mut r, n).scale(2.0);
    let p2 = p.clone();
    let deformed = OperatorPath::hermitian(n, move |s| p2.eval(s) + k.scale((PI * s).sin()));
    same("SF of homotopic paths", sf(&p), sf(&deformed))?;
    same("SF vs endpoint Morse indices", sf(&p), endpoint_flow(&p))
}

pub fn product(seed: u64, n1: usize, n2: usize) -> Check {
    let a = trig_path(seed, n1);
    let b = trig_path(seed.wrapping_add(1), n2);
    let (a2, b2) = (a.clone(), b.clone());
    let ab = OperatorPath::hermitian(n1 + n2, move |s| block_diag(&a2.eval(s), &b2.eval(s)));
    same("SF of the block path", sf(&ab), sf(&a) + sf(&b))
}

pub fn reverse_orientation(seed: u64, n: usize) -> Check {
    let e = endpoint_path(seed, n);
    let forward = sf(&e.path);
    let backward = sf_reversed(&e.path);
    same("forward flow", forward, e.flow)?;
    same("reversed flow", backward, e.flow_reversed)?;
    same(
        "SF + reversed SF vs nullity change",
        forward + backward,
        e.nullity.1 as i64 - e.nullity.0 as i64,
    )
}

/// No interior zero crossings: only endpoint kernels change the count.
pub fn bound(seed: u64, n: usize) -> Check {
    let e = endpoint_path(seed, n);
    let v = sf(&e.path);
    if -(e.nullity.0 as i64) <= v && v <= e.nullity.1 as i64 {
        Ok(())
    } else {
        Err(format!("SF {v} outside [-{}, {}]", e.nullity.0, e.nullity.1))
    }
}

pub fn zero_property(seed: u64, n: usize, kernel: usize) -> Check {
    let mut r = sample::rng(seed);
    let mut d: Vec<f64> = (0..n)
        .map(|_| if r.gen_bool(0.5) { 1.0 } else { -1.0 } * r.gen_range(0.2..3.0))
        .collect();
    for v in d.iter_mut().take(kernel.min(n)) {
        *v = 0.0;
    }
    let k = sample::hermitian(&mut r, n).scale(3.0);
    let path = OperatorPath::hermitian(n, move |s| {
        let q = expi_hermitian(&k.scale(s));
        &q * diag_real(&d) * q.adjoint()
    });
    same("SF of a constant-nullity path", sf(&path), 0)
}

pub fn conjugation(seed: u64, n: usize) -> Check {
    let p = trig_path(seed, n);
    let conj = p.conjugated(invertible_family(seed ^ 0xc0, n)).unwrap();
    same("SF after conjugation", sf(&conj), sf(&p))
}

pub fn partition_vs_tracking(seed: u64, n: usize) -> Check {
    let p = trig_path(seed, n);
    same("partition vs tracking", sf(&p), tracking_flow(&p))
}

pub fn mas(l: &LagrangianPath, m: &LagrangianPath, f: &SymplecticFamily) -> i64 {
    maslov_index(l, m, f, &tol()).unwrap().0
}

pub fn maslov_crossings(seed: u64, n: usize, swap: bool) -> Check {
    let (fam, l, m) = regular_pair(seed, n, swap);
    let via = maslov_via_crossings(&l, &m, &fam, &tol()).map_err(|e| e.to_string())?;
    same("partition vs crossing forms", mas(&l, &m, &fam), via.total)
}

pub fn maslov_winding(seed: u64, n: usize) -> Check {
    let sp = mixed_space(seed, n);
    let (l, total) = generator_loop(&sp, seed, 2);
    let mut r = sample::rng(seed ^ 0x77);
    let mu = sample::lagrangian(&mut r, &sp);
    let w = winding_oracle(&l, &mu, &sp, &tol()).map_err(|e| e.to_string())?.winding;
    let m = mas(&l, &LagrangianPath::constant(mu), &SymplecticFamily::constant(sp));
    same("partition vs winding", m, w)?;
    same("partition vs generator degree", m, -total)
}

/// Two Gram families with common endpoints and the constant one.
pub fn inner_product_independence(seed: u64, n: usize) -> Check {
    let sp = SymplecticSpace::standard(n);
    let dim = 2 * n;
    let mut r = sample::rng(seed);
    let ga = sample::gram(&mut r, dim, 1.0);
    let gb = sample::gram(&mut r, dim, 1.0);
    let r1 = sample::gram(&mut r, dim, 1.0);
    let r2 = sample::gram(&mut r, dim, 2.0).scale(0.5);
    let u0 = sample::unitary(&mut r, n);
    let k = sample::hermitian(&mut r, n).scale(4.0);
    let l = LagrangianPath::from_generators(&sp, u0, k);
    let m = LagrangianPath::constant(sample::lagrangian(&mut r, &sp));
    let omega = sp.omega_matrix().clone();
    let family = |extra: CMat| {
        let (ga, gb) = (ga.clone(), gb.clone());
        SymplecticFamily::from_form(
            dim,
            move |s| ga.scale(1.0 - s) + gb.scale(s) + extra.scale(s * (1.0 - s)),
            omega.clone(),
        )
    };
    let base = mas(&l, &m, &SymplecticFamily::constant(sp.clone()));
    same("first Gram family", mas(&l, &m, &family(r1)), base)?;
    same("second Gram family", mas(&l, &m, &family(r2)), base)
}

pub fn maslov_catenation(seed: u64, n: usize, cut: f64) -> Check {
    let (fam, l, m) = regular_pair(seed, n, false);
    same(
        "Mas[0,1] vs Mas[0,c] + Mas[c,1]",
        mas(&l, &m, &fam),
        mas(&l.restrict(0.0, cut), &m.restrict(0.0, cut), &fam)
            + mas(&l.restrict(cut, 1.0), &m.restrict(cut, 1.0), &fam),
    )
}

pub fn maslov_square(seed: u64, n: usize) -> Check {
    let sp = mixed_space(seed, n);
    let mut r = sample::rng(seed);
    let u0 = sample::unitary(&mut r, n);
    let ks: Vec<CMat> = (0..3).map(|_| sample::hermitian(&mut r, n).scale(3.0)).collect();
    let mu = LagrangianPath::constant(sample::lagrangian(&mut r, &sp));
    let sp2 = sp.clone();
    let l = LagrangianPath::new(sp.dim(), move |u| {
        let (s, t) = square_point(u);
        let k = ks[0].scale(s) + ks[1].scale(t) + ks[2].scale(s * t);
        let g = sample::generator_from_unitary(&sp2, &(&u0 * expi_hermitian(&k)));
        sp2.unitary_to_lagrangian(&g, &tol()).unwrap()
    });
    same("Mas around the square", mas(&l, &mu, &SymplecticFamily::constant(sp)), 0)
}

/// Largest entry difference of the crossing form computed with two
/// different complements.
pub fn q_complement_spread(seed: u64, n: usize, t: f64) -> f64 {
    let sp = mixed_space(seed, n);
    let mut r = sample::rng(seed);
    let u0 = sample::unitary(&mut r, n);
    let k = sample::hermitian(&mut r, n).scale(3.0);
    let l = LagrangianPath::from_generators(&sp, u0, k);
    let lt = l.eval(t);
    let w1 = lagrangian_complement(&sp, &lt, r.gen_range(0.5..PI)).unwrap();
    let w2 = lagrangian_complement(&sp, &lt, r.gen_range(PI..2.0 * PI - 0.5)).unwrap();
    let fam = SymplecticFamily::constant(sp);
    let q1 = crossing_form_q(&l, t, &w1, &fam, &tol()).unwrap();
    let q2 = crossing_form_q(&l, t, &w2, &fam, &tol()).unwrap();
    max_abs(&(&q1 - &q2))
}
