//! Eigenvalues of `A_s` with a Lagrangian boundary condition by shooting.
//!
//! `μ` is an eigenvalue iff the graph of `T(μ)` meets the boundary
//! Lagrangian, i.e. iff `W(μ) = Ũ_bd Ṽ(μ)^{-1}` has eigenvalue 1. The search
//! follows the eigenvalue arguments of `W(μ)` across a grid and bisects on
//! every argument that changes sign near 0.

use serde::{Deserialize, Serialize};

use super::transfer::{calibrate_steps, graph_frame, ChebyshevTransfer, Slice, StepControl};
use super::{boundary_symplectic, FirstOrderSystem};
use crate::error::{Error, Result};
use crate::linalg::{self, diag_real, hstack, CMat};
use crate::sympcore::{SubspaceFrame, SymplecticSpace};
use crate::tol::Tolerances;

use std::f64::consts::PI;

/// An eigenvalue together with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub value: f64,
    pub multiplicity: usize,
}

/// Eigenvalues repeated by multiplicity.
pub fn flatten(ev: &[Eigenvalue]) -> Vec<f64> {
    ev.iter()
        .flat_map(|e| std::iter::repeat(e.value).take(e.multiplicity))
        .collect()
}

/// Arguments of `Ũ_bd Ṽ(T)^{-1}` for graphs of transfer matrices.
pub(crate) struct BoundaryRatio {
    plus: CMat,
    minus: CMat,
    sqrt_minus: CMat,
    inv_sqrt_plus: CMat,
    u_bd: CMat,
}

impl BoundaryRatio {
    pub(crate) fn new(space: &SymplecticSpace, boundary: &SubspaceFrame, tol: &Tolerances) -> Result<Self> {
        let u_bd = space.lagrangian_to_unitary(boundary, tol)?.normalized();
        Ok(Self {
            plus: space.basis_plus(),
            minus: space.basis_minus(),
            sqrt_minus: diag_real(&space.weights_minus().iter().map(|w| w.sqrt()).collect::<Vec<_>>()),
            inv_sqrt_plus: diag_real(&space.weights_plus().iter().map(|w| 1.0 / w.sqrt()).collect::<Vec<_>>()),
            u_bd,
        })
    }

    pub(crate) fn phases(&self, t: &CMat) -> Result<Vec<f64>> {
        let m = t.nrows();
        let f = linalg::vstack(&CMat::identity(m, m), t);
        let a = self.plus.adjoint() * &f;
        let c = self.minus.adjoint() * &f;
        let v = &self.sqrt_minus * c * linalg::inverse(&a)? * &self.inv_sqrt_plus;
        let w = &self.u_bd * linalg::inverse(&v)?;
        linalg::unitary_phases(&w)
    }
}

/// Wrap to `(-π, π]`.
fn wrap(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y <= -PI {
        y += 2.0 * PI;
    } else if y > PI {
        y -= 2.0 * PI;
    }
    y
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Matching `a[i] <-> b[perm[i]]` of two sets of arguments minimising the
/// largest circular displacement; returns the permutation and that
/// displacement.
pub(crate) fn match_phases(a: &[f64], b: &[f64]) -> (Vec<usize>, f64) {
    let n = a.len();
    let cost = |p: &[usize]| {
        p.iter()
            .enumerate()
            .map(|(i, &j)| wrap(b[j] - a[i]).abs())
            .fold(0.0f64, f64::max)
    };
    if n <= 5 {
        let mut best = (Vec::new(), f64::INFINITY);
        for p in permutations(n) {
            let c = cost(&p);
            if c < best.1 {
                best = (p, c);
            }
        }
        return best;
    }
    // both lists are sorted; circular shifts preserve the cyclic order
    let mut best = (Vec::new(), f64::INFINITY);
    for k in 0..n {
        let p: Vec<usize> = (0..n).map(|i| (i + k) % n).collect();
        let c = cost(&p);
        if c < best.1 {
            best = (p, c);
        }
    }
    best
}

/// Roots in `(lo, hi)` of the arguments returned by `phases`, located on a
/// grid of spacing `grid_h` and bisected to `root_tol`.
pub(crate) fn phase_roots<F>(mut phases: F, lo: f64, hi: f64, grid_h: f64, root_tol: f64) -> Result<Vec<Eigenvalue>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    const EDGE: f64 = 1e-7;
    let p_lo = phases(lo)?;
    let p_hi = phases(hi)?;
    for (mu, p) in [(lo, &p_lo), (hi, &p_hi)] {
        if p.iter().any(|x| x.abs() < EDGE) {
            return Err(Error::WindowEdge { lambda: mu });
        }
    }
    let n = ((hi - lo) / grid_h).ceil().max(1.0) as usize;
    let mut roots = Vec::new();
    let mut prev = (lo, p_lo);
    for i in 1..=n {
        let mu = if i == n { hi } else { lo + (hi - lo) * i as f64 / n as f64 };
        let p = if i == n { p_hi.clone() } else { phases(mu)? };
        scan(&mut phases, prev.0, &prev.1, mu, &p, 0, root_tol, &mut roots)?;
        prev = (mu, p);
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    let mut out: Vec<Eigenvalue> = Vec::new();
    for r in roots {
        match out.last_mut() {
            Some(e) if (r - e.value).abs() < 1e-8 => e.multiplicity += 1,
            _ => out.push(Eigenvalue {
                value: r,
                multiplicity: 1,
            }),
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn scan<F>(
    phases: &mut F,
    a: f64,
    pa: &[f64],
    b: f64,
    pb: &[f64],
    depth: u32,
    root_tol: f64,
    roots: &mut Vec<f64>,
) -> Result<()>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let (perm, motion) = match_phases(pa, pb);
    if motion >= PI / 4.0 {
        if depth >= 40 {
            return Err(Error::NonConvergent {
                s0: a,
                s1: b,
                reason: "boundary phases move too fast to be matched".into(),
            });
        }
        let mid = 0.5 * (a + b);
        let pm = phases(mid)?;
        scan(phases, a, pa, mid, &pm, depth + 1, root_tol, roots)?;
        return scan(phases, mid, &pm, b, pb, depth + 1, root_tol, roots);
    }
    for (k, &x) in pa.iter().enumerate() {
        let y = x + wrap(pb[perm[k]] - x);
        if x.abs() < PI / 2.0 && (x > 0.0) != (y > 0.0) {
            roots.push(bisect(phases, a, pa.to_vec(), k, b, root_tol)?);
        }
    }
    Ok(())
}

fn bisect<F>(phases: &mut F, mut lo: f64, mut p_lo: Vec<f64>, mut idx: usize, mut hi: f64, root_tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let mut x = p_lo[idx];
    while hi - lo > root_tol {
        let mid = 0.5 * (lo + hi);
        let pm = phases(mid)?;
        let (perm, _) = match_phases(&p_lo, &pm);
        let z = x + wrap(pm[perm[idx]] - x);
        if (z > 0.0) == (x > 0.0) {
            lo = mid;
            idx = perm[idx];
            p_lo = pm;
            x = z;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Smallest singular value of `[boundary | graph T(λ)]` (orthonormalized):
/// zero exactly at eigenvalues.
pub fn eigenvalue_condition(
    system: &FirstOrderSystem,
    s: f64,
    boundary: &SubspaceFrame,
    lambda: f64,
) -> Result<f64> {
    let t = super::transfer_matrix(system, s, lambda)?;
    let g = graph_frame(&t);
    Ok(linalg::smallest_singular_value(&hstack(&boundary.orthonormal(), &g.orthonormal())))
}

/// Interpolation range used for a window of half-width `lambda`.
pub(crate) fn interpolation_radius(lambda: f64) -> f64 {
    1.02 * lambda
}

/// Eigenvalues in `[-lambda, lambda]` from a transfer-matrix interpolant.
pub(crate) fn window_eigenvalues(
    ratio: &BoundaryRatio,
    cheb: &ChebyshevTransfer,
    lambda: f64,
) -> Result<Vec<Eigenvalue>> {
    debug_assert!(cheb.lo() <= -lambda && cheb.hi() >= lambda);
    phase_roots(|mu| ratio.phases(&cheb.eval(mu)), -lambda, lambda, 1e-2 * lambda, 1e-10)
}

/// All eigenvalues of `A_s` with boundary condition `boundary` in
/// `[-lambda, lambda]`, with multiplicities.
pub fn eigenvalues_in_window(
    system: &FirstOrderSystem,
    s: f64,
    boundary: &SubspaceFrame,
    lambda: f64,
) -> Result<Vec<Eigenvalue>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput(format!("window must be positive, got {lambda}")));
    }
    let tol = Tolerances::default();
    let space = boundary_symplectic(system.sigma(), &tol)?;
    let ratio = BoundaryRatio::new(&space, boundary, &tol)?;
    let r = interpolation_radius(lambda);
    let steps = calibrate_steps(system, r, &StepControl::default())?;
    let slice = Slice::new(system, s, steps);
    let cheb = ChebyshevTransfer::build(&slice, -r, r, 1e-11)?;
    window_eigenvalues(&ratio, &cheb, lambda)
}

#[cfg(test)]
mod tests {
    use super::super::{Potential, TrigTerm};
    use super::*;
    use crate::linalg::{c64, from_real_rows};
    use num_complex::Complex64;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn free() -> FirstOrderSystem {
        FirstOrderSystem::new(CMat::from_element(1, 1, c64(0.0, -1.0)), Potential::Zero, &tol()).unwrap()
    }

    fn phase_frame(theta: f64) -> SubspaceFrame {
        SubspaceFrame::new(
            2,
            CMat::from_column_slice(2, 1, &[c64(1.0, 0.0), Complex64::from_polar(1.0, theta)]),
            &tol(),
        )
        .unwrap()
    }

    #[test]
    fn wrap_range() {
        assert!((wrap(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap(-PI) - PI).abs() < 1e-12);
        assert!((wrap(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn synthetic_roots_with_multiplicity() {
        // two arguments crossing zero together at 0.3 and one at -1.1
        let f = |mu: f64| {
            let mut v = vec![wrap(0.3 - mu), wrap(0.3 - mu), wrap(-1.1 - mu)];
            v.sort_by(|a, b| a.total_cmp(b));
            Ok(v)
        };
        let r = phase_roots(f, -2.0, 2.0, 0.02, 1e-10).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0].value + 1.1).abs() < 1e-9 && r[0].multiplicity == 1);
        assert!((r[1].value - 0.3).abs() < 1e-9 && r[1].multiplicity == 2);
    }

    #[test]
    fn periodic_condition() {
        let b = phase_frame(0.0);
        assert!(eigenvalue_condition(&free(), 0.0, &b, 0.0).unwrap() < 1e-9);
        assert!(eigenvalue_condition(&free(), 0.0, &b, PI).unwrap() > 0.1);
    }

    #[test]
    fn phase_condition_spectrum() {
        for theta in [0.4, -2.0, 3.0] {
            let ev = eigenvalues_in_window(&free(), 0.0, &phase_frame(theta), 7.0).unwrap();
            let expected: Vec<f64> = (-3..=3)
                .map(|k| theta + 2.0 * PI * k as f64)
                .filter(|x| x.abs() <= 7.0)
                .collect();
            assert_eq!(ev.len(), expected.len(), "theta = {theta}");
            for (e, x) in ev.iter().zip(&expected) {
                assert!((e.value - x).abs() < 1e-8);
                assert_eq!(e.multiplicity, 1);
            }
        }
    }

    #[test]
    fn empty_window() {
        let ev = eigenvalues_in_window(&free(), 0.0, &phase_frame(2.0), 1.0).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn edge_is_reported() {
        let err = eigenvalues_in_window(&free(), 0.0, &phase_frame(2.0), 2.0).unwrap_err();
        assert!(matches!(err, Error::WindowEdge { .. }));
    }

    #[test]
    fn dirichlet_rotation_system() {
        // σ = [[0,-1],[1,0]], B = c I, x_1(0) = x_1(1) = 0: λ = c + kπ
        let sigma = from_real_rows(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let c = 1.3;
        let sys = FirstOrderSystem::new(
            sigma,
            Potential::Trig {
                base: CMat::identity(2, 2).scale(c),
                terms: vec![TrigTerm {
                    matrix: CMat::zeros(2, 2),
                    s_freq: 0.0,
                    s_phase: 0.0,
                    t_freq: 0.0,
                    t_phase: 0.0,
                }],
            },
            &tol(),
        )
        .unwrap();
        let mut f = CMat::zeros(4, 2);
        f[(1, 0)] = c64(1.0, 0.0);
        f[(3, 1)] = c64(1.0, 0.0);
        let b = SubspaceFrame::new(4, f, &tol()).unwrap();
        let ev = eigenvalues_in_window(&sys, 0.0, &b, 7.0).unwrap();
        let expected: Vec<f64> = (-3..=3).map(|k| c + PI * k as f64).filter(|x| x.abs() <= 7.0).collect();
        assert_eq!(flatten(&ev).len(), expected.len());
        for (e, x) in ev.iter().zip(&expected) {
            assert!((e.value - x).abs() < 1e-8, "{} vs {}", e.value, x);
        }
    }
}
