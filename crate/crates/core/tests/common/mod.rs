//! Generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod props;

use std::f64::consts::PI;

use gsff_core::linalg::{self, c64, diag_real, eigvalsh, CMat};
use gsff_core::bvp1d::boundary_symplectic;
use gsff_core::maslov::{LagrangianPath, SymplecticFamily};
use gsff_core::sample;
use gsff_core::specflow::OperatorPath;
use gsff_core::sympcore::{SubspaceFrame, SymplecticSpace};
use gsff_core::tracking::{track_flow, TrackingOptions};
use gsff_core::Tolerances;
use rand::Rng;

pub fn tol() -> Tolerances {
    Tolerances::default()
}

/// Random Hermitian path `H0 + a cos(2πf s + φ) H1 + b sin(πs) H2`.
pub fn trig_path(seed: u64, n: usize) -> OperatorPath {
    let mut r = sample::rng(seed);
    let h0 = sample::hermitian(&mut r, n);
    let h1 = sample::hermitian(&mut r, n).scale(r.gen_range(0.5..2.0));
    let h2 = sample::hermitian(&mut r, n).scale(r.gen_range(0.5..2.0));
    let f = r.gen_range(0.5..1.5);
    let phi = r.gen_range(0.0..2.0 * PI);
    OperatorPath::hermitian(n, move |s| {
        &h0 + h1.scale((2.0 * PI * f * s + phi).cos()) + h2.scale((PI * s).sin())
    })
}

/// Number of eigenvalues below `-band`.
pub fn negative_count(a: &CMat, band: f64) -> i64 {
    eigvalsh(a).iter().filter(|&&v| v < -band).count() as i64
}

/// Spectral flow of a finite-dimensional Hermitian path from its endpoints.
pub fn endpoint_flow(path: &OperatorPath) -> i64 {
    negative_count(&path.eval(0.0), 1e-9) - negative_count(&path.eval(1.0), 1e-9)
}

/// Brute-force flow by following the sorted eigenvalues of a matrix path.
pub fn tracking_flow(path: &OperatorPath) -> i64 {
    let t = tol();
    track_flow(
        |s| path.spectrum_at(s, &t),
        |_, sp| t.zero_band(sp.iter().fold(0.0f64, |a, v| a.max(v.abs()))),
        TrackingOptions::default(),
    )
    .expect("tracking converges on smooth paths")
    .total
}

/// Kinds of engineered eigenvalue branches for endpoint-kernel paths.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Stays at a fixed nonzero value.
    Fixed,
    /// Starts at 0 and moves to a nonzero value.
    LeavesZero,
    /// Arrives at 0 from a nonzero value.
    ArrivesZero,
}

/// Engineered path `Q diag(d_i(s)) Q^H` with exact zeros at the endpoints.
pub struct EndpointPath {
    pub path: OperatorPath,
    /// Kernel dimensions at `s = 0` and `s = 1`.
    pub nullity: (usize, usize),
    /// `m^-(A_0) - m^-(A_1)` from the construction.
    pub flow: i64,
    /// Same quantity with the sides of the curve exchanged.
    pub flow_reversed: i64,
}

pub fn endpoint_path(seed: u64, n: usize) -> EndpointPath {
    let mut r = sample::rng(seed);
    let q = sample::unitary(&mut r, n);
    let mut branches = Vec::new();
    for _ in 0..n {
        let kind = match r.gen_range(0..3) {
            0 => Branch::Fixed,
            1 => Branch::LeavesZero,
            _ => Branch::ArrivesZero,
        };
        let sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        branches.push((kind, sign * r.gen_range(0.3..2.0)));
    }
    let (mut n0, mut n1, mut flow, mut flow_rev) = (0, 0, 0i64, 0i64);
    for &(kind, c) in &branches {
        let (v0, v1) = match kind {
            Branch::Fixed => (c, c),
            Branch::LeavesZero => (0.0, c),
            Branch::ArrivesZero => (c, 0.0),
        };
        n0 += (v0 == 0.0) as usize;
        n1 += (v1 == 0.0) as usize;
        flow += (v0 < 0.0) as i64 - (v1 < 0.0) as i64;
        flow_rev += (v0 > 0.0) as i64 - (v1 > 0.0) as i64;
    }
    let path = OperatorPath::hermitian(n, move |s| {
        let d: Vec<f64> = branches
            .iter()
            .map(|&(kind, c)| match kind {
                Branch::Fixed => c,
                Branch::LeavesZero => c * s,
                Branch::ArrivesZero => c * (1.0 - s),
            })
            .collect();
        &q * diag_real(&d) * q.adjoint()
    });
    EndpointPath {
        path,
        nullity: (n0, n1),
        flow,
        flow_reversed: flow_rev,
    }
}

/// Random invertible family `T_s = (I + 0.4 s E / |E|) S` with `S` fixed.
pub fn invertible_family(seed: u64, n: usize) -> impl Fn(f64) -> CMat + Send + Sync + 'static {
    let mut r = sample::rng(seed);
    let e = sample::gaussian(&mut r, n, n);
    let e = e.scale(0.4 / linalg::spectral_norm(&e).max(1e-12));
    let base = sample::gram(&mut r, n, 1.0);
    move |s| (CMat::identity(n, n) + e.scale(s)) * &base
}

/// Hermitian matrix with prescribed eigenvalues in a random basis.
pub fn with_eigenvalues(seed: u64, values: &[f64]) -> CMat {
    let mut r = sample::rng(seed);
    let q = sample::unitary(&mut r, values.len());
    &q * diag_real(values) * q.adjoint()
}

/// Loop `U0 exp(2πi s K)` with `K` having integer eigenvalues; returns the
/// path and the sum of those eigenvalues.
pub fn generator_loop(space: &SymplecticSpace, seed: u64, max_wind: i64) -> (LagrangianPath, i64) {
    let n = space.weights_plus().len();
    let mut r = sample::rng(seed);
    let u0 = sample::unitary(&mut r, n);
    let q = sample::unitary(&mut r, n);
    let ks: Vec<f64> = (0..n).map(|_| r.gen_range(-max_wind..=max_wind) as f64).collect();
    let k = (&q * diag_real(&ks) * q.adjoint()).scale(2.0 * PI);
    let total = ks.iter().sum::<f64>() as i64;
    (LagrangianPath::from_generators(space, u0, k), total)
}

/// Line `span{(1, e^{iθ})}` in the standard two-dimensional space.
pub fn phase_line(theta: f64) -> SubspaceFrame {
    SubspaceFrame::new(
        2,
        CMat::from_column_slice(2, 1, &[c64(1.0, 0.0), num_complex::Complex64::from_polar(1.0, theta)]),
        &tol(),
    )
    .unwrap()
}

/// Random skew-adjoint invertible `σ` of size `m`.
pub fn random_sigma(seed: u64, m: usize) -> CMat {
    let mut r = sample::rng(seed);
    let q = sample::unitary(&mut r, m);
    let d: Vec<_> = (0..m)
        .map(|_| {
            let sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
            c64(0.0, sign * r.gen_range(0.7..1.4))
        })
        .collect();
    let s = &q * linalg::diag_complex(&d) * q.adjoint();
    (&s - s.adjoint()).scale(0.5)
}

/// Standard space for even seeds, boundary space of a random `σ` otherwise.
pub fn mixed_space(seed: u64, n: usize) -> SymplecticSpace {
    if seed % 2 == 0 {
        SymplecticSpace::standard(n)
    } else {
        boundary_symplectic(&random_sigma(seed, n), &tol()).unwrap()
    }
}

/// Hermitian `K` with eigenvalues of one sign and modulus in `[1, 3π]`.
pub fn definite(seed: u64, n: usize) -> CMat {
    let mut r = sample::rng(seed);
    let sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
    let d: Vec<f64> = (0..n).map(|_| sign * r.gen_range(1.0..3.0 * PI)).collect();
    with_eigenvalues(seed ^ 0xd1, &d)
}

/// Generator path with definite `K` (all crossings regular) against a
/// constant Lagrangian; `swap` exchanges the roles.
pub fn regular_pair(seed: u64, n: usize, swap: bool) -> (SymplecticFamily, LagrangianPath, LagrangianPath) {
    let sp = mixed_space(seed, n);
    let mut r = sample::rng(seed);
    let u0 = sample::unitary(&mut r, n);
    let moving = LagrangianPath::from_generators(&sp, u0, definite(seed, n));
    let fixed = LagrangianPath::constant(sample::lagrangian(&mut r, &sp));
    let fam = SymplecticFamily::constant(sp);
    if swap {
        (fam, fixed, moving)
    } else {
        (fam, moving, fixed)
    }
}

/// Point of the boundary of `[0,1]^2` at parameter `u`, counter-clockwise
/// from the origin.
pub fn square_point(u: f64) -> (f64, f64) {
    let w = 4.0 * u;
    match w {
        w if w <= 1.0 => (w, 0.0),
        w if w <= 2.0 => (1.0, w - 1.0),
        w if w <= 3.0 => (3.0 - w, 1.0),
        w => (0.0, 4.0 - w),
    }
}

/// Finite-difference oracle for `σ = [[0,-1],[1,0]]` with diagonal potential
/// `diag(p(t), q(t))` and `u(0) = u(1) = 0` on the first component.
///
/// The staggered discretization (first component on integer nodes, second
/// on half nodes) is a real symmetric tridiagonal matrix; its eigenvalues in
/// `[lo, hi]` are found by Sturm counts and bisection.
pub struct StaggeredDirichlet {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl StaggeredDirichlet {
    pub fn new(n: usize, p: impl Fn(f64) -> f64, q: impl Fn(f64) -> f64) -> Self {
        let h = 1.0 / n as f64;
        // ordering v_{1/2}, u_1, v_{3/2}, u_2, ..., u_{n-1}, v_{n-1/2}
        let mut diag = Vec::with_capacity(2 * n - 1);
        let mut off = Vec::with_capacity(2 * n - 2);
        for j in 0..n {
            diag.push(q((j as f64 + 0.5) * h));
            if j + 1 < n {
                // v_{j+1/2} -> u_{j+1}: +1/h; u_{j+1} -> v_{j+3/2}: -1/h
                off.push(1.0 / h);
                diag.push(p((j + 1) as f64 * h));
                off.push(-1.0 / h);
            }
        }
        Self { diag, off }
    }

    /// Number of eigenvalues strictly below `x`.
    pub fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0f64;
        for i in 0..self.diag.len() {
            let b2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            d = self.diag[i] - x - if i == 0 { 0.0 } else { b2 / d };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn eigenvalues_in(&self, lo: f64, hi: f64) -> Vec<f64> {
        let c_lo = self.count_below(lo);
        let c_hi = self.count_below(hi);
        (c_lo..c_hi)
            .map(|k| {
                let (mut a, mut b) = (lo, hi);
                while b - a > 1e-13 * (1.0 + a.abs().max(b.abs())) {
                    let mid = 0.5 * (a + b);
                    if self.count_below(mid) > k {
                        b = mid;
                    } else {
                        a = mid;
                    }
                }
                0.5 * (a + b)
            })
            .collect()
    }
}

/// Richardson-extrapolated staggered eigenvalues (`n` and `2n` grids).
pub fn staggered_eigenvalues(
    n: usize,
    p: impl Fn(f64) -> f64 + Copy,
    q: impl Fn(f64) -> f64 + Copy,
    lo: f64,
    hi: f64,
) -> Vec<f64> {
    // widen slightly so both grids see the same eigenvalues
    let a = StaggeredDirichlet::new(n, p, q).eigenvalues_in(lo - 0.05, hi + 0.05);
    let b = StaggeredDirichlet::new(2 * n, p, q).eigenvalues_in(lo - 0.05, hi + 0.05);
    assert_eq!(a.len(), b.len(), "grids disagree on the eigenvalue count");
    a.iter()
        .zip(&b)
        .map(|(x, y)| (4.0 * y - x) / 3.0)
        .filter(|v| *v >= lo && *v <= hi)
        .collect()
}
