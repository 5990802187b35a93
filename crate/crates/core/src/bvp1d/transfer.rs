//! Transfer matrices of `σ x' + B x = μ x` by classical RK4.
//!
//! Writing the equation as `x' = (μ S - C(t)) x` with `S = σ^{-1}` and
//! `C = σ^{-1} B`, a [`Slice`] fixes `s` and the step count and caches the
//! coefficient nodes, so that repeated solves for different `μ` only pay
//! for the integration itself. For `t`-independent coefficients every RK4
//! step applies the same matrix and the product is formed by repeated
//! squaring.

use num_complex::Complex64;

use std::f64::consts::PI;

use super::{FirstOrderSystem, Potential};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::sympcore::SubspaceFrame;
use crate::tol::Tolerances;

/// Step-halving control for [`transfer_matrix_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub initial_step: f64,
    /// Accept when successive results differ by less than this (relative to
    /// `max(1, |T|)`).
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            initial_step: 1e-3,
            tol: 1e-10,
            max_steps: 1 << 22,
        }
    }
}

enum Coefficients {
    Constant(Vec<Complex64>),
    /// `C(j h / 2)` for `j = 0..=2N`, row-major blocks of `m * m`.
    Nodes(Vec<Complex64>),
}

/// RK4 propagator for one value of `s` and a fixed step count.
pub struct Slice {
    m: usize,
    steps: usize,
    s_inv: Vec<Complex64>,
    coeffs: Coefficients,
}

fn flat(a: &CMat) -> Vec<Complex64> {
    let m = a.nrows();
    let mut v = Vec::with_capacity(m * a.ncols());
    for i in 0..m {
        for j in 0..a.ncols() {
            v.push(a[(i, j)]);
        }
    }
    v
}

#[inline]
fn matmul(m: usize, a: &[Complex64], b: &[Complex64], out: &mut [Complex64]) {
    for i in 0..m {
        for j in 0..m {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..m {
                acc += a[i * m + k] * b[k * m + j];
            }
            out[i * m + j] = acc;
        }
    }
}

fn mat_pow(a: &CMat, mut n: usize) -> CMat {
    let k = a.nrows();
    let mut result = CMat::identity(k, k);
    let mut base = a.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

/// `σ^{-1} B(s, j / 2N)` for `j = 0..=2N`, flattened.
fn coefficient_nodes(system: &FirstOrderSystem, s: f64, steps: usize) -> Vec<Complex64> {
    let m = system.m();
    let s_inv = system.sigma_inv();
    let count = 2 * steps + 1;
    let mut nodes = Vec::with_capacity(count * m * m);
    if let Potential::Trig { base, terms } = system.potential() {
        // separable in t: combine precomputed σ^{-1} M_k with scalar weights
        let shifted = base + CMat::identity(m, m).scale(system.shift());
        let c0 = flat(&(s_inv * shifted));
        let parts: Vec<(Vec<Complex64>, f64, f64, f64)> = terms
            .iter()
            .map(|t| {
                let ws = (PI * t.s_freq * s + t.s_phase).cos();
                (flat(&(s_inv * &t.matrix)), ws, t.t_freq, t.t_phase)
            })
            .collect();
        for j in 0..count {
            let t = j as f64 / (count - 1) as f64;
            let start = nodes.len();
            nodes.extend_from_slice(&c0);
            for (c, ws, tf, tp) in &parts {
                let w = ws * (2.0 * PI * tf * t + tp).cos();
                for (n, &x) in nodes[start..].iter_mut().zip(c) {
                    *n += x * w;
                }
            }
        }
    } else {
        for j in 0..count {
            let t = j as f64 / (count - 1) as f64;
            nodes.extend(flat(&(s_inv * system.b(s, t))));
        }
    }
    nodes
}

type C2 = [Complex64; 4];

#[inline(always)]
fn mul2(a: &C2, b: &C2) -> C2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

#[inline(always)]
fn gen2(s_inv: &C2, mu: f64, c: &[Complex64]) -> C2 {
    [
        s_inv[0] * mu - c[0],
        s_inv[1] * mu - c[1],
        s_inv[2] * mu - c[2],
        s_inv[3] * mu - c[3],
    ]
}

/// RK4 with nodes for `m = 2`, unrolled on fixed-size arrays.
fn rk4_two(s_inv: &[Complex64], nodes: &[Complex64], steps: usize, mu: f64) -> CMat {
    let h = 1.0 / steps as f64;
    let si: C2 = [s_inv[0], s_inv[1], s_inv[2], s_inv[3]];
    let one = c64(1.0, 0.0);
    let zero = c64(0.0, 0.0);
    let mut x: C2 = [one, zero, zero, one];
    let mut g0 = gen2(&si, mu, &nodes[0..4]);
    for i in 0..steps {
        let j = 8 * i;
        let g1 = gen2(&si, mu, &nodes[j + 4..j + 8]);
        let g2 = gen2(&si, mu, &nodes[j + 8..j + 12]);
        let k1 = mul2(&g0, &x);
        let t1: C2 = std::array::from_fn(|q| x[q] + k1[q] * (0.5 * h));
        let k2 = mul2(&g1, &t1);
        let t2: C2 = std::array::from_fn(|q| x[q] + k2[q] * (0.5 * h));
        let k3 = mul2(&g1, &t2);
        let t3: C2 = std::array::from_fn(|q| x[q] + k3[q] * h);
        let k4 = mul2(&g2, &t3);
        for q in 0..4 {
            x[q] += (k1[q] + (k2[q] + k3[q]) * 2.0 + k4[q]) * (h / 6.0);
        }
        g0 = g2;
    }
    CMat::from_row_slice(2, 2, &x)
}

impl Slice {
    pub fn new(system: &FirstOrderSystem, s: f64, steps: usize) -> Self {
        let m = system.m();
        let s_inv = system.sigma_inv();
        let coeffs = if system.is_t_dependent() {
            Coefficients::Nodes(coefficient_nodes(system, s, steps))
        } else {
            Coefficients::Constant(flat(&(s_inv * system.b(s, 0.0))))
        };
        Self {
            m,
            steps,
            s_inv: flat(s_inv),
            coeffs,
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    fn generator(&self, mu: f64, c: &[Complex64], out: &mut [Complex64]) {
        for ((o, &si), &ci) in out.iter_mut().zip(&self.s_inv).zip(c) {
            *o = si * mu - ci;
        }
    }

    /// `T(μ)` with `x(1) = T x(0)`.
    pub fn transfer(&self, mu: f64) -> CMat {
        let m = self.m;
        let mm = m * m;
        let h = 1.0 / self.steps as f64;
        match &self.coeffs {
            Coefficients::Constant(c) => {
                let mut g = vec![c64(0.0, 0.0); mm];
                self.generator(mu, c, &mut g);
                let hm = CMat::from_row_slice(m, m, &g).scale(h);
                let id = CMat::identity(m, m);
                // I + hM + (hM)^2/2 + (hM)^3/6 + (hM)^4/24 in Horner form
                let mut p = &id + hm.scale(0.25);
                p = &id + (&hm * &p).scale(1.0 / 3.0);
                p = &id + (&hm * &p).scale(0.5);
                p = &id + &hm * &p;
                mat_pow(&p, self.steps)
            }
            Coefficients::Nodes(nodes) if m == 2 => rk4_two(&self.s_inv, nodes, self.steps, mu),
            Coefficients::Nodes(nodes) => {
                let zero = c64(0.0, 0.0);
                let mut x = vec![zero; mm];
                for i in 0..m {
                    x[i * m + i] = c64(1.0, 0.0);
                }
                let mut g0 = vec![zero; mm];
                let mut g1 = vec![zero; mm];
                let mut g2 = vec![zero; mm];
                let mut k1 = vec![zero; mm];
                let mut k2 = vec![zero; mm];
                let mut k3 = vec![zero; mm];
                let mut k4 = vec![zero; mm];
                let mut tmp = vec![zero; mm];
                self.generator(mu, &nodes[..mm], &mut g0);
                for i in 0..self.steps {
                    let j = 2 * i;
                    self.generator(mu, &nodes[(j + 1) * mm..(j + 2) * mm], &mut g1);
                    self.generator(mu, &nodes[(j + 2) * mm..(j + 3) * mm], &mut g2);
                    matmul(m, &g0, &x, &mut k1);
                    for q in 0..mm {
                        tmp[q] = x[q] + k1[q] * (0.5 * h);
                    }
                    matmul(m, &g1, &tmp, &mut k2);
                    for q in 0..mm {
                        tmp[q] = x[q] + k2[q] * (0.5 * h);
                    }
                    matmul(m, &g1, &tmp, &mut k3);
                    for q in 0..mm {
                        tmp[q] = x[q] + k3[q] * h;
                    }
                    matmul(m, &g2, &tmp, &mut k4);
                    for q in 0..mm {
                        x[q] += (k1[q] + (k2[q] + k3[q]) * 2.0 + k4[q]) * (h / 6.0);
                    }
                    std::mem::swap(&mut g0, &mut g2);
                }
                CMat::from_row_slice(m, m, &x)
            }
        }
    }
}

fn relative_change(a: &CMat, b: &CMat) -> f64 {
    linalg::max_abs(&(a - b)) / linalg::max_abs(b).max(1.0)
}

/// Transfer matrix with the default step control.
pub fn transfer_matrix(system: &FirstOrderSystem, s: f64, mu: f64) -> Result<CMat> {
    transfer_matrix_with(system, s, mu, &StepControl::default())
}

/// Transfer matrix, halving the step until two successive results agree.
pub fn transfer_matrix_with(system: &FirstOrderSystem, s: f64, mu: f64, ctl: &StepControl) -> Result<CMat> {
    let mut n = (1.0 / ctl.initial_step).ceil().max(1.0) as usize;
    let mut prev = Slice::new(system, s, n).transfer(mu);
    loop {
        n *= 2;
        if n > ctl.max_steps {
            return Err(Error::Integrator(format!(
                "step control did not converge at s = {s}, mu = {mu}"
            )));
        }
        let next = Slice::new(system, s, n).transfer(mu);
        if relative_change(&prev, &next) < ctl.tol {
            return Ok(next);
        }
        prev = next;
    }
}

/// Smallest step count (initial step, then halvings) whose result changes by
/// less than the step-control tolerance when the step is halved, checked at
/// `s ∈ {0, 1/2, 1}` and `μ ∈ {-mu_max, 0, mu_max}`; used for every solve of
/// a scenario.
pub fn calibrate_steps(system: &FirstOrderSystem, mu_max: f64, ctl: &StepControl) -> Result<usize> {
    let mut n = (1.0 / ctl.initial_step).ceil().max(1.0) as usize;
    loop {
        if 2 * n > ctl.max_steps {
            return Err(Error::Integrator(format!(
                "step calibration did not converge for |mu| <= {mu_max}"
            )));
        }
        let mut ok = true;
        'outer: for s in [0.0, 0.5, 1.0] {
            let coarse = Slice::new(system, s, n);
            let fine = Slice::new(system, s, 2 * n);
            for mu in [-mu_max, 0.0, mu_max] {
                if relative_change(&coarse.transfer(mu), &fine.transfer(mu)) >= ctl.tol {
                    ok = false;
                    break 'outer;
                }
            }
        }
        if ok {
            return Ok(n);
        }
        n *= 2;
    }
}

/// Graph `{(v, T v)}` of the transfer matrix: boundary values of the
/// solutions of `A_s x = μ x`.
pub fn cauchy_data(system: &FirstOrderSystem, s: f64, mu: f64) -> Result<SubspaceFrame> {
    let t = transfer_matrix(system, s, mu)?;
    Ok(graph_frame(&t))
}

pub(crate) fn graph_frame(t: &CMat) -> SubspaceFrame {
    let m = t.nrows();
    let f = linalg::vstack(&CMat::identity(m, m), t);
    SubspaceFrame::new(2 * m, f, &Tolerances::default()).expect("graphs have full rank")
}

/// `max |T^H σ T - σ|`.
pub fn symplectic_residual(sigma: &CMat, t: &CMat) -> f64 {
    linalg::max_abs(&(t.adjoint() * sigma * t - sigma))
}

/// Barycentric Chebyshev interpolant of `μ -> T(μ)` on an interval.
pub struct ChebyshevTransfer {
    center: f64,
    half: f64,
    values: Vec<CMat>,
}

impl ChebyshevTransfer {
    /// Starts from 33 Chebyshev points and doubles until the interpolant
    /// matches direct solves at four points between nodes to `tol`
    /// (relative).
    pub fn build(slice: &Slice, lo: f64, hi: f64, tol: f64) -> Result<Self> {
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let node = |x: f64| center + half * x.cos();
        let mut n = 32usize;
        let mut values: Vec<CMat> = (0..=n)
            .map(|j| slice.transfer(node(PI * j as f64 / n as f64)))
            .collect();
        loop {
            let current = Self {
                center,
                half,
                values,
            };
            let err = [n / 8, 3 * n / 8, 5 * n / 8, 7 * n / 8]
                .iter()
                .map(|&j| {
                    let mu = node(PI * (j as f64 + 0.5) / n as f64);
                    relative_change(&current.eval(mu), &slice.transfer(mu))
                })
                .fold(0.0f64, f64::max);
            if err < tol {
                return Ok(current);
            }
            if n >= 512 {
                return Err(Error::Integrator(format!(
                    "Chebyshev interpolation of the transfer matrix did not converge on [{lo}, {hi}]"
                )));
            }
            let n2 = 2 * n;
            values = (0..=n2)
                .map(|j| {
                    if j % 2 == 0 {
                        current.values[j / 2].clone()
                    } else {
                        slice.transfer(node(PI * j as f64 / n2 as f64))
                    }
                })
                .collect();
            n = n2;
        }
    }

    pub fn lo(&self) -> f64 {
        self.center - self.half
    }

    pub fn hi(&self) -> f64 {
        self.center + self.half
    }

    pub fn eval(&self, mu: f64) -> CMat {
        let n = self.values.len() - 1;
        let x = (mu - self.center) / self.half;
        let m = self.values[0].nrows();
        let mut num = CMat::zeros(m, m);
        let mut den = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            let xj = (std::f64::consts::PI * j as f64 / n as f64).cos();
            let d = x - xj;
            if d.abs() < 1e-15 {
                return v.clone();
            }
            let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == n {
                w *= 0.5;
            }
            let c = w / d;
            num.zip_apply(v, |a, b| *a += b * c);
            den += c;
        }
        num.unscale(den)
    }
}
