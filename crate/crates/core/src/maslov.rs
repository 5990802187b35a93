//! Maslov index of a pair of Lagrangian paths.
//!
//! Three independent engines:
//! - [`maslov_index`]: minus the spectral flow through 1 of the unitary path
//!   `W_s = U_s V_s^{-1}` built from the generators of `λ_s` and `μ_s`;
//! - [`maslov_via_crossings`]: sum of crossing-form signatures;
//! - [`winding_oracle`]: winding number of `det(U_s^{-1} V_0)` for loops
//!   against a fixed Lagrangian.

use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, hstack, CMat};
use crate::sample;
use crate::specflow::{sf_partition_with, FlowComputation, PartitionOptions, SpectrumSource};
use crate::sympcore::{intersection, intersection_dim_by_rank, SubspaceFrame, SymplecticSpace};
use crate::tol::Tolerances;

pub type MatrixFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;
pub type FrameFn = Arc<dyn Fn(f64) -> SubspaceFrame + Send + Sync>;

/// Continuous family of symplectic structures `s -> (G_s, J_s)`.
#[derive(Clone)]
pub struct SymplecticFamily {
    dim: usize,
    gram_of: Option<MatrixFn>,
    j_of: MatrixFn,
    constant: Option<SymplecticSpace>,
}

impl SymplecticFamily {
    pub fn constant(space: SymplecticSpace) -> Self {
        let j = space.j().clone();
        let g = space.gram().clone();
        Self {
            dim: space.dim(),
            gram_of: Some(Arc::new(move |_| g.clone())),
            j_of: Arc::new(move |_| j.clone()),
            constant: Some(space),
        }
    }

    pub fn new(
        dim: usize,
        gram_of: impl Fn(f64) -> CMat + Send + Sync + 'static,
        j_of: impl Fn(f64) -> CMat + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            gram_of: Some(Arc::new(gram_of)),
            j_of: Arc::new(j_of),
            constant: None,
        }
    }

    /// Family with a fixed form `ω(x, y) = y^H Ω x` and varying inner
    /// products, so that `J_s = G_s^{-1} Ω`.
    pub fn from_form(
        dim: usize,
        gram_of: impl Fn(f64) -> CMat + Send + Sync + 'static,
        omega: CMat,
    ) -> Self {
        let gram_of: MatrixFn = Arc::new(gram_of);
        let g2 = gram_of.clone();
        let j_of = move |s: f64| {
            linalg::solve(&g2(s), &omega)
                .unwrap_or_else(|_| CMat::from_element(omega.nrows(), omega.ncols(), linalg::c64(f64::NAN, 0.0)))
        };
        Self {
            dim,
            gram_of: Some(gram_of),
            j_of: Arc::new(j_of),
            constant: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn space_at(&self, s: f64, tol: &Tolerances) -> Result<SymplecticSpace> {
        if let Some(sp) = &self.constant {
            return Ok(sp.clone());
        }
        let g = self
            .gram_of
            .as_ref()
            .map(|g| g(s))
            .unwrap_or_else(|| CMat::identity(self.dim, self.dim));
        SymplecticSpace::new(g, (self.j_of)(s), tol)
    }

    pub fn is_constant(&self) -> bool {
        self.constant.is_some()
    }
}

/// A path `s -> λ_s` of subspaces.
#[derive(Clone)]
pub struct LagrangianPath {
    ambient_dim: usize,
    eval: FrameFn,
}

impl LagrangianPath {
    pub fn new(ambient_dim: usize, eval: impl Fn(f64) -> SubspaceFrame + Send + Sync + 'static) -> Self {
        Self {
            ambient_dim,
            eval: Arc::new(eval),
        }
    }

    pub fn constant(frame: SubspaceFrame) -> Self {
        Self::new(frame.ambient_dim(), move |_| frame.clone())
    }

    /// Graphs of the generators `U0 exp(i s K)` over `space`; `u0` unitary,
    /// `k` Hermitian, both acting on the normalized generator.
    pub fn from_generators(space: &SymplecticSpace, u0: CMat, k: CMat) -> Self {
        let space = space.clone();
        let tol = Tolerances::default();
        Self::new(space.dim(), move |s| {
            let w = &u0 * linalg::expi_hermitian(&k.scale(s));
            let gen = sample::generator_from_unitary(&space, &w);
            space
                .unitary_to_lagrangian(&gen, &tol)
                .expect("unitary generators give Lagrangians")
        })
    }

    /// `span{(1, e^{iθ(s)})}` in the one-dimensional standard space.
    pub fn phase(theta: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(2, move |s| {
            let f = CMat::from_column_slice(2, 1, &[linalg::c64(1.0, 0.0), Complex64::from_polar(1.0, theta(s))]);
            SubspaceFrame::new(2, f, &Tolerances::default()).expect("nonzero frame")
        })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn eval(&self, s: f64) -> SubspaceFrame {
        (self.eval)(s)
    }

    pub fn restrict(&self, a: f64, b: f64) -> Self {
        let f = self.eval.clone();
        Self {
            ambient_dim: self.ambient_dim,
            eval: Arc::new(move |s| f(a + (b - a) * s)),
        }
    }
}

impl std::fmt::Debug for LagrangianPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LagrangianPath")
            .field("ambient_dim", &self.ambient_dim())
            .finish_non_exhaustive()
    }
}

struct RatioSource<'a> {
    lambda: &'a LagrangianPath,
    mu: &'a LagrangianPath,
    family: &'a SymplecticFamily,
    tol: Tolerances,
    check: bool,
}

impl SpectrumSource for RatioSource<'_> {
    fn spectrum(&self, s: f64) -> Result<Vec<f64>> {
        let space = self.family.space_at(s, &self.tol)?;
        let l = self.lambda.eval(s);
        let m = self.mu.eval(s);
        if self.check {
            for (name, f) in [("λ", &l), ("μ", &m)] {
                if !space.is_lagrangian(f, &self.tol)? {
                    return Err(Error::NotLagrangian(format!("{name} at s = {s}")));
                }
            }
        }
        let w = space.generator_ratio(&l, &m)?;
        linalg::unitary_phases(&w)
    }

    fn radius_cap(&self) -> f64 {
        std::f64::consts::PI
    }

    fn zero_band(&self, _s: f64, _spectrum: &[f64]) -> f64 {
        self.tol.zero_band(1.0)
    }
}

/// Eigenvalue arguments of `W_s = U_s V_s^{-1}` at `s`.
pub fn generator_ratio_phases(
    lambda: &LagrangianPath,
    mu: &LagrangianPath,
    family: &SymplecticFamily,
    s: f64,
    tol: &Tolerances,
) -> Result<Vec<f64>> {
    RatioSource {
        lambda,
        mu,
        family,
        tol: *tol,
        check: true,
    }
    .spectrum(s)
}

#[derive(Debug, Clone, Copy)]
pub struct MaslovOptions {
    pub sample_hint: usize,
    /// Verify the Lagrangian property at every sample.
    pub check_lagrangian: bool,
}

impl Default for MaslovOptions {
    fn default() -> Self {
        Self {
            sample_hint: 64,
            check_lagrangian: true,
        }
    }
}

/// Maslov index by the partition algorithm; the returned record describes
/// the spectral flow of `W_s` (so its total is minus the index).
pub fn maslov_index(
    lambda: &LagrangianPath,
    mu: &LagrangianPath,
    family: &SymplecticFamily,
    tol: &Tolerances,
) -> Result<(i64, FlowComputation)> {
    maslov_index_with(lambda, mu, family, MaslovOptions::default(), tol)
}

pub fn maslov_index_with(
    lambda: &LagrangianPath,
    mu: &LagrangianPath,
    family: &SymplecticFamily,
    opts: MaslovOptions,
    tol: &Tolerances,
) -> Result<(i64, FlowComputation)> {
    for p in [lambda, mu] {
        if p.ambient_dim() != family.dim() {
            return Err(Error::DimensionMismatch {
                expected: family.dim(),
                found: p.ambient_dim(),
            });
        }
    }
    let src = RatioSource {
        lambda,
        mu,
        family,
        tol: *tol,
        check: opts.check_lagrangian,
    };
    let fc = sf_partition_with(
        &src,
        PartitionOptions {
            sample_hint: opts.sample_hint,
            ..Default::default()
        },
    )?;
    Ok((-fc.total, fc))
}

/// Lagrangian complement of `λ` in `space`: the graph of `e^{iα}` times its
/// generator. Any `α` not in `2πZ` gives a transversal Lagrangian.
pub fn lagrangian_complement(space: &SymplecticSpace, lambda: &SubspaceFrame, alpha: f64) -> Result<SubspaceFrame> {
    let mut gen = space.generator_unchecked(lambda)?;
    gen.u *= Complex64::from_polar(1.0, alpha);
    space.unitary_to_lagrangian(&gen, &Tolerances::default())
}

/// `ω_t(x, w)` for every column `x` of `xs` against `w`, stacked as a
/// matrix over the columns of both.
fn omega_block(space: &SymplecticSpace, xs: &CMat, ws: &CMat) -> CMat {
    space.omega(xs, ws).transpose()
}

/// `Q(x_i, x_j) = d/ds ω_t(x_i, w_j(s))` where `x_j + w_j(s) ∈ λ_s`,
/// `w_j(s) ∈ W`; `xs` must lie in `λ_t`.
pub fn crossing_form_on(
    path: &LagrangianPath,
    t: f64,
    complement: &SubspaceFrame,
    xs: &CMat,
    family: &SymplecticFamily,
    tol: &Tolerances,
) -> Result<CMat> {
    let space = family.space_at(t, tol)?;
    let n = space.dim();
    let wq = complement.orthonormal();
    let lt = path.eval(t);
    let cut = tol.rank_cutoff(1.0).max(1e-6);
    if linalg::smallest_singular_value(&hstack(&lt.orthonormal(), &wq)) < cut {
        return Err(Error::InvalidInput(format!(
            "complement is not transversal to the path at t = {t}"
        )));
    }
    let w_at = |s: f64| -> Result<CMat> {
        let f = path.eval(s).orthonormal();
        let sys = hstack(&f, &(-&wq));
        if sys.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: sys.ncols() });
        }
        let coeffs = linalg::solve(&sys, xs)?;
        let b = coeffs.rows(f.ncols(), wq.ncols()).into_owned();
        Ok(&wq * b)
    };
    let h = 1e-5;
    let deriv = |h: f64| -> Result<CMat> {
        let (s0, s1, scale) = if t - h < 0.0 {
            (t, t + h, 1.0 / h)
        } else if t + h > 1.0 {
            (t - h, t, 1.0 / h)
        } else {
            (t - h, t + h, 0.5 / h)
        };
        let d = omega_block(&space, xs, &w_at(s1)?) - omega_block(&space, xs, &w_at(s0)?);
        Ok(d.scale(scale))
    };
    let one_sided = t - h < 0.0 || t + h > 1.0;
    let d1 = deriv(h)?;
    let d2 = deriv(0.5 * h)?;
    // Richardson: error is O(h) one-sided and O(h^2) central
    let q = if one_sided {
        d2.scale(2.0) - d1
    } else {
        (d2.scale(4.0) - d1).scale(1.0 / 3.0)
    };
    Ok(q)
}

/// Crossing form of `λ` at `t` on an orthonormal basis of `λ_t`.
pub fn crossing_form_q(
    path: &LagrangianPath,
    t: f64,
    complement: &SubspaceFrame,
    family: &SymplecticFamily,
    tol: &Tolerances,
) -> Result<CMat> {
    let xs = path.eval(t).orthonormal();
    crossing_form_on(path, t, complement, &xs, family, tol)
}

/// Crossing data for a pair at a crossing time.
#[derive(Debug, Clone, Serialize)]
pub struct CrossingRecordMas {
    pub t: f64,
    pub intersection_frame: SubspaceFrame,
    #[serde(with = "linalg::cmat_json")]
    pub q_lambda: CMat,
    #[serde(with = "linalg::cmat_json")]
    pub q_mu: CMat,
    #[serde(with = "linalg::cmat_json")]
    pub gamma: CMat,
    /// `(m^+, m^0, m^-)` of `gamma`.
    pub signature: (usize, usize, usize),
}

/// `Γ = Q(λ, t) - Q(μ, t)` restricted to `λ_t ∩ μ_t`.
pub fn crossing_form_gamma(
    lambda: &LagrangianPath,
    mu: &LagrangianPath,
    t: f64,
    family: &SymplecticFamily,
    tol: &Tolerances,
) -> Result<CrossingRecordMas> {
    let space = family.space_at(t, tol)?;
    let lt = lambda.eval(t);
    let mt = mu.eval(t);
    let inter = intersection(&lt, &mt, tol);
    if inter.dim() == 0 {
        return Err(Error::NotACrossing { t });
    }
    let xs = inter.orthonormal();
    let wl = lagrangian_complement(&space, &lt, std::f64::consts::PI)?;
    let wm = lagrangian_complement(&space, &mt, std::f64::consts::PI)?;
    let ql = crossing_form_on(lambda, t, &wl, &xs, family, tol)?;
    let qm = crossing_form_on(mu, t, &wm, &xs, family, tol)?;
    let gamma = linalg::hermitian_part(&(&ql - &qm));
    let ev = linalg::eigvalsh(&gamma);
    let thr = 1e-6 * linalg::max_abs(&gamma).max(1.0);
    let mp = ev.iter().filter(|&&v| v > thr).count();
    let mm = ev.iter().filter(|&&v| v < -thr).count();
    Ok(CrossingRecordMas {
        t,
        intersection_frame: inter,
        q_lambda: ql,
        q_mu: qm,
        gamma,
        signature: (mp, ev.len() - mp - mm, mm),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingSum {
    pub total: i64,
    pub crossings: Vec<CrossingRecordMas>,
}

fn stacked_min_sv(lambda: &LagrangianPath, mu: &LagrangianPath, s: f64) -> f64 {
    let a = lambda.eval(s).orthonormal();
    let b = mu.eval(s).orthonormal();
    linalg::smallest_singular_value(&hstack(&a, &b))
}

/// Maslov index as a sum of crossing-form signatures; crossings are located
/// on a grid of 512 and refined to `1e-10`.
pub fn maslov_via_crossings(
    lambda: &LagrangianPath,
    mu: &LagrangianPath,
    family: &SymplecticFamily,
    tol: &Tolerances,
) -> Result<CrossingSum> {
    let n = 512usize;
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let g: Vec<f64> = grid.iter().map(|&s| stacked_min_sv(lambda, mu, s)).collect();
    let mut times = Vec::new();
    for s in [0.0, 1.0] {
        if intersection_dim_by_rank(&lambda.eval(s), &mu.eval(s), tol) > 0 {
            times.push(s);
        }
    }
    for i in 0..=n {
        let left = if i > 0 { g[i - 1] } else { f64::INFINITY };
        let right = if i < n { g[i + 1] } else { f64::INFINITY };
        if g[i] > left || g[i] > right || g[i] > 0.5 {
            continue;
        }
        let (mut lo, mut hi) = (grid[i.saturating_sub(1)], grid[(i + 1).min(n)]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - phi * (hi - lo);
        let mut x2 = lo + phi * (hi - lo);
        let mut f1 = stacked_min_sv(lambda, mu, x1);
        let mut f2 = stacked_min_sv(lambda, mu, x2);
        while hi - lo > 1e-10 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = stacked_min_sv(lambda, mu, x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = stacked_min_sv(lambda, mu, x2);
            }
        }
        let t = 0.5 * (lo + hi);
        if stacked_min_sv(lambda, mu, t) < 1e-7 && t > 1e-8 && t < 1.0 - 1e-8 {
            times.push(t);
        }
    }
    times.sort_by(|a, b| a.total_cmp(b));
    times.dedup_by(|b, a| (*b - *a).abs() < 1e-8);
    let mut total = 0i64;
    let mut crossings = Vec::new();
    for t in times {
        let rec = crossing_form_gamma(lambda, mu, t, family, tol)?;
        let (mp, m0, mm) = rec.signature;
        if m0 > 0 {
            return Err(Error::NonRegularCrossing { t });
        }
        total += if t == 0.0 {
            mp as i64
        } else if t == 1.0 {
            -(mm as i64)
        } else {
            mp as i64 - mm as i64
        };
        crossings.push(rec);
    }
    Ok(CrossingSum { total, crossings })
}

/// One sample of the determinant trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct WindingSample {
    pub s: f64,
    pub re: f64,
    pub im: f64,
    pub accumulated_arg: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct WindingResult {
    pub winding: i64,
    pub total_arg: f64,
    pub trace: Vec<WindingSample>,
}

fn winding_trace(
    space: &SymplecticSpace,
    lambda: &LagrangianPath,
    v0: &CMat,
    n: usize,
) -> Result<(f64, Vec<WindingSample>)> {
    let mut trace = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    let mut prev: Option<Complex64> = None;
    for i in 0..=n {
        let s = i as f64 / n as f64;
        let u = space.generator_unchecked(&lambda.eval(s))?.normalized();
        let d = (u.adjoint() * v0).determinant();
        if let Some(p) = prev {
            acc += (d / p).arg();
        }
        prev = Some(d);
        trace.push(WindingSample {
            s,
            re: d.re,
            im: d.im,
            accumulated_arg: acc,
        });
    }
    Ok((acc, trace))
}

/// Winding number of `s -> det(U_s^{-1} V_0)` for a loop `λ` and a fixed `μ`.
pub fn winding_oracle(
    lambda: &LagrangianPath,
    mu: &SubspaceFrame,
    space: &SymplecticSpace,
    tol: &Tolerances,
) -> Result<WindingResult> {
    let gap = crate::sympcore::gap_distance(&lambda.eval(0.0), &lambda.eval(1.0));
    if gap > 1e-8 {
        return Err(Error::NotALoop { gap });
    }
    let v0 = space.lagrangian_to_unitary(mu, tol)?.normalized();
    let mut n = 64;
    let (mut total, _) = winding_trace(space, lambda, &v0, n)?;
    let trace = loop {
        n *= 2;
        let (t2, tr2) = winding_trace(space, lambda, &v0, n)?;
        let settled = (t2 - total).abs() < 1e-6;
        total = t2;
        if settled {
            break tr2;
        }
        if n > 1 << 16 {
            return Err(Error::NonConvergent {
                s0: 0.0,
                s1: 1.0,
                reason: "determinant argument did not stabilise".into(),
            });
        }
    };
    let winding = (total / (2.0 * std::f64::consts::PI)).round() as i64;
    Ok(WindingResult {
        winding,
        total_arg: total,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use std::f64::consts::PI;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn std1() -> SymplecticFamily {
        SymplecticFamily::constant(SymplecticSpace::standard(1))
    }

    fn fixed(b: f64) -> LagrangianPath {
        LagrangianPath::phase(move |_| b)
    }

    #[test]
    fn constant_pair_has_zero_index() {
        let l = fixed(0.3);
        assert_eq!(maslov_index(&l, &l, &std1(), &tol()).unwrap().0, 0);
    }

    #[test]
    fn rotating_phase_against_diagonal() {
        let l = LagrangianPath::phase(|s| PI + 2.0 * PI * s);
        assert_eq!(maslov_index(&l, &fixed(0.0), &std1(), &tol()).unwrap().0, -1);
        assert_eq!(maslov_via_crossings(&l, &fixed(0.0), &std1(), &tol()).unwrap().total, -1);
    }

    #[test]
    fn rotating_phase_against_antidiagonal() {
        // W_s = e^{2πis}: leaves 1 upward at s = 0, returns from below at s = 1
        let l = LagrangianPath::phase(|s| PI + 2.0 * PI * s);
        assert_eq!(maslov_index(&l, &fixed(PI), &std1(), &tol()).unwrap().0, -1);
        assert_eq!(maslov_via_crossings(&l, &fixed(PI), &std1(), &tol()).unwrap().total, -1);
    }

    #[test]
    fn crossing_form_closed_form_value() {
        let l = LagrangianPath::phase(|s| PI + 2.0 * PI * s);
        let w = SubspaceFrame::new(2, CMat::from_column_slice(2, 1, &[c64(1.0, 0.0), c64(-1.0, 0.0)]), &tol()).unwrap();
        let u = CMat::from_column_slice(2, 1, &[c64(1.0, 0.0), c64(1.0, 0.0)]);
        let q = crossing_form_on(&l, 0.5, &w, &u, &std1(), &tol()).unwrap();
        assert!((q[(0, 0)] - c64(-2.0 * PI, 0.0)).norm() < 1e-6);
        let rec = crossing_form_gamma(&l, &fixed(0.0), 0.5, &std1(), &tol()).unwrap();
        assert_eq!(rec.signature, (0, 0, 1));
        let swapped = crossing_form_gamma(&fixed(0.0), &l, 0.5, &std1(), &tol()).unwrap();
        assert!((swapped.gamma[(0, 0)] + rec.gamma[(0, 0)]).norm() < 1e-6);
    }

    #[test]
    fn gamma_requires_crossing() {
        let l = LagrangianPath::phase(|s| PI + 2.0 * PI * s);
        assert!(matches!(
            crossing_form_gamma(&l, &fixed(0.0), 0.25, &std1(), &tol()),
            Err(Error::NotACrossing { .. })
        ));
    }

    #[test]
    fn endpoint_crossing_counts_positive_part() {
        let l = LagrangianPath::phase(|s| 2.0 * PI - 2.0 * PI * s);
        let sum = maslov_via_crossings(&l, &fixed(0.0), &std1(), &tol()).unwrap();
        // the crossing at 0 has Γ = +2π and the one at 1 is positive as well
        assert_eq!(sum.total, 1);
        assert_eq!(maslov_index(&l, &fixed(0.0), &std1(), &tol()).unwrap().0, 1);
    }

    #[test]
    fn winding_examples() {
        let sp = SymplecticSpace::standard(1);
        let mu = fixed(0.0).eval(0.0);
        assert_eq!(winding_oracle(&fixed(0.4), &mu, &sp, &tol()).unwrap().winding, 0);
        let single = LagrangianPath::phase(|s| PI + 2.0 * PI * s);
        assert_eq!(winding_oracle(&single, &mu, &sp, &tol()).unwrap().winding, -1);
        let double = LagrangianPath::phase(|s| PI + 4.0 * PI * s);
        assert_eq!(winding_oracle(&double, &mu, &sp, &tol()).unwrap().winding, -2);
        let open = LagrangianPath::phase(|s| s);
        assert!(matches!(winding_oracle(&open, &mu, &sp, &tol()), Err(Error::NotALoop { .. })));
    }

    #[test]
    fn non_lagrangian_sample_is_reported() {
        let bad = LagrangianPath::new(2, |_| {
            SubspaceFrame::new(2, CMat::from_column_slice(2, 1, &[c64(1.0, 0.0), c64(0.0, 0.0)]), &Tolerances::default()).unwrap()
        });
        assert!(matches!(
            maslov_index(&bad, &fixed(0.0), &std1(), &tol()),
            Err(Error::NotLagrangian(_))
        ));
    }
}
