//! Spectral flow of matrix paths.
//!
//! Two curves are supported: the imaginary axis through 0 for Hermitian paths
//! (negative side: negative real part) and a short segment of the real axis
//! through 1 for unitary paths (negative side: lower half plane). Unitary
//! spectra are handled through eigenvalue arguments in `(-pi, pi]`, so both
//! cases reduce to real "signed spectral coordinates" whose sign tells the
//! side of the curve.

mod crossing;
mod partition;

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, c64, eigh, max_abs, CMat, Metric};
use crate::tol::Tolerances;
use crate::tracking::{track_flow, TrackingOptions};

pub use crossing::{sf_crossing, CrossingOptions, CrossingRecordSF, CrossingReport, Fallback};
pub use partition::{
    sf_partition, sf_partition_with, FlowComputation, MatrixPathSource, PartitionOptions,
    SpectrumSource,
};

pub type MatrixFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// Which built-in curve the flow is measured across.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    /// Hermitian operators, flow through 0 along the imaginary axis.
    Hermitian,
    /// Unitary operators, flow through 1 along the real axis.
    Unitary,
}

/// Which side of the curve counts as negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoOrientation {
    /// Negative real part (Hermitian) or negative argument (unitary).
    #[default]
    Standard,
    /// The opposite side.
    Reversed,
}

/// A continuous path `s -> A_s`, `s in [0, 1]`, optionally self-adjoint or
/// unitary with respect to an `s`-dependent Gram matrix.
#[derive(Clone)]
pub struct OperatorPath {
    dim: usize,
    kind: PathKind,
    eval: MatrixFn,
    gram: Option<MatrixFn>,
    sample_hint: usize,
}

impl std::fmt::Debug for OperatorPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorPath")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("has_gram", &self.gram.is_some())
            .field("sample_hint", &self.sample_hint)
            .finish()
    }
}

impl OperatorPath {
    pub fn new(dim: usize, kind: PathKind, eval: impl Fn(f64) -> CMat + Send + Sync + 'static) -> Self {
        Self {
            dim,
            kind,
            eval: Arc::new(eval),
            gram: None,
            sample_hint: 64,
        }
    }

    pub fn hermitian(dim: usize, eval: impl Fn(f64) -> CMat + Send + Sync + 'static) -> Self {
        Self::new(dim, PathKind::Hermitian, eval)
    }

    pub fn unitary(dim: usize, eval: impl Fn(f64) -> CMat + Send + Sync + 'static) -> Self {
        Self::new(dim, PathKind::Unitary, eval)
    }

    pub fn constant(kind: PathKind, a: CMat) -> Self {
        Self::new(a.nrows(), kind, move |_| a.clone())
    }

    pub fn with_gram(mut self, gram: impl Fn(f64) -> CMat + Send + Sync + 'static) -> Self {
        self.gram = Some(Arc::new(gram));
        self
    }

    pub fn with_sample_hint(mut self, n: usize) -> Self {
        self.sample_hint = n.max(1);
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> PathKind {
        self.kind
    }

    pub fn sample_hint(&self) -> usize {
        self.sample_hint
    }

    pub fn eval(&self, s: f64) -> CMat {
        (self.eval)(s)
    }

    pub fn gram_at(&self, s: f64) -> Option<CMat> {
        self.gram.as_ref().map(|g| g(s))
    }

    pub fn has_gram(&self) -> bool {
        self.gram.is_some()
    }

    /// The path `s -> A_{a + (b - a) s}`.
    pub fn restrict(&self, a: f64, b: f64) -> Self {
        let f = self.eval.clone();
        let g = self.gram.clone();
        Self {
            dim: self.dim,
            kind: self.kind,
            eval: Arc::new(move |s| f(a + (b - a) * s)),
            gram: g.map(|g| Arc::new(move |s| g(a + (b - a) * s)) as MatrixFn),
            sample_hint: self.sample_hint,
        }
    }

    /// The path traversed backwards.
    pub fn reversed(&self) -> Self {
        self.restrict(1.0, 0.0)
    }

    /// `s -> T_s^{-1} A_s T_s`, self-adjoint for the pushed-forward Gram
    /// family `T_s^H G_s T_s`.
    pub fn conjugated(&self, t: impl Fn(f64) -> CMat + Send + Sync + 'static) -> Result<Self> {
        let t = Arc::new(t);
        // fail early if the family is singular at a probe point
        linalg::inverse(&t(0.5))?;
        let f = self.eval.clone();
        let g = self.gram.clone();
        let t1 = t.clone();
        let eval = move |s: f64| {
            let ts = t1(s);
            let ti = linalg::inverse(&ts).unwrap_or_else(|_| CMat::from_element(ts.nrows(), ts.ncols(), c64(f64::NAN, 0.0)));
            ti * f(s) * ts
        };
        let gram = move |s: f64| {
            let ts = t(s);
            let gs = g.as_ref().map(|g| g(s)).unwrap_or_else(|| CMat::identity(ts.nrows(), ts.nrows()));
            ts.adjoint() * gs * &ts
        };
        Ok(Self {
            dim: self.dim,
            kind: self.kind,
            eval: Arc::new(eval),
            gram: Some(Arc::new(gram)),
            sample_hint: self.sample_hint,
        })
    }

    /// Metric at `s`, validating the Gram matrix.
    pub fn metric_at(&self, s: f64, tol: &Tolerances) -> Result<Metric> {
        match self.gram_at(s) {
            Some(g) => Metric::new(g, tol),
            None => Ok(Metric::euclidean(self.dim)),
        }
    }

    /// `A_s` in coordinates where the Gram matrix is the identity, after
    /// checking self-adjointness or unitarity.
    pub fn whitened_at(&self, s: f64, tol: &Tolerances) -> Result<CMat> {
        let a = self.eval(s);
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: a.nrows(),
            });
        }
        if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput(format!("path is not finite at s = {s}")));
        }
        let aw = self.metric_at(s, tol)?.whiten_op(&a);
        check_kind(&aw, self.kind, tol)?;
        Ok(aw)
    }

    /// Sorted signed spectral coordinates at `s`: eigenvalues for Hermitian
    /// paths, eigenvalue arguments for unitary paths.
    pub fn spectrum_at(&self, s: f64, tol: &Tolerances) -> Result<Vec<f64>> {
        let aw = self.whitened_at(s, tol)?;
        match self.kind {
            PathKind::Hermitian => Ok(linalg::eigvalsh(&aw)),
            PathKind::Unitary => linalg::unitary_phases(&aw),
        }
    }
}

/// Spectral flow by following sorted spectral coordinates on a grid that
/// starts with `grid` cells and is refined where matching is ambiguous.
pub fn sf_tracking(path: &OperatorPath, grid: usize, tol: &Tolerances) -> Result<i64> {
    let r = track_flow(
        |s| path.spectrum_at(s, tol),
        |_, sp| tol.zero_band(sp.iter().fold(0.0f64, |a, v| a.max(v.abs()))),
        TrackingOptions {
            initial_grid: grid,
            ..Default::default()
        },
    )?;
    Ok(r.total)
}

fn check_kind(aw: &CMat, kind: PathKind, tol: &Tolerances) -> Result<()> {
    let n = aw.nrows();
    match kind {
        PathKind::Hermitian => {
            let residual = linalg::hermitian_residual(aw);
            if residual > tol.num * max_abs(aw).max(1.0) {
                return Err(Error::NotSelfAdjoint { residual });
            }
        }
        PathKind::Unitary => {
            let residual = max_abs(&(aw.adjoint() * aw - CMat::identity(n, n)));
            if residual > tol.num * (n.max(1) as f64) {
                return Err(Error::NotUnitary { residual });
            }
        }
    }
    Ok(())
}

fn metric_for(gram: Option<&CMat>, n: usize, tol: &Tolerances) -> Result<Metric> {
    match gram {
        Some(g) => Metric::new(g.clone(), tol),
        None => Ok(Metric::euclidean(n)),
    }
}

fn whitened_hermitian(a: &CMat, gram: Option<&CMat>, tol: &Tolerances) -> Result<(Metric, CMat)> {
    let m = metric_for(gram, a.nrows(), tol)?;
    let aw = m.whiten_op(a);
    check_kind(&aw, PathKind::Hermitian, tol)?;
    Ok((m, linalg::hermitian_part(&aw)))
}

/// Sign classification of a Hermitian operator's spectrum.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralDecomposition {
    pub m_plus: usize,
    pub m_zero: usize,
    pub m_minus: usize,
    pub eigenvalues: Vec<f64>,
    /// Gram-orthonormal eigenvectors, column `k` for `eigenvalues[k]`.
    #[serde(with = "linalg::cmat_json")]
    pub eigenvectors: CMat,
    pub zero_band: f64,
}

pub fn spectral_decomposition(
    a: &CMat,
    gram: Option<&CMat>,
    tol: &Tolerances,
) -> Result<SpectralDecomposition> {
    let (m, aw) = whitened_hermitian(a, gram, tol)?;
    let (vals, vecs) = eigh(&aw);
    let norm = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let z = tol.zero_band(norm);
    let m_minus = vals.iter().filter(|&&v| v <= -z).count();
    let m_plus = vals.iter().filter(|&&v| v >= z).count();
    Ok(SpectralDecomposition {
        m_plus,
        m_zero: vals.len() - m_plus - m_minus,
        m_minus,
        eigenvalues: vals,
        eigenvectors: m.unwhiten(&vecs),
        zero_band: z,
    })
}

/// Open interval `(lo, hi)` of the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// `(-r, r)`.
    pub fn symmetric(r: f64) -> Self {
        Self { lo: -r, hi: r }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }
}

/// Gram-orthogonal projection onto the eigenvectors with eigenvalues in
/// `window`. Fails if an eigenvalue lies within `tol_gap` of an endpoint.
pub fn spectral_projection(
    a: &CMat,
    gram: Option<&CMat>,
    window: Interval,
    tol_gap: f64,
    tol: &Tolerances,
) -> Result<CMat> {
    let (m, aw) = whitened_hermitian(a, gram, tol)?;
    let (vals, vecs) = eigh(&aw);
    for &v in &vals {
        for b in [window.lo, window.hi] {
            if b.is_finite() && (v - b).abs() < tol_gap {
                return Err(Error::BoundaryCollision {
                    value: v,
                    boundary: b,
                    gap: tol_gap,
                });
            }
        }
    }
    let n = a.nrows();
    let mut p = CMat::zeros(n, n);
    for (k, &v) in vals.iter().enumerate() {
        if window.contains(v) {
            let c = vecs.column(k);
            p += &c * c.adjoint();
        }
    }
    Ok(m.unwhiten_op(&p))
}

/// Riesz projection `-(1/2πi) ∮ (A - z)^{-1} dz` over the circle of the
/// given centre and radius, by the trapezoid rule with `nodes` points.
pub fn spectral_projection_contour(
    a: &CMat,
    gram: Option<&CMat>,
    center: f64,
    radius: f64,
    nodes: usize,
    tol: &Tolerances,
) -> Result<CMat> {
    let (m, aw) = whitened_hermitian(a, gram, tol)?;
    let n = a.nrows();
    let mut p = CMat::zeros(n, n);
    let id = CMat::identity(n, n);
    for k in 0..nodes {
        let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / nodes as f64;
        let e = Complex64::from_polar(1.0, th);
        let z = c64(center, 0.0) + e * radius;
        let res = linalg::inverse(&(&aw - &id * z))?;
        // dz = i r e^{iθ} dθ, so -(1/2πi) dz = -(r/2π) e^{iθ} dθ
        p -= res * (e * (radius / nodes as f64));
    }
    Ok(m.unwhiten_op(&p))
}

/// Gram-orthogonal projection onto the non-negative spectral subspace.
pub fn aps_projection(a: &CMat, gram: Option<&CMat>, tol: &Tolerances) -> Result<CMat> {
    let (m, aw) = whitened_hermitian(a, gram, tol)?;
    let (vals, vecs) = eigh(&aw);
    let norm = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let z = tol.zero_band(norm);
    let n = a.nrows();
    let mut p = CMat::zeros(n, n);
    for (k, &v) in vals.iter().enumerate() {
        if v > -z {
            let c = vecs.column(k);
            p += &c * c.adjoint();
        }
    }
    Ok(m.unwhiten_op(&p))
}

/// Number of eigenvalues on the curve: in the zero band for Hermitian
/// operators, within the zero band of 1 for unitary ones.
pub fn hyperbolic_nullity(a: &CMat, gram: Option<&CMat>, kind: PathKind, tol: &Tolerances) -> Result<usize> {
    let m = metric_for(gram, a.nrows(), tol)?;
    let aw = m.whiten_op(a);
    check_kind(&aw, kind, tol)?;
    Ok(match kind {
        PathKind::Hermitian => {
            let vals = linalg::eigvalsh(&aw);
            let norm = vals.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            let z = tol.zero_band(norm);
            vals.iter().filter(|v| v.abs() < z).count()
        }
        PathKind::Unitary => {
            let z = tol.zero_band(1.0);
            linalg::normal_eigenvalues(&aw)?
                .iter()
                .filter(|l| (*l - c64(1.0, 0.0)).norm() < z)
                .count()
        }
    })
}

/// `A (A^2 + I)^{-1/2}`.
pub fn riesz_transform(a: &CMat, gram: Option<&CMat>, tol: &Tolerances) -> Result<CMat> {
    let (m, aw) = whitened_hermitian(a, gram, tol)?;
    let r = linalg::hermitian_function(&aw, |x| c64(x / (1.0 + x * x).sqrt(), 0.0));
    Ok(m.unwhiten_op(&r))
}
