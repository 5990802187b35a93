//! Finite-dimensional complex symplectic linear algebra.
//!
//! A [`SymplecticSpace`] is `C^n` with a Gram matrix `G` and an operator `J`
//! that is skew-adjoint for `G`; the symplectic form is
//! `ω(x, y) = <Jx, y> = y^H G J x`. Subspaces are carried as column frames.
//!
//! Lagrangian subspaces correspond to graphs of maps `U: H+ -> H-` where
//! `H+` is the negative and `H-` the positive eigenspace of `iJ`. With
//! gram-orthonormal eigenbases and `|eigenvalue|` weights `D±`, the graph of
//! `U` is Lagrangian iff `U^H D- U = D+`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    self, c64, column_basis, diag_real, eigh, hstack, max_abs, null_space, numerical_rank,
    singular_values, spectral_norm, CMat, Metric,
};
use crate::tol::Tolerances;

/// Threshold used for containment and span-equality decisions between
/// orthonormalized frames.
fn span_tol(tol: &Tolerances) -> f64 {
    tol.num.max(tol.rank_rel)
}

/// A subspace of `C^n` given by a full-rank column frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFrame", into = "RawFrame")]
pub struct SubspaceFrame {
    ambient_dim: usize,
    frame: CMat,
}

#[derive(Serialize, Deserialize)]
struct RawFrame {
    ambient_dim: usize,
    #[serde(with = "linalg::cmat_json")]
    frame: CMat,
}

impl TryFrom<RawFrame> for SubspaceFrame {
    type Error = Error;

    fn try_from(raw: RawFrame) -> Result<Self> {
        let frame = if raw.frame.nrows() == 0 && raw.ambient_dim > 0 {
            CMat::zeros(raw.ambient_dim, 0)
        } else {
            raw.frame
        };
        SubspaceFrame::new(raw.ambient_dim, frame, &Tolerances::default())
    }
}

impl From<SubspaceFrame> for RawFrame {
    fn from(f: SubspaceFrame) -> Self {
        RawFrame {
            ambient_dim: f.ambient_dim,
            frame: f.frame,
        }
    }
}

impl SubspaceFrame {
    /// Validates that `frame` has `ambient_dim` rows and full column rank.
    pub fn new(ambient_dim: usize, frame: CMat, tol: &Tolerances) -> Result<Self> {
        if frame.nrows() != ambient_dim {
            return Err(Error::DimensionMismatch {
                expected: ambient_dim,
                found: frame.nrows(),
            });
        }
        let k = frame.ncols();
        if k > 0 {
            let s = singular_values(&frame);
            let smax = s[0];
            let cut = tol.rank_cutoff(smax);
            let rank = s.iter().filter(|&&x| x > cut).count();
            if smax == 0.0 || rank < k {
                return Err(Error::RankDeficient {
                    rank: if smax == 0.0 { 0 } else { rank },
                    columns: k,
                });
            }
        }
        Ok(Self { ambient_dim, frame })
    }

    /// Frame for the span of arbitrary (possibly dependent) columns.
    pub fn span_of(columns: &CMat, tol: &Tolerances) -> Self {
        Self {
            ambient_dim: columns.nrows(),
            frame: column_basis(columns, tol),
        }
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            frame: CMat::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Self {
            ambient_dim,
            frame: CMat::identity(ambient_dim, ambient_dim),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn frame(&self) -> &CMat {
        &self.frame
    }

    /// Euclidean-orthonormal frame of the same span.
    pub fn orthonormal(&self) -> CMat {
        if self.dim() == 0 {
            return self.frame.clone();
        }
        // full rank is an invariant, so a QR-free SVD basis keeps every column
        column_basis(&self.frame, &Tolerances::default())
    }

    /// Canonical representative: the same subspace with an orthonormal frame.
    pub fn canonical(&self) -> Self {
        Self {
            ambient_dim: self.ambient_dim,
            frame: self.orthonormal(),
        }
    }

    /// Euclidean orthogonal projector onto the span.
    pub fn projector(&self) -> CMat {
        linalg::projector(&self.orthonormal())
    }

    /// Distance of the frame's span from `other`: norm of `(I - P_other) Q`.
    pub fn excess_over(&self, other: &SubspaceFrame) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let q = self.orthonormal();
        let r = &q - other.projector() * &q;
        spectral_norm(&r)
    }

    pub fn contained_in(&self, other: &SubspaceFrame, tol: &Tolerances) -> bool {
        self.excess_over(other) < span_tol(tol)
    }

    pub fn same_span(&self, other: &SubspaceFrame, tol: &Tolerances) -> bool {
        self.ambient_dim == other.ambient_dim
            && self.dim() == other.dim()
            && gap_distance(self, other) < span_tol(tol)
    }

    /// Orthogonal complement with respect to `metric`.
    pub fn orthogonal_complement(&self, metric: &Metric, tol: &Tolerances) -> Self {
        if self.dim() == 0 {
            return Self::full(self.ambient_dim);
        }
        let w = metric.whiten(&self.frame);
        let k = null_space(&w.adjoint(), tol);
        Self {
            ambient_dim: self.ambient_dim,
            frame: metric.unwhiten(&k),
        }
    }
}

/// Classification of a subspace relative to its annihilator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubspaceKind {
    Isotropic,
    Coisotropic,
    Lagrangian,
    None,
}

/// Complex symplectic vector space `(C^n, G, J)`.
#[derive(Debug, Clone)]
pub struct SymplecticSpace {
    gram: CMat,
    j: CMat,
    omega: CMat,
    metric: Metric,
    /// Whitened orthonormal eigenbases of `iJ` (negative part first).
    plus_w: CMat,
    minus_w: CMat,
    weights_plus: Vec<f64>,
    weights_minus: Vec<f64>,
}

impl SymplecticSpace {
    pub fn new(gram: CMat, j: CMat, tol: &Tolerances) -> Result<Self> {
        let n = gram.nrows();
        if j.nrows() != n || j.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: j.nrows(),
            });
        }
        if n == 0 {
            return Err(Error::InvalidSpace("dimension must be positive".into()));
        }
        let metric = Metric::new(gram, tol)?;
        let gram = metric.gram().clone();
        let omega = &gram * &j;
        let skew = max_abs(&(&omega + omega.adjoint()));
        if skew > tol.num * max_abs(&omega).max(1.0) {
            return Err(Error::InvalidSpace(format!(
                "J is not skew-adjoint for the Gram matrix (residual {skew:.3e})"
            )));
        }
        let sv = singular_values(&j);
        if sv.last().copied().unwrap_or(0.0) <= tol.rank_cutoff(sv[0]) {
            return Err(Error::InvalidSpace("J is not invertible".into()));
        }
        let jw = metric.whiten_op(&j);
        let ijw = jw.map(|z| z * c64(0.0, 1.0));
        let (vals, vecs) = eigh(&ijw);
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (k, &v) in vals.iter().enumerate() {
            if v.abs() < tol.num {
                return Err(Error::InvalidSpace(format!(
                    "iJ has an eigenvalue {v:.3e} too close to zero"
                )));
            }
            if v < 0.0 {
                plus.push(k);
            } else {
                minus.push(k);
            }
        }
        let pick = |idx: &[usize]| {
            let mut m = CMat::zeros(n, idx.len());
            for (c, &k) in idx.iter().enumerate() {
                m.set_column(c, &vecs.column(k));
            }
            m
        };
        let plus_w = pick(&plus);
        let minus_w = pick(&minus);
        let weights_plus = plus.iter().map(|&k| vals[k].abs()).collect();
        let weights_minus = minus.iter().map(|&k| vals[k].abs()).collect();
        Ok(Self {
            gram,
            j,
            omega,
            metric,
            plus_w,
            minus_w,
            weights_plus,
            weights_minus,
        })
    }

    /// `C^{2n}` with the Euclidean inner product and `J = diag(i I, -i I)`.
    pub fn standard(n: usize) -> Self {
        let mut d = vec![c64(0.0, 1.0); n];
        d.extend(vec![c64(0.0, -1.0); n]);
        Self::new(
            CMat::identity(2 * n, 2 * n),
            linalg::diag_complex(&d),
            &Tolerances::default(),
        )
        .expect("standard space is valid")
    }

    /// Space from a Gram matrix and a skew-Hermitian form matrix `Ω`, with
    /// `ω(x, y) = y^H Ω x`, so that `J = G^{-1} Ω`.
    pub fn from_form(gram: CMat, omega: CMat, tol: &Tolerances) -> Result<Self> {
        let j = linalg::solve(&gram, &omega)?;
        Self::new(gram, j, tol)
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &CMat {
        &self.gram
    }

    pub fn j(&self) -> &CMat {
        &self.j
    }

    /// Matrix `Ω = G J` of the form: `ω(x, y) = y^H Ω x`.
    pub fn omega_matrix(&self) -> &CMat {
        &self.omega
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    /// Matrix of `ω(x_i, y_j)` over the columns of two frames.
    pub fn omega(&self, x: &CMat, y: &CMat) -> CMat {
        // entry (i, j) = ω(x_j, y_i)
        y.adjoint() * &self.omega * x
    }

    /// Gram-orthonormal basis of `H+` (negative eigenspace of `iJ`).
    pub fn basis_plus(&self) -> CMat {
        self.metric.unwhiten(&self.plus_w)
    }

    /// Gram-orthonormal basis of `H-` (positive eigenspace of `iJ`).
    pub fn basis_minus(&self) -> CMat {
        self.metric.unwhiten(&self.minus_w)
    }

    pub fn weights_plus(&self) -> &[f64] {
        &self.weights_plus
    }

    pub fn weights_minus(&self) -> &[f64] {
        &self.weights_minus
    }

    fn check_frame(&self, f: &SubspaceFrame) -> Result<()> {
        if f.ambient_dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: f.ambient_dim(),
            });
        }
        Ok(())
    }

    /// `λ^ω = {y : ω(x, y) = 0 for all x in λ}`.
    pub fn annihilator(&self, lambda: &SubspaceFrame, tol: &Tolerances) -> Result<SubspaceFrame> {
        self.check_frame(lambda)?;
        if lambda.dim() == 0 {
            return Ok(SubspaceFrame::full(self.dim()));
        }
        // ω(x, y) = y^H Ω x vanishes for all x in λ iff (Ω F)^H y = 0
        let q = lambda.orthonormal();
        let constraint = (&self.omega * q).adjoint();
        Ok(SubspaceFrame {
            ambient_dim: self.dim(),
            frame: null_space(&constraint, tol),
        })
    }

    pub fn classify(&self, lambda: &SubspaceFrame, tol: &Tolerances) -> Result<SubspaceKind> {
        let ann = self.annihilator(lambda, tol)?;
        let iso = lambda.contained_in(&ann, tol);
        let coiso = ann.contained_in(lambda, tol);
        Ok(match (iso, coiso) {
            (true, true) => SubspaceKind::Lagrangian,
            (true, false) => SubspaceKind::Isotropic,
            (false, true) => SubspaceKind::Coisotropic,
            (false, false) => SubspaceKind::None,
        })
    }

    pub fn is_lagrangian(&self, lambda: &SubspaceFrame, tol: &Tolerances) -> Result<bool> {
        Ok(self.classify(lambda, tol)? == SubspaceKind::Lagrangian)
    }

    /// Generator `U: H+ -> H-` whose graph is the Lagrangian `λ`.
    pub fn lagrangian_to_unitary(
        &self,
        lambda: &SubspaceFrame,
        tol: &Tolerances,
    ) -> Result<UnitaryGenerator> {
        self.check_frame(lambda)?;
        if self.weights_plus.len() != self.weights_minus.len() {
            return Err(Error::NotLagrangian(
                "space has unequal positive and negative parts".into(),
            ));
        }
        if !self.is_lagrangian(lambda, tol)? {
            return Err(Error::NotLagrangian(format!(
                "dimension {} in a space of dimension {}",
                lambda.dim(),
                self.dim()
            )));
        }
        self.generator_unchecked(lambda)
    }

    /// Generator without the Lagrangian test; used on hot paths where the
    /// frame is Lagrangian by construction.
    pub fn generator_unchecked(&self, lambda: &SubspaceFrame) -> Result<UnitaryGenerator> {
        let f = column_basis(&self.metric.whiten(lambda.frame()), &Tolerances::default());
        let a = self.plus_w.adjoint() * &f;
        let c = self.minus_w.adjoint() * &f;
        let u = &c * linalg::inverse(&a)?;
        Ok(UnitaryGenerator {
            basis_plus: self.basis_plus(),
            basis_minus: self.basis_minus(),
            u,
            weights_plus: self.weights_plus.clone(),
            weights_minus: self.weights_minus.clone(),
        })
    }

    /// The Lagrangian graph `{x + U x : x in H+}`.
    pub fn unitary_to_lagrangian(
        &self,
        gen: &UnitaryGenerator,
        tol: &Tolerances,
    ) -> Result<SubspaceFrame> {
        let n = self.weights_plus.len();
        if gen.u.nrows() != self.weights_minus.len() || gen.u.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: gen.u.ncols(),
            });
        }
        let residual = generator_residual(&gen.u, &self.weights_plus, &self.weights_minus);
        if residual > tol.num.max(1e-8) {
            return Err(Error::InvalidGenerator { residual });
        }
        let fw = &self.plus_w + &self.minus_w * &gen.u;
        SubspaceFrame::new(self.dim(), self.metric.unwhiten(&fw), tol)
    }

    /// `W = Ũ Ṽ^{-1}`: unitary, similar to `U V^{-1}`.
    pub fn generator_ratio(&self, lambda: &SubspaceFrame, mu: &SubspaceFrame) -> Result<CMat> {
        let u = self.generator_unchecked(lambda)?.normalized();
        let v = self.generator_unchecked(mu)?.normalized();
        Ok(u * v.adjoint())
    }

    /// `dim ker(U V^{-1} - I)` for Lagrangians `λ`, `μ`.
    pub fn intersection_dim(
        &self,
        lambda: &SubspaceFrame,
        mu: &SubspaceFrame,
        tol: &Tolerances,
    ) -> Result<usize> {
        for f in [lambda, mu] {
            if !self.is_lagrangian(f, tol)? {
                return Err(Error::NotLagrangian("intersection_dim input".into()));
            }
        }
        let w = self.generator_ratio(lambda, mu)?;
        let n = w.nrows();
        let d = w - CMat::identity(n, n);
        let sv = singular_values(&d);
        let cut = tol.rank_rel * sv.first().copied().unwrap_or(0.0).max(1.0);
        Ok(sv.iter().filter(|&&x| x < cut).count())
    }

    /// Gram-aware gap between two subspaces.
    pub fn gap(&self, m: &SubspaceFrame, n: &SubspaceFrame, tol: &Tolerances) -> f64 {
        let pm = self.metric.projector(m.frame(), tol);
        let pn = self.metric.projector(n.frame(), tol);
        spectral_norm(&self.metric.whiten_op(&(pm - pn)))
    }
}

fn generator_residual(u: &CMat, wp: &[f64], wm: &[f64]) -> f64 {
    let dp = diag_real(wp);
    let dm = diag_real(wm);
    let scale = wp.iter().chain(wm).fold(1.0f64, |a, &b| a.max(b));
    max_abs(&(u.adjoint() * dm * u - dp)) / scale
}

/// Generator of a Lagrangian: the map `U: H+ -> H-` in gram-orthonormal bases.
#[derive(Debug, Clone)]
pub struct UnitaryGenerator {
    pub basis_plus: CMat,
    pub basis_minus: CMat,
    pub u: CMat,
    pub weights_plus: Vec<f64>,
    pub weights_minus: Vec<f64>,
}

impl UnitaryGenerator {
    /// Residual of `U^H D- U = D+`.
    pub fn residual(&self) -> f64 {
        generator_residual(&self.u, &self.weights_plus, &self.weights_minus)
    }

    /// `D-^{1/2} U D+^{-1/2}`, unitary whenever the generator condition holds.
    pub fn normalized(&self) -> CMat {
        let dm = diag_real(&self.weights_minus.iter().map(|w| w.sqrt()).collect::<Vec<_>>());
        let dp = diag_real(&self.weights_plus.iter().map(|w| 1.0 / w.sqrt()).collect::<Vec<_>>());
        dm * &self.u * dp
    }
}

/// `dim(λ ∩ μ)` by rank counting on the stacked frames.
pub fn intersection_dim_by_rank(lambda: &SubspaceFrame, mu: &SubspaceFrame, tol: &Tolerances) -> usize {
    let sum = sum_dim(lambda, mu, tol);
    lambda.dim() + mu.dim() - sum
}

fn sum_dim(lambda: &SubspaceFrame, mu: &SubspaceFrame, tol: &Tolerances) -> usize {
    if lambda.dim() + mu.dim() == 0 {
        return 0;
    }
    numerical_rank(&hstack(&lambda.orthonormal(), &mu.orthonormal()), tol)
}

/// Frame of `λ ∩ μ`.
pub fn intersection(lambda: &SubspaceFrame, mu: &SubspaceFrame, tol: &Tolerances) -> SubspaceFrame {
    let n = lambda.ambient_dim();
    if lambda.dim() == 0 || mu.dim() == 0 {
        return SubspaceFrame::zero(n);
    }
    let ql = lambda.orthonormal();
    let qm = mu.orthonormal();
    let k = null_space(&hstack(&ql, &(-&qm)), tol);
    if k.ncols() == 0 {
        return SubspaceFrame::zero(n);
    }
    let a = k.rows(0, ql.ncols()).into_owned();
    SubspaceFrame::span_of(&(ql * a), tol)
}

/// Frame of `λ + μ`.
pub fn sum(lambda: &SubspaceFrame, mu: &SubspaceFrame, tol: &Tolerances) -> SubspaceFrame {
    SubspaceFrame::span_of(&hstack(lambda.frame(), mu.frame()), tol)
}

/// `dim(λ ∩ μ) - codim(λ + μ)`.
pub fn fredholm_index(lambda: &SubspaceFrame, mu: &SubspaceFrame, tol: &Tolerances) -> Result<i64> {
    if lambda.ambient_dim() != mu.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: lambda.ambient_dim(),
            found: mu.ambient_dim(),
        });
    }
    let s = sum_dim(lambda, mu, tol);
    let inter = lambda.dim() + mu.dim() - s;
    Ok(inter as i64 - (lambda.ambient_dim() - s) as i64)
}

/// `‖P_M - P_N‖` for Euclidean orthogonal projectors.
pub fn gap_distance(m: &SubspaceFrame, n: &SubspaceFrame) -> f64 {
    spectral_norm(&(m.projector() - n.projector()))
}

/// Gap between `D1/Y` and `D2/Y`, realised as the gap between `D1 ∩ Y^⊥`
/// and `D2 ∩ Y^⊥`.
pub fn quotient_gap(
    d1: &SubspaceFrame,
    d2: &SubspaceFrame,
    y: &SubspaceFrame,
    tol: &Tolerances,
) -> Result<f64> {
    for (name, d) in [("D1", d1), ("D2", d2)] {
        if d.ambient_dim() != y.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: y.ambient_dim(),
                found: d.ambient_dim(),
            });
        }
        if !y.contained_in(d, tol) {
            return Err(Error::ContainmentViolation(format!(
                "Y is not contained in {name} (excess {:.3e})",
                y.excess_over(d)
            )));
        }
    }
    let n = y.ambient_dim();
    let py = y.projector();
    let comp = CMat::identity(n, n) - py;
    let r1 = SubspaceFrame::span_of(&(&comp * d1.orthonormal()), tol);
    let r2 = SubspaceFrame::span_of(&(&comp * d2.orthonormal()), tol);
    Ok(gap_distance(&r1, &r2))
}
