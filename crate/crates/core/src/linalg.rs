//! Dense complex helpers on top of nalgebra.
//!
//! Everything here works on `DMatrix<Complex64>`. Inner products other than
//! the Euclidean one are handled through [`Metric`], which whitens vectors and
//! operators with the Cholesky factor of the Gram matrix so that the
//! Hermitian eigensolver and the SVD can be used unchanged.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tol::Tolerances;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

/// Builds a matrix from real row-major data.
pub fn from_real_rows(rows: usize, cols: usize, data: &[f64]) -> CMat {
    CMat::from_row_iterator(rows, cols, data.iter().map(|&x| c64(x, 0.0)))
}

pub fn diag_real(values: &[f64]) -> CMat {
    let n = values.len();
    let mut m = zeros(n, n);
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = c64(v, 0.0);
    }
    m
}

pub fn diag_complex(values: &[Complex64]) -> CMat {
    let n = values.len();
    let mut m = zeros(n, n);
    for (i, &v) in values.iter().enumerate() {
        m[(i, i)] = v;
    }
    m
}

pub fn block_diag(a: &CMat, b: &CMat) -> CMat {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut m = zeros(ra + rb, ca + cb);
    m.view_mut((0, 0), (ra, ca)).copy_from(a);
    m.view_mut((ra, ca), (rb, cb)).copy_from(b);
    m
}

pub fn hstack(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.nrows(), b.nrows());
    let mut m = zeros(a.nrows(), a.ncols() + b.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((0, a.ncols()), b.shape()).copy_from(b);
    m
}

pub fn vstack(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.ncols());
    let mut m = zeros(a.nrows() + b.nrows(), a.ncols());
    m.view_mut((0, 0), a.shape()).copy_from(a);
    m.view_mut((a.nrows(), 0), b.shape()).copy_from(b);
    m
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

/// Largest deviation from Hermitian symmetry.
pub fn hermitian_residual(m: &CMat) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()).scale(0.5)
}

/// Singular values in descending order; empty for empty matrices.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn spectral_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn smallest_singular_value(m: &CMat) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

pub fn numerical_rank(m: &CMat, tol: &Tolerances) -> usize {
    let s = singular_values(m);
    let Some(&smax) = s.first() else { return 0 };
    let cut = tol.rank_cutoff(smax);
    s.iter().filter(|&&x| x > cut).count()
}

/// Full SVD of `m` padded to a square so that the complete right singular
/// basis is available. Returns (singular values sorted descending, V with
/// matching column order).
fn full_right_svd(m: &CMat) -> (Vec<f64>, CMat) {
    let (r, n) = m.shape();
    let padded = if r < n {
        let mut p = zeros(n, n);
        p.view_mut((0, 0), (r, n)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("v_t requested");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut idx: Vec<usize> = (0..sv.len()).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let v = vt.adjoint();
    let mut vs = zeros(n, n);
    let mut svs = Vec::with_capacity(n);
    for (k, &i) in idx.iter().enumerate() {
        vs.set_column(k, &v.column(i));
        svs.push(sv[i]);
    }
    (svs, vs)
}

/// Orthonormal basis of the kernel of `m` (columns), using the rank cutoff.
pub fn null_space(m: &CMat, tol: &Tolerances) -> CMat {
    let n = m.ncols();
    if n == 0 {
        return zeros(0, 0);
    }
    if m.nrows() == 0 {
        return identity(n);
    }
    let (sv, v) = full_right_svd(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let cut = tol.rank_cutoff(smax);
    let rank = if smax == 0.0 {
        0
    } else {
        sv.iter().filter(|&&x| x > cut).count()
    };
    v.columns(rank, n - rank).into_owned()
}

/// Orthonormal basis of the column space of `m`.
pub fn column_basis(m: &CMat, tol: &Tolerances) -> CMat {
    let n = m.nrows();
    if m.ncols() == 0 || n == 0 {
        return zeros(n, 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("u requested");
    let sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return zeros(n, 0);
    }
    let cut = tol.rank_cutoff(smax);
    let mut idx: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] > cut).collect();
    idx.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let mut q = zeros(n, idx.len());
    for (k, &i) in idx.iter().enumerate() {
        q.set_column(k, &u.column(i));
    }
    q
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let h = hermitian_part(m);
    let e = h.clone().symmetric_eigen();
    // nalgebra's complex solver can stop with residuals near 1e-8 when
    // eigenvalues cluster; finish with Jacobi sweeps on the rotated matrix
    let mut v = e.eigenvectors;
    let mut d = v.adjoint() * &h * &v;
    jacobi_sweeps(&mut d, &mut v);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| d[(a, a)].re.total_cmp(&d[(b, b)].re));
    let mut vals = Vec::with_capacity(n);
    let mut vecs = zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vals.push(d[(i, i)].re);
        let mut col = v.column(i).into_owned();
        fix_phase(&mut col);
        vecs.set_column(k, &col);
    }
    (vals, vecs)
}

/// Cyclic complex Jacobi on a nearly diagonal Hermitian `d`, accumulating
/// the rotations into `v`.
fn jacobi_sweeps(d: &mut CMat, v: &mut CMat) {
    let n = d.nrows();
    let scale = max_abs(d).max(f64::MIN_POSITIVE);
    for _ in 0..30 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(d[(p, q)].norm());
            }
        }
        if off <= 4.0 * f64::EPSILON * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = d[(p, q)];
                let r = apq.norm();
                if r <= f64::EPSILON * 1e-3 * scale {
                    continue;
                }
                let phase = apq / r;
                let tau = (d[(q, q)].re - d[(p, p)].re) / (2.0 * r);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let t = if tau == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // columns p, q are mixed by [[c, s], [-s e^{-iφ}, c e^{-iφ}]]
                let rot = [
                    [c64(c, 0.0), c64(s, 0.0)],
                    [-phase.conj() * s, phase.conj() * c],
                ];
                apply_right(d, p, q, &rot);
                apply_left_adjoint(d, p, q, &rot);
                apply_right(v, p, q, &rot);
                d[(p, q)] = c64(0.0, 0.0);
                d[(q, p)] = c64(0.0, 0.0);
            }
        }
    }
}

fn apply_right(m: &mut CMat, p: usize, q: usize, rot: &[[Complex64; 2]; 2]) {
    for i in 0..m.nrows() {
        let (a, b) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = a * rot[0][0] + b * rot[1][0];
        m[(i, q)] = a * rot[0][1] + b * rot[1][1];
    }
}

fn apply_left_adjoint(m: &mut CMat, p: usize, q: usize, rot: &[[Complex64; 2]; 2]) {
    for j in 0..m.ncols() {
        let (a, b) = (m[(p, j)], m[(q, j)]);
        m[(p, j)] = rot[0][0].conj() * a + rot[1][0].conj() * b;
        m[(q, j)] = rot[0][1].conj() * a + rot[1][1].conj() * b;
    }
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    eigh(m).0
}

/// Rotates a vector so its largest entry is real and positive.
pub fn fix_phase(v: &mut CVec) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        // small slack keeps the choice stable when entries tie
        if z.norm() > best_abs + 1e-12 {
            best_abs = z.norm();
            best = i;
        }
    }
    if best_abs > 0.0 {
        let phase = v[best] / v[best].norm();
        let rot = phase.conj();
        for z in v.iter_mut() {
            *z *= rot;
        }
    }
}

/// Eigenvalues of a normal (e.g. unitary) matrix via the complex Schur form.
pub fn normal_eigenvalues(m: &CMat) -> Result<Vec<Complex64>> {
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Singular("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    Ok((0..n).map(|i| t[(i, i)]).collect())
}

/// Arguments in (-pi, pi] of the eigenvalues of a unitary matrix, ascending.
pub fn unitary_phases(m: &CMat) -> Result<Vec<f64>> {
    let mut p: Vec<f64> = normal_eigenvalues(m)?.iter().map(|z| z.arg()).collect();
    p.sort_by(|a, b| a.total_cmp(b));
    Ok(p)
}

/// f(A) for Hermitian A via the spectral theorem.
pub fn hermitian_function(m: &CMat, f: impl Fn(f64) -> Complex64) -> CMat {
    let (vals, vecs) = eigh(m);
    let d = diag_complex(&vals.iter().map(|&x| f(x)).collect::<Vec<_>>());
    &vecs * d * vecs.adjoint()
}

/// exp(i K) for Hermitian K.
pub fn expi_hermitian(k: &CMat) -> CMat {
    hermitian_function(k, |x| Complex64::from_polar(1.0, x))
}

/// Principal logarithm of a unitary matrix, returned as Hermitian K with U = exp(iK).
pub fn log_unitary(u: &CMat) -> Result<CMat> {
    let n = u.nrows();
    if n == 0 {
        return Ok(zeros(0, 0));
    }
    let schur = nalgebra::linalg::Schur::try_new(u.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Singular("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let d = diag_real(&(0..n).map(|i| t[(i, i)].arg()).collect::<Vec<_>>());
    Ok(hermitian_part(&(&q * d * q.adjoint())))
}

/// Closest unitary matrix in Frobenius norm (polar factor).
pub fn polar_unitary(m: &CMat) -> CMat {
    let svd = m.clone().svd(true, true);
    svd.u.expect("u") * svd.v_t.expect("v_t")
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    if m.nrows() == 0 {
        return Ok(zeros(0, 0));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::Singular("matrix inverse".into()))
}

pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
    a.clone()
        .lu()
        .solve(b)
        .ok_or_else(|| Error::Singular("linear solve".into()))
}

/// Orthogonal projector onto the span of the orthonormal columns of `q`.
pub fn projector(q: &CMat) -> CMat {
    q * q.adjoint()
}

/// Inner-product structure given by a Hermitian positive definite Gram matrix
/// `G`, with `<x, y> = y^H G x`.
///
/// With `G = L L^H`, the map `x -> L^H x` is an isometry onto the Euclidean
/// space; operators transform by `A -> L^H A L^{-H}`.
#[derive(Debug, Clone)]
pub struct Metric {
    gram: CMat,
    lh: CMat,
    lh_inv: CMat,
    identity: bool,
}

impl Metric {
    pub fn euclidean(n: usize) -> Self {
        Self {
            gram: identity(n),
            lh: identity(n),
            lh_inv: identity(n),
            identity: true,
        }
    }

    pub fn new(gram: CMat, tol: &Tolerances) -> Result<Self> {
        let n = gram.nrows();
        if gram.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: gram.ncols(),
            });
        }
        let res = hermitian_residual(&gram);
        if res > tol.num * max_abs(&gram).max(1.0) {
            return Err(Error::InvalidSpace(format!(
                "Gram matrix is not Hermitian (residual {res:.3e})"
            )));
        }
        let gram = hermitian_part(&gram);
        let min_eig = eigvalsh(&gram).first().copied().unwrap_or(1.0);
        if min_eig <= tol.pd {
            return Err(Error::InvalidSpace(format!(
                "Gram matrix is not positive definite (min eigenvalue {min_eig:.3e})"
            )));
        }
        if gram == identity(n) {
            return Ok(Self::euclidean(n));
        }
        let chol = nalgebra::linalg::Cholesky::new(gram.clone())
            .ok_or_else(|| Error::InvalidSpace("Cholesky factorisation failed".into()))?;
        let lh = chol.l().adjoint();
        let lh_inv = inverse(&lh)?;
        Ok(Self {
            gram,
            lh,
            lh_inv,
            identity: false,
        })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &CMat {
        &self.gram
    }

    pub fn is_euclidean(&self) -> bool {
        self.identity
    }

    /// Coordinates in which the metric becomes Euclidean.
    pub fn whiten(&self, x: &CMat) -> CMat {
        if self.identity {
            x.clone()
        } else {
            &self.lh * x
        }
    }

    pub fn unwhiten(&self, y: &CMat) -> CMat {
        if self.identity {
            y.clone()
        } else {
            &self.lh_inv * y
        }
    }

    pub fn whiten_op(&self, a: &CMat) -> CMat {
        if self.identity {
            a.clone()
        } else {
            &self.lh * a * &self.lh_inv
        }
    }

    pub fn unwhiten_op(&self, a: &CMat) -> CMat {
        if self.identity {
            a.clone()
        } else {
            &self.lh_inv * a * &self.lh
        }
    }

    /// Gram adjoint `A^★ = G^{-1} A^H G`.
    pub fn adjoint(&self, a: &CMat) -> CMat {
        self.unwhiten_op(&self.whiten_op(a).adjoint())
    }

    pub fn inner(&self, x: &CVec, y: &CVec) -> Complex64 {
        (y.adjoint() * &self.gram * x)[(0, 0)]
    }

    /// Gram-orthonormal basis of the column span of `frame`.
    pub fn orthonormal_basis(&self, frame: &CMat, tol: &Tolerances) -> CMat {
        self.unwhiten(&column_basis(&self.whiten(frame), tol))
    }

    /// Gram-orthogonal projector onto the span of `frame`.
    pub fn projector(&self, frame: &CMat, tol: &Tolerances) -> CMat {
        let q = column_basis(&self.whiten(frame), tol);
        self.unwhiten_op(&projector(&q))
    }
}

/// JSON encoding of complex matrices as row-major nested lists of `[re, im]`.
pub mod cmat_json {
    use super::{c64, CMat};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub type Rows = Vec<Vec<[f64; 2]>>;

    pub fn to_rows(m: &CMat) -> Rows {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect()
    }

    /// Parses rows; `cols` is needed to represent matrices with no rows.
    pub fn from_rows(rows: &Rows, cols: Option<usize>) -> Result<CMat, String> {
        let r = rows.len();
        let c = rows.first().map(|x| x.len()).or(cols).unwrap_or(0);
        if rows.iter().any(|row| row.len() != c) {
            return Err("ragged matrix rows".into());
        }
        Ok(CMat::from_fn(r, c, |i, j| c64(rows[i][j][0], rows[i][j][1])))
    }

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows = Rows::deserialize(d)?;
        from_rows(&rows, None).map_err(serde::de::Error::custom)
    }
}
