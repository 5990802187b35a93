//! Spectral flow from crossing operators.
//!
//! At a crossing `t` (an eigenvalue of `A_t` at 0) the local contribution
//! is read off the restriction of `dA/ds` to `ker A_t`: its signature for
//! interior crossings, `-m^-` at `s = 0` and `+m^+` at `s = 1`. Crossings
//! whose restricted derivative is singular, or whose derivative estimate is
//! unstable, are delegated to the partition engine on a small interval.

use serde::Serialize;

use super::partition::sf_partition;
use super::{OperatorPath, PathKind};
use crate::error::{Error, Result};
use crate::linalg::{self, eigh, max_abs, CMat};
use crate::tol::Tolerances;

#[derive(Debug, Clone, Copy)]
pub struct CrossingOptions {
    /// Scan grid size; `0` means four times the path's sample hint.
    pub grid: usize,
    pub h: f64,
    pub mismatch_tol: f64,
    /// Relative threshold below which the restricted derivative is singular.
    pub regular_tol: f64,
}

impl Default for CrossingOptions {
    fn default() -> Self {
        Self {
            grid: 0,
            h: 1e-5,
            mismatch_tol: 1e-4,
            regular_tol: 1e-6,
        }
    }
}

/// One crossing: where, how degenerate, and the restricted derivative.
#[derive(Debug, Clone, Serialize)]
pub struct CrossingRecordSF {
    pub t: f64,
    pub nullity: usize,
    #[serde(with = "linalg::cmat_json")]
    pub b_restricted: CMat,
    /// `(m^+, m^0, m^-)` of the restricted derivative.
    pub signature: (usize, usize, usize),
    pub contribution: i64,
}

/// A stretch of the path handed to the partition engine.
#[derive(Debug, Clone, Serialize)]
pub struct Fallback {
    pub s0: f64,
    pub s1: f64,
    pub reason: String,
    pub value: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CrossingReport {
    pub total: i64,
    pub crossings: Vec<CrossingRecordSF>,
    pub fallbacks: Vec<Fallback>,
}

struct Scan<'a> {
    path: &'a OperatorPath,
    tol: &'a Tolerances,
}

impl Scan<'_> {
    fn spectrum(&self, s: f64) -> Result<Vec<f64>> {
        self.path.spectrum_at(s, self.tol)
    }

    fn min_abs(&self, s: f64) -> Result<f64> {
        Ok(self
            .spectrum(s)?
            .iter()
            .fold(f64::INFINITY, |a, v| a.min(v.abs())))
    }

    fn zero_band(spec: &[f64], tol: &Tolerances) -> f64 {
        tol.zero_band(spec.iter().fold(0.0f64, |a, v| a.max(v.abs())))
    }

    fn negative_count(&self, s: f64) -> Result<i64> {
        let spec = self.spectrum(s)?;
        let z = Self::zero_band(&spec, self.tol);
        Ok(spec.iter().filter(|&&v| v < -z).count() as i64)
    }

    /// Golden-section minimisation of `min |λ(s)|` on `[lo, hi]`.
    fn golden(&self, mut lo: f64, mut hi: f64) -> Result<(f64, f64)> {
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let mut f1 = self.min_abs(x1)?;
        let mut f2 = self.min_abs(x2)?;
        while hi - lo > 1e-12 {
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = self.min_abs(x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = self.min_abs(x2)?;
            }
        }
        let t = 0.5 * (lo + hi);
        Ok((t, self.min_abs(t)?))
    }

    fn derivative(&self, t: f64, h: f64) -> CMat {
        let a = |s: f64| self.path.eval(s);
        if t - h >= 0.0 && t + h <= 1.0 {
            (a(t + h) - a(t - h)).scale(0.5 / h)
        } else if t + 2.0 * h <= 1.0 {
            (a(t).scale(-3.0) + a(t + h).scale(4.0) - a(t + 2.0 * h)).scale(0.5 / h)
        } else {
            (a(t).scale(3.0) - a(t - h).scale(4.0) + a(t - 2.0 * h)).scale(0.5 / h)
        }
    }
}

enum Local {
    Record(CrossingRecordSF),
    Irregular(String),
}

fn analyse(scan: &Scan, t: f64, kernel_tol: f64, opts: &CrossingOptions) -> Result<Local> {
    let metric = scan.path.metric_at(t, scan.tol)?;
    let aw = scan.path.whitened_at(t, scan.tol)?;
    let (vals, vecs) = eigh(&aw);
    let idx: Vec<usize> = (0..vals.len()).filter(|&k| vals[k].abs() < kernel_tol).collect();
    let n = aw.nrows();
    let mut kernel = CMat::zeros(n, idx.len());
    for (c, &k) in idx.iter().enumerate() {
        kernel.set_column(c, &vecs.column(k));
    }
    let d1 = scan.derivative(t, opts.h);
    let d2 = scan.derivative(t, 0.5 * opts.h);
    let rich = (d2.scale(4.0) - &d1).scale(1.0 / 3.0);
    let mismatch = max_abs(&(&rich - &d2)) / max_abs(&rich).max(1.0);
    if mismatch > opts.mismatch_tol {
        return Ok(Local::Irregular(format!("derivative estimate unstable ({mismatch:.2e})")));
    }
    let b = linalg::hermitian_part(&(kernel.adjoint() * metric.whiten_op(&rich) * &kernel));
    let ev = linalg::eigvalsh(&b);
    let thr = opts.regular_tol * max_abs(&rich).max(1.0);
    if ev.iter().any(|v| v.abs() < thr) {
        return Ok(Local::Irregular("restricted derivative is singular".into()));
    }
    let mp = ev.iter().filter(|&&v| v > 0.0).count();
    let mm = ev.len() - mp;
    let contribution = if t <= 0.0 {
        -(mm as i64)
    } else if t >= 1.0 {
        mp as i64
    } else {
        mp as i64 - mm as i64
    };
    Ok(Local::Record(CrossingRecordSF {
        t,
        nullity: idx.len(),
        b_restricted: b,
        signature: (mp, 0, mm),
        contribution,
    }))
}

/// Spectral flow of a Hermitian path by summing crossing contributions.
pub fn sf_crossing(path: &OperatorPath, opts: CrossingOptions, tol: &Tolerances) -> Result<CrossingReport> {
    if path.kind() != PathKind::Hermitian {
        return Err(Error::InvalidInput(
            "the crossing engine handles Hermitian paths only".into(),
        ));
    }
    let scan = Scan { path, tol };
    let n = if opts.grid == 0 { 4 * path.sample_hint() } else { opts.grid }.max(2);
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let specs = grid.iter().map(|&s| scan.spectrum(s)).collect::<Result<Vec<_>>>()?;
    let f: Vec<f64> = specs
        .iter()
        .map(|sp| sp.iter().fold(f64::INFINITY, |a, v| a.min(v.abs())))
        .collect();
    let norm = specs
        .iter()
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let kernel_tol = 1e-6 * norm.max(1.0);

    let mut times: Vec<(f64, f64)> = Vec::new();
    for (s, sp) in [(0.0, &specs[0]), (1.0, &specs[n])] {
        let z = Scan::zero_band(sp, tol);
        if sp.iter().any(|v| v.abs() < z) {
            times.push((s, z));
        }
    }
    for i in 0..=n {
        let left = if i > 0 { f[i - 1] } else { f64::INFINITY };
        let right = if i < n { f[i + 1] } else { f64::INFINITY };
        if f[i] > left || f[i] > right {
            continue;
        }
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(n)];
        let (t, g) = scan.golden(lo, hi)?;
        if g < kernel_tol && t > 1e-9 && t < 1.0 - 1e-9 {
            times.push((t, kernel_tol));
        }
    }
    times.sort_by(|a, b| a.0.total_cmp(&b.0));
    times.dedup_by(|b, a| (b.0 - a.0).abs() < 1e-8);

    let mut crossings = Vec::new();
    let mut fallbacks = Vec::new();
    let mut total = 0i64;
    let k = times.len();
    let mut cells = vec![0.0];
    for w in times.windows(2) {
        cells.push(0.5 * (w[0].0 + w[1].0));
    }
    cells.push(1.0);
    let fallback = |s0: f64, s1: f64, reason: String| -> Result<Fallback> {
        let sub = path.restrict(s0, s1).with_sample_hint(16);
        let (value, _) = sf_partition(&sub, tol)?;
        Ok(Fallback { s0, s1, reason, value })
    };
    if k == 0 {
        let expected = scan.negative_count(0.0)? - scan.negative_count(1.0)?;
        if expected != 0 {
            let fb = fallback(0.0, 1.0, "eigenvalue count changed without a located crossing".into())?;
            total += fb.value;
            fallbacks.push(fb);
        }
        return Ok(CrossingReport { total, crossings, fallbacks });
    }
    for (j, &(t, ktol)) in times.iter().enumerate() {
        let (c0, c1) = (cells[j], cells[j + 1]);
        let expected = scan.negative_count(c0)? - scan.negative_count(c1)?;
        match analyse(&scan, t, ktol, &opts)? {
            Local::Record(rec) if rec.contribution == expected => {
                total += rec.contribution;
                crossings.push(rec);
            }
            Local::Record(rec) => {
                let fb = fallback(
                    c0,
                    c1,
                    format!(
                        "crossing at {:.6} gives {} but the eigenvalue count changes by {}",
                        rec.t, rec.contribution, expected
                    ),
                )?;
                total += fb.value;
                fallbacks.push(fb);
            }
            Local::Irregular(reason) => {
                let fb = fallback(c0, c1, reason)?;
                total += fb.value;
                fallbacks.push(fb);
            }
        }
    }
    Ok(CrossingReport { total, crossings, fallbacks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::diag_real;

    fn run(p: &OperatorPath) -> CrossingReport {
        sf_crossing(p, CrossingOptions::default(), &Tolerances::default()).unwrap()
    }

    #[test]
    fn single_crossing() {
        let r = run(&OperatorPath::hermitian(1, |s| diag_real(&[2.0 * s - 1.0])));
        assert_eq!(r.total, 1);
        assert_eq!(r.crossings.len(), 1);
        assert!((r.crossings[0].t - 0.5).abs() < 1e-9);
        assert!((r.crossings[0].b_restricted[(0, 0)].re - 2.0).abs() < 1e-6);
        assert!(r.fallbacks.is_empty());
    }

    #[test]
    fn opposite_crossings_cancel() {
        let r = run(&OperatorPath::hermitian(2, |s| diag_real(&[s - 0.5, 0.5 - s])));
        assert_eq!(r.total, 0);
        assert_eq!(r.crossings.len(), 1);
        assert_eq!(r.crossings[0].signature, (1, 0, 1));
    }

    #[test]
    fn no_crossings() {
        let r = run(&OperatorPath::hermitian(2, |s| diag_real(&[1.0 + s, -1.0])));
        assert_eq!(r.total, 0);
        assert!(r.crossings.is_empty());
    }

    #[test]
    fn endpoint_crossings() {
        assert_eq!(run(&OperatorPath::hermitian(1, |s| diag_real(&[s - 1.0]))).total, 1);
        assert_eq!(run(&OperatorPath::hermitian(1, |s| diag_real(&[-s]))).total, -1);
        assert_eq!(run(&OperatorPath::hermitian(1, |s| diag_real(&[s]))).total, 0);
    }

    #[test]
    fn tangential_touch_falls_back() {
        let r = run(&OperatorPath::hermitian(1, |s| diag_real(&[(s - 0.5) * (s - 0.5)])));
        assert_eq!(r.total, 0);
        assert_eq!(r.fallbacks.len(), 1);
    }
}
