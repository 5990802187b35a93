//! Partition algorithm for the spectral flow.
//!
//! `[0, 1]` is cut into segments `[s_k, s_{k+1}]`. Each segment gets an
//! anchor `t_k` and a window radius `r_k` such that no eigenvalue touches
//! `|λ| = r_k` anywhere on the segment. The flow is the sum over segments
//! of `m^-(s_k) - m^-(s_{k+1})`, where `m^-` counts eigenvalues inside the
//! window strictly on the negative side of the zero band.

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CoOrientation, OperatorPath, PathKind};
use crate::error::{Error, Result};
use crate::tol::Tolerances;

/// Anything that can report the spectrum near the curve along a path.
pub trait SpectrumSource {
    /// Sorted signed spectral coordinates at `s`. Sources that only see a
    /// window of the spectrum must report every value of modulus below
    /// [`radius_cap`](Self::radius_cap) and may report more.
    fn spectrum(&self, s: f64) -> Result<Vec<f64>>;

    /// Largest admissible window radius.
    fn radius_cap(&self) -> f64;

    /// Half-width of the band treated as "on the curve".
    fn zero_band(&self, s: f64, spectrum: &[f64]) -> f64;
}

/// Spectrum source backed by an [`OperatorPath`].
pub struct MatrixPathSource<'a> {
    pub path: &'a OperatorPath,
    pub tol: Tolerances,
}

impl SpectrumSource for MatrixPathSource<'_> {
    fn spectrum(&self, s: f64) -> Result<Vec<f64>> {
        self.path.spectrum_at(s, &self.tol)
    }

    fn radius_cap(&self) -> f64 {
        match self.path.kind() {
            PathKind::Hermitian => f64::INFINITY,
            PathKind::Unitary => std::f64::consts::PI,
        }
    }

    fn zero_band(&self, _s: f64, spectrum: &[f64]) -> f64 {
        match self.path.kind() {
            PathKind::Hermitian => {
                let norm = spectrum.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                self.tol.zero_band(norm)
            }
            PathKind::Unitary => self.tol.zero_band(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PartitionOptions {
    pub sample_hint: usize,
    pub max_depth: u32,
    pub orientation: CoOrientation,
}

impl Default for PartitionOptions {
    fn default() -> Self {
        Self {
            sample_hint: 64,
            max_depth: 20,
            orientation: CoOrientation::Standard,
        }
    }
}

/// Record of a partition computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowComputation {
    pub partition: Vec<f64>,
    pub anchors: Vec<f64>,
    pub window_radii: Vec<f64>,
    pub segment_terms: Vec<i64>,
    pub total: i64,
}

impl FlowComputation {
    /// Same record for the negated flow.
    pub fn negated(mut self) -> Self {
        for t in &mut self.segment_terms {
            *t = -*t;
        }
        self.total = -self.total;
        self
    }
}

/// Spectral flow of a matrix path with the standard co-orientation.
pub fn sf_partition(path: &OperatorPath, tol: &Tolerances) -> Result<(i64, FlowComputation)> {
    let opts = PartitionOptions {
        sample_hint: path.sample_hint(),
        ..Default::default()
    };
    let fc = sf_partition_with(&MatrixPathSource { path, tol: *tol }, opts)?;
    Ok((fc.total, fc))
}

struct Engine<'a, S: SpectrumSource + ?Sized> {
    source: &'a S,
    opts: PartitionOptions,
    cache: RefCell<HashMap<u64, Vec<f64>>>,
}

impl<S: SpectrumSource + ?Sized> Engine<'_, S> {
    fn spectrum(&self, s: f64) -> Result<Vec<f64>> {
        if let Some(v) = self.cache.borrow().get(&s.to_bits()) {
            return Ok(v.clone());
        }
        let v = self.source.spectrum(s)?;
        self.cache.borrow_mut().insert(s.to_bits(), v.clone());
        Ok(v)
    }

    /// Count on the negative side of the curve, inside the window.
    fn negative_count(&self, s: f64, spec: &[f64], r: f64) -> i64 {
        let z = self.source.zero_band(s, spec);
        spec.iter()
            .filter(|&&v| match self.opts.orientation {
                CoOrientation::Standard => v > -r && v < -z,
                CoOrientation::Reversed => v > z && v < r,
            })
            .count() as i64
    }

    /// Midpoint of the widest gap in `{0} ∪ {|λ|} ∪ {cap}`.
    fn choose_radius(&self, spec: &[f64]) -> (f64, f64) {
        let cap = self.source.radius_cap();
        let mut pts: Vec<f64> = spec.iter().map(|v| v.abs()).filter(|&a| a < cap).collect();
        pts.push(0.0);
        pts.sort_by(|a, b| a.total_cmp(b));
        let top = *pts.last().unwrap();
        pts.push(if cap.is_finite() { cap } else { 2.0 * top + 1.0 });
        let mut best = (0.0, 0.0);
        for w in pts.windows(2) {
            let width = w[1] - w[0];
            if width > best.1 - best.0 {
                best = (w[0], w[1]);
            }
        }
        let r = 0.5 * (best.0 + best.1);
        (r, 0.5 * (best.1 - best.0))
    }

    fn window_ok(&self, spec: &[f64], r: f64, margin: f64, count: usize) -> bool {
        spec.iter().all(|v| (v.abs() - r).abs() > margin)
            && spec.iter().filter(|v| v.abs() < r).count() == count
    }

    fn segment(&self, a: f64, b: f64, depth: u32, out: &mut FlowComputation) -> Result<()> {
        let t = 0.5 * (a + b);
        let spec_t = self.spectrum(t)?;
        let (r, half_gap) = self.choose_radius(&spec_t);
        let margin = 0.1 * half_gap;
        let count = spec_t.iter().filter(|v| v.abs() < r).count();
        let mut accepted = true;
        // coarse level (ends and anchor), then the doubled level
        for pts in [&[0usize, 4][..], &[1, 3][..]] {
            for &j in pts {
                let s = a + (b - a) * j as f64 / 4.0;
                let spec = self.spectrum(s)?;
                if !self.window_ok(&spec, r, margin, count) {
                    accepted = false;
                    break;
                }
            }
            if !accepted {
                break;
            }
        }
        if accepted {
            let sa = self.spectrum(a)?;
            let sb = self.spectrum(b)?;
            let term = self.negative_count(a, &sa, r) - self.negative_count(b, &sb, r);
            out.anchors.push(t);
            out.window_radii.push(r);
            out.segment_terms.push(term);
            out.partition.push(b);
            return Ok(());
        }
        if depth >= self.opts.max_depth {
            return Err(Error::NonConvergent {
                s0: a,
                s1: b,
                reason: format!("no admissible window radius after {depth} bisections"),
            });
        }
        self.segment(a, t, depth + 1, out)?;
        self.segment(t, b, depth + 1, out)
    }
}

/// Partition algorithm over an arbitrary spectrum source on `[0, 1]`.
pub fn sf_partition_with<S: SpectrumSource + ?Sized>(
    source: &S,
    opts: PartitionOptions,
) -> Result<FlowComputation> {
    let engine = Engine {
        source,
        opts,
        cache: RefCell::new(HashMap::new()),
    };
    let n = opts.sample_hint.max(1);
    let mut out = FlowComputation {
        partition: vec![0.0],
        anchors: Vec::new(),
        window_radii: Vec::new(),
        segment_terms: Vec::new(),
        total: 0,
    };
    for k in 0..n {
        let a = k as f64 / n as f64;
        let b = (k + 1) as f64 / n as f64;
        engine.segment(a, b, 0, &mut out)?;
    }
    out.total = out.segment_terms.iter().sum();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c64, diag_real, CMat};
    use num_complex::Complex64;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn sf(path: &OperatorPath) -> i64 {
        sf_partition(path, &tol()).unwrap().0
    }

    #[test]
    fn constant_path_has_zero_flow() {
        let p = OperatorPath::constant(PathKind::Hermitian, diag_real(&[1.0, -2.0, 0.0]));
        assert_eq!(sf(&p), 0);
    }

    #[test]
    fn single_upward_crossing() {
        let p = OperatorPath::hermitian(2, |s| diag_real(&[2.0 * s - 1.0, 1.0]));
        let (total, fc) = sf_partition(&p, &tol()).unwrap();
        assert_eq!(total, 1);
        assert_eq!(fc.segment_terms.iter().sum::<i64>(), total);
        assert_eq!(fc.partition.len(), fc.anchors.len() + 1);
    }

    #[test]
    fn unitary_phase_crossing() {
        let p = OperatorPath::unitary(1, |s| {
            CMat::from_element(1, 1, Complex64::from_polar(1.0, std::f64::consts::PI * (2.0 * s - 1.0)))
        });
        assert_eq!(sf(&p), 1);
    }

    #[test]
    fn endpoint_conventions() {
        let arrive = OperatorPath::hermitian(1, |s| diag_real(&[s - 1.0]));
        assert_eq!(sf(&arrive), 1);
        let leave = OperatorPath::hermitian(1, |s| diag_real(&[-s]));
        assert_eq!(sf(&leave), -1);
    }

    #[test]
    fn reversed_orientation() {
        let arrive = OperatorPath::hermitian(1, |s| diag_real(&[s - 1.0]));
        let fc = sf_partition_with(
            &MatrixPathSource { path: &arrive, tol: tol() },
            PartitionOptions {
                orientation: CoOrientation::Reversed,
                ..Default::default()
            },
        )
        .unwrap();
        // SF + SF_reversed = nullity(A_1) - nullity(A_0) = 1
        assert_eq!(fc.total, 0);
    }

    #[test]
    fn jump_through_window_edge_fails_to_converge() {
        // the phase jumps across every admissible window radius
        let p = OperatorPath::unitary(1, |s| {
            let phase = if s < 0.3 { 0.5 } else { 2.9 };
            CMat::from_element(1, 1, Complex64::from_polar(1.0, phase))
        });
        let err = sf_partition(&p, &tol()).unwrap_err();
        assert!(matches!(err, Error::NonConvergent { .. }));
    }

    #[test]
    fn non_unitary_rejected() {
        let p = OperatorPath::unitary(1, |_| CMat::from_element(1, 1, c64(2.0, 0.0)));
        assert!(matches!(sf_partition(&p, &tol()), Err(Error::NotUnitary { .. })));
    }
}
