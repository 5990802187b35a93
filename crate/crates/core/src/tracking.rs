//! Brute-force spectral flow by following eigenvalue curves.
//!
//! The spectrum is sampled on a grid; consecutive samples are matched in
//! sorted order (with an offset when eigenvalues enter or leave a finite
//! window). A step is trusted when every matched eigenvalue moves by less
//! than a third of the smallest gap between distinct eigenvalues; otherwise
//! the step is bisected. Each matched curve contributes `+1` when it leaves
//! the negative side and `-1` when it enters it, with eigenvalues inside the
//! zero band counted as non-negative.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct TrackingOptions {
    pub initial_grid: usize,
    pub max_depth: u32,
    /// Eigenvalues closer than this are treated as one cluster.
    pub cluster_tol: f64,
    /// Unmatched eigenvalues are only allowed beyond this modulus (windowed
    /// spectra); `f64::INFINITY` forbids them.
    pub edge: f64,
}

impl Default for TrackingOptions {
    fn default() -> Self {
        Self {
            initial_grid: 64,
            max_depth: 20,
            cluster_tol: 1e-6,
            edge: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackingResult {
    pub total: i64,
    /// Grid actually used, after refinement.
    pub grid: Vec<f64>,
}

/// Matching of two sorted spectra: `a[i] <-> b[i + offset]`.
fn best_alignment(a: &[f64], b: &[f64], edge: f64) -> Option<(isize, f64)> {
    let na = a.len() as isize;
    let nb = b.len() as isize;
    let lo = -(na.min(3 + (na - nb).abs()));
    let hi = nb.min(3 + (na - nb).abs());
    let mut best: Option<(isize, f64)> = None;
    for k in lo..=hi {
        let mut ok = true;
        let mut disp = 0.0f64;
        for (i, &x) in a.iter().enumerate() {
            let j = i as isize + k;
            if j < 0 || j >= nb {
                if x.abs() <= edge {
                    ok = false;
                    break;
                }
            } else {
                disp = disp.max((b[j as usize] - x).abs());
            }
        }
        if !ok {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            let i = j as isize - k;
            if (i < 0 || i >= na) && y.abs() <= edge {
                ok = false;
                break;
            }
        }
        if ok && best.map_or(true, |(_, d)| disp < d) {
            best = Some((k, disp));
        }
    }
    best
}

fn separation(v: &[f64], cluster_tol: f64) -> f64 {
    v.windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| g > cluster_tol)
        .fold(f64::INFINITY, f64::min)
}

/// Signed crossing count of the spectra returned by `spectrum` on `[0, 1]`.
///
/// `zero_band` gives the half-width of the band treated as zero at a
/// sample, given that sample's spectrum.
pub fn track_flow<F, Z>(spectrum: F, zero_band: Z, opts: TrackingOptions) -> Result<TrackingResult>
where
    F: Fn(f64) -> Result<Vec<f64>>,
    Z: Fn(f64, &[f64]) -> f64,
{
    let n = opts.initial_grid.max(1);
    let mut grid = vec![0.0];
    let mut total = 0i64;
    let mut prev = spectrum(0.0)?;
    for k in 0..n {
        let a = k as f64 / n as f64;
        let b = (k + 1) as f64 / n as f64;
        let mut stack = vec![(a, b, 0u32)];
        let mut cur = prev.clone();
        let mut cur_s = a;
        // depth-first over subintervals keeps the left-to-right order
        while let Some((s0, s1, depth)) = stack.pop() {
            debug_assert!((s0 - cur_s).abs() < 1e-15);
            let next = spectrum(s1)?;
            let sep = separation(&cur, opts.cluster_tol).min(separation(&next, opts.cluster_tol));
            let aligned = best_alignment(&cur, &next, opts.edge);
            match aligned {
                Some((offset, disp)) if disp < sep / 3.0 => {
                    let z0 = zero_band(s0, &cur);
                    let z1 = zero_band(s1, &next);
                    for (i, &x) in cur.iter().enumerate() {
                        let j = i as isize + offset;
                        if j >= 0 && (j as usize) < next.len() {
                            let y = next[j as usize];
                            total += (x < -z0) as i64 - (y < -z1) as i64;
                        }
                    }
                    grid.push(s1);
                    cur = next;
                    cur_s = s1;
                }
                _ => {
                    if depth >= opts.max_depth {
                        return Err(Error::AmbiguousTracking { s0, s1 });
                    }
                    let mid = 0.5 * (s0 + s1);
                    stack.push((mid, s1, depth + 1));
                    stack.push((s0, mid, depth + 1));
                }
            }
        }
        prev = cur;
    }
    Ok(TrackingResult { total, grid })
}
