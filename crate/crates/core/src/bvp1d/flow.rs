//! Both sides of the spectral flow formula for a [`Scenario`]: the spectral
//! flow of `A_s` with its boundary condition, and minus the Maslov index of
//! the boundary path against the Cauchy data path `graph T(s, 0)`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::spectrum::{interpolation_radius, window_eigenvalues, BoundaryRatio, Eigenvalue};
use super::transfer::{calibrate_steps, graph_frame, ChebyshevTransfer, Slice, StepControl};
use super::{boundary_symplectic, eigenvalue_condition, eigenvalues_in_window, flatten, FirstOrderSystem, Scenario};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::maslov::{maslov_index_with, maslov_via_crossings, LagrangianPath, MaslovOptions, SymplecticFamily};
use crate::specflow::{sf_partition_with, FlowComputation, PartitionOptions, SpectrumSource};
use crate::sympcore::{gap_distance, SubspaceFrame, SymplecticSpace};
use crate::tol::Tolerances;
use crate::tracking::{track_flow, TrackingOptions};

/// Settings for [`verify_gsff`].
#[derive(Debug, Clone, Copy)]
pub struct VerifyOptions {
    pub sf_sample_hint: usize,
    pub oracle_grid: usize,
    pub maslov_sample_hint: usize,
    /// Also run the crossing-form engine on the Maslov side.
    pub crossings: bool,
    pub timings: bool,
    pub step: StepControl,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            sf_sample_hint: 8,
            oracle_grid: 32,
            maslov_sample_hint: 64,
            crossings: true,
            timings: false,
            step: StepControl::default(),
        }
    }
}

type TransferCache = Arc<Mutex<HashMap<u64, CMat>>>;

/// Per-scenario state shared by the engines: calibrated step count, the
/// boundary symplectic space and caches of spectra and transfer matrices.
pub struct OdeProblem<'a> {
    scenario: &'a Scenario,
    tol: Tolerances,
    space: SymplecticSpace,
    steps: usize,
    spectra: Mutex<HashMap<u64, Vec<Eigenvalue>>>,
    at_zero: TransferCache,
}

impl<'a> OdeProblem<'a> {
    pub fn new(scenario: &'a Scenario, step: &StepControl, tol: &Tolerances) -> Result<Self> {
        scenario.validate()?;
        let space = boundary_symplectic(scenario.system.sigma(), tol)?;
        let steps = calibrate_steps(&scenario.system, interpolation_radius(scenario.window), step)?;
        Ok(Self {
            scenario,
            tol: *tol,
            space,
            steps,
            spectra: Mutex::new(HashMap::new()),
            at_zero: Arc::new(Mutex::new(HashMap::new())),
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn space(&self) -> &SymplecticSpace {
        &self.space
    }

    /// Eigenvalues in the window at `s`; the window is widened slightly when
    /// an eigenvalue sits on its edge.
    pub fn eigenvalues(&self, s: f64) -> Result<Vec<Eigenvalue>> {
        if let Some(v) = self.spectra.lock().unwrap().get(&s.to_bits()) {
            return Ok(v.clone());
        }
        let lambda = self.scenario.window;
        let r = interpolation_radius(lambda);
        let ratio = BoundaryRatio::new(&self.space, &self.scenario.boundary.eval(s), &self.tol)?;
        let slice = Slice::new(&self.scenario.system, s, self.steps);
        let cheb = ChebyshevTransfer::build(&slice, -r, r, 1e-11)?;
        let mut result = window_eigenvalues(&ratio, &cheb, lambda);
        for k in 1..=3 {
            match result {
                Err(Error::WindowEdge { .. }) => {
                    result = window_eigenvalues(&ratio, &cheb, lambda * (1.0 + 5e-3 * k as f64));
                }
                _ => break,
            }
        }
        let ev = result?;
        self.spectra.lock().unwrap().insert(s.to_bits(), ev.clone());
        Ok(ev)
    }

    pub fn spectrum(&self, s: f64) -> Result<Vec<f64>> {
        Ok(flatten(&self.eigenvalues(s)?))
    }

    fn zero_band(&self) -> f64 {
        self.tol.zero_band(self.scenario.window)
    }

    /// `T(s, 0)` with the calibrated step count.
    pub fn transfer_at_zero(&self, s: f64) -> CMat {
        transfer_cached(&self.at_zero, &self.scenario.system, self.steps, s)
    }

    /// The Cauchy data path `s -> graph T(s, 0)`.
    pub fn cauchy_path(&self) -> LagrangianPath {
        let cache = self.at_zero.clone();
        let system = self.scenario.system.clone();
        let steps = self.steps;
        LagrangianPath::new(2 * system.m(), move |s| {
            graph_frame(&transfer_cached(&cache, &system, steps, s))
        })
    }

    pub fn family(&self) -> SymplecticFamily {
        SymplecticFamily::constant(self.space.clone())
    }

    /// Spectral flow by the partition algorithm on the windowed spectra.
    pub fn spectral_flow(&self, sample_hint: usize) -> Result<FlowComputation> {
        sf_partition_with(
            &WindowSource { problem: self },
            PartitionOptions {
                sample_hint,
                ..Default::default()
            },
        )
    }

    /// Spectral flow by tracking eigenvalue curves.
    pub fn sf_oracle(&self, grid: usize) -> Result<i64> {
        let z = self.zero_band();
        let r = track_flow(
            |s| self.spectrum(s),
            |_, _| z,
            TrackingOptions {
                initial_grid: grid,
                edge: 0.5 * self.scenario.window,
                ..Default::default()
            },
        )?;
        Ok(r.total)
    }
}

fn transfer_cached(cache: &TransferCache, system: &FirstOrderSystem, steps: usize, s: f64) -> CMat {
    if let Some(t) = cache.lock().unwrap().get(&s.to_bits()) {
        return t.clone();
    }
    let t = Slice::new(system, s, steps).transfer(0.0);
    cache.lock().unwrap().insert(s.to_bits(), t.clone());
    t
}

struct WindowSource<'p, 'a> {
    problem: &'p OdeProblem<'a>,
}

impl SpectrumSource for WindowSource<'_, '_> {
    fn spectrum(&self, s: f64) -> Result<Vec<f64>> {
        self.problem.spectrum(s)
    }

    fn radius_cap(&self) -> f64 {
        0.5 * self.problem.scenario.window
    }

    fn zero_band(&self, _s: f64, _spectrum: &[f64]) -> f64 {
        self.problem.zero_band()
    }
}

/// Spectral flow of the scenario (partition algorithm).
pub fn spectral_flow(scenario: &Scenario) -> Result<i64> {
    let p = OdeProblem::new(scenario, &StepControl::default(), &Tolerances::default())?;
    Ok(p.spectral_flow(VerifyOptions::default().sf_sample_hint)?.total)
}

/// Spectral flow of the scenario by eigenvalue tracking.
pub fn sf_oracle(scenario: &Scenario) -> Result<i64> {
    let p = OdeProblem::new(scenario, &StepControl::default(), &Tolerances::default())?;
    p.sf_oracle(VerifyOptions::default().oracle_grid)
}

/// Invertibility certificate for `T(s, 0)`: a solution of `A_s x = 0` with
/// `x(0) = 0` vanishes identically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UcpCertificate {
    pub holds: bool,
    /// Smallest singular value of `T(s, 0)` over the sampled `s`.
    pub min_singular_value: f64,
    pub samples: usize,
}

pub fn ucp_check(system: &FirstOrderSystem, s: f64) -> Result<UcpCertificate> {
    let t = super::transfer_matrix(system, s, 0.0)?;
    let sv = linalg::smallest_singular_value(&t);
    Ok(UcpCertificate {
        holds: sv > Tolerances::default().rank_cutoff(linalg::spectral_norm(&t)),
        min_singular_value: sv,
        samples: 1,
    })
}

/// [`ucp_check`] swept over `n + 1` equispaced values of `s`.
pub fn ucp_sweep(problem: &OdeProblem, n: usize) -> UcpCertificate {
    let mut min_sv = f64::INFINITY;
    let mut holds = true;
    for i in 0..=n {
        let t = problem.transfer_at_zero(i as f64 / n as f64);
        let sv = linalg::smallest_singular_value(&t);
        holds &= sv > problem.tol.rank_cutoff(linalg::spectral_norm(&t));
        min_sv = min_sv.min(sv);
    }
    UcpCertificate {
        holds,
        min_singular_value: min_sv,
        samples: n + 1,
    }
}

/// Gap increments between consecutive frames of a path on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    /// Left ends of the grid intervals.
    pub s: Vec<f64>,
    pub increments: Vec<f64>,
    pub max_increment: f64,
}

pub fn cauchy_gap_profile(path: &LagrangianPath, n: usize) -> GapProfile {
    let frames: Vec<SubspaceFrame> = (0..=n).map(|i| path.eval(i as f64 / n as f64)).collect();
    let increments: Vec<f64> = frames.windows(2).map(|w| gap_distance(&w[0], &w[1])).collect();
    GapProfile {
        s: (0..n).map(|i| i as f64 / n as f64).collect(),
        max_increment: increments.iter().copied().fold(0.0, f64::max),
        increments,
    }
}

/// Continuity summary: the largest increment on `n` and `2n` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CauchyContinuity {
    pub samples: usize,
    pub max_increment: f64,
    pub max_increment_doubled: f64,
    /// `max_increment_doubled / max_increment`; absent for constant paths.
    pub ratio: Option<f64>,
}

impl CauchyContinuity {
    pub fn from_path(path: &LagrangianPath, n: usize) -> Self {
        let a = cauchy_gap_profile(path, n).max_increment;
        let b = cauchy_gap_profile(path, 2 * n).max_increment;
        Self {
            samples: n,
            max_increment: a,
            max_increment_doubled: b,
            ratio: (a > 1e-12).then(|| b / a),
        }
    }

    /// Doubling the grid halves the increment within `±rel`.
    pub fn halves(&self, rel: f64) -> bool {
        match self.ratio {
            Some(r) => (r - 0.5).abs() <= 0.5 * rel,
            None => self.max_increment_doubled <= 1e-12,
        }
    }
}

/// One crossing of the boundary and Cauchy paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingEntry {
    pub t: f64,
    /// `(m^+, m^0, m^-)` of the crossing form.
    pub signature: (usize, usize, usize),
    pub contribution: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub spectral_flow_ms: f64,
    pub oracle_ms: f64,
    pub maslov_ms: f64,
    pub total_ms: f64,
}

/// Outcome of checking `SF{A_s} = -Mas{boundary, Cauchy data}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    pub label: String,
    pub seed: Option<u64>,
    pub m: usize,
    pub window: f64,
    pub sf_partition: i64,
    pub sf_oracle: i64,
    pub maslov_partition: i64,
    pub maslov_crossings: Option<i64>,
    pub gsff_lhs: i64,
    pub gsff_rhs: i64,
    /// `sf_partition == -maslov_partition`.
    pub equal: bool,
    pub oracle_agrees: bool,
    pub crossings: Vec<CrossingEntry>,
    pub cauchy_gap_profile: CauchyContinuity,
    pub ucp: UcpCertificate,
    pub integrator_steps: usize,
    pub tolerances: Tolerances,
    pub sf_computation: FlowComputation,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<Timings>,
}

impl FlowReport {
    /// Every engine agrees.
    pub fn passed(&self) -> bool {
        self.equal && self.oracle_agrees && self.maslov_crossings.map_or(true, |c| c == self.maslov_partition)
    }
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Computes both sides of the spectral flow formula and the supporting
/// diagnostics.
pub fn verify_gsff(scenario: &Scenario, opts: &VerifyOptions, tol: &Tolerances) -> Result<FlowReport> {
    let start = Instant::now();
    let problem = OdeProblem::new(scenario, &opts.step, tol)?;
    let ucp = ucp_sweep(&problem, 32);
    if !ucp.holds {
        return Err(Error::Singular(format!(
            "transfer matrix at zero is not invertible (smallest singular value {:.3e})",
            ucp.min_singular_value
        )));
    }

    let t0 = Instant::now();
    let sf = problem.spectral_flow(opts.sf_sample_hint)?;
    let sf_ms = ms(t0);

    let t0 = Instant::now();
    let oracle = problem.sf_oracle(opts.oracle_grid)?;
    let oracle_ms = ms(t0);

    let t0 = Instant::now();
    let cauchy = problem.cauchy_path();
    let family = problem.family();
    let (mas, _) = maslov_index_with(
        &scenario.boundary,
        &cauchy,
        &family,
        MaslovOptions {
            sample_hint: opts.maslov_sample_hint,
            check_lagrangian: true,
        },
        tol,
    )?;
    let mut notes = Vec::new();
    let mut crossings = Vec::new();
    let mut maslov_crossings = None;
    if opts.crossings {
        match maslov_via_crossings(&scenario.boundary, &cauchy, &family, tol) {
            Ok(sum) => {
                maslov_crossings = Some(sum.total);
                crossings = sum
                    .crossings
                    .iter()
                    .map(|c| {
                        let (mp, _, mm) = c.signature;
                        let contribution = if c.t == 0.0 {
                            mp as i64
                        } else if c.t == 1.0 {
                            -(mm as i64)
                        } else {
                            mp as i64 - mm as i64
                        };
                        CrossingEntry {
                            t: c.t,
                            signature: c.signature,
                            contribution,
                        }
                    })
                    .collect();
            }
            Err(e) if e.is_numerical() => notes.push(format!("crossing engine: {e}")),
            Err(e) => return Err(e),
        }
    }
    let maslov_ms = ms(t0);

    let continuity = CauchyContinuity::from_path(&cauchy, scenario.s_samples);
    let lhs = sf.total;
    let rhs = -mas;
    Ok(FlowReport {
        label: scenario.label.clone(),
        seed: scenario.seed,
        m: scenario.system.m(),
        window: scenario.window,
        sf_partition: lhs,
        sf_oracle: oracle,
        maslov_partition: mas,
        maslov_crossings,
        gsff_lhs: lhs,
        gsff_rhs: rhs,
        equal: lhs == rhs,
        oracle_agrees: oracle == lhs,
        crossings,
        cauchy_gap_profile: continuity,
        ucp,
        integrator_steps: problem.steps(),
        tolerances: *tol,
        sf_computation: sf,
        notes,
        timings: opts.timings.then(|| Timings {
            spectral_flow_ms: sf_ms,
            oracle_ms,
            maslov_ms,
            total_ms: ms(start),
        }),
    })
}

/// Eigenvalue curves on a uniform grid, for plotting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenCurves {
    pub s: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

pub fn eigen_curves(problem: &OdeProblem, n: usize) -> Result<EigenCurves> {
    let s: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let values = s.iter().map(|&x| problem.spectrum(x)).collect::<Result<Vec<_>>>()?;
    Ok(EigenCurves { s, values })
}

fn window_with_retry(system: &FirstOrderSystem, s0: f64, boundary: &SubspaceFrame, lambda: f64) -> Result<Vec<Eigenvalue>> {
    match eigenvalues_in_window(system, s0, boundary, lambda) {
        Err(Error::WindowEdge { .. }) => eigenvalues_in_window(system, s0, boundary, 1.25 * lambda),
        r => r,
    }
}

/// `(SF{A + aI : a ∈ [0, ε]}, Σ_{a ∈ (0, ε]} dim ker(A + aI))` for `A` the
/// operator at `s0` with boundary condition `boundary`.
pub fn perturbation_flow(
    system: &FirstOrderSystem,
    s0: f64,
    boundary: &SubspaceFrame,
    eps: f64,
) -> Result<(i64, i64)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    let tol = Tolerances::default();
    let lambda = 2.0 * eps;
    let z = tol.zero_band(eps.max(1.0));
    let base = window_with_retry(system, s0, boundary, lambda)?;
    for e in &base {
        let gap = (e.value + eps).abs();
        if gap < z.max(1e-8) {
            return Err(Error::BoundaryCollision {
                value: e.value,
                boundary: -eps,
                gap,
            });
        }
    }
    let mut kernels = 0i64;
    for e in &base {
        if e.value >= -eps && e.value < -z {
            let c = eigenvalue_condition(system, s0, boundary, e.value)?;
            if c > 1e-6 {
                return Err(Error::NonConvergent {
                    s0: e.value,
                    s1: e.value,
                    reason: format!("root of the eigenvalue condition not confirmed ({c:.3e})"),
                });
            }
            kernels += e.multiplicity as i64;
        }
    }

    struct Shifted<'a> {
        system: &'a FirstOrderSystem,
        s0: f64,
        boundary: &'a SubspaceFrame,
        eps: f64,
        z: f64,
    }
    impl SpectrumSource for Shifted<'_> {
        fn spectrum(&self, tau: f64) -> Result<Vec<f64>> {
            let shifted = self.system.with_shift(self.eps * tau);
            Ok(flatten(&window_with_retry(&shifted, self.s0, self.boundary, 2.0 * self.eps)?))
        }
        fn radius_cap(&self) -> f64 {
            self.eps
        }
        fn zero_band(&self, _s: f64, _spectrum: &[f64]) -> f64 {
            self.z
        }
    }
    let fc = sf_partition_with(
        &Shifted {
            system,
            s0,
            boundary,
            eps,
            z,
        },
        PartitionOptions {
            sample_hint: 4,
            ..Default::default()
        },
    )?;
    Ok((fc.total, kernels))
}
