//! First-order formally self-adjoint systems `A_s = σ d/dt + B(s, t)` on
//! `[0, 1]`.
//!
//! Only the `2m`-dimensional boundary space `C^m ⊕ C^m` is represented: the
//! boundary condition of `A_s` is a Lagrangian subspace of it and the
//! solutions of `A_s x = μ x` appear through the graph of the transfer
//! matrix `x(0) -> x(1)`.

mod flow;
mod spectrum;
mod transfer;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{self, block_diag, CMat};
use crate::maslov::LagrangianPath;
use crate::sympcore::SymplecticSpace;
use crate::tol::Tolerances;

pub use flow::{
    cauchy_gap_profile, eigen_curves, perturbation_flow, sf_oracle, spectral_flow, ucp_check,
    ucp_sweep, verify_gsff, CauchyContinuity, CrossingEntry, EigenCurves, FlowReport, GapProfile,
    OdeProblem, Timings, UcpCertificate, VerifyOptions,
};
pub use spectrum::{eigenvalue_condition, eigenvalues_in_window, flatten, Eigenvalue};
pub use transfer::{
    calibrate_steps, cauchy_data, symplectic_residual, transfer_matrix, transfer_matrix_with, ChebyshevTransfer, Slice,
    StepControl,
};

/// Boundary conditions are Lagrangian paths in `C^{2m}`.
pub type BoundaryPath = LagrangianPath;

pub type PotentialFn = Arc<dyn Fn(f64, f64) -> CMat + Send + Sync>;

/// One harmonic `M cos(π f_s s + φ_s) cos(2π f_t t + φ_t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigTerm {
    pub matrix: CMat,
    pub s_freq: f64,
    pub s_phase: f64,
    pub t_freq: f64,
    pub t_phase: f64,
}

impl TrigTerm {
    fn weight(&self, s: f64, t: f64) -> f64 {
        (std::f64::consts::PI * self.s_freq * s + self.s_phase).cos()
            * (2.0 * std::f64::consts::PI * self.t_freq * t + self.t_phase).cos()
    }
}

/// The zeroth-order coefficient `B(s, t)`.
#[derive(Clone)]
pub enum Potential {
    Zero,
    /// `v0 + s v1`, independent of `t`.
    Affine { v0: CMat, v1: CMat },
    /// `base + Σ terms`.
    Trig { base: CMat, terms: Vec<TrigTerm> },
    /// Piecewise linear in `s` through the given samples, independent of `t`.
    Sampled { s: Vec<f64>, values: Vec<CMat> },
    Custom { f: PotentialFn, t_dependent: bool },
}

impl std::fmt::Debug for Potential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Potential::Zero => write!(f, "Zero"),
            Potential::Affine { v0, v1 } => f.debug_struct("Affine").field("v0", v0).field("v1", v1).finish(),
            Potential::Trig { base, terms } => {
                f.debug_struct("Trig").field("base", base).field("terms", terms).finish()
            }
            Potential::Sampled { s, values } => {
                f.debug_struct("Sampled").field("s", s).field("values", values).finish()
            }
            Potential::Custom { t_dependent, .. } => {
                f.debug_struct("Custom").field("t_dependent", t_dependent).finish_non_exhaustive()
            }
        }
    }
}

impl Potential {
    pub fn custom(t_dependent: bool, f: impl Fn(f64, f64) -> CMat + Send + Sync + 'static) -> Self {
        Potential::Custom {
            f: Arc::new(f),
            t_dependent,
        }
    }

    fn eval(&self, m: usize, s: f64, t: f64) -> CMat {
        match self {
            Potential::Zero => CMat::zeros(m, m),
            Potential::Affine { v0, v1 } => v0 + v1.scale(s),
            Potential::Trig { base, terms } => {
                let mut b = base.clone();
                for term in terms {
                    b += term.matrix.scale(term.weight(s, t));
                }
                b
            }
            Potential::Sampled { s: grid, values } => {
                let n = grid.len();
                if n == 1 || s <= grid[0] {
                    return values[0].clone();
                }
                if s >= grid[n - 1] {
                    return values[n - 1].clone();
                }
                let k = grid.partition_point(|&x| x <= s) - 1;
                let w = (s - grid[k]) / (grid[k + 1] - grid[k]);
                values[k].scale(1.0 - w) + values[k + 1].scale(w)
            }
            Potential::Custom { f, .. } => f(s, t),
        }
    }

    pub fn is_t_dependent(&self) -> bool {
        match self {
            Potential::Trig { terms, .. } => terms.iter().any(|t| t.t_freq != 0.0),
            Potential::Custom { t_dependent, .. } => *t_dependent,
            _ => false,
        }
    }

    fn matrices(&self) -> Vec<&CMat> {
        match self {
            Potential::Zero | Potential::Custom { .. } => Vec::new(),
            Potential::Affine { v0, v1 } => vec![v0, v1],
            Potential::Trig { base, terms } => {
                std::iter::once(base).chain(terms.iter().map(|t| &t.matrix)).collect()
            }
            Potential::Sampled { values, .. } => values.iter().collect(),
        }
    }
}

/// `A_s = σ d/dt + B(s, t) + shift` acting on `C^m`-valued functions.
#[derive(Debug, Clone)]
pub struct FirstOrderSystem {
    m: usize,
    sigma: CMat,
    sigma_inv: CMat,
    potential: Potential,
    shift: f64,
}

impl FirstOrderSystem {
    /// Validates `σ^H = -σ`, invertibility of `σ` and Hermiticity of `B` on a
    /// sample grid.
    pub fn new(sigma: CMat, potential: Potential, tol: &Tolerances) -> Result<Self> {
        let m = sigma.nrows();
        if m == 0 || sigma.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m.max(1),
                found: sigma.ncols(),
            });
        }
        let skew = linalg::max_abs(&(&sigma + sigma.adjoint()));
        if skew > tol.num * linalg::max_abs(&sigma).max(1.0) {
            return Err(Error::InvalidInput(format!(
                "sigma is not skew-adjoint (residual {skew:.3e})"
            )));
        }
        let sv = linalg::singular_values(&sigma);
        if *sv.last().unwrap() <= tol.rank_cutoff(sv[0]) {
            return Err(Error::Singular("sigma is not invertible".into()));
        }
        for b in potential.matrices() {
            if b.nrows() != m || b.ncols() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: b.nrows(),
                });
            }
        }
        if let Potential::Sampled { s, values } = &potential {
            if s.is_empty() || s.len() != values.len() || s.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::InvalidInput(
                    "sampled potential needs increasing knots, one matrix per knot".into(),
                ));
            }
        }
        let sigma_inv = linalg::inverse(&sigma)?;
        let sys = Self {
            m,
            sigma,
            sigma_inv,
            potential,
            shift: 0.0,
        };
        let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
        for &s in &grid {
            for &t in &grid {
                let b = sys.potential.eval(m, s, t);
                if b.nrows() != m || b.ncols() != m {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        found: b.nrows(),
                    });
                }
                let residual = linalg::hermitian_residual(&b);
                if residual > tol.num * linalg::max_abs(&b).max(1.0) {
                    return Err(Error::NotSelfAdjoint { residual });
                }
            }
        }
        Ok(sys)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn sigma(&self) -> &CMat {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &CMat {
        &self.sigma_inv
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// `B(s, t)` including the constant shift.
    pub fn b(&self, s: f64, t: f64) -> CMat {
        let mut b = self.potential.eval(self.m, s, t);
        if self.shift != 0.0 {
            for i in 0..self.m {
                b[(i, i)] += self.shift;
            }
        }
        b
    }

    pub fn is_t_dependent(&self) -> bool {
        self.potential.is_t_dependent()
    }

    /// The same system plus `a · I`.
    pub fn with_shift(&self, a: f64) -> Self {
        let mut s = self.clone();
        s.shift += a;
        s
    }

    /// Unitarily equivalent system `Q^H A Q`.
    pub fn conjugated(&self, q: &CMat, tol: &Tolerances) -> Result<Self> {
        let sigma = q.adjoint() * &self.sigma * q;
        let inner = self.clone();
        let q = q.clone();
        let t_dep = self.is_t_dependent();
        Self::new(
            sigma,
            Potential::custom(t_dep, move |s, t| q.adjoint() * inner.b(s, t) * &q),
            tol,
        )
    }
}

/// `C^{2m}` with `ω((x0, x1), (y0, y1)) = <σ x1, y1> - <σ x0, y0>`.
pub fn boundary_symplectic(sigma: &CMat, tol: &Tolerances) -> Result<SymplecticSpace> {
    let m = sigma.nrows();
    let j = block_diag(&(-sigma), sigma);
    SymplecticSpace::new(CMat::identity(2 * m, 2 * m), j, tol)
}

/// A boundary value problem family together with its evaluation settings.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub label: String,
    pub system: FirstOrderSystem,
    pub boundary: BoundaryPath,
    /// Half-width `Λ` of the spectral window.
    pub window: f64,
    /// Grid size for the Cauchy-data continuity profile.
    pub s_samples: usize,
    pub seed: Option<u64>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.window > 0.0) || !self.window.is_finite() {
            return Err(Error::InvalidInput(format!("window must be positive, got {}", self.window)));
        }
        if self.s_samples < 2 {
            return Err(Error::InvalidInput("s_samples must be at least 2".into()));
        }
        let n = 2 * self.system.m();
        if self.boundary.ambient_dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.boundary.ambient_dim(),
            });
        }
        let space = boundary_symplectic(self.system.sigma(), &Tolerances::default())?;
        for s in [0.0, 0.5, 1.0] {
            if !space.is_lagrangian(&self.boundary.eval(s), &Tolerances::default())? {
                return Err(Error::NotLagrangian(format!("boundary condition at s = {s}")));
            }
        }
        Ok(())
    }
}
