//! Scenario files, the built-in catalog, random scenarios and report output.
//!
//! Complex matrices are encoded in JSON as row-major nested lists of
//! `[re, im]` pairs.

mod catalog;
mod output;

use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::bvp1d::{boundary_symplectic, FirstOrderSystem, Potential, Scenario, TrigTerm};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat};
use crate::maslov::{LagrangianPath, SymplecticFamily};
use crate::sample;
use crate::specflow::{OperatorPath, PathKind};
use crate::sympcore::{SubspaceFrame, SymplecticSpace};
use crate::tol::Tolerances;

pub use crate::bvp1d::FlowReport;
pub use catalog::{catalog, catalog_entry, random_scenario, CATALOG_LABELS};
pub use output::{
    run_spec, write_curves_csv, write_gap_csv, write_summary_csv, SuiteEntry, SuiteSummary,
};

/// A complex matrix with the `[re, im]` JSON encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct JsonMat(pub CMat);

impl Serialize for JsonMat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        linalg::cmat_json::serialize(&self.0, s)
    }
}

impl<'de> Deserialize<'de> for JsonMat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        linalg::cmat_json::deserialize(d).map(JsonMat)
    }
}

impl From<CMat> for JsonMat {
    fn from(m: CMat) -> Self {
        JsonMat(m)
    }
}

fn schema(msg: impl Into<String>) -> Error {
    Error::Schema(msg.into())
}

fn check_shape(name: &str, m: &CMat, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(schema(format!(
            "{name}: expected a {rows}x{cols} matrix, found {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrigTermSpec {
    pub matrix: JsonMat,
    #[serde(default)]
    pub s_freq: f64,
    #[serde(default)]
    pub s_phase: f64,
    #[serde(default)]
    pub t_freq: f64,
    #[serde(default)]
    pub t_phase: f64,
}

/// `B(s, t)` in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialSpec {
    Zero,
    Constant {
        value: JsonMat,
    },
    /// `v0 + s v1`.
    Affine {
        v0: JsonMat,
        v1: JsonMat,
    },
    /// `base + Σ M cos(π s_freq s + s_phase) cos(2π t_freq t + t_phase)`.
    Trig {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<JsonMat>,
        terms: Vec<TrigTermSpec>,
    },
    /// Piecewise linear in `s` through samples.
    Sampled {
        s: Vec<f64>,
        values: Vec<JsonMat>,
    },
}

impl PotentialSpec {
    pub fn build(&self, m: usize) -> Result<Potential> {
        let sq = |name: &str, x: &JsonMat| check_shape(name, &x.0, m, m).map(|_| x.0.clone());
        Ok(match self {
            PotentialSpec::Zero => Potential::Zero,
            PotentialSpec::Constant { value } => Potential::Affine {
                v0: sq("potential.value", value)?,
                v1: CMat::zeros(m, m),
            },
            PotentialSpec::Affine { v0, v1 } => Potential::Affine {
                v0: sq("potential.v0", v0)?,
                v1: sq("potential.v1", v1)?,
            },
            PotentialSpec::Trig { base, terms } => Potential::Trig {
                base: match base {
                    Some(b) => sq("potential.base", b)?,
                    None => CMat::zeros(m, m),
                },
                terms: terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        Ok(TrigTerm {
                            matrix: sq(&format!("potential.terms[{i}].matrix"), &t.matrix)?,
                            s_freq: t.s_freq,
                            s_phase: t.s_phase,
                            t_freq: t.t_freq,
                            t_phase: t.t_phase,
                        })
                    })
                    .collect::<Result<_>>()?,
            },
            PotentialSpec::Sampled { s, values } => {
                if s.len() != values.len() || s.is_empty() {
                    return Err(schema("potential: `s` and `values` must be nonempty and of equal length"));
                }
                Potential::Sampled {
                    s: s.clone(),
                    values: values
                        .iter()
                        .enumerate()
                        .map(|(i, v)| sq(&format!("potential.values[{i}]"), v))
                        .collect::<Result<_>>()?,
                }
            }
        })
    }
}

/// A path of Lagrangian subspaces in a file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum LagrangianSpec {
    /// `x(1) = e^{iθ(s)} x(0)` with `θ` linear from `theta0` to `theta1`.
    Phase { theta0: f64, theta1: f64 },
    /// A fixed frame (`2m x m`).
    Fixed { frame: JsonMat },
    /// Frames at increasing knots, joined by geodesics of their generators.
    Frames { s: Vec<f64>, frames: Vec<JsonMat> },
    /// Graphs of the normalized generators `u0 exp(i s k)`.
    Generator { u0: JsonMat, k: JsonMat },
}

fn frame_of(space: &SymplecticSpace, name: &str, f: &JsonMat, tol: &Tolerances) -> Result<SubspaceFrame> {
    let n = space.dim();
    check_shape(name, &f.0, n, n / 2)?;
    let frame = SubspaceFrame::new(n, f.0.clone(), tol)?;
    if !space.is_lagrangian(&frame, tol)? {
        return Err(Error::NotLagrangian(name.to_string()));
    }
    Ok(frame)
}

impl LagrangianSpec {
    /// The path in `space` (whose dimension must be even with balanced
    /// signature).
    pub fn build(&self, space: &SymplecticSpace, tol: &Tolerances) -> Result<LagrangianPath> {
        let n = space.dim();
        let m = n / 2;
        let path = match self {
            LagrangianSpec::Phase { theta0, theta1 } => {
                let (a, b) = (*theta0, *theta1);
                LagrangianPath::new(n, move |s| {
                    let z = num_complex::Complex64::from_polar(1.0, a + (b - a) * s);
                    let f = linalg::vstack(&CMat::identity(m, m), &CMat::identity(m, m).map(|x| x * z));
                    SubspaceFrame::new(n, f, &Tolerances::default()).expect("graph frame")
                })
            }
            LagrangianSpec::Fixed { frame } => {
                LagrangianPath::constant(frame_of(space, "boundary.frame", frame, tol)?)
            }
            LagrangianSpec::Frames { s, frames } => {
                if s.is_empty() || s.len() != frames.len() {
                    return Err(schema("boundary: `s` and `frames` must be nonempty and of equal length"));
                }
                if s.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(schema("boundary: knots must increase"));
                }
                let gens = frames
                    .iter()
                    .enumerate()
                    .map(|(i, f)| {
                        let fr = frame_of(space, &format!("boundary.frames[{i}]"), f, tol)?;
                        Ok(space.lagrangian_to_unitary(&fr, tol)?.normalized())
                    })
                    .collect::<Result<Vec<_>>>()?;
                let logs = gens
                    .windows(2)
                    .map(|w| linalg::log_unitary(&(w[0].adjoint() * &w[1])))
                    .collect::<Result<Vec<_>>>()?;
                let knots = s.clone();
                let space = space.clone();
                LagrangianPath::new(n, move |x| {
                    let k = if knots.len() == 1 || x <= knots[0] {
                        0
                    } else {
                        (knots.partition_point(|&y| y <= x) - 1).min(knots.len() - 2)
                    };
                    let w = if knots.len() == 1 {
                        gens[0].clone()
                    } else {
                        let tau = ((x - knots[k]) / (knots[k + 1] - knots[k])).clamp(0.0, 1.0);
                        &gens[k] * linalg::expi_hermitian(&logs[k].scale(tau))
                    };
                    let g = sample::generator_from_unitary(&space, &w);
                    space
                        .unitary_to_lagrangian(&g, &Tolerances::default())
                        .expect("unitary generators give Lagrangians")
                })
            }
            LagrangianSpec::Generator { u0, k } => {
                check_shape("boundary.u0", &u0.0, m, m)?;
                check_shape("boundary.k", &k.0, m, m)?;
                let r = linalg::max_abs(&(u0.0.adjoint() * &u0.0 - CMat::identity(m, m)));
                if r > 1e-8 {
                    return Err(Error::NotUnitary { residual: r });
                }
                let h = linalg::hermitian_residual(&k.0);
                if h > 1e-8 {
                    return Err(Error::NotSelfAdjoint { residual: h });
                }
                LagrangianPath::from_generators(space, u0.0.clone(), k.0.clone())
            }
        };
        for s in [0.0, 0.5, 1.0] {
            if !space.is_lagrangian(&path.eval(s), tol)? {
                return Err(Error::NotLagrangian(format!("path at s = {s}")));
            }
        }
        Ok(path)
    }
}

fn default_s_samples() -> usize {
    256
}

/// A scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub m: usize,
    pub sigma: JsonMat,
    pub potential: PotentialSpec,
    pub boundary: LagrangianSpec,
    pub window: f64,
    #[serde(default = "default_s_samples")]
    pub s_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| schema(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Schema(msg) => Error::Schema(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| "scenario".into())
    }

    pub fn build(&self, tol: &Tolerances) -> Result<Scenario> {
        let m = self.m;
        if m == 0 {
            return Err(schema("m must be positive"));
        }
        check_shape("sigma", &self.sigma.0, m, m)?;
        if !(self.window > 0.0) || !self.window.is_finite() {
            return Err(schema("window must be a positive number"));
        }
        if self.s_samples < 2 {
            return Err(schema("s_samples must be at least 2"));
        }
        let system = FirstOrderSystem::new(self.sigma.0.clone(), self.potential.build(m)?, tol)?;
        let space = boundary_symplectic(system.sigma(), tol)?;
        let boundary = self.boundary.build(&space, tol)?;
        let sc = Scenario {
            label: self.label(),
            system,
            boundary,
            window: self.window,
            s_samples: self.s_samples,
            seed: self.seed,
        };
        sc.validate()?;
        Ok(sc)
    }
}

/// Symplectic space in a file: the standard space of dimension `2n`, or an
/// explicit `(gram, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSpec {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram: Option<JsonMat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<JsonMat>,
}

impl SpaceSpec {
    pub fn build(&self, tol: &Tolerances) -> Result<SymplecticSpace> {
        let n = self.dim;
        if n == 0 || n % 2 == 1 {
            return Err(schema("space.dim must be a positive even number"));
        }
        let gram = match &self.gram {
            Some(g) => {
                check_shape("space.gram", &g.0, n, n)?;
                g.0.clone()
            }
            None => CMat::identity(n, n),
        };
        let j = match &self.j {
            Some(j) => {
                check_shape("space.j", &j.0, n, n)?;
                j.0.clone()
            }
            None => SymplecticSpace::standard(n / 2).j().clone(),
        };
        SymplecticSpace::new(gram, j, tol)
    }
}

/// A Lagrangian pair for the `maslov` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaslovSpec {
    pub space: SpaceSpec,
    pub lambda: LagrangianSpec,
    pub mu: LagrangianSpec,
}

impl MaslovSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| schema(e.to_string()))
    }

    pub fn build(&self, tol: &Tolerances) -> Result<(SymplecticFamily, LagrangianPath, LagrangianPath)> {
        let space = self.space.build(tol)?;
        if space.weights_plus().len() != space.weights_minus().len() {
            return Err(Error::InvalidSpace("unbalanced signature; no Lagrangians exist".into()));
        }
        let l = self.lambda.build(&space, tol)?;
        let m = self.mu.build(&space, tol)?;
        Ok((SymplecticFamily::constant(space), l, m))
    }
}

/// A matrix path in a file: piecewise-linear interpolation through samples
/// at increasing knots (projected back to the unitary group for unitary
/// paths), with an optional constant Gram matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixPathSpec {
    pub kind: PathKind,
    pub s: Vec<f64>,
    pub matrices: Vec<JsonMat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram: Option<JsonMat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_hint: Option<usize>,
}

impl MatrixPathSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| schema(e.to_string()))
    }

    pub fn build(&self) -> Result<OperatorPath> {
        if self.s.is_empty() || self.s.len() != self.matrices.len() {
            return Err(schema("`s` and `matrices` must be nonempty and of equal length"));
        }
        if self.s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(schema("knots must increase"));
        }
        let n = self.matrices[0].0.nrows();
        for (i, a) in self.matrices.iter().enumerate() {
            check_shape(&format!("matrices[{i}]"), &a.0, n, n)?;
        }
        let knots = self.s.clone();
        let mats: Vec<CMat> = self.matrices.iter().map(|m| m.0.clone()).collect();
        let kind = self.kind;
        let interp = move |x: f64| -> CMat {
            if mats.len() == 1 || x <= knots[0] {
                return mats[0].clone();
            }
            if x >= *knots.last().unwrap() {
                return mats.last().unwrap().clone();
            }
            let k = knots.partition_point(|&y| y <= x) - 1;
            let w = (x - knots[k]) / (knots[k + 1] - knots[k]);
            let a = mats[k].scale(1.0 - w) + mats[k + 1].scale(w);
            match kind {
                PathKind::Hermitian => a,
                PathKind::Unitary => linalg::polar_unitary(&a),
            }
        };
        let mut path = OperatorPath::new(n, kind, interp);
        if let Some(g) = &self.gram {
            check_shape("gram", &g.0, n, n)?;
            let g = g.0.clone();
            path = path.with_gram(move |_| g.clone());
        }
        if let Some(h) = self.sample_hint {
            path = path.with_sample_hint(h.max(1));
        }
        Ok(path)
    }
}

/// `sigma = -i` as used by the scalar catalog entries.
pub(crate) fn minus_i() -> JsonMat {
    JsonMat(CMat::from_element(1, 1, c64(0.0, -1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let text = r#"{"m":1, "sigma":[[[0,-1]]], "potential":{"type":"zero"},
            "boundary":{"type":"phase","theta0":3.141592653589793,"theta1":9.42477796076938},
            "window":7.0, "s_samples":256, "seed":42}"#;
        let spec = ScenarioSpec::from_json(text).unwrap();
        assert_eq!(spec.seed, Some(42));
        spec.build(&Tolerances::default()).unwrap();
    }

    #[test]
    fn schema_errors_carry_position() {
        let err = ScenarioSpec::from_json("{\"m\": 1,\n \"sigma\": 3}").unwrap_err();
        match err {
            Error::Schema(msg) => assert!(msg.contains("line 2"), "{msg}"),
            e => panic!("{e}"),
        }
        let bad_shape = r#"{"m":2, "sigma":[[[0,-1]]], "potential":{"type":"zero"},
            "boundary":{"type":"phase","theta0":0,"theta1":1}, "window":7.0}"#;
        let e = ScenarioSpec::from_json(bad_shape).unwrap().build(&Tolerances::default()).unwrap_err();
        assert!(matches!(e, Error::Schema(_)));
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"m":1, "sigma":[[[0,-1]]], "potential":{"type":"zero"},
            "boundary":{"type":"phase","theta0":0,"theta1":1}, "window":7.0, "colour":"red"}"#;
        assert!(ScenarioSpec::from_json(text).is_err());
    }

    #[test]
    fn round_trip() {
        for spec in catalog() {
            let again = ScenarioSpec::from_json(&spec.to_json()).unwrap();
            assert_eq!(again, spec);
        }
    }

    #[test]
    fn frames_boundary_interpolates_between_knots() {
        let space = SymplecticSpace::standard(1);
        let f = |t: f64| JsonMat(CMat::from_column_slice(2, 1, &[c64(1.0, 0.0), num_complex::Complex64::from_polar(1.0, t)]));
        let spec = LagrangianSpec::Frames {
            s: vec![0.0, 1.0],
            frames: vec![f(0.0), f(1.0)],
        };
        let path = spec.build(&space, &Tolerances::default()).unwrap();
        let mid = path.eval(0.5);
        let expected = SubspaceFrame::new(2, f(0.5).0, &Tolerances::default()).unwrap();
        assert!(mid.same_span(&expected, &Tolerances::default()));
    }

    #[test]
    fn matrix_path_constant() {
        let spec = MatrixPathSpec {
            kind: PathKind::Hermitian,
            s: vec![0.0],
            matrices: vec![JsonMat(linalg::diag_real(&[1.0, -1.0]))],
            gram: None,
            sample_hint: None,
        };
        let p = spec.build().unwrap();
        assert_eq!(crate::specflow::sf_partition(&p, &Tolerances::default()).unwrap().0, 0);
    }
}
