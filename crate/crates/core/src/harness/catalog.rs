//! Built-in scenarios and the seeded random scenario generator.

use std::f64::consts::PI;

use rand::Rng;

use super::{minus_i, JsonMat, LagrangianSpec, PotentialSpec, ScenarioSpec, TrigTermSpec};
use crate::linalg::{c64, diag_complex, from_real_rows, CMat};
use crate::sample;

pub const CATALOG_LABELS: [&str; 5] = ["R1", "P1", "J1", "Z1", "L1"];

fn scalar(x: f64) -> JsonMat {
    JsonMat(CMat::from_element(1, 1, c64(x, 0.0)))
}

fn periodic() -> LagrangianSpec {
    LagrangianSpec::Fixed {
        frame: JsonMat(CMat::from_column_slice(2, 1, &[c64(1.0, 0.0), c64(1.0, 0.0)])),
    }
}

/// Catalog entry by label (case-insensitive).
pub fn catalog_entry(label: &str) -> Option<ScenarioSpec> {
    let label = label.to_ascii_uppercase();
    let base = |potential, boundary| ScenarioSpec {
        label: Some(label.clone()),
        m: 1,
        sigma: minus_i(),
        potential,
        boundary,
        window: 7.0,
        s_samples: 256,
        seed: None,
    };
    Some(match label.as_str() {
        // -i d/dt with x(1) = e^{iθ_s} x(0), θ_s = π + 2πs
        "R1" => base(
            PotentialSpec::Zero,
            LagrangianSpec::Phase {
                theta0: PI,
                theta1: 3.0 * PI,
            },
        ),
        // -i d/dt + 2πs with periodic boundary condition
        "P1" => base(
            PotentialSpec::Affine {
                v0: scalar(0.0),
                v1: scalar(2.0 * PI),
            },
            periodic(),
        ),
        // σ = [[0,-1],[1,0]], B = s diag(c, c), first components vanish at both ends
        "J1" => {
            let c = 6.5;
            let mut frame = CMat::zeros(4, 2);
            frame[(1, 0)] = c64(1.0, 0.0);
            frame[(3, 1)] = c64(1.0, 0.0);
            ScenarioSpec {
                label: Some(label.clone()),
                m: 2,
                sigma: JsonMat(from_real_rows(2, 2, &[0.0, -1.0, 1.0, 0.0])),
                potential: PotentialSpec::Affine {
                    v0: JsonMat(CMat::zeros(2, 2)),
                    v1: JsonMat(CMat::identity(2, 2).scale(c)),
                },
                boundary: LagrangianSpec::Fixed { frame: JsonMat(frame) },
                window: 7.0,
                s_samples: 256,
                seed: None,
            }
        }
        // constant operator, no eigenvalue near zero
        "Z1" => base(
            PotentialSpec::Constant { value: scalar(0.5) },
            LagrangianSpec::Phase {
                theta0: 1.0,
                theta1: 1.0,
            },
        ),
        // the boundary phase winds twice: θ_s = π + 4πs
        "L1" => base(
            PotentialSpec::Zero,
            LagrangianSpec::Phase {
                theta0: PI,
                theta1: 5.0 * PI,
            },
        ),
        _ => return None,
    })
}

pub fn catalog() -> Vec<ScenarioSpec> {
    CATALOG_LABELS
        .iter()
        .map(|l| catalog_entry(l).expect("catalog label"))
        .collect()
}

/// Random scenario: skew-adjoint `σ` with eigenvalues of modulus in
/// `[0.8, 1.25]`, a trigonometric potential with up to three harmonics and a
/// boundary path `u0 exp(i s k)` of random generators.
pub fn random_scenario(seed: u64, m: usize) -> ScenarioSpec {
    let mut r = sample::rng(seed);
    let q = sample::unitary(&mut r, m);
    let d: Vec<_> = (0..m)
        .map(|_| {
            let sign = if r.gen_bool(0.5) { 1.0 } else { -1.0 };
            c64(0.0, sign * r.gen_range(0.8..1.25))
        })
        .collect();
    let sigma = &q * diag_complex(&d) * q.adjoint();
    let sigma = (&sigma - sigma.adjoint()).scale(0.5);
    let nterms = r.gen_range(1..=3);
    let base = sample::hermitian(&mut r, m).scale(0.5);
    let terms = (0..nterms)
        .map(|_| TrigTermSpec {
            matrix: JsonMat(sample::hermitian(&mut r, m).scale(0.6)),
            s_freq: r.gen_range(0.5..2.0),
            s_phase: r.gen_range(0.0..2.0 * PI),
            t_freq: r.gen_range(1..=2) as f64,
            t_phase: r.gen_range(0.0..2.0 * PI),
        })
        .collect();
    let u0 = sample::unitary(&mut r, m);
    let k = sample::hermitian(&mut r, m).scale(6.0);
    ScenarioSpec {
        label: Some(format!("random-m{m}-{seed:04}")),
        m,
        sigma: JsonMat(sigma),
        potential: PotentialSpec::Trig {
            base: Some(JsonMat(base)),
            terms,
        },
        boundary: LagrangianSpec::Generator {
            u0: JsonMat(u0),
            k: JsonMat(k),
        },
        window: 7.0,
        s_samples: 64,
        seed: Some(seed),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tol::Tolerances;

    #[test]
    fn catalog_builds() {
        for spec in catalog() {
            spec.build(&Tolerances::default()).unwrap();
        }
        assert!(catalog_entry("nope").is_none());
        assert!(catalog_entry("r1").is_some());
    }

    #[test]
    fn random_scenarios_are_deterministic_and_valid() {
        for seed in 0..5 {
            let a = random_scenario(seed, 2);
            assert_eq!(a, random_scenario(seed, 2));
            a.build(&Tolerances::default()).unwrap();
        }
    }
}
