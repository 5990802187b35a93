//! Seeded random matrices and subspaces for tests, benches and scenario
//! generation.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{c64, expi_hermitian, CMat};
use crate::sympcore::{SubspaceFrame, SymplecticSpace, UnitaryGenerator};
use crate::tol::Tolerances;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal via Box-Muller.
pub fn normal<R: Rng + ?Sized>(r: &mut R) -> f64 {
    let u1: f64 = r.gen_range(f64::EPSILON..1.0);
    let u2: f64 = r.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

pub fn gaussian<R: Rng + ?Sized>(r: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        c64(normal(r), normal(r)) * std::f64::consts::FRAC_1_SQRT_2
    })
}

pub fn hermitian<R: Rng + ?Sized>(r: &mut R, n: usize) -> CMat {
    let g = gaussian(r, n, n);
    (&g + g.adjoint()).scale(0.5)
}

/// Haar-like unitary from the exponential of a random Hermitian matrix.
pub fn unitary<R: Rng + ?Sized>(r: &mut R, n: usize) -> CMat {
    expi_hermitian(&hermitian(r, n).scale(2.0))
}

/// Hermitian positive definite matrix with eigenvalues in roughly `[1, 1 + spread]`.
pub fn gram<R: Rng + ?Sized>(r: &mut R, n: usize, spread: f64) -> CMat {
    let g = gaussian(r, n, n).scale(spread.sqrt() / (n as f64).sqrt());
    CMat::identity(n, n) + &g * g.adjoint()
}

pub fn subspace<R: Rng + ?Sized>(r: &mut R, n: usize, k: usize) -> SubspaceFrame {
    SubspaceFrame::new(n, gaussian(r, n, k), &Tolerances::default())
        .expect("Gaussian frames have full rank almost surely")
}

/// Random Lagrangian of `space`, as the graph of a random generator.
pub fn lagrangian<R: Rng + ?Sized>(r: &mut R, space: &SymplecticSpace) -> SubspaceFrame {
    let n = space.weights_plus().len();
    let w = unitary(r, n);
    let gen = generator_from_unitary(space, &w);
    space
        .unitary_to_lagrangian(&gen, &Tolerances::default())
        .expect("generator condition holds by construction")
}

/// Generator whose normalized form is the unitary `w`.
pub fn generator_from_unitary(space: &SymplecticSpace, w: &CMat) -> UnitaryGenerator {
    let dm = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        space.weights_minus().len(),
        space.weights_minus().iter().map(|x| c64(1.0 / x.sqrt(), 0.0)),
    ));
    let dp = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        space.weights_plus().len(),
        space.weights_plus().iter().map(|x| c64(x.sqrt(), 0.0)),
    ));
    UnitaryGenerator {
        basis_plus: space.basis_plus(),
        basis_minus: space.basis_minus(),
        u: dm * w * dp,
        weights_plus: space.weights_plus().to_vec(),
        weights_minus: space.weights_minus().to_vec(),
    }
}
