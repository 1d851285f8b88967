//! Seeded generators of test tuples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{apply_phi, OperatorTuple, RegularPolynomial};
use crate::linalg::{self, CMatrix};
use crate::scalar::{cx_f64, Real};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussianish<R: Rng>(rng: &mut R) -> f64 {
    // sum of uniforms: cheap, bounded and deterministic across platforms
    (0..4).map(|_| rng.gen_range(-1.0..1.0)).sum::<f64>() * 0.5
}

pub fn random_matrix<T: Real, R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix<T> {
    CMatrix::from_fn(rows, cols, |_, _| cx_f64(gaussianish(rng), gaussianish(rng)))
}

pub fn random_strict_upper<T: Real, R: Rng>(rng: &mut R, dim: usize) -> CMatrix<T> {
    CMatrix::from_fn(dim, dim, |i, j| if j > i { cx_f64(gaussianish(rng), gaussianish(rng)) } else { cx_f64(0.0, 0.0) })
}

/// `λ_max(Φ_{f,T}(I))`.
pub fn phi_level<T: Real>(f: &RegularPolynomial<T>, t: &OperatorTuple<T>) -> T {
    let p = apply_phi(f, t, &linalg::identity(t.cols())).expect("shapes agree");
    linalg::max_eigenvalue(&p)
}

/// Rescales `t` so that `λ_max(Φ_{f,sT}(I))` equals `target` (bisection on
/// the monotone map `s ↦ λ_max`). Zero tuples are returned unchanged.
pub fn scale_to<T: Real>(f: &RegularPolynomial<T>, t: &OperatorTuple<T>, target: f64) -> OperatorTuple<T> {
    let at = |s: f64| phi_level(f, &t.scaled(T::lit(s))).as_f64();
    if at(1.0) <= 0.0 {
        return t.clone();
    }
    let mut hi = 1.0;
    while at(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    t.scaled(T::lit(lo))
}

/// `n` random strictly upper triangular matrices (jointly nilpotent, not
/// necessarily commuting), scaled so that `λ_max(Φ_{f,T}(I)) = target`.
pub fn nilpotent_tuple<T: Real>(seed: u64, dim: usize, n: usize, f: &RegularPolynomial<T>, target: f64) -> OperatorTuple<T> {
    let mut rng = rng(seed);
    let t = OperatorTuple::new((0..n).map(|_| random_strict_upper(&mut rng, dim)).collect()).expect("square tuple");
    scale_to(f, &t, target)
}

/// `n` random matrices scaled so that `λ_max(Φ_{f,T}(I)) = target`.
pub fn contractive_tuple<T: Real>(seed: u64, dim: usize, n: usize, f: &RegularPolynomial<T>, target: f64) -> OperatorTuple<T> {
    let mut rng = rng(seed);
    let t = OperatorTuple::new((0..n).map(|_| random_matrix(&mut rng, dim, dim)).collect()).expect("square tuple");
    scale_to(f, &t, target)
}
