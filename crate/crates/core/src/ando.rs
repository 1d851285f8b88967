//! Andô-type dilations `(B ⊗ I, ψ(C))` of commuting pairs, the norm
//! inequalities they certify and a seeded battery exercising both.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::bipoly::{block_matrix, BiPolynomial, HermitianBiPolynomial, PairPolynomial, PolyMatrix};
use crate::colligation::{colligation_of, Colligation, IntertwiningTriple};
use crate::domain::{apply_phi, apply_phi_power, domain_membership, OperatorTuple, RegularPolynomial};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::polyparse::{parse_bipoly, parse_hermitian};
use crate::report::VerificationReport;
use crate::sample;
use crate::scalar::{abs, cx, cx_f64, Real, C};
use crate::transfer::{fourier_series, pad_kernel};
use crate::variety::{build_variety, commutator_ideal, constrained_poisson, minimal_polynomial, minimal_polynomial_ideal, VarietyModel};
use crate::words::Word;

/// Purity threshold used to pick the truncation level.
pub const HORIZON_TOL: f64 = 1e-16;
/// Allowed negativity of `λ_min(I − Σ c_j ψ_j ψ_j*)`.
pub const ELLIPSOID_TOL: f64 = 1e-9;
pub const BATTERY_VERSION: &str = "battery-v1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Identities (commutation, kernel, compression).
    pub identity: f64,
    /// Inequality slack.
    pub slack: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { identity: 1e-7, slack: 1e-6 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PairKind {
    /// Upper triangular Toeplitz matrices.
    UpperTriangular,
    /// Polynomials in one random matrix.
    PolynomialOfSingle,
    /// Polynomials without constant term in one strictly upper triangular matrix.
    JointlyNilpotent,
}

impl PairKind {
    pub const ALL: [PairKind; 3] = [PairKind::UpperTriangular, PairKind::PolynomialOfSingle, PairKind::JointlyNilpotent];

    pub fn name(self) -> &'static str {
        match self {
            PairKind::UpperTriangular => "upper-triangular-commuting",
            PairKind::PolynomialOfSingle => "polynomial-of-single",
            PairKind::JointlyNilpotent => "jointly-nilpotent",
        }
    }
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PairKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        PairKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| invalid(format!("unknown pair kind '{s}'")))
    }
}

fn commutation_scale<T: Real>(x: &OperatorTuple<T>, y: &OperatorTuple<T>) -> T {
    let m = x.mats().iter().chain(y.mats()).map(linalg::op_norm).fold(T::zero(), |a, b| if b > a { b } else { a });
    (T::one() + m) * (T::one() + m)
}

/// `(T1, T2)` with `T1 ∈ D_f`, `T2 ∈ D_g` and every `T_{1,i}` commuting
/// with every `T_{2,j}`.
#[derive(Clone, Debug)]
pub struct CommutingPair<T: Real> {
    f: RegularPolynomial<T>,
    g: RegularPolynomial<T>,
    t1: OperatorTuple<T>,
    t2: OperatorTuple<T>,
    residual: T,
    swapped: bool,
}

impl<T: Real> CommutingPair<T> {
    pub fn new(f: RegularPolynomial<T>, g: RegularPolynomial<T>, t1: OperatorTuple<T>, t2: OperatorTuple<T>, tol: T) -> Result<Self> {
        if t1.n() != f.n() || t2.n() != g.n() {
            return Err(invalid("tuple lengths must match the polynomials"));
        }
        if !t1.is_square() || !t2.is_square() || t1.dim() != t2.dim() {
            return Err(invalid("both tuples must act on one space"));
        }
        let residual = t1.cross_commutator(&t2);
        if residual > tol * commutation_scale(&t1, &t2) {
            return Err(Error::PreconditionViolation(format!("tuples do not commute (residual {:e})", residual.as_f64())));
        }
        for (name, p, t) in [("T1", &f, &t1), ("T2", &g, &t2)] {
            let m = domain_membership(p, t, tol)?;
            if !m.in_domain {
                return Err(Error::PreconditionViolation(format!(
                    "{name} is not in the domain (min eigenvalue {:e})",
                    m.min_eig.as_f64()
                )));
            }
        }
        Ok(CommutingPair { f, g, t1, t2, residual, swapped: false })
    }

    pub fn f(&self) -> &RegularPolynomial<T> {
        &self.f
    }
    pub fn g(&self) -> &RegularPolynomial<T> {
        &self.g
    }
    pub fn t1(&self) -> &OperatorTuple<T> {
        &self.t1
    }
    pub fn t2(&self) -> &OperatorTuple<T> {
        &self.t2
    }
    pub fn dim(&self) -> usize {
        self.t1.dim()
    }
    pub fn cross_commutation_residual(&self) -> T {
        self.residual
    }
    /// Whether this pair is the role exchange of the one it was built from.
    pub fn is_swapped(&self) -> bool {
        self.swapped
    }

    /// `(T2, T1)` with `(g, f)`.
    pub fn swapped(&self) -> Self {
        CommutingPair {
            f: self.g.clone(),
            g: self.f.clone(),
            t1: self.t2.clone(),
            t2: self.t1.clone(),
            residual: self.residual,
            swapped: !self.swapped,
        }
    }
}

fn small_eigenvalue<R: Rng>(rng: &mut R) -> (f64, f64) {
    let r = 0.5 * rng.gen_range(0.0..1.0f64);
    let t = rng.gen_range(0.0..std::f64::consts::TAU);
    (r * t.cos(), r * t.sin())
}

fn random_coeff<R: Rng, T: Real>(rng: &mut R) -> C<T> {
    cx_f64(sample::gaussianish(rng), sample::gaussianish(rng))
}

/// Seeded commuting pair of the given kind, each tuple scaled so that
/// `λ_max(Φ(I))` lies in `[0.6, 0.95]`.
pub fn random_commuting_pair<T: Real>(
    seed: u64,
    dim: usize,
    kind: PairKind,
    f: &RegularPolynomial<T>,
    g: &RegularPolynomial<T>,
) -> Result<CommutingPair<T>> {
    if dim == 0 {
        return Err(invalid("dimension must be positive"));
    }
    let mut rng = sample::rng(seed);
    let count = f.n() + g.n();
    let poly_of = |a: &CMatrix<T>, rng: &mut rand_chacha::ChaCha8Rng| {
        let (c1, c2) = (random_coeff::<_, T>(rng), random_coeff::<_, T>(rng));
        a * c1 + a * a * c2
    };
    let mats: Vec<CMatrix<T>> = match kind {
        PairKind::UpperTriangular => (0..count)
            .map(|_| {
                let (re, im) = small_eigenvalue(&mut rng);
                let diag = cx_f64::<T>(re, im);
                let coeffs: Vec<C<T>> = (1..dim).map(|_| random_coeff(&mut rng)).collect();
                CMatrix::<T>::from_fn(dim, dim, |i, j| if j == i { diag } else if j > i { coeffs[j - i - 1] } else { cx(T::zero()) })
            })
            .collect(),
        PairKind::PolynomialOfSingle => {
            let eig: Vec<(f64, f64)> = (0..dim).map(|_| small_eigenvalue(&mut rng)).collect();
            let upper = sample::random_strict_upper::<T, _>(&mut rng, dim) * cx(T::lit(0.5));
            let tri = CMatrix::<T>::from_fn(dim, dim, |i, j| if i == j { cx_f64(eig[i].0, eig[i].1) } else { upper[(i, j)] });
            let v = sample::random_matrix::<T, _>(&mut rng, dim, dim).qr().q();
            let a = &v * tri * v.adjoint();
            let mut out = vec![a.clone()];
            for _ in 1..count {
                out.push(poly_of(&a, &mut rng));
            }
            out
        }
        PairKind::JointlyNilpotent => {
            let nil = sample::random_strict_upper::<T, _>(&mut rng, dim);
            (0..count).map(|_| poly_of(&nil, &mut rng)).collect()
        }
    };
    let mut mats = mats.into_iter();
    let t1 = OperatorTuple::new(mats.by_ref().take(f.n()).collect())?;
    let t2 = OperatorTuple::new(mats.collect())?;
    let target1 = rng.gen_range(0.6..0.95);
    let target2 = rng.gen_range(0.6..0.95);
    let t1 = sample::scale_to(f, &t1, target1);
    let t2 = sample::scale_to(g, &t2, target2);
    CommutingPair::new(f.clone(), g.clone(), t1, t2, T::lit(1e-12))
}

/// Largest truncation level used for `n` letters.
pub fn default_level_cap(n: usize) -> usize {
    match n {
        1 => 200,
        2 => 8,
        _ => 5,
    }
}

/// Smallest `N = k·m ≤ cap` with `‖Φ^m_{f,T}(I)‖ ≤ HORIZON_TOL`, and the
/// norm reached (the cap is returned when the threshold is not met).
pub fn purity_horizon<T: Real>(f: &RegularPolynomial<T>, t: &OperatorTuple<T>, cap: usize) -> Result<(usize, T)> {
    let k = f.k();
    let mut cur = linalg::identity::<T>(t.dim());
    let mut m = 0;
    loop {
        cur = apply_phi(f, t, &cur)?;
        m += 1;
        let v = linalg::op_norm(&cur);
        if v <= T::lit(HORIZON_TOL) || k * (m + 1) > cap {
            return Ok((k * m, v));
        }
    }
}

/// Allowed co-invariance defect of a truncated model space.
pub const INVARIANCE_TOL: f64 = 1e-12;

/// The variety a tuple naturally lives on: the zero set of its minimal
/// polynomial for one letter, the symmetric (commutative) variety otherwise.
/// For one letter the level is raised (up to `cap`) until the truncated
/// model space is co-invariant to `INVARIANCE_TOL`.
pub fn natural_variety<T: Real>(f: &RegularPolynomial<T>, t: &OperatorTuple<T>, level: usize, cap: usize, tol: T) -> Result<VarietyModel<T>> {
    if f.n() > 1 {
        return build_variety(f, level.max(2), commutator_ideal(f.n()));
    }
    let m = minimal_polynomial(t.get(0), tol)?;
    let gens = vec![minimal_polynomial_ideal(&m)];
    let mut level = level.max(m.len() - 1);
    loop {
        let v = build_variety(f, level, gens.clone())?;
        if v.invariance_defect() <= T::lit(INVARIANCE_TOL) || level >= cap {
            return Ok(v);
        }
        level = (level + (level / 2).max(4)).min(cap);
    }
}

/// `(B_i ⊗ I_X, ψ_j)` on `N_J ⊗ X` together with the padded constrained
/// kernel `K_J : H → N_J ⊗ X`.
#[derive(Clone, Debug)]
pub struct DilationPair<T: Real> {
    left: OperatorTuple<T>,
    right: OperatorTuple<T>,
    kernel: CMatrix<T>,
    variety: VarietyModel<T>,
    colligation: Colligation<T>,
    swapped: bool,
    tail: T,
    report: VerificationReport,
}

impl<T: Real> DilationPair<T> {
    pub fn left(&self) -> &OperatorTuple<T> {
        &self.left
    }
    pub fn right(&self) -> &OperatorTuple<T> {
        &self.right
    }
    pub fn kernel(&self) -> &CMatrix<T> {
        &self.kernel
    }
    pub fn variety(&self) -> &VarietyModel<T> {
        &self.variety
    }
    pub fn colligation(&self) -> &Colligation<T> {
        &self.colligation
    }
    pub fn level(&self) -> usize {
        self.variety.level()
    }
    pub fn dim(&self) -> usize {
        self.kernel.nrows()
    }
    /// Built from the role-exchanged pair.
    pub fn swapped(&self) -> bool {
        self.swapped
    }
    /// `‖Φ^{⌊N/k⌋+1}_{f,T1}(I)‖`, the kernel truncation error.
    pub fn tail(&self) -> T {
        self.tail
    }
    /// Construction checks: fundamental identity, kernel isometry,
    /// multi-analyticity and ellipsoid membership.
    pub fn report(&self) -> &VerificationReport {
        &self.report
    }
}

fn max_of<T: Real>(it: impl Iterator<Item = T>) -> T {
    it.fold(T::zero(), |a, b| if b > a { b } else { a })
}

/// Builds the dilation of `pair` on the constrained model `variety`:
/// `ψ_j = c_{g_j}^{-1/2} Σ_γ C_γ ⊗ Θ^{(g_j)}_γ` from the colligation of the
/// triple `(T1, T1, T2)`.
pub fn ando_dilation<T: Real>(pair: &CommutingPair<T>, variety: &VarietyModel<T>, tol: T) -> Result<DilationPair<T>> {
    let (f, g) = (pair.f(), pair.g());
    if variety.model().f() != f {
        return Err(invalid("the variety must be built on the first polynomial of the pair"));
    }
    let level = variety.level();
    let t1 = pair.t1();
    let t2 = pair.t2();
    let triple = IntertwiningTriple::new(f.clone(), g.clone(), t1.clone(), t1.clone(), t2.clone(), tol)?;
    let (_, col) = colligation_of(&triple, tol)?;
    let dims = col.dims();
    let (x, r) = (dims.x(), dims.d1p);
    let theta = fourier_series(&col, f, level);
    let kj = constrained_poisson(f, variety, t1, tol)?;
    let kernel = pad_kernel(kj.matrix(), kj.rank(), x);
    let c_words = variety.c().word_products(variety.model().table())?;
    let nj = variety.dim();

    let mut right = Vec::with_capacity(g.n());
    for j in 0..g.n() {
        let c = g.coeff(&Word::letter(j + 1));
        let rows = col.y_rows(j);
        let mut psi = linalg::zeros::<T>(nj * x, nj * x);
        for ((_, th), cw) in theta.iter().zip(&c_words) {
            let mut ext = linalg::zeros::<T>(x, x);
            ext.view_mut((0, 0), (x, r)).copy_from(&th.columns(rows.start, rows.len()));
            psi += linalg::kron(cw, &ext);
        }
        right.push(psi * cx(T::one() / c.sqrt()));
    }
    let right = OperatorTuple::new(right)?;
    let id_x = linalg::identity::<T>(x);
    let left = OperatorTuple::new(variety.b().mats().iter().map(|b| linalg::kron(b, &id_x)).collect())?;

    let tail = linalg::op_norm(&apply_phi_power(f, t1, &linalg::identity(t1.dim()), level / f.k() + 1)?);
    let tol_eff = tol + tail.sqrt();
    let mut rep = VerificationReport::new();
    rep.set_env("dilation.level", level);
    rep.set_env("dilation.variety_dim", nj);
    rep.set_env("dilation.defect_rank", r);
    rep.set_env("dilation.x_pad", dims.x_pad);
    rep.set_env("dilation.swapped", pair.is_swapped());
    rep.set_env("dilation.tail", format!("{:.3e}", tail.as_f64()));
    rep.set_env("dilation.invariance_defect", format!("{:.3e}", variety.invariance_defect().as_f64()));
    rep.set_env("dilation.mode", if tail <= T::lit(1e-12) { "pure" } else { "residual_bounded" });

    let mut fundamental = T::zero();
    for a in 0..=f.n() {
        for b in 0..=g.n() {
            let mut lhs = kernel.clone();
            let mut rhs = kernel.clone();
            if a > 0 {
                lhs *= t1.get(a - 1).adjoint();
            }
            if b > 0 {
                lhs *= t2.get(b - 1).adjoint();
                rhs = right.get(b - 1).adjoint() * rhs;
            }
            if a > 0 {
                rhs = left.get(a - 1).adjoint() * rhs;
            }
            let v = linalg::op_norm(&(lhs - rhs));
            if v > fundamental {
                fundamental = v;
            }
        }
    }
    rep.residual("dilation.fundamental", fundamental.as_f64(), tol_eff.as_f64());
    let gram = kernel.adjoint() * &kernel - linalg::identity::<T>(t1.dim());
    rep.residual("dilation.kernel_isometry", linalg::op_norm(&gram).as_f64(), (tol + tail).as_f64());
    let analytic = max_of(
        left.mats()
            .iter()
            .flat_map(|l| right.mats().iter().map(move |p| linalg::op_norm(&(l * p - p * l)))),
    );
    rep.residual("dilation.multi_analytic", analytic.as_f64(), tol_eff.as_f64());
    let mut load = linalg::zeros::<T>(nj * x, nj * x);
    for (j, p) in right.mats().iter().enumerate() {
        load += p * p.adjoint() * cx(g.coeff(&Word::letter(j + 1)));
    }
    let ell = linalg::min_eigenvalue(&(linalg::identity::<T>(nj * x) - load));
    rep.slack("dilation.ellipsoid", ell.as_f64(), ELLIPSOID_TOL);

    Ok(DilationPair { left, right, kernel, variety: variety.clone(), colligation: col, swapped: pair.is_swapped(), tail, report: rep })
}

/// Norms behind one inequality: `‖P(T1,T2)‖`, `‖P(dilation)‖` per dilation
/// and the compression residuals `‖K* P(dilation) K − P(T1,T2)‖`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundNorms {
    pub lhs: f64,
    pub rhs: Vec<f64>,
    pub compression: Vec<f64>,
}

impl BoundNorms {
    pub fn slack(&self) -> f64 {
        self.rhs.iter().copied().fold(f64::INFINITY, f64::min) - self.lhs
    }
}

/// Evaluates a polynomial matrix on the pair and on each dilation. A
/// dilation built from the swapped pair receives the swapped polynomial.
pub fn bound_norms<T: Real, P: PairPolynomial<T>>(
    pair: &CommutingPair<T>,
    dilations: &[&DilationPair<T>],
    poly: &PolyMatrix<P>,
    tol: T,
) -> Result<BoundNorms> {
    let k = poly.k;
    let at_pair: Vec<CMatrix<T>> = poly
        .entries
        .iter()
        .map(|p| if pair.is_swapped() { p.swap_roles().eval_pair(pair.t1(), pair.t2(), tol) } else { p.eval_pair(pair.t1(), pair.t2(), tol) })
        .collect::<Result<_>>()?;
    let lhs_mat = block_matrix(k, &at_pair);
    let mut out = BoundNorms { lhs: linalg::op_norm(&lhs_mat).as_f64(), rhs: Vec::new(), compression: Vec::new() };
    for d in dilations {
        let mut blocks = Vec::with_capacity(k * k);
        for p in &poly.entries {
            let q = if d.swapped() { p.swap_roles() } else { p.clone() };
            if q.alphabets() != (d.left().n(), d.right().n()) {
                return Err(invalid("polynomial alphabets differ from the dilation"));
            }
            blocks.push(q.eval_ordered(d.left(), d.right()));
        }
        let dil_mat = block_matrix(k, &blocks);
        let kk = linalg::diag_repeat(d.kernel(), k);
        let comp = kk.adjoint() * &dil_mat * &kk - &lhs_mat;
        out.rhs.push(linalg::op_norm(&dil_mat).as_f64());
        out.compression.push(linalg::op_norm(&comp).as_f64());
    }
    Ok(out)
}

fn verify_bounds<T: Real, P: PairPolynomial<T>>(
    pair: &CommutingPair<T>,
    dilations: &[&DilationPair<T>],
    polys: &[(String, PolyMatrix<P>)],
    tol: Tolerances,
) -> (VerificationReport, Vec<Option<BoundNorms>>) {
    let mut rep = VerificationReport::new();
    rep.set_env("pair.cross_commutation", format!("{:.3e}", pair.cross_commutation_residual().as_f64()));
    let mut all = Vec::with_capacity(polys.len());
    for (name, pm) in polys {
        match bound_norms(pair, dilations, pm, T::lit(tol.identity)) {
            Ok(b) => {
                rep.set_env(&format!("{name}.lhs"), format!("{:.6e}", b.lhs));
                for (i, (r, c)) in b.rhs.iter().zip(&b.compression).enumerate() {
                    rep.set_env(&format!("{name}.rhs[{i}]"), format!("{r:.6e}"));
                    rep.residual(&format!("{name}.compression[{i}]"), *c, tol.identity);
                }
                rep.slack(&format!("{name}.slack"), b.slack(), tol.slack);
                all.push(Some(b));
            }
            Err(e) => {
                rep.set_env(&format!("{name}.error"), e.to_string());
                rep.failure(&format!("{name}.slack"), tol.slack);
                all.push(None);
            }
        }
    }
    (rep, all)
}

/// `‖[p_rs(T1,T2)]‖ ≤ min_i ‖[p_rs(dilation_i)]‖` for every polynomial
/// matrix, with the compression identity per dilation.
pub fn verify_inequality<T: Real>(
    pair: &CommutingPair<T>,
    dilations: &[&DilationPair<T>],
    polys: &[(String, PolyMatrix<BiPolynomial<T>>)],
    tol: Tolerances,
) -> VerificationReport {
    verify_bounds(pair, dilations, polys, tol).0
}

/// The same for `Σ a X_α Y_β Y_σ* X_γ*`.
pub fn verify_hermitian_inequality<T: Real>(
    pair: &CommutingPair<T>,
    dilations: &[&DilationPair<T>],
    polys: &[(String, PolyMatrix<HermitianBiPolynomial<T>>)],
    tol: Tolerances,
) -> VerificationReport {
    verify_bounds(pair, dilations, polys, tol).0
}

fn norm_small<T: Real>(k: usize, m: &[C<T>]) -> T {
    match k {
        1 => abs(m[0]),
        2 => {
            let s = m.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
            let det = abs(m[0] * m[3] - m[1] * m[2]);
            let disc = s * s - T::lit(4.0) * det * det;
            ((s + if disc > T::zero() { disc.sqrt() } else { T::zero() }) * T::lit(0.5)).sqrt()
        }
        _ => linalg::op_norm(&CMatrix::<T>::from_row_slice(k, k, m)),
    }
}

/// `max ‖[p_rs(z, w)]‖` over `resolution²` points of the torus (roots of
/// unity in each variable). By the maximum principle this underestimates
/// the bidisk norm; refining by doubling never decreases it.
pub fn grid_sup_norm<T: Real>(poly: &PolyMatrix<BiPolynomial<T>>, resolution: usize) -> Result<T> {
    if poly.entries.iter().any(|p| p.n1() != 1 || p.n2() != 1) {
        return Err(invalid("the grid norm needs one letter in each variable"));
    }
    if resolution == 0 {
        return Err(invalid("resolution must be positive"));
    }
    let pts: Vec<C<T>> = (0..resolution)
        .map(|a| {
            let t = T::two_pi() * T::lit(a as f64) / T::lit(resolution as f64);
            C::new(t.cos(), t.sin())
        })
        .collect();
    let k = poly.k;
    let mut best = T::zero();
    let mut vals = vec![cx(T::zero()); k * k];
    for z in &pts {
        for w in &pts {
            for (v, p) in vals.iter_mut().zip(&poly.entries) {
                *v = p.eval_scalar(std::slice::from_ref(z), std::slice::from_ref(w));
            }
            let n = norm_small(k, &vals);
            if n > best {
                best = n;
            }
        }
    }
    Ok(best)
}

fn scalar<P>(name: &str, p: P) -> (String, PolyMatrix<P>) {
    (name.to_string(), PolyMatrix::scalar(p))
}

fn matrix2<P>(name: &str, entries: [P; 4]) -> (String, PolyMatrix<P>) {
    (name.to_string(), PolyMatrix::new(2, entries.into()).expect("four entries"))
}

const BIPOLY_TEXT: [(&str, &str); 10] = [
    ("p01", "z1*w1"),
    ("p02", "z1 + w1"),
    ("p03", "1 + z1*w1"),
    ("p04", "z1^2 - w1^2"),
    ("p05", "z1*z2*w1 + 0.5*w1"),
    ("p06", "2*z1*w1 - z1^2*w1^2"),
    ("p07", "(0,1)*z1 + w1^2 - 0.5*z1*w1"),
    ("p08", "z1^3 + w1^3 + z1*w1"),
    ("p09", "1 - z1 - w1 + 3*z1*w1"),
    ("p10", "z1^2*w1^2 + z2*w1 - (0.5,0.5)*z1^2"),
];

const BIPOLY_MATRIX_TEXT: [(&str, [&str; 4]); 3] = [
    ("m1", ["z1", "w1", "0", "z1*w1"]),
    ("m2", ["1 + z1", "z1*w1", "w1^2", "1 - w1"]),
    ("m3", ["z1*w1", "z1 - w1", "z1 + w1", "z2*w1^2"]),
];

const HERMITIAN_TEXT: [(&str, &str); 3] = [
    ("h1", "z1*z1^*"),
    ("h2", "z1*w1*w1^**z1^* - 0.5*w1*w1^*"),
    ("h3", "1 + z1*w1^* + w1*z1^*"),
];

const HERMITIAN_MATRIX_TEXT: [(&str, [&str; 4]); 1] = [("hm1", ["z1*z1^*", "z1*w1^*", "w1*z1^*", "w1*w1^*"])];

/// The built-in bipolynomial battery: ten scalar polynomials and three
/// `2 × 2` matrices. Letters are read modulo the alphabet sizes given.
pub fn battery_bipolys(n1: usize, n2: usize) -> Vec<(String, PolyMatrix<BiPolynomial<f64>>)> {
    let p = |s: &str| parse_bipoly(s).expect("built-in polynomial").wrapped(n1, n2);
    let mut out: Vec<_> = BIPOLY_TEXT.iter().map(|(n, s)| scalar(n, p(s))).collect();
    out.extend(BIPOLY_MATRIX_TEXT.iter().map(|(n, e)| matrix2(n, e.map(p))));
    out
}

/// The built-in Hermitian battery: three scalar polynomials and one `2 × 2`
/// matrix.
pub fn battery_hermitian(n1: usize, n2: usize) -> Vec<(String, PolyMatrix<HermitianBiPolynomial<f64>>)> {
    let p = |s: &str| parse_hermitian(s).expect("built-in polynomial").wrapped(n1, n2);
    let mut out: Vec<_> = HERMITIAN_TEXT.iter().map(|(n, s)| scalar(n, p(s))).collect();
    out.extend(HERMITIAN_MATRIX_TEXT.iter().map(|(n, e)| matrix2(n, e.map(p))));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatteryConfig {
    pub seed: u64,
    pub count: usize,
    pub min_dim: usize,
    pub max_dim: usize,
    pub kinds: Vec<PairKind>,
    pub grid_resolution: usize,
    pub grid_allowance: f64,
    /// Largest level at which the unconstrained (`J = {0}`) dilation is
    /// also built for the `(z, z)` items.
    pub free_level_cap: usize,
    pub tol: Tolerances,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        BatteryConfig {
            seed: 20240611,
            count: 100,
            min_dim: 2,
            max_dim: 6,
            kinds: PairKind::ALL.to_vec(),
            grid_resolution: 512,
            grid_allowance: 2e-2,
            free_level_cap: 16,
            tol: Tolerances::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatteryItem {
    pub index: usize,
    pub seed: u64,
    pub config: &'static str,
    pub kind: PairKind,
    pub dim: usize,
    pub level: usize,
}

impl BatteryItem {
    pub fn nilpotent(&self) -> bool {
        self.kind == PairKind::JointlyNilpotent
    }
}

#[derive(Clone, Debug)]
pub struct BatteryOutcome {
    pub report: VerificationReport,
    pub items: Vec<BatteryItem>,
}

type PairConfig = (&'static str, RegularPolynomial<f64>, RegularPolynomial<f64>);

fn pair_configs(with_two_letters: bool) -> Vec<PairConfig> {
    let poly = |n: usize, t: &[(&[usize], f64)]| RegularPolynomial::<f64>::from_terms(n, t).expect("valid");
    let mut out = vec![
        ("z,z", RegularPolynomial::linear(1), RegularPolynomial::linear(1)),
        ("z+z^2,z", poly(1, &[(&[1], 1.0), (&[1, 1], 1.0)]), RegularPolynomial::linear(1)),
        ("2z,z+0.5z^2", poly(1, &[(&[1], 2.0)]), poly(1, &[(&[1], 1.0), (&[1, 1], 0.5)])),
    ];
    if with_two_letters {
        out.push(("z1+z2,z", RegularPolynomial::linear(2), RegularPolynomial::linear(1)));
    }
    out
}

fn item_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64 + 1)
}

fn build_dilation(pair: &CommutingPair<f64>, tol: f64) -> Result<DilationPair<f64>> {
    let cap = default_level_cap(pair.f().n());
    let (level, _) = purity_horizon(pair.f(), pair.t1(), cap)?;
    let variety = natural_variety(pair.f(), pair.t1(), level, cap, 1e-10)?;
    ando_dilation(pair, &variety, tol)
}

struct Shared {
    grid: Vec<f64>,
}

fn run_item(cfg: &BatteryConfig, configs: &[PairConfig], shared: &Shared, index: usize) -> (BatteryItem, VerificationReport) {
    let ci = index % configs.len();
    let (name, f, g) = &configs[ci];
    let round = index / configs.len();
    let two_letters = f.n() > 1;
    let kind = if two_letters { PairKind::JointlyNilpotent } else { cfg.kinds[round % cfg.kinds.len()] };
    let span = cfg.max_dim - cfg.min_dim + 1;
    let mut dim = cfg.min_dim + round % span;
    if two_letters {
        dim = dim.min(cfg.min_dim.max(4));
    }
    let seed = item_seed(cfg.seed, index);
    let mut item = BatteryItem { index, seed, config: name, kind, dim, level: 0 };
    let mut rep = VerificationReport::new();
    rep.set_env("config", name);
    rep.set_env("kind", kind);
    rep.set_env("dim", dim);
    rep.set_env("seed", seed);
    let tol = cfg.tol;

    let pair = match random_commuting_pair(seed, dim, kind, f, g) {
        Ok(p) => p,
        Err(e) => {
            rep.set_env("error", e);
            rep.failure("pair", tol.identity);
            return (item, rep);
        }
    };
    let swapped = pair.swapped();
    let primary = build_dilation(&pair, tol.identity);
    let secondary = build_dilation(&swapped, tol.identity);
    let (primary, secondary) = match (primary, secondary) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            for (label, r) in [("primary", a.err()), ("swapped", b.err())] {
                if let Some(e) = r {
                    rep.set_env(&format!("{label}.error"), e);
                    rep.failure(&format!("dil.{label}"), tol.identity);
                }
            }
            return (item, rep);
        }
    };
    item.level = primary.level();
    rep.absorb("dil.primary", primary.report());
    rep.absorb("dil.swapped", secondary.report());

    let n1 = f.n();
    let n2 = g.n();
    let bipolys = battery_bipolys(n1, n2);
    let hermitian = battery_hermitian(n1, n2);
    let dils = [&primary, &secondary];
    let (ando, bounds) = verify_bounds(&pair, &dils, &bipolys, tol);
    rep.absorb("ando", &ando);
    rep.absorb("hermitian", &verify_bounds(&pair, &dils, &hermitian, tol).0);

    if *name == "z,z" {
        let mut labelled: Vec<(&str, Vec<f64>)> = vec![
            ("primary", bounds.iter().map(|b| b.as_ref().map_or(f64::NAN, |b| b.rhs[0])).collect()),
            ("swapped", bounds.iter().map(|b| b.as_ref().map_or(f64::NAN, |b| b.rhs[1])).collect()),
        ];
        let horizon = purity_horizon(f, pair.t1(), default_level_cap(1)).map_or(usize::MAX, |h| h.0);
        if horizon <= cfg.free_level_cap {
            let free = build_variety(f, horizon, Vec::new()).and_then(|v| ando_dilation(&pair, &v, tol.identity));
            match free {
                Ok(free) => {
                    rep.absorb("dil.free", free.report());
                    let (fr, fb) = verify_bounds(&pair, &[&free], &bipolys, tol);
                    rep.absorb("free.ando", &fr);
                    rep.absorb("free.hermitian", &verify_bounds(&pair, &[&free], &hermitian, tol).0);
                    labelled.push(("free", fb.iter().map(|b| b.as_ref().map_or(f64::NAN, |b| b.rhs[0])).collect()));
                }
                Err(e) => {
                    rep.set_env("free.error", e);
                    rep.failure("dil.free", tol.identity);
                }
            }
        }
        for (label, rhs) in &labelled {
            for ((pname, _), (grid, r)) in bipolys.iter().zip(shared.grid.iter().zip(rhs)) {
                rep.slack(&format!("grid.{pname}.{label}"), grid + cfg.grid_allowance - r, 0.0);
            }
        }
    }
    (item, rep)
}

/// Runs the seeded battery. Items are independent and run in parallel; the
/// report lists them in index order and is identical across runs.
pub fn run_battery(cfg: &BatteryConfig) -> Result<BatteryOutcome> {
    if cfg.count == 0 || cfg.min_dim == 0 || cfg.max_dim < cfg.min_dim || cfg.kinds.is_empty() {
        return Err(invalid("battery needs count ≥ 1, 1 ≤ min_dim ≤ max_dim and at least one kind"));
    }
    if !(cfg.tol.identity > 0.0 && cfg.tol.slack > 0.0 && cfg.grid_allowance >= 0.0) {
        return Err(invalid("tolerances must be positive"));
    }
    let configs = pair_configs(cfg.kinds.contains(&PairKind::JointlyNilpotent));
    let grid = battery_bipolys(1, 1)
        .par_iter()
        .map(|(_, p)| grid_sup_norm(p, cfg.grid_resolution))
        .collect::<Result<Vec<f64>>>()?;
    let shared = Shared { grid };
    let results: Vec<(BatteryItem, VerificationReport)> =
        (0..cfg.count).into_par_iter().map(|i| run_item(cfg, &configs, &shared, i)).collect();
    let mut report = VerificationReport::with_choices();
    report.set_env("battery.version", BATTERY_VERSION);
    report.set_env("battery.seed", cfg.seed);
    report.set_env("battery.count", cfg.count);
    report.set_env("battery.dims", format!("{}..{}", cfg.min_dim, cfg.max_dim));
    report.set_env("battery.kinds", cfg.kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(","));
    report.set_env("battery.grid_resolution", cfg.grid_resolution);
    report.set_env("battery.horizon_tol", format!("{HORIZON_TOL:e}"));
    for ((pname, _), g) in battery_bipolys(1, 1).iter().zip(&shared.grid) {
        report.set_env(&format!("grid.{pname}"), format!("{g:.6e}"));
    }
    let mut items = Vec::with_capacity(results.len());
    for (item, rep) in results {
        report.absorb(&format!("item[{:03}]", item.index), &rep);
        items.push(item);
    }
    Ok(BatteryOutcome { report, items })
}
