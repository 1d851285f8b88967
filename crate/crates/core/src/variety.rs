//! Constrained models: subspaces `N_J` cut out by ideals of polynomials in
//! the weighted shifts, compressed creation operators, constrained Poisson
//! kernels, minimal polynomials and the commutative kernel `κ_f`.

use nalgebra::SVD;

use crate::domain::{monomial, FockModel, OperatorTuple, RegularPolynomial};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::poisson::{poisson_kernel, PoissonKernel};
use crate::report::VerificationReport;
use crate::scalar::{abs, cx, Real, C};
use crate::words::Word;

/// Relative singular-value threshold for rank decisions on generated
/// columns.
pub const RANK_REL_TOL: f64 = 1e-9;

/// `Σ c_w Z_w` with complex coefficients (constant term allowed).
#[derive(Clone, Debug, PartialEq)]
pub struct NcPolynomial<T: Real> {
    n: usize,
    terms: Vec<(Word, C<T>)>,
}

impl<T: Real> NcPolynomial<T> {
    pub fn new(n: usize, terms: Vec<(Word, C<T>)>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("polynomial needs at least one indeterminate"));
        }
        let mut merged: Vec<(Word, C<T>)> = Vec::new();
        for (w, c) in terms {
            if w.max_letter() > n {
                return Err(invalid(format!("word {w} uses a letter beyond n = {n}")));
            }
            match merged.iter_mut().find(|(u, _)| *u == w) {
                Some(slot) => slot.1 += c,
                None => merged.push((w, c)),
            }
        }
        merged.retain(|(_, c)| abs(*c) > T::zero());
        merged.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(NcPolynomial { n, terms: merged })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(Word, C<T>)] {
        &self.terms
    }

    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(w, _)| w.len()).max().unwrap_or(0)
    }

    pub fn is_homogeneous(&self) -> bool {
        let d = self.degree();
        self.terms.iter().all(|(w, _)| w.len() == d)
    }

    /// `Σ c_w X_w` on a square tuple.
    pub fn eval(&self, x: &OperatorTuple<T>) -> Result<CMatrix<T>> {
        if x.n() != self.n {
            return Err(invalid("tuple length differs from the polynomial's"));
        }
        let mut acc = linalg::zeros::<T>(x.dim(), x.dim());
        for (w, c) in &self.terms {
            acc += x.word(w)? * *c;
        }
        Ok(acc)
    }
}

/// Generators `Z_j Z_i − Z_i Z_j`, `i < j`.
pub fn commutator_ideal<T: Real>(n: usize) -> Vec<NcPolynomial<T>> {
    let mut out = Vec::new();
    for i in 1..=n {
        for j in i + 1..=n {
            out.push(
                NcPolynomial::new(
                    n,
                    vec![(Word::from_letters(&[j, i]), cx(T::one())), (Word::from_letters(&[i, j]), cx(-T::one()))],
                )
                .expect("valid"),
            );
        }
    }
    out
}

/// Single-variable generator `Σ c_j Z^j` from ascending coefficients.
pub fn minimal_polynomial_ideal<T: Real>(coeffs: &[C<T>]) -> NcPolynomial<T> {
    let terms = coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| (Word::from_letters(&vec![1; j]), *c))
        .collect();
    NcPolynomial::new(1, terms).expect("valid")
}

/// Monic minimal polynomial of a square matrix, ascending coefficients.
/// The degree is the first `k` for which `vec(T^k)` lies in the span of the
/// lower powers up to `tol` (relative to `‖T^k‖`).
pub fn minimal_polynomial<T: Real>(t: &CMatrix<T>, tol: T) -> Result<Vec<C<T>>> {
    let d = t.nrows();
    if d == 0 || t.ncols() != d {
        return Err(invalid("minimal polynomial needs a nonempty square matrix"));
    }
    let mut powers = vec![linalg::identity::<T>(d)];
    for k in 1..=d {
        let next = &powers[k - 1] * t;
        let basis = CMatrix::<T>::from_fn(d * d, k, |r, c| powers[c][(r % d, r / d)]);
        let target = CMatrix::<T>::from_fn(d * d, 1, |r, _| -next[(r % d, r / d)]);
        let svd = SVD::new(basis.clone(), true, true);
        let smax = svd.singular_values.iter().copied().fold(T::zero(), |a, s| if s > a { s } else { a });
        let sol = svd
            .solve(&target, T::lit(1e-13) * smax)
            .map_err(|e| Error::InvalidArgument(format!("least squares failed: {e}")))?;
        let resid = linalg::op_norm(&(&basis * &sol - &target));
        let scale = T::one() + linalg::op_norm(&next);
        if resid <= tol * scale {
            let mut coeffs: Vec<C<T>> = sol.column(0).iter().copied().collect();
            coeffs.push(cx(T::one()));
            return Ok(coeffs);
        }
        powers.push(next);
    }
    Err(Error::OrderAmbiguous { residual: f64::NAN, tol: tol.as_f64() })
}

/// Truncated constrained model `N_J = F²_N ⊖ span{W_α q_s(W) e_γ}`.
#[derive(Clone, Debug)]
pub struct VarietyModel<T: Real> {
    model: FockModel<T>,
    generators: Vec<NcPolynomial<T>>,
    basis: CMatrix<T>,
    b_ops: OperatorTuple<T>,
    c_ops: OperatorTuple<T>,
    stable_level: usize,
}

/// Column `W_α q(W) e_γ = Σ_w c_w √(b_γ / b_{αwγ}) e_{αwγ}`.
fn generated_column<T: Real>(model: &FockModel<T>, q: &NcPolynomial<T>, alpha: &Word, gamma: &Word) -> nalgebra::DVector<C<T>> {
    let table = model.table();
    let b = model.b();
    let gi = table.index(gamma).expect("within level");
    let mut v = nalgebra::DVector::<C<T>>::zeros(table.len());
    for (w, c) in q.terms() {
        let ti = table.index(&alpha.concat(w).concat(gamma)).expect("within level");
        v[ti] += *c * cx((b.at(gi) / b.at(ti)).sqrt());
    }
    v
}

fn columns_of<T: Real>(model: &FockModel<T>, generators: &[NcPolynomial<T>], exact_len: Option<usize>) -> Vec<nalgebra::DVector<C<T>>> {
    let n = model.f().n();
    let level = model.level();
    let mut cols = Vec::new();
    for q in generators {
        let dq = q.degree();
        if dq > level {
            continue;
        }
        // for one letter W^a q(W) e_g is a multiple of q(W) e_{a+g}
        let max_la = if n == 1 { 0 } else { level - dq };
        for la in 0..=max_la {
            for lg in 0..=level - dq - la {
                if let Some(m) = exact_len {
                    if la + dq + lg != m {
                        continue;
                    }
                }
                for alpha in Word::all_of_length(n, la) {
                    for gamma in Word::all_of_length(n, lg) {
                        cols.push(generated_column(model, q, &alpha, &gamma));
                    }
                }
            }
        }
    }
    cols
}

fn as_matrix<T: Real>(rows: usize, cols: &[nalgebra::DVector<C<T>>]) -> CMatrix<T> {
    let mut m = linalg::zeros::<T>(rows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

pub fn build_variety<T: Real>(f: &RegularPolynomial<T>, level: usize, generators: Vec<NcPolynomial<T>>) -> Result<VarietyModel<T>> {
    for q in &generators {
        if q.n() != f.n() {
            return Err(invalid("generator alphabet differs from f"));
        }
        if q.degree() > level {
            return Err(invalid(format!("generator of degree {} exceeds the level {level}", q.degree())));
        }
    }
    let model = FockModel::new(f, level);
    let dim = model.dim();
    let homogeneous = generators.iter().all(|q| q.is_homogeneous());
    let basis = if generators.is_empty() {
        linalg::identity(dim)
    } else if homogeneous {
        let mut parts = Vec::new();
        for m in 0..=level {
            let range = model.table().level(m);
            let cols = columns_of(&model, &generators, Some(m));
            let slice = as_matrix(range.len(), &cols.iter().map(|c| c.rows(range.start, range.len()).into_owned()).collect::<Vec<_>>());
            let q = linalg::orthonormal_range(&slice, T::lit(RANK_REL_TOL));
            let comp = linalg::orth_complement(&q, range.len());
            let mut emb = linalg::zeros::<T>(dim, comp.ncols());
            emb.view_mut((range.start, 0), (range.len(), comp.ncols())).copy_from(&comp);
            parts.push(emb);
        }
        linalg::hstack(&parts.iter().collect::<Vec<_>>())
    } else {
        let cols = columns_of(&model, &generators, None);
        let q = linalg::orthonormal_range(&as_matrix(dim, &cols), T::lit(RANK_REL_TOL));
        linalg::orth_complement(&q, dim)
    };
    let compress = |t: &OperatorTuple<T>| {
        OperatorTuple::new(t.mats().iter().map(|m| basis.adjoint() * m * &basis).collect()).expect("square")
    };
    let b_ops = compress(model.left());
    let c_ops = compress(model.right());
    let max_deg = generators.iter().map(|q| q.degree()).max().unwrap_or(0);
    let stable_level = if homogeneous { level } else { level.saturating_sub(f.k() * max_deg) };
    Ok(VarietyModel { model, generators, basis, b_ops, c_ops, stable_level })
}

impl<T: Real> VarietyModel<T> {
    pub fn model(&self) -> &FockModel<T> {
        &self.model
    }
    pub fn generators(&self) -> &[NcPolynomial<T>] {
        &self.generators
    }
    /// Orthonormal columns spanning `N_J` inside the truncated Fock space.
    pub fn basis(&self) -> &CMatrix<T> {
        &self.basis
    }
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
    /// `B_i = P W_i |_{N_J}` in basis coordinates.
    pub fn b(&self) -> &OperatorTuple<T> {
        &self.b_ops
    }
    /// `C_i = P Λ_i |_{N_J}` in basis coordinates.
    pub fn c(&self) -> &OperatorTuple<T> {
        &self.c_ops
    }
    pub fn level(&self) -> usize {
        self.model.level()
    }
    /// Highest level on which identities are expected to be exact.
    pub fn stable_level(&self) -> usize {
        self.stable_level
    }

    /// Number of basis vectors supported on each word length.
    pub fn level_dims(&self) -> Vec<usize> {
        let table = self.model.table();
        (0..=self.level())
            .map(|m| {
                let r = table.level(m);
                (0..self.dim())
                    .filter(|&j| self.basis.column(j).rows(r.start, r.len()).norm() > T::lit(0.5))
                    .count()
            })
            .collect()
    }

    /// Projection onto `N_J` as a Fock-space matrix.
    pub fn projection(&self) -> CMatrix<T> {
        &self.basis * self.basis.adjoint()
    }

    /// `max_i ‖(I − P) W_i* P‖` and `max_i ‖(I − P) Λ_i* P‖` over all of
    /// `N_J`; zero exactly when the truncation is co-invariant.
    pub fn invariance_defect(&self) -> T {
        let q = linalg::identity::<T>(self.model.dim()) - self.projection();
        self.model
            .left()
            .mats()
            .iter()
            .chain(self.model.right().mats())
            .map(|w| linalg::op_norm(&(&q * w.adjoint() * &self.basis)))
            .fold(T::zero(), |a, b| if b > a { b } else { a })
    }

    /// Co-invariance `‖(I − P) W_i* P‖` and the generator residuals
    /// `‖q_s(B)‖`, each restricted to basis vectors of `N_J` supported on
    /// stable levels.
    pub fn verify(&self, tol: T) -> Result<VerificationReport> {
        let mut rep = VerificationReport::new();
        rep.set_env("variety.level", self.level());
        rep.set_env("variety.stable_level", self.stable_level);
        rep.set_env("variety.dim", self.dim());
        let table = self.model.table();
        let stable_end = table.level(self.stable_level).end;
        let keep: Vec<usize> = (0..self.dim())
            .filter(|&j| self.basis.column(j).rows(stable_end, table.len() - stable_end).norm() <= T::lit(1e-12))
            .collect();
        let p = self.projection();
        let q = linalg::identity::<T>(table.len()) - &p;
        let restricted_cols = self.basis.select_columns(keep.iter());
        let mut worst = T::zero();
        for w in self.model.left().mats() {
            let r = linalg::op_norm(&(&q * w.adjoint() * &restricted_cols));
            if r > worst {
                worst = r;
            }
        }
        rep.residual("variety.coinvariant", worst.as_f64(), tol.as_f64());
        let all: Vec<usize> = (0..self.dim()).collect();
        let mut gen = T::zero();
        let shallow: Vec<usize> = keep
            .iter()
            .copied()
            .filter(|&j| {
                let deg = self.generators.iter().map(|g| g.degree()).max().unwrap_or(0);
                let cut = table.level(self.stable_level.saturating_sub(deg)).end;
                self.basis.column(j).rows(cut, table.len() - cut).norm() <= T::lit(1e-12)
            })
            .collect();
        for g in &self.generators {
            let r = linalg::restricted_norm(&g.eval(&self.b_ops)?, &all, &shallow);
            if r > gen {
                gen = r;
            }
        }
        rep.residual("variety.generators_vanish_on_model", gen.as_f64(), tol.as_f64());
        Ok(rep)
    }
}

/// `K_J = (P_{N_J} ⊗ I) K_{f,T}` written in `N_J` coordinates.
pub fn constrained_poisson<T: Real>(
    f: &RegularPolynomial<T>,
    variety: &VarietyModel<T>,
    t: &OperatorTuple<T>,
    tol: T,
) -> Result<PoissonKernel<T>> {
    for (index, q) in variety.generators().iter().enumerate() {
        let r = linalg::op_norm(&q.eval(t)?);
        if r > tol * (T::one() + linalg::op_norm(t.get(0))) {
            return Err(Error::NotInVariety { index, residual: r.as_f64() });
        }
    }
    let k = poisson_kernel(f, t, variety.level(), tol)?;
    let r = k.rank();
    let proj = linalg::kron(&variety.basis().adjoint(), &linalg::identity(r));
    Ok(PoissonKernel::from_parts(proj * k.matrix(), variety.level(), k.defect().clone()))
}

/// `K_J T_α* = (B_α* ⊗ I) K_J` for `1 ≤ |α| ≤ max_len`, and `K_J*K_J = I`.
pub fn verify_constrained_kernel<T: Real>(
    variety: &VarietyModel<T>,
    t: &OperatorTuple<T>,
    kj: &PoissonKernel<T>,
    max_len: usize,
    tol: T,
) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new();
    let r = kj.rank();
    let id_r = linalg::identity::<T>(r);
    let mut worst = T::zero();
    for len in 1..=max_len {
        for w in Word::all_of_length(t.n(), len) {
            let lhs = kj.matrix() * t.word(&w)?.adjoint();
            let rhs = linalg::kron(&variety.b().word(&w)?.adjoint(), &id_r) * kj.matrix();
            let v = linalg::op_norm(&(lhs - rhs));
            if v > worst {
                worst = v;
            }
        }
    }
    rep.residual("constrained_kernel.intertwining", worst.as_f64(), tol.as_f64());
    let gram = kj.matrix().adjoint() * kj.matrix();
    rep.residual(
        "constrained_kernel.isometry",
        linalg::op_norm(&(gram - linalg::identity::<T>(t.dim()))).as_f64(),
        tol.as_f64(),
    );
    Ok(rep)
}

/// Closed form, partial sum and tail bound of `κ_f(μ, λ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaValue<T: Real> {
    pub closed: C<T>,
    pub partial: C<T>,
    pub tail_bound: T,
}

/// `κ_f(μ, λ) = 1 / (1 − Σ a_α μ_α λ̄_α)` and `Σ_{|α| ≤ M} b_α μ_α λ̄_α`.
///
/// The partial sum groups words by length: with `z_i = μ_i λ̄_i` the
/// length-`m` part obeys `S_m = Σ_{j ≤ k} A_j S_{m−j}`, where
/// `A_j = Σ_{|α|=j} a_α z_α`.
pub fn kappa_eval<T: Real>(f: &RegularPolynomial<T>, mu: &[C<T>], lambda: &[C<T>], order: usize) -> Result<KappaValue<T>> {
    if mu.len() != f.n() || lambda.len() != f.n() {
        return Err(invalid("points must have one coordinate per indeterminate"));
    }
    let z: Vec<C<T>> = mu.iter().zip(lambda).map(|(m, l)| *m * l.conj()).collect();
    let mut s = T::zero();
    for pt in [mu, lambda] {
        let mut v = T::zero();
        for (w, a) in f.terms() {
            v += *a * abs(monomial(pt, w)).powi(2);
        }
        if v >= T::one() {
            return Err(invalid("point lies outside the open domain"));
        }
    }
    let mut by_len = vec![cx(T::zero()); f.k() + 1];
    for (w, a) in f.terms() {
        let m = monomial(&z, w);
        s += *a * abs(m);
        by_len[w.len()] += m * cx(*a);
    }
    if s >= T::one() {
        return Err(invalid("kernel series does not converge at this pair"));
    }
    let total = by_len.iter().fold(cx(T::zero()), |acc, v| acc + *v);
    let closed = cx(T::one()) / (cx(T::one()) - total);
    let mut sums = vec![cx(T::one())];
    for m in 1..=order {
        let mut acc = cx(T::zero());
        for j in 1..=f.k().min(m) {
            acc += by_len[j] * sums[m - j];
        }
        sums.push(acc);
    }
    let partial = sums.iter().fold(cx(T::zero()), |acc, v| acc + *v);
    let j0 = (order + 1).div_ceil(f.k());
    let tail_bound = s.powi(j0 as i32) / (T::one() - s);
    Ok(KappaValue { closed, partial, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::BCoefficients;
    use crate::linalg::{from_real, max_abs};
    use crate::scalar::cx_f64;
    use crate::words::WordTable;
    use proptest::prelude::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn empty_ideal_keeps_everything() {
        let f = RegularPolynomial::<f64>::linear(2);
        let v = build_variety(&f, 3, vec![]).unwrap();
        assert_eq!(v.dim(), 15);
        assert_eq!(v.b(), v.model().left());
    }

    #[test]
    fn symmetric_fock_dimensions() {
        for n in [2usize, 3] {
            let f = RegularPolynomial::<f64>::linear(n);
            let level = if n == 2 { 6 } else { 5 };
            let v = build_variety(&f, level, commutator_ideal(n)).unwrap();
            for (m, d) in v.level_dims().into_iter().enumerate() {
                assert_eq!(d, binom(n + m - 1, m), "n={n} m={m}");
            }
            assert!(v.verify(1e-10).unwrap().passed());
        }
    }

    #[test]
    fn shift_model_of_z_squared() {
        let f = RegularPolynomial::<f64>::linear(1);
        let q = minimal_polynomial_ideal(&[cx(0.0), cx(0.0), cx(1.0)]);
        let v = build_variety(&f, 5, vec![q]).unwrap();
        assert_eq!(v.dim(), 2);
        let p = v.projection();
        let expect = {
            let mut m = linalg::zeros::<f64>(6, 6);
            m[(0, 0)] = cx(1.0);
            m[(1, 1)] = cx(1.0);
            m
        };
        assert!(max_abs(&(p - expect)) < 1e-14);
        let b = v.b().get(0);
        assert!(max_abs(&(b * b)) < 1e-14);
        assert!((linalg::op_norm(b) - 1.0).abs() < 1e-14);

        let j2 = OperatorTuple::new(vec![from_real(2, 2, &[0.0, 1.0, 0.0, 0.0])]).unwrap();
        let kj = constrained_poisson(&f, &v, &j2, 1e-9).unwrap();
        assert_eq!(kj.matrix().shape(), (2, 2));
        assert!(verify_constrained_kernel(&v, &j2, &kj, 3, 1e-12).unwrap().passed());
    }

    #[test]
    fn minimal_polynomials() {
        let j3 = from_real::<f64>(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let m = minimal_polynomial(&j3, 1e-10).unwrap();
        assert_eq!(m.len(), 4);
        assert!(m[..3].iter().all(|c| c.norm() < 1e-12));
        let d = from_real::<f64>(3, 3, &[0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, -0.2]);
        let m = minimal_polynomial(&d, 1e-10).unwrap();
        assert_eq!(m.len(), 3);
        // (z − 0.5)(z + 0.2) = z² − 0.3 z − 0.1
        assert!((m[0] - cx(-0.1)).norm() < 1e-12 && (m[1] - cx(-0.3)).norm() < 1e-12);
    }

    #[test]
    fn model_space_dimension_matches_degree() {
        let f = RegularPolynomial::<f64>::from_terms(1, &[(&[1], 1.0), (&[1, 1], 0.5)]).unwrap();
        let roots = [cx_f64::<f64>(0.3, 0.1), cx_f64(-0.2, 0.0), cx_f64(0.0, 0.0)];
        // (z − r1)(z − r2)(z − r3), ascending
        let mut coeffs = vec![cx(1.0)];
        for r in roots {
            let mut next = vec![cx(0.0); coeffs.len() + 1];
            for (i, c) in coeffs.iter().enumerate() {
                next[i + 1] += *c;
                next[i] -= *c * r;
            }
            coeffs = next;
        }
        let q = minimal_polynomial_ideal(&coeffs);
        let d1 = build_variety(&f, 12, vec![q.clone()]).unwrap().dim();
        let d2 = build_variety(&f, 13, vec![q]).unwrap().dim();
        assert_eq!((d1, d2), (3, 3));
    }

    #[test]
    fn kappa_examples() {
        let f = RegularPolynomial::<f64>::linear(2);
        let k = kappa_eval(&f, &[cx(0.0), cx(0.0)], &[cx(0.0), cx(0.0)], 5).unwrap();
        assert_eq!(k.closed, cx(1.0));
        let k = kappa_eval(&f, &[cx(0.5), cx(0.0)], &[cx(0.5), cx(0.0)], 20).unwrap();
        assert!((k.closed - cx(4.0 / 3.0)).norm() < 1e-15);
        assert!((k.closed - k.partial).norm() <= k.tail_bound);
        assert!(kappa_eval(&f, &[cx(0.8), cx(0.8)], &[cx(0.1), cx(0.1)], 5).is_err());
    }

    proptest! {
        #[test]
        fn kappa_partial_sum_matches_word_expansion(re in -0.4f64..0.4, im in -0.4f64..0.4, lre in -0.4f64..0.4) {
            let f = RegularPolynomial::<f64>::from_terms(2, &[(&[1], 1.0), (&[2], 0.5), (&[1, 2], 0.5)]).unwrap();
            let mu = [cx_f64(re, im), cx_f64(lre, 0.1)];
            let la = [cx_f64(lre, -im), cx_f64(0.2, re)];
            let k = kappa_eval(&f, &mu, &la, 7).unwrap();
            let b = BCoefficients::new(&f, 7);
            let t = WordTable::new(2, 7);
            let mut direct = cx(0.0);
            for (i, w) in t.words().iter().enumerate() {
                direct += monomial(&mu, w) * monomial(&la, w).conj() * cx(b.at(i));
            }
            prop_assert!((direct - k.partial).norm() < 1e-12);
            prop_assert!((k.closed - k.partial).norm() <= k.tail_bound + 1e-15);
        }
    }
}
