//! Polynomials in two commuting tuples `Z` (n1 letters) and `Z'` (n2
//! letters), their Hermitian relatives `Σ c Z_α Z'_β (Z'_σ)* (Z_γ)*`, and
//! block-matrix evaluation.

use crate::domain::OperatorTuple;
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::scalar::{abs, cx, Real, C};
use crate::words::Word;

/// `Σ c_{α,β} Z_α Z'_β`.
#[derive(Clone, Debug, PartialEq)]
pub struct BiPolynomial<T: Real> {
    n1: usize,
    n2: usize,
    terms: Vec<(Word, Word, C<T>)>,
}

fn wrap_word(w: &Word, n: usize) -> Word {
    Word::from_letters(&w.letters().iter().map(|&i| (i - 1) % n + 1).collect::<Vec<_>>())
}

impl<T: Real> BiPolynomial<T> {
    pub fn new(n1: usize, n2: usize, terms: Vec<(Word, Word, C<T>)>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(invalid("alphabets must be nonempty"));
        }
        let mut merged: Vec<(Word, Word, C<T>)> = Vec::new();
        for (a, b, c) in terms {
            if a.max_letter() > n1 || b.max_letter() > n2 {
                return Err(invalid(format!("term {a}|{b} uses letters beyond ({n1}, {n2})")));
            }
            match merged.iter_mut().find(|(u, v, _)| *u == a && *v == b) {
                Some(slot) => slot.2 += c,
                None => merged.push((a, b, c)),
            }
        }
        merged.retain(|t| abs(t.2) > T::zero());
        merged.sort_by(|x, y| x.0.cmp(&y.0).then_with(|| x.1.cmp(&y.1)));
        Ok(BiPolynomial { n1, n2, terms: merged })
    }

    pub fn constant(n1: usize, n2: usize, c: C<T>) -> Self {
        Self::new(n1, n2, vec![(Word::empty(), Word::empty(), c)]).expect("valid")
    }

    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn terms(&self) -> &[(Word, Word, C<T>)] {
        &self.terms
    }
    pub fn degree(&self) -> usize {
        self.terms.iter().map(|(a, b, _)| a.len() + b.len()).max().unwrap_or(0)
    }
    pub fn coeff_sum(&self) -> T {
        self.terms.iter().fold(T::zero(), |s, t| s + abs(t.2))
    }

    /// Re-reads every letter modulo the given alphabet sizes.
    pub fn wrapped(&self, n1: usize, n2: usize) -> Self {
        Self::new(n1, n2, self.terms.iter().map(|(a, b, c)| (wrap_word(a, n1), wrap_word(b, n2), *c)).collect())
            .expect("wrapped letters are in range")
    }

    /// The same polynomial with the roles of the two tuples exchanged.
    pub fn swapped(&self) -> Self {
        Self::new(self.n2, self.n1, self.terms.iter().map(|(a, b, c)| (b.clone(), a.clone(), *c)).collect())
            .expect("swapped letters are in range")
    }

    /// Scalar value at `(z, w)` (commuting scalars).
    pub fn eval_scalar(&self, z: &[C<T>], w: &[C<T>]) -> C<T> {
        self.terms
            .iter()
            .map(|(a, b, c)| *c * crate::domain::monomial(z, a) * crate::domain::monomial(w, b))
            .fold(cx(T::zero()), |s, v| s + v)
    }

    /// `Σ c X_α Y_β` (X first). Fails when the tuples do not commute to
    /// within `tol` (relative to their sizes).
    pub fn eval(&self, x: &OperatorTuple<T>, y: &OperatorTuple<T>, tol: T) -> Result<CMatrix<T>> {
        check_pair(self.n1, self.n2, x, y, tol)?;
        Ok(self.eval_unchecked(x, y, false))
    }

    /// Same sum with `Y_β X_α` ordering.
    pub fn eval_y_first(&self, x: &OperatorTuple<T>, y: &OperatorTuple<T>, tol: T) -> Result<CMatrix<T>> {
        check_pair(self.n1, self.n2, x, y, tol)?;
        Ok(self.eval_unchecked(x, y, true))
    }

    pub(crate) fn eval_unchecked(&self, x: &OperatorTuple<T>, y: &OperatorTuple<T>, y_first: bool) -> CMatrix<T> {
        let mut acc = linalg::zeros::<T>(x.dim(), x.dim());
        for (a, b, c) in &self.terms {
            let xa = x.word(a).expect("checked alphabet");
            let yb = y.word(b).expect("checked alphabet");
            let prod = if y_first { yb * xa } else { xa * yb };
            acc += prod * *c;
        }
        acc
    }
}

fn check_pair<T: Real>(n1: usize, n2: usize, x: &OperatorTuple<T>, y: &OperatorTuple<T>, tol: T) -> Result<()> {
    if x.n() != n1 || y.n() != n2 {
        return Err(invalid(format!("polynomial expects tuples of lengths ({n1}, {n2}), got ({}, {})", x.n(), y.n())));
    }
    if !x.is_square() || !y.is_square() || x.dim() != y.dim() {
        return Err(invalid("both tuples must be square on one space"));
    }
    let r = x.cross_commutator(y);
    let scale = T::one() + x.mats().iter().chain(y.mats()).map(linalg::op_norm).fold(T::zero(), |a, b| if b > a { b } else { a });
    if r > tol * scale * scale {
        return Err(Error::OrderAmbiguous { residual: r.as_f64(), tol: (tol * scale * scale).as_f64() });
    }
    Ok(())
}

/// `Σ c Z_α Z'_β (Z'_σ)* (Z_γ)*`; words stored as `[α, β, σ, γ]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianBiPolynomial<T: Real> {
    n1: usize,
    n2: usize,
    terms: Vec<([Word; 4], C<T>)>,
}

impl<T: Real> HermitianBiPolynomial<T> {
    pub fn new(n1: usize, n2: usize, terms: Vec<([Word; 4], C<T>)>) -> Result<Self> {
        if n1 == 0 || n2 == 0 {
            return Err(invalid("alphabets must be nonempty"));
        }
        let mut merged: Vec<([Word; 4], C<T>)> = Vec::new();
        for (w, c) in terms {
            if w[0].max_letter() > n1 || w[3].max_letter() > n1 || w[1].max_letter() > n2 || w[2].max_letter() > n2 {
                return Err(invalid("term uses letters beyond the alphabets"));
            }
            match merged.iter_mut().find(|(u, _)| *u == w) {
                Some(slot) => slot.1 += c,
                None => merged.push((w, c)),
            }
        }
        merged.retain(|t| abs(t.1) > T::zero());
        Ok(HermitianBiPolynomial { n1, n2, terms: merged })
    }

    pub fn n1(&self) -> usize {
        self.n1
    }
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn terms(&self) -> &[([Word; 4], C<T>)] {
        &self.terms
    }

    pub fn wrapped(&self, n1: usize, n2: usize) -> Self {
        Self::new(
            n1,
            n2,
            self.terms
                .iter()
                .map(|(w, c)| ([wrap_word(&w[0], n1), wrap_word(&w[1], n2), wrap_word(&w[2], n2), wrap_word(&w[3], n1)], *c))
                .collect(),
        )
        .expect("wrapped letters are in range")
    }

    /// Exchanges the tuples: `Z_α Z'_β Z'_σ* Z_γ*` becomes
    /// `Z'_β Z_α Z_γ* Z'_σ*`, equal on commuting pairs.
    pub fn swapped(&self) -> Self {
        Self::new(
            self.n2,
            self.n1,
            self.terms
                .iter()
                .map(|(w, c)| ([w[1].clone(), w[0].clone(), w[3].clone(), w[2].clone()], *c))
                .collect(),
        )
        .expect("swapped letters are in range")
    }

    /// `Σ c X_α Y_β Y_σ* X_γ*`.
    pub fn eval(&self, x: &OperatorTuple<T>, y: &OperatorTuple<T>, tol: T) -> Result<CMatrix<T>> {
        check_pair(self.n1, self.n2, x, y, tol)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &OperatorTuple<T>, y: &OperatorTuple<T>) -> CMatrix<T> {
        let mut acc = linalg::zeros::<T>(x.dim(), x.dim());
        for (w, c) in &self.terms {
            let left = x.word(&w[0]).expect("alphabet") * y.word(&w[1]).expect("alphabet");
            let right = x.word(&w[3]).expect("alphabet") * y.word(&w[2]).expect("alphabet");
            acc += left * right.adjoint() * *c;
        }
        acc
    }
}

/// Common interface of the two polynomial families when evaluated on pairs.
pub trait PairPolynomial<T: Real>: Clone {
    fn alphabets(&self) -> (usize, usize);
    /// Evaluation with the cross-commutation check.
    fn eval_pair(&self, x: &OperatorTuple<T>, y: &OperatorTuple<T>, tol: T) -> Result<CMatrix<T>>;
    /// Evaluation in the fixed normal order, without checks.
    fn eval_ordered(&self, x: &OperatorTuple<T>, y: &OperatorTuple<T>) -> CMatrix<T>;
    fn swap_roles(&self) -> Self;
}

impl<T: Real> PairPolynomial<T> for BiPolynomial<T> {
    fn alphabets(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }
    fn eval_pair(&self, x: &OperatorTuple<T>, y: &OperatorTuple<T>, tol: T) -> Result<CMatrix<T>> {
        self.eval(x, y, tol)
    }
    fn eval_ordered(&self, x: &OperatorTuple<T>, y: &OperatorTuple<T>) -> CMatrix<T> {
        self.eval_unchecked(x, y, false)
    }
    fn swap_roles(&self) -> Self {
        self.swapped()
    }
}

impl<T: Real> PairPolynomial<T> for HermitianBiPolynomial<T> {
    fn alphabets(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }
    fn eval_pair(&self, x: &OperatorTuple<T>, y: &OperatorTuple<T>, tol: T) -> Result<CMatrix<T>> {
        self.eval(x, y, tol)
    }
    fn eval_ordered(&self, x: &OperatorTuple<T>, y: &OperatorTuple<T>) -> CMatrix<T> {
        self.eval_unchecked(x, y)
    }
    fn swap_roles(&self) -> Self {
        self.swapped()
    }
}

/// A `k × k` matrix of polynomials, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix<P> {
    pub k: usize,
    pub entries: Vec<P>,
}

impl<P> PolyMatrix<P> {
    pub fn new(k: usize, entries: Vec<P>) -> Result<Self> {
        if k == 0 || entries.len() != k * k {
            return Err(invalid(format!("a {k}x{k} polynomial matrix needs {} entries", k * k)));
        }
        Ok(PolyMatrix { k, entries })
    }

    pub fn scalar(p: P) -> Self {
        PolyMatrix { k: 1, entries: vec![p] }
    }

    pub fn map<Q>(&self, f: impl Fn(&P) -> Q) -> PolyMatrix<Q> {
        PolyMatrix { k: self.k, entries: self.entries.iter().map(f).collect() }
    }
}

/// Assembles `[M_rs]` from `k²` equally sized blocks.
pub fn block_matrix<T: Real>(k: usize, blocks: &[CMatrix<T>]) -> CMatrix<T> {
    let d = blocks[0].nrows();
    let mut out = linalg::zeros::<T>(k * d, k * d);
    for r in 0..k {
        for s in 0..k {
            out.view_mut((r * d, s * d), (d, d)).copy_from(&blocks[r * k + s]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, max_abs};
    use crate::sample;

    fn j2() -> OperatorTuple<f64> {
        OperatorTuple::new(vec![from_real(2, 2, &[0.0, 1.0, 0.0, 0.0])]).unwrap()
    }

    #[test]
    fn unit_and_nilpotent_products() {
        let one = BiPolynomial::<f64>::constant(1, 1, cx(1.0));
        assert!(max_abs(&(one.eval(&j2(), &j2(), 1e-12).unwrap() - linalg::identity::<f64>(2))) == 0.0);
        let zw = BiPolynomial::new(1, 1, vec![(Word::letter(1), Word::letter(1), cx(1.0))]).unwrap();
        assert_eq!(linalg::op_norm(&zw.eval(&j2(), &j2(), 1e-12).unwrap()), 0.0);
        let q = HermitianBiPolynomial::new(1, 1, vec![([Word::letter(1), Word::empty(), Word::empty(), Word::letter(1)], cx(1.0))])
            .unwrap();
        let zero = OperatorTuple::<f64>::zero(1, 2, 2);
        assert_eq!(linalg::op_norm(&q.eval(&zero, &j2(), 1e-12).unwrap()), 0.0);
    }

    #[test]
    fn noncommuting_pair_is_rejected() {
        let a = OperatorTuple::new(vec![from_real::<f64>(2, 2, &[0.0, 1.0, 0.0, 0.0])]).unwrap();
        let b = OperatorTuple::new(vec![from_real::<f64>(2, 2, &[0.0, 0.0, 1.0, 0.0])]).unwrap();
        let p = BiPolynomial::new(1, 1, vec![(Word::letter(1), Word::letter(1), cx(1.0))]).unwrap();
        assert!(matches!(p.eval(&a, &b, 1e-9), Err(Error::OrderAmbiguous { .. })));
    }

    #[test]
    fn ordering_change_is_bounded_by_commutator() {
        let mut rng = sample::rng(9);
        let t = sample::random_matrix::<f64, _>(&mut rng, 4, 4) * cx(0.3);
        let x = OperatorTuple::new(vec![t.clone()]).unwrap();
        let eps = sample::random_matrix::<f64, _>(&mut rng, 4, 4) * cx(1e-11);
        let y = OperatorTuple::new(vec![&t * &t + eps]).unwrap();
        let p = BiPolynomial::new(
            1,
            1,
            vec![
                (Word::from_letters(&[1, 1]), Word::letter(1), cx(1.0)),
                (Word::letter(1), Word::letter(1), cx(-0.5)),
            ],
        )
        .unwrap();
        let a = p.eval(&x, &y, 1e-8).unwrap();
        let b = p.eval_y_first(&x, &y, 1e-8).unwrap();
        let res = x.cross_commutator(&y);
        assert!(max_abs(&(a - b)) <= 4.0 * p.coeff_sum() * res * 4.0);
    }
}
