//! Positive regular polynomials, the weights `b_α` of their inverse series,
//! truncated weighted creation operators and the completely positive map
//! `Φ_{f,T}`.

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::scalar::{cx, Real};
use crate::words::{Word, WordTable};

/// Noncommutative polynomial `f = Σ a_α Z_α` with `a_α ≥ 0`, no constant term
/// and strictly positive single-letter coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularPolynomial<T: Real> {
    n: usize,
    k: usize,
    coeffs: Vec<(Word, T)>,
}

impl<T: Real> RegularPolynomial<T> {
    pub fn new(n: usize, terms: Vec<(Word, T)>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("a regular polynomial needs at least one indeterminate"));
        }
        let mut map: HashMap<Word, T> = HashMap::new();
        for (w, a) in terms {
            if w.is_empty() {
                if a != T::zero() {
                    return Err(invalid("positive regular polynomials have no constant term (a_{g0} must be 0)"));
                }
                continue;
            }
            if w.max_letter() > n {
                return Err(invalid(format!("word {w} uses a letter beyond n = {n}")));
            }
            if !a.is_finite() || a < T::zero() {
                return Err(invalid(format!("coefficient of {w} must be finite and nonnegative")));
            }
            if map.insert(w.clone(), a).is_some() {
                return Err(invalid(format!("duplicate coefficient for {w}")));
            }
        }
        for i in 1..=n {
            if map.get(&Word::letter(i)).copied().unwrap_or_else(T::zero) <= T::zero() {
                return Err(invalid(format!("coefficient of g{i} must be strictly positive")));
            }
        }
        let mut coeffs: Vec<(Word, T)> = map.into_iter().filter(|(_, a)| *a > T::zero()).collect();
        coeffs.sort_by(|a, b| a.0.cmp(&b.0));
        let k = coeffs.iter().map(|(w, _)| w.len()).max().unwrap_or(1);
        Ok(RegularPolynomial { n, k, coeffs })
    }

    /// `z_1 + ... + z_n`.
    pub fn linear(n: usize) -> Self {
        Self::new(n, (1..=n).map(|i| (Word::letter(i), T::one())).collect()).expect("valid")
    }

    /// Convenience constructor from `(letters, coefficient)` pairs.
    pub fn from_terms(n: usize, terms: &[(&[usize], f64)]) -> Result<Self> {
        Self::new(n, terms.iter().map(|(l, a)| (Word::from_letters(l), T::lit(*a))).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Degree of `f`.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of words `α` with `1 ≤ |α| ≤ k`, i.e. the multiplicity of the
    /// defect space in a colligation.
    pub fn word_count(&self) -> usize {
        (1..=self.k).map(|l| self.n.pow(l as u32)).sum()
    }

    /// Words `1 ≤ |α| ≤ k` in graded order.
    pub fn words(&self) -> Vec<Word> {
        (1..=self.k).flat_map(|l| Word::all_of_length(self.n, l)).collect()
    }

    /// Terms with positive coefficient, in graded order.
    pub fn terms(&self) -> &[(Word, T)] {
        &self.coeffs
    }

    pub fn coeff(&self, w: &Word) -> T {
        self.coeffs
            .binary_search_by(|(u, _)| u.cmp(w))
            .map(|i| self.coeffs[i].1)
            .unwrap_or_else(|_| T::zero())
    }

    /// Polynomial with every word reversed.
    pub fn reversed(&self) -> Self {
        Self::new(self.n, self.coeffs.iter().map(|(w, a)| (w.reversed(), *a)).collect()).expect("valid")
    }

    pub fn is_reversal_symmetric(&self) -> bool {
        self.coeffs.iter().all(|(w, a)| self.coeff(&w.reversed()) == *a)
    }

    /// Sum of coefficients of the degree-one part.
    pub fn linear_part(&self) -> Self {
        Self::new(self.n, (1..=self.n).map(|i| (Word::letter(i), self.coeff(&Word::letter(i)))).collect())
            .expect("valid")
    }

    /// Scalar value `Σ a_α μ_α` at a commuting point.
    pub fn eval_scalar(&self, point: &[crate::scalar::C<T>]) -> crate::scalar::C<T> {
        self.coeffs
            .iter()
            .map(|(w, a)| monomial(point, w) * cx(*a))
            .fold(cx(T::zero()), |s, z| s + z)
    }
}

pub(crate) fn monomial<T: Real>(point: &[crate::scalar::C<T>], w: &Word) -> crate::scalar::C<T> {
    w.letters().iter().fold(cx(T::one()), |p, &i| p * point[i - 1])
}

/// The weights `b_α` for `|α| ≤ N`, laid out along a [`WordTable`].
#[derive(Clone, Debug)]
pub struct BCoefficients<T: Real> {
    table: WordTable,
    values: Vec<T>,
}

impl<T: Real> BCoefficients<T> {
    pub fn new(f: &RegularPolynomial<T>, level: usize) -> Self {
        let table = WordTable::new(f.n(), level);
        let mut values = vec![T::zero(); table.len()];
        values[0] = T::one();
        for idx in 1..table.len() {
            let w = table.word(idx).letters();
            let mut acc = T::zero();
            for j in 1..=f.k().min(w.len()) {
                let a = f.coeff(&Word::from_letters(&w[..j]));
                if a > T::zero() {
                    let rest = table.index(&Word::from_letters(&w[j..])).expect("shorter word in table");
                    acc += a * values[rest];
                }
            }
            values[idx] = acc;
        }
        BCoefficients { table, values }
    }

    pub fn level(&self) -> usize {
        self.table.max_len()
    }

    pub fn table(&self) -> &WordTable {
        &self.table
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, w: &Word) -> T {
        self.values[self.table.index(w).expect("word within truncation level")]
    }

    pub fn at(&self, idx: usize) -> T {
        self.values[idx]
    }
}

/// An `n`-tuple of matrices sharing one shape.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorTuple<T: Real> {
    mats: Vec<CMatrix<T>>,
}

impl<T: Real> OperatorTuple<T> {
    pub fn new(mats: Vec<CMatrix<T>>) -> Result<Self> {
        let first = mats.first().ok_or_else(|| invalid("operator tuple must be nonempty"))?;
        let shape = first.shape();
        if mats.iter().any(|m| m.shape() != shape) {
            return Err(invalid("all matrices of a tuple must share one shape"));
        }
        if mats.iter().any(|m| !linalg::is_finite(m)) {
            return Err(invalid("operator entries must be finite"));
        }
        Ok(OperatorTuple { mats })
    }

    pub fn zero(n: usize, rows: usize, cols: usize) -> Self {
        OperatorTuple { mats: vec![linalg::zeros(rows, cols); n] }
    }

    pub fn n(&self) -> usize {
        self.mats.len()
    }

    pub fn rows(&self) -> usize {
        self.mats[0].nrows()
    }

    pub fn cols(&self) -> usize {
        self.mats[0].ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    /// Ambient dimension of a square tuple.
    pub fn dim(&self) -> usize {
        debug_assert!(self.is_square());
        self.rows()
    }

    pub fn mats(&self) -> &[CMatrix<T>] {
        &self.mats
    }

    pub fn get(&self, i: usize) -> &CMatrix<T> {
        &self.mats[i]
    }

    pub fn scaled(&self, s: T) -> Self {
        OperatorTuple { mats: self.mats.iter().map(|m| m * cx(s)).collect() }
    }

    pub fn adjoints(&self) -> Self {
        OperatorTuple { mats: self.mats.iter().map(|m| m.adjoint()).collect() }
    }

    /// `T_α = T_{i1} ⋯ T_{ik}`; the empty word gives the identity.
    pub fn word(&self, w: &Word) -> Result<CMatrix<T>> {
        if w.max_letter() > self.n() {
            return Err(invalid(format!("word {w} exceeds tuple length {}", self.n())));
        }
        match w.len() {
            0 if self.is_square() => Ok(linalg::identity(self.rows())),
            1 => Ok(self.mats[w.letters()[0] - 1].clone()),
            _ if !self.is_square() => Err(invalid("products of length other than one need a square tuple")),
            _ => {
                let mut p = self.mats[w.letters()[0] - 1].clone();
                for &i in &w.letters()[1..] {
                    p = &p * &self.mats[i - 1];
                }
                Ok(p)
            }
        }
    }

    /// `T_α` for every word of a table, reusing prefixes.
    pub fn word_products(&self, table: &WordTable) -> Result<Vec<CMatrix<T>>> {
        if table.n() != self.n() {
            return Err(invalid("word table alphabet differs from tuple length"));
        }
        if table.max_len() > 1 && !self.is_square() {
            return Err(invalid("products of length above one need a square tuple"));
        }
        let mut out: Vec<CMatrix<T>> = Vec::with_capacity(table.len());
        for (idx, w) in table.words().iter().enumerate() {
            let m = match w.len() {
                0 => {
                    if self.is_square() {
                        linalg::identity(self.rows())
                    } else {
                        linalg::zeros(0, 0)
                    }
                }
                1 => self.mats[w.letters()[0] - 1].clone(),
                _ => {
                    let head = Word::from_letters(&w.letters()[..w.len() - 1]);
                    let hi = table.index(&head).expect("prefix precedes word");
                    debug_assert!(hi < idx);
                    &out[hi] * &self.mats[*w.letters().last().expect("nonempty") - 1]
                }
            };
            out.push(m);
        }
        Ok(out)
    }

    /// Largest commutator norm `‖X_i Y_j − Y_j X_i‖` between two tuples.
    pub fn cross_commutator(&self, other: &OperatorTuple<T>) -> T {
        let mut worst = T::zero();
        for x in &self.mats {
            for y in &other.mats {
                let r = linalg::op_norm(&(x * y - y * x));
                if r > worst {
                    worst = r;
                }
            }
        }
        worst
    }
}

fn check_tuple<T: Real>(f: &RegularPolynomial<T>, t: &OperatorTuple<T>) -> Result<()> {
    if f.n() != t.n() {
        return Err(invalid(format!("polynomial has {} indeterminates but tuple has {} entries", f.n(), t.n())));
    }
    if f.k() > 1 && !t.is_square() {
        return Err(invalid("a polynomial of degree above one needs a square tuple"));
    }
    Ok(())
}

/// `Φ_{f,T}(X) = Σ a_α T_α X T_α*`.
pub fn apply_phi<T: Real>(f: &RegularPolynomial<T>, t: &OperatorTuple<T>, x: &CMatrix<T>) -> Result<CMatrix<T>> {
    check_tuple(f, t)?;
    if x.nrows() != t.cols() || x.ncols() != t.cols() {
        return Err(invalid(format!(
            "argument is {}x{} but the tuple acts on dimension {}",
            x.nrows(),
            x.ncols(),
            t.cols()
        )));
    }
    let mut acc = linalg::zeros::<T>(t.rows(), t.rows());
    for (w, a) in f.terms() {
        let tw = t.word(w)?;
        acc += (&tw * x * tw.adjoint()) * cx(*a);
    }
    Ok(acc)
}

/// `Φ_{f,T}^m(X)`.
pub fn apply_phi_power<T: Real>(
    f: &RegularPolynomial<T>,
    t: &OperatorTuple<T>,
    x: &CMatrix<T>,
    m: usize,
) -> Result<CMatrix<T>> {
    let mut cur = x.clone();
    for _ in 0..m {
        cur = apply_phi(f, t, &cur)?;
    }
    Ok(cur)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membership<T> {
    pub in_domain: bool,
    pub in_ellipsoid: bool,
    /// `λ_min(I − Φ_{f,T}(I))`.
    pub min_eig: T,
    /// Same for the degree-one part of `f`.
    pub ellipsoid_min_eig: T,
}

pub fn domain_membership<T: Real>(f: &RegularPolynomial<T>, t: &OperatorTuple<T>, tol: T) -> Result<Membership<T>> {
    let d = t.rows();
    let id = linalg::identity::<T>(d);
    let phi = apply_phi(f, t, &linalg::identity(t.cols()))?;
    let ell = apply_phi(&f.linear_part(), t, &linalg::identity(t.cols()))?;
    let min_eig = linalg::min_eigenvalue(&(&id - phi));
    let ellipsoid_min_eig = linalg::min_eigenvalue(&(&id - ell));
    Ok(Membership {
        in_domain: min_eig >= -tol,
        in_ellipsoid: ellipsoid_min_eig >= -tol,
        min_eig,
        ellipsoid_min_eig,
    })
}

/// `‖Φ^m_{f,T}(I)‖` for `m = 1..=m_max`.
pub fn purity_estimate<T: Real>(f: &RegularPolynomial<T>, t: &OperatorTuple<T>, m_max: usize, tol: T) -> Result<Vec<T>> {
    if !t.is_square() {
        return Err(invalid("purity is defined for square tuples"));
    }
    let mem = domain_membership(f, t, tol)?;
    if !mem.in_domain {
        return Err(Error::PreconditionViolation(format!(
            "tuple is not in the domain (min eigenvalue {:e})",
            mem.min_eig.as_f64()
        )));
    }
    let mut cur = linalg::identity::<T>(t.dim());
    let mut out = Vec::with_capacity(m_max);
    for _ in 0..m_max {
        cur = apply_phi(f, t, &cur)?;
        out.push(linalg::op_norm(&cur));
    }
    Ok(out)
}

/// Truncated Fock-space model of `f` at level `N`: the word table, the
/// weights and the weighted left and right creation operators.
#[derive(Clone, Debug)]
pub struct FockModel<T: Real> {
    f: RegularPolynomial<T>,
    b: BCoefficients<T>,
    left: OperatorTuple<T>,
    right: OperatorTuple<T>,
}

impl<T: Real> FockModel<T> {
    pub fn new(f: &RegularPolynomial<T>, level: usize) -> Self {
        let b = BCoefficients::new(f, level);
        let left = creation(&b, f.n(), Side::Left);
        let right = creation(&b, f.n(), Side::Right);
        FockModel { f: f.clone(), b, left, right }
    }

    pub fn f(&self) -> &RegularPolynomial<T> {
        &self.f
    }

    pub fn level(&self) -> usize {
        self.b.level()
    }

    pub fn table(&self) -> &WordTable {
        self.b.table()
    }

    pub fn b(&self) -> &BCoefficients<T> {
        &self.b
    }

    pub fn dim(&self) -> usize {
        self.table().len()
    }

    /// `(W_1, …, W_n)`.
    pub fn left(&self) -> &OperatorTuple<T> {
        &self.left
    }

    /// `(Λ_1, …, Λ_n)`.
    pub fn right(&self) -> &OperatorTuple<T> {
        &self.right
    }

    /// Indices of basis vectors of length at most `len`.
    pub fn levels_up_to(&self, len: usize) -> Vec<usize> {
        (0..self.table().level(len.min(self.level())).end).collect()
    }

    /// `W_β e_γ = √(b_γ / b_{βγ}) e_{βγ}` as a matrix built directly from
    /// the weights.
    pub fn left_word(&self, beta: &Word) -> CMatrix<T> {
        self.word_shift(beta, Side::Left)
    }

    /// `Λ_β e_γ = √(b_γ / b_{γβ̃}) e_{γβ̃}`.
    pub fn right_word(&self, beta: &Word) -> CMatrix<T> {
        self.word_shift(&beta.reversed(), Side::Right)
    }

    fn word_shift(&self, w: &Word, side: Side) -> CMatrix<T> {
        let table = self.table();
        let mut m = linalg::zeros::<T>(table.len(), table.len());
        for (gi, g) in table.words().iter().enumerate() {
            if g.len() + w.len() > self.level() {
                break;
            }
            let target = match side {
                Side::Left => w.concat(g),
                Side::Right => g.concat(w),
            };
            let ti = table.index(&target).expect("within level");
            m[(ti, gi)] = cx((self.b.at(gi) / self.b.at(ti)).sqrt());
        }
        m
    }
}

#[derive(Clone, Copy)]
enum Side {
    Left,
    Right,
}

fn creation<T: Real>(b: &BCoefficients<T>, n: usize, side: Side) -> OperatorTuple<T> {
    let table = b.table();
    let mats = (1..=n)
        .map(|i| {
            let mut m = linalg::zeros::<T>(table.len(), table.len());
            let g = Word::letter(i);
            for (gi, w) in table.words().iter().enumerate() {
                if w.len() == b.level() {
                    break;
                }
                let target = match side {
                    Side::Left => g.concat(w),
                    Side::Right => w.concat(&g),
                };
                let ti = table.index(&target).expect("within level");
                m[(ti, gi)] = cx((b.at(gi) / b.at(ti)).sqrt());
            }
            m
        })
        .collect();
    OperatorTuple { mats }
}

pub fn weighted_left_creation<T: Real>(f: &RegularPolynomial<T>, level: usize) -> OperatorTuple<T> {
    creation(&BCoefficients::new(f, level), f.n(), Side::Left)
}

pub fn weighted_right_creation<T: Real>(f: &RegularPolynomial<T>, level: usize) -> OperatorTuple<T> {
    creation(&BCoefficients::new(f, level), f.n(), Side::Right)
}
