//! Dense complex linear algebra used by the models: norms, Hermitian
//! eigendecompositions with a reproducible eigenvector layout, orthonormal
//! bases and complements.

use nalgebra::{DMatrix, SymmetricEigen, SVD};

use crate::scalar::{abs, cx, Real, C};

pub type CMatrix<T> = DMatrix<C<T>>;

pub fn identity<T: Real>(n: usize) -> CMatrix<T> {
    CMatrix::identity(n, n)
}

pub fn zeros<T: Real>(rows: usize, cols: usize) -> CMatrix<T> {
    CMatrix::zeros(rows, cols)
}

pub fn from_real<T: Real>(rows: usize, cols: usize, data: &[f64]) -> CMatrix<T> {
    assert_eq!(data.len(), rows * cols);
    CMatrix::from_fn(rows, cols, |i, j| cx(T::lit(data[i * cols + j])))
}

pub fn kron<T: Real>(a: &CMatrix<T>, b: &CMatrix<T>) -> CMatrix<T> {
    a.kronecker(b)
}

/// Largest singular value (operator 2-norm); zero for empty matrices.
pub fn op_norm<T: Real>(m: &CMatrix<T>) -> T {
    if m.nrows() == 0 || m.ncols() == 0 {
        return T::zero();
    }
    let sv = SVD::new(m.clone(), false, false).singular_values;
    sv.iter().copied().fold(T::zero(), |acc, s| if s > acc { s } else { acc })
}

pub fn max_abs<T: Real>(m: &CMatrix<T>) -> T {
    m.iter().map(|z| abs(*z)).fold(T::zero(), |acc, s| if s > acc { s } else { acc })
}

pub fn hermitian_part<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()) * cx(T::lit(0.5))
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Eigenvalues are returned in descending order. Each eigenvector is scaled
/// by a unit phase so that its first entry of non-negligible modulus is real
/// and positive; this fixes the layout for any input up to degenerate
/// eigenspaces.
pub fn hermitian_eig<T: Real>(m: &CMatrix<T>) -> (Vec<T>, CMatrix<T>) {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "hermitian_eig needs a square matrix");
    if n == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut vecs = zeros::<T>(n, n);
    let mut vals = Vec::with_capacity(n);
    let cut = T::lit(1e-12);
    for (k, &i) in order.iter().enumerate() {
        vals.push(eig.eigenvalues[i]);
        let col = eig.eigenvectors.column(i);
        let phase = col
            .iter()
            .find(|z| abs(**z) > cut)
            .map(|z| z.conj() / cx(abs(*z)))
            .unwrap_or_else(|| cx(T::one()));
        for r in 0..n {
            vecs[(r, k)] = col[r] * phase;
        }
    }
    (vals, vecs)
}

pub fn min_eigenvalue<T: Real>(m: &CMatrix<T>) -> T {
    let (vals, _) = hermitian_eig(m);
    vals.last().copied().unwrap_or_else(T::zero)
}

pub fn max_eigenvalue<T: Real>(m: &CMatrix<T>) -> T {
    let (vals, _) = hermitian_eig(m);
    vals.first().copied().unwrap_or_else(T::zero)
}

/// Square root of a Hermitian positive semidefinite matrix; negative
/// eigenvalues (roundoff) are clamped to zero.
pub fn psd_sqrt<T: Real>(m: &CMatrix<T>) -> CMatrix<T> {
    let (vals, vecs) = hermitian_eig(m);
    let n = vals.len();
    let mut scaled = vecs.clone();
    for (k, &v) in vals.iter().enumerate() {
        let s = if v > T::zero() { v.sqrt() } else { T::zero() };
        for r in 0..n {
            scaled[(r, k)] *= cx(s);
        }
    }
    scaled * vecs.adjoint()
}

/// Orthonormal basis of the column space, keeping singular directions above
/// `rel_tol` times the largest singular value.
pub fn orthonormal_range<T: Real>(m: &CMatrix<T>, rel_tol: T) -> CMatrix<T> {
    let rows = m.nrows();
    if rows == 0 || m.ncols() == 0 {
        return zeros(rows, 0);
    }
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("left singular vectors requested");
    let smax = svd.singular_values.iter().copied().fold(T::zero(), |a, s| if s > a { s } else { a });
    if smax.is_zero() {
        return zeros(rows, 0);
    }
    let mut idx: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&k| svd.singular_values[k] > rel_tol * smax)
        .collect();
    idx.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut q = zeros::<T>(rows, idx.len());
    for (k, &i) in idx.iter().enumerate() {
        q.set_column(k, &u.column(i));
    }
    q
}

/// Extends orthonormal columns `q` (in a `dim`-dimensional space) by an
/// orthonormal basis of their orthocomplement, taken from the standard basis
/// in index order with two Gram-Schmidt passes. Only the new columns are
/// returned.
pub fn orth_complement<T: Real>(q: &CMatrix<T>, dim: usize) -> CMatrix<T> {
    assert_eq!(q.nrows(), dim);
    let target = dim.saturating_sub(q.ncols());
    let mut basis: Vec<nalgebra::DVector<C<T>>> = (0..q.ncols()).map(|k| q.column(k).into_owned()).collect();
    let mut out = Vec::with_capacity(target);
    let accept = T::lit(1e-6);
    for i in 0..dim {
        if out.len() == target {
            break;
        }
        let mut v = nalgebra::DVector::<C<T>>::zeros(dim);
        v[i] = cx(T::one());
        for _ in 0..2 {
            for b in &basis {
                let proj = b.dotc(&v);
                v -= b * proj;
            }
        }
        let nv = v.norm();
        if nv > accept {
            v /= cx(nv);
            basis.push(v.clone());
            out.push(v);
        }
    }
    assert_eq!(out.len(), target, "orthocomplement extension fell short");
    let mut m = zeros::<T>(dim, target);
    for (k, v) in out.iter().enumerate() {
        m.set_column(k, v);
    }
    m
}

pub fn hstack<T: Real>(blocks: &[&CMatrix<T>]) -> CMatrix<T> {
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros::<T>(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

pub fn vstack<T: Real>(blocks: &[&CMatrix<T>]) -> CMatrix<T> {
    let cols = blocks.first().map(|b| b.ncols()).unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros::<T>(rows, cols);
    let mut r = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.view_mut((r, 0), (b.nrows(), cols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

pub fn block<T: Real>(m: &CMatrix<T>, r0: usize, c0: usize, rows: usize, cols: usize) -> CMatrix<T> {
    m.view((r0, c0), (rows, cols)).into_owned()
}

/// Block-diagonal matrix with `copies` copies of `m`.
pub fn diag_repeat<T: Real>(m: &CMatrix<T>, copies: usize) -> CMatrix<T> {
    kron(&identity(copies), m)
}

/// Operator norm of `m` restricted to the given row and column index sets.
pub fn restricted_norm<T: Real>(m: &CMatrix<T>, rows: &[usize], cols: &[usize]) -> T {
    let sub = CMatrix::<T>::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])]);
    op_norm(&sub)
}

pub fn scale<T: Real>(m: &CMatrix<T>, s: T) -> CMatrix<T> {
    m * cx(s)
}

pub fn is_finite<T: Real>(m: &CMatrix<T>) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eig_is_descending_with_positive_leading_entries() {
        let m = from_real::<f64>(3, 3, &[2.0, 1.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 5.0]);
        let (vals, vecs) = hermitian_eig(&m);
        assert!((vals[0] - 5.0).abs() < 1e-12);
        assert!((vals[1] - 3.0).abs() < 1e-12);
        assert!((vals[2] - 1.0).abs() < 1e-12);
        for k in 0..3 {
            let lead = vecs.column(k).iter().find(|z| z.norm() > 1e-12).copied().unwrap();
            assert!(lead.im.abs() < 1e-14 && lead.re > 0.0);
        }
        let recon = &vecs * CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(3, vals.iter().map(|&v| cx(v)))) * vecs.adjoint();
        assert!(max_abs(&(recon - &m)) < 1e-12);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let m = from_real::<f64>(2, 2, &[1.0, 0.0, 0.0, 0.64]);
        let s = psd_sqrt(&m);
        assert!((s[(1, 1)].re - 0.8).abs() < 1e-14);
        assert!(max_abs(&(&s * &s - &m)) < 1e-14);
    }

    #[test]
    fn complement_completes_a_basis() {
        let v = from_real::<f64>(3, 1, &[1.0, 1.0, 0.0]) * cx(1.0 / 2f64.sqrt());
        let comp = orth_complement(&v, 3);
        let full = hstack(&[&v, &comp]);
        assert!(max_abs(&(full.adjoint() * &full - identity::<f64>(3))) < 1e-14);
    }

    #[test]
    fn range_drops_null_directions() {
        let m = from_real::<f64>(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 0.0]);
        assert_eq!(orthonormal_range(&m, 1e-9).ncols(), 1);
        assert!((op_norm(&m) - 5.0).abs() < 1e-12);
    }
}
