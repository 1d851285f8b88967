//! Defect operators and noncommutative Poisson kernels.

use crate::domain::{apply_phi, apply_phi_power, BCoefficients, FockModel, OperatorTuple, RegularPolynomial};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::report::VerificationReport;
use crate::scalar::{cx, Real};
use crate::words::{Word, WordTable};

/// Eigenvalues of `Δ` at or below this are treated as zero.
pub const RANK_TOL: f64 = 1e-9;

/// `Δ = (I − Φ(I))^{1/2}` together with coordinates on its range.
#[derive(Clone, Debug)]
pub struct DefectData<T: Real> {
    delta: CMatrix<T>,
    basis: CMatrix<T>,
    singular: Vec<T>,
}

impl<T: Real> DefectData<T> {
    pub fn delta(&self) -> &CMatrix<T> {
        &self.delta
    }

    /// Orthonormal columns spanning the defect space, ordered by decreasing
    /// eigenvalue of `Δ`.
    pub fn basis(&self) -> &CMatrix<T> {
        &self.basis
    }

    /// Eigenvalues of `Δ` matching the basis columns.
    pub fn eigenvalues(&self) -> &[T] {
        &self.singular
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.delta.nrows()
    }

    /// `V* Δ`: the map `h ↦ Δh` written in defect-space coordinates.
    pub fn coords(&self) -> CMatrix<T> {
        let mut m = self.basis.adjoint();
        for (k, &s) in self.singular.iter().enumerate() {
            m.row_mut(k).scale_mut(s);
        }
        m
    }
}

/// Defect of a tuple `T: H' → H` with respect to `f`; for square tuples
/// `H' = H`.
pub fn defect<T: Real>(f: &RegularPolynomial<T>, t: &OperatorTuple<T>, tol: T) -> Result<DefectData<T>> {
    let phi = apply_phi(f, t, &linalg::identity(t.cols()))?;
    let gap = linalg::identity::<T>(t.rows()) - phi;
    let (vals, vecs) = linalg::hermitian_eig(&gap);
    if let Some(&low) = vals.last() {
        if low < -tol {
            return Err(Error::NotInDomain { min_eig: low.as_f64(), tol: tol.as_f64() });
        }
    }
    let d = vals.len();
    let roots: Vec<T> = vals.iter().map(|&v| if v > T::zero() { v.sqrt() } else { T::zero() }).collect();
    let mut scaled = vecs.clone();
    for (k, &s) in roots.iter().enumerate() {
        scaled.column_mut(k).scale_mut(s);
    }
    let delta = scaled * vecs.adjoint();
    let rank = roots.iter().filter(|&&s| s > T::lit(RANK_TOL)).count();
    let basis = linalg::block(&vecs, 0, 0, d, rank);
    Ok(DefectData { delta, basis, singular: roots[..rank].to_vec() })
}

/// `K h = Σ_α √b_α e_α ⊗ Δ T_α* h` for `|α| ≤ N`, in defect coordinates.
#[derive(Clone, Debug)]
pub struct PoissonKernel<T: Real> {
    matrix: CMatrix<T>,
    level: usize,
    rank: usize,
    defect: DefectData<T>,
}

impl<T: Real> PoissonKernel<T> {
    /// Rows are grouped in blocks of `rank` per word, words in graded order.
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn defect(&self) -> &DefectData<T> {
        &self.defect
    }

    pub(crate) fn from_parts(matrix: CMatrix<T>, level: usize, defect: DefectData<T>) -> Self {
        PoissonKernel { matrix, level, rank: defect.rank(), defect }
    }
}

pub fn poisson_kernel<T: Real>(
    f: &RegularPolynomial<T>,
    t: &OperatorTuple<T>,
    level: usize,
    tol: T,
) -> Result<PoissonKernel<T>> {
    let dd = defect(f, t, tol)?;
    let b = BCoefficients::new(f, level);
    let table = b.table();
    let prods = t.word_products(table)?;
    let coords = dd.coords();
    let r = dd.rank();
    let mut k = linalg::zeros::<T>(table.len() * r, t.dim());
    for (idx, tw) in prods.iter().enumerate() {
        let blk = (&coords * tw.adjoint()) * cx(b.at(idx).sqrt());
        k.view_mut((idx * r, 0), (r, t.dim())).copy_from(&blk);
    }
    Ok(PoissonKernel { matrix: k, level, rank: r, defect: dd })
}

/// `R = Σ_{|γ|>N} (Σ_{γ=αβ, |α|≤N} b_α a_β) T_γ T_γ*`, the exact gap
/// `I − K*K` of a kernel truncated at level `N`.
pub fn kernel_gram_gap<T: Real>(f: &RegularPolynomial<T>, t: &OperatorTuple<T>, level: usize) -> Result<CMatrix<T>> {
    let b = BCoefficients::new(f, level);
    let table = WordTable::new(f.n(), level + f.k());
    let prods = t.word_products(&table)?;
    let mut gap = linalg::zeros::<T>(t.dim(), t.dim());
    for len in level + 1..=level + f.k() {
        for idx in table.level(len) {
            let g = table.word(idx);
            let mut w = T::zero();
            for (beta, a) in f.terms() {
                if beta.len() > len || len - beta.len() > level {
                    continue;
                }
                if let Some(alpha) = g.strip_suffix(beta) {
                    w += *a * b.get(&alpha);
                }
            }
            if w > T::zero() {
                gap += (&prods[idx] * prods[idx].adjoint()) * cx(w);
            }
        }
    }
    Ok(gap)
}

/// Intertwining and Gram checks for a Poisson kernel.
///
/// The intertwining `K T_i* = (W_i* ⊗ I) K` is compared on word levels
/// below `N`, where it is an exact identity; the Gram matrix `K*K` is
/// compared with `I − R` (exact) and with the tail bound
/// `‖I − K*K‖ ≤ ‖Φ^M(I)‖`, `M = ⌊N/k⌋ + 1`.
pub fn verify_kernel_identities<T: Real>(
    f: &RegularPolynomial<T>,
    t: &OperatorTuple<T>,
    kernel: &PoissonKernel<T>,
    tol: T,
) -> Result<VerificationReport> {
    let level = kernel.level();
    let r = kernel.rank();
    let model = FockModel::new(f, level);
    let k = kernel.matrix();
    let mut rep = VerificationReport::new();
    rep.set_env("kernel.level", level);
    rep.set_env("kernel.defect_rank", r);
    let rows = model.table().level(level.saturating_sub(1)).end * r;
    let rows = if level == 0 { 0 } else { rows };
    let ident = linalg::identity::<T>(r);
    for i in 0..f.n() {
        let lhs = k * t.get(i).adjoint();
        let rhs = linalg::kron(&model.left().get(i).adjoint(), &ident) * k;
        let diff = lhs - rhs;
        let res = linalg::op_norm(&linalg::block(&diff, 0, 0, rows, diff.ncols()));
        rep.residual(&format!("kernel.intertwining[{}]", i + 1), res.as_f64(), tol.as_f64());
    }
    let gram = k.adjoint() * k;
    let gap = kernel_gram_gap(f, t, level)?;
    let id = linalg::identity::<T>(t.dim());
    rep.residual("kernel.gram_exact", linalg::op_norm(&(&gram - (&id - &gap))).as_f64(), tol.as_f64());
    let horizon = level / f.k() + 1;
    let tail = linalg::op_norm(&apply_phi_power(f, t, &id, horizon)?);
    rep.set_env("kernel.purity_horizon", horizon);
    rep.residual("kernel.isometry_gap", linalg::op_norm(&(&id - &gram)).as_f64(), (tail + tol).as_f64());
    rep.residual("kernel.contraction", (linalg::op_norm(k) - T::one()).as_f64().max(0.0), tol.as_f64());
    Ok(rep)
}

/// Block of `K` for one word: `√b_α V*Δ T_α*`.
pub fn kernel_block<T: Real>(kernel: &PoissonKernel<T>, table: &WordTable, w: &Word) -> CMatrix<T> {
    let idx = table.index(w).expect("word within kernel level");
    linalg::block(kernel.matrix(), idx * kernel.rank(), 0, kernel.rank(), kernel.matrix().ncols())
}
