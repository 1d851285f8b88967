//! The structural isometry of an intertwining triple, its unitary
//! completion `U = [[A, B], [C, D]]`, and the series identity it implies.

use nalgebra::SVD;

use crate::domain::{apply_phi, apply_phi_power, domain_membership, OperatorTuple, RegularPolynomial};
use crate::error::{invalid, Error, Result};
use crate::linalg::{self, CMatrix};
use crate::poisson::{defect, DefectData};
use crate::report::VerificationReport;
use crate::scalar::{cx, Real};

/// `(T1 on H, T1' on H', T2: H' → H)` with `T2_j T1'_i = T1_i T2_j`.
#[derive(Clone, Debug)]
pub struct IntertwiningTriple<T: Real> {
    f: RegularPolynomial<T>,
    g: RegularPolynomial<T>,
    t1: OperatorTuple<T>,
    t1p: OperatorTuple<T>,
    t2: OperatorTuple<T>,
    intertwining_residual: T,
}

impl<T: Real> IntertwiningTriple<T> {
    pub fn new(
        f: RegularPolynomial<T>,
        g: RegularPolynomial<T>,
        t1: OperatorTuple<T>,
        t1p: OperatorTuple<T>,
        t2: OperatorTuple<T>,
        tol: T,
    ) -> Result<Self> {
        if t1.n() != f.n() || t1p.n() != f.n() || t2.n() != g.n() {
            return Err(invalid("tuple lengths must match the polynomials"));
        }
        if !t1.is_square() || !t1p.is_square() {
            return Err(invalid("T1 and T1' must be square tuples"));
        }
        if t2.rows() != t1.dim() || t2.cols() != t1p.dim() {
            return Err(invalid(format!(
                "T2 must map H' (dim {}) into H (dim {}), got {}x{}",
                t1p.dim(),
                t1.dim(),
                t2.rows(),
                t2.cols()
            )));
        }
        if g.k() > 1 && t1.dim() != t1p.dim() {
            return Err(invalid("words of length above one in T2 need H = H'"));
        }
        for (name, p, t) in [("T1", &f, &t1), ("T1'", &f, &t1p), ("T2", &g, &t2)] {
            let m = domain_membership(p, t, tol)?;
            if !m.in_domain {
                return Err(Error::PreconditionViolation(format!(
                    "{name} is not in the domain (min eigenvalue {:e})",
                    m.min_eig.as_f64()
                )));
            }
        }
        let mut worst = T::zero();
        for a in t2.mats() {
            for (x, xp) in t1.mats().iter().zip(t1p.mats()) {
                let r = linalg::op_norm(&(a * xp - x * a));
                if r > worst {
                    worst = r;
                }
            }
        }
        if worst > tol {
            return Err(Error::PreconditionViolation(format!(
                "T2 does not intertwine T1 and T1' (residual {:e})",
                worst.as_f64()
            )));
        }
        Ok(IntertwiningTriple { f, g, t1, t1p, t2, intertwining_residual: worst })
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
    pub fn t1p(&self) -> &OperatorTuple<T> {
        &self.t1p
    }
    pub fn t2(&self) -> &OperatorTuple<T> {
        &self.t2
    }
    pub fn intertwining_residual(&self) -> T {
        self.intertwining_residual
    }
}

/// Dimension bookkeeping of a colligation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ColligationDims {
    /// `dim D_{T1}`.
    pub d1: usize,
    /// `dim D_{T1'}`.
    pub d1p: usize,
    /// `dim D_{T2}`.
    pub d2: usize,
    /// Number of words `1 ≤ |α| ≤ k1`.
    pub m1: usize,
    /// Number of words `1 ≤ |β| ≤ k2`.
    pub m2: usize,
    /// Padding added to each copy of `D_{T2}`.
    pub e_pad: usize,
    /// Padding after `D_{T1}` (domain head), fallback only.
    pub x_pad: usize,
    /// Padding after `⊕_β D_{T1'}` (codomain head), fallback only.
    pub y_pad: usize,
    pub fallback: bool,
}

impl ColligationDims {
    pub fn x(&self) -> usize {
        self.d1 + self.x_pad
    }
    pub fn y(&self) -> usize {
        self.m2 * self.d1p + self.y_pad
    }
    pub fn e(&self) -> usize {
        self.d2 + self.e_pad
    }
    pub fn total(&self) -> usize {
        self.x() + self.m1 * self.e()
    }

    /// Chooses the padding: solve `d1 + m1(d2+e) = m2 d1' + d2 + e` for an
    /// integer `e ≥ 0`; otherwise take the smallest `e` that does not
    /// overshoot and pad the shorter head.
    pub fn solve(d1: usize, d1p: usize, d2: usize, m1: usize, m2: usize) -> Self {
        let mut dims = ColligationDims { d1, d1p, d2, m1, m2, e_pad: 0, x_pad: 0, y_pad: 0, fallback: false };
        let num = (m2 * d1p) as i64 - d1 as i64;
        if m1 > 1 {
            let q = (m1 - 1) as i64;
            if num >= 0 && num % q == 0 && num / q >= d2 as i64 {
                dims.e_pad = (num / q - d2 as i64) as usize;
                return dims;
            }
            let up = if num > 0 { (num + q - 1) / q } else { 0 };
            dims.e_pad = (up - d2 as i64).max(0) as usize;
        }
        let dom = dims.x() + m1 * dims.e();
        let cod = dims.y() + dims.e();
        if dom < cod {
            dims.x_pad = cod - dom;
        } else {
            dims.y_pad = dom - cod;
        }
        dims.fallback = dims.x_pad + dims.y_pad > 0;
        dims
    }
}

/// The structural isometry written on the basis vectors of `H`: column `h`
/// of `domain` is `Δ_{T1}h ⊕ (⊕_α √a_α Δ_{T2}T_{1,α}*h)` and column `h` of
/// `range` is `(⊕_β √c_β Δ_{T1'}T_{2,β}*h) ⊕ Δ_{T2}h`, both in defect
/// coordinates and without padding.
#[derive(Clone, Debug)]
pub struct PartialIsometry<T: Real> {
    pub domain: CMatrix<T>,
    pub range: CMatrix<T>,
    pub defect1: DefectData<T>,
    pub defect1p: DefectData<T>,
    pub defect2: DefectData<T>,
    pub m1: usize,
    pub m2: usize,
    pub gram_residual: T,
}

pub fn build_isometry<T: Real>(triple: &IntertwiningTriple<T>, tol: T) -> Result<PartialIsometry<T>> {
    let (f, g) = (triple.f(), triple.g());
    let d1 = defect(f, triple.t1(), tol)?;
    let d1p = defect(f, triple.t1p(), tol)?;
    let d2 = defect(g, triple.t2(), tol)?;
    let (c1, c1p, c2) = (d1.coords(), d1p.coords(), d2.coords());
    let alphas = f.words();
    let betas = g.words();
    let mut dom_blocks = vec![c1.clone()];
    for a in &alphas {
        let w = triple.t1().word(a)?;
        dom_blocks.push((&c2 * w.adjoint()) * cx(f.coeff(a).sqrt()));
    }
    let mut rng_blocks = Vec::with_capacity(betas.len() + 1);
    for b in &betas {
        let w = triple.t2().word(b)?;
        rng_blocks.push((&c1p * w.adjoint()) * cx(g.coeff(b).sqrt()));
    }
    rng_blocks.push(c2.clone());
    let domain = linalg::vstack(&dom_blocks.iter().collect::<Vec<_>>());
    let range = linalg::vstack(&rng_blocks.iter().collect::<Vec<_>>());
    let gd = domain.adjoint() * &domain;
    let gr = range.adjoint() * &range;
    let gram_residual = linalg::op_norm(&(gd - gr));
    let scale = T::one() + linalg::op_norm(&domain).powi(2);
    if gram_residual > tol * scale {
        return Err(Error::IdentityViolation {
            what: "structural isometry Gram".into(),
            residual: gram_residual.as_f64(),
            tol: (tol * scale).as_f64(),
        });
    }
    Ok(PartialIsometry { domain, range, defect1: d1, defect1p: d1p, defect2: d2, m1: alphas.len(), m2: betas.len(), gram_residual })
}

/// `Δ²_{T1} + Φ_{f,T1}(Δ²_{T2}) − Φ_{g,T2}(Δ²_{T1'}) − Δ²_{T2}`.
pub fn defect_identity_residual<T: Real>(triple: &IntertwiningTriple<T>, tol: T) -> Result<T> {
    let sq = |d: &DefectData<T>| d.delta() * d.delta();
    let d1 = sq(&defect(triple.f(), triple.t1(), tol)?);
    let d1p = sq(&defect(triple.f(), triple.t1p(), tol)?);
    let d2 = sq(&defect(triple.g(), triple.t2(), tol)?);
    let lhs = &d1 + apply_phi(triple.f(), triple.t1(), &d2)?;
    let rhs = apply_phi(triple.g(), triple.t2(), &d1p)? + &d2;
    Ok(linalg::op_norm(&(lhs - rhs)))
}

/// `U = [[A, B], [C, D]]` from `X ⊕ E^{m1}` onto `Y ⊕ E`, with
/// `X = D_{T1} ⊕ pad`, `E = D_{T2} ⊕ pad`, `Y = (⊕_β D_{T1'}) ⊕ pad`.
#[derive(Clone, Debug)]
pub struct Colligation<T: Real> {
    u: CMatrix<T>,
    dims: ColligationDims,
    unitarity_residual: T,
    action_residual: T,
}

impl<T: Real> Colligation<T> {
    /// Wraps an explicit unitary with the given layout.
    pub fn from_unitary(u: CMatrix<T>, dims: ColligationDims) -> Result<Self> {
        if u.nrows() != dims.total() || u.ncols() != dims.total() || dims.y() + dims.e() != dims.total() {
            return Err(invalid("unitary does not match the colligation layout"));
        }
        let id = linalg::identity::<T>(u.nrows());
        let r1 = linalg::op_norm(&(u.adjoint() * &u - &id));
        let r2 = linalg::op_norm(&(&u * u.adjoint() - &id));
        Ok(Colligation { u, dims, unitarity_residual: r1.max(r2), action_residual: T::zero() })
    }

    pub fn u(&self) -> &CMatrix<T> {
        &self.u
    }
    pub fn dims(&self) -> ColligationDims {
        self.dims
    }
    pub fn unitarity_residual(&self) -> T {
        self.unitarity_residual
    }
    /// `‖U·domain − range‖` for the isometry the colligation completes.
    pub fn action_residual(&self) -> T {
        self.action_residual
    }
    pub fn a(&self) -> CMatrix<T> {
        linalg::block(&self.u, 0, 0, self.dims.y(), self.dims.x())
    }
    pub fn b(&self) -> CMatrix<T> {
        linalg::block(&self.u, 0, self.dims.x(), self.dims.y(), self.dims.m1 * self.dims.e())
    }
    pub fn c(&self) -> CMatrix<T> {
        linalg::block(&self.u, self.dims.y(), 0, self.dims.e(), self.dims.x())
    }
    pub fn d(&self) -> CMatrix<T> {
        linalg::block(&self.u, self.dims.y(), self.dims.x(), self.dims.e(), self.dims.m1 * self.dims.e())
    }
    /// Column block of `D` for the `j`-th word (graded order).
    pub fn d_block(&self, j: usize) -> CMatrix<T> {
        let e = self.dims.e();
        linalg::block(&self.u, self.dims.y(), self.dims.x() + j * e, e, e)
    }
    /// Column block of `B` for the `j`-th word.
    pub fn b_block(&self, j: usize) -> CMatrix<T> {
        let e = self.dims.e();
        linalg::block(&self.u, 0, self.dims.x() + j * e, self.dims.y(), e)
    }
    /// Rows of `A` (or any `Y`-valued map) belonging to the `j`-th word
    /// `β` of `g`.
    pub fn y_rows(&self, j: usize) -> std::ops::Range<usize> {
        j * self.dims.d1p..(j + 1) * self.dims.d1p
    }
}

/// Lays the unpadded isometry out in the padded spaces.
fn embed<T: Real>(iso: &PartialIsometry<T>, dims: &ColligationDims) -> (CMatrix<T>, CMatrix<T>) {
    let h = iso.domain.ncols();
    let total = dims.total();
    let (d1, d1p, d2, e) = (dims.d1, dims.d1p, dims.d2, dims.e());
    let mut vd = linalg::zeros::<T>(total, h);
    vd.view_mut((0, 0), (d1, h)).copy_from(&iso.domain.rows(0, d1));
    for j in 0..dims.m1 {
        vd.view_mut((dims.x() + j * e, 0), (d2, h)).copy_from(&iso.domain.rows(d1 + j * d2, d2));
    }
    let mut vr = linalg::zeros::<T>(total, h);
    let head = dims.m2 * d1p;
    vr.view_mut((0, 0), (head, h)).copy_from(&iso.range.rows(0, head));
    vr.view_mut((dims.y(), 0), (d2, h)).copy_from(&iso.range.rows(head, d2));
    (vd, vr)
}

/// Polar factor `E (E*E)^{-1/2}` of a matrix with full column rank.
fn polar<T: Real>(e: &CMatrix<T>) -> CMatrix<T> {
    if e.ncols() == 0 {
        return e.clone();
    }
    let svd = SVD::new(e.clone(), true, true);
    let u = svd.u.expect("requested");
    let v_t = svd.v_t.expect("requested");
    u * v_t
}

/// Relative singular-value cut below which a direction of the structural
/// isometry is treated as null.
pub const COMPLETION_CUT: f64 = 1e-12;

/// Completes the structural isometry to a unitary colligation.
///
/// The domain span gets the orthonormal basis `V_dom Q S^{-1}` from a
/// singular value decomposition of the domain columns; the range span gets
/// the polar factor of `V_rng Q S^{-1}`. Both are extended by their
/// orthocomplements taken from the standard basis in index order, and the
/// extensions are matched in order.
pub fn complete_to_unitary<T: Real>(iso: &PartialIsometry<T>) -> Result<Colligation<T>> {
    let dims = ColligationDims::solve(iso.defect1.rank(), iso.defect1p.rank(), iso.defect2.rank(), iso.m1, iso.m2);
    let (vd, vr) = embed(iso, &dims);
    let total = dims.total();
    let svd = SVD::new(vd.clone(), false, true);
    let v_t = svd.v_t.expect("requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(T::zero(), |a, s| if s > a { s } else { a });
    let keep: Vec<usize> = (0..sv.len()).filter(|&k| sv[k] > T::lit(COMPLETION_CUT) * smax).collect();
    let mut q = linalg::zeros::<T>(vd.ncols(), keep.len());
    for (c, &k) in keep.iter().enumerate() {
        let col = v_t.row(k).adjoint() * cx(T::one() / sv[k]);
        q.set_column(c, &col);
    }
    let e_dom = polar(&(&vd * &q));
    let e_rng = polar(&(&vr * &q));
    let f_dom = linalg::orth_complement(&e_dom, total);
    let f_rng = linalg::orth_complement(&e_rng, total);
    let u = &e_rng * e_dom.adjoint() + &f_rng * f_dom.adjoint();
    let mut col = Colligation::from_unitary(u, dims)?;
    col.action_residual = linalg::op_norm(&(col.u() * &vd - &vr));
    Ok(col)
}

/// Convenience: structural isometry plus completion.
pub fn colligation_of<T: Real>(triple: &IntertwiningTriple<T>, tol: T) -> Result<(PartialIsometry<T>, Colligation<T>)> {
    let iso = build_isometry(triple, tol)?;
    let col = complete_to_unitary(&iso)?;
    Ok((iso, col))
}

/// `Δ_{T1}` in the coordinates of `X` (defect coordinates, zero padding).
pub(crate) fn x_coords<T: Real>(defect1: &DefectData<T>, dims: &ColligationDims) -> CMatrix<T> {
    let c = defect1.coords();
    let mut out = linalg::zeros::<T>(dims.x(), c.ncols());
    out.view_mut((0, 0), (c.nrows(), c.ncols())).copy_from(&c);
    out
}

/// `(⊕_β √c_β Δ_{T1'} T_{2,β}*) ⊕ 0` in the coordinates of `Y`.
pub(crate) fn y_target<T: Real>(iso: &PartialIsometry<T>, dims: &ColligationDims) -> CMatrix<T> {
    let h = iso.range.ncols();
    let head = dims.m2 * dims.d1p;
    let mut out = linalg::zeros::<T>(dims.y(), h);
    out.view_mut((0, 0), (head, h)).copy_from(&iso.range.rows(0, head));
    out
}

/// Checks `A Δ_{T1} + B Σ_{p ≤ p_max} Z_p = [√c_β Δ_{T1'} T_{2,β}*]` where
/// `Z_p` is built by the nested recursion `Y_0 = CΔ`, `Z_p = [Y_p √a_α T_{1,α}*]_α`,
/// `Y_{p+1} = D Z_p`; the same partial sums are recomputed from explicit
/// word-indexed products for `p ≤ 3` and compared.
pub fn series_oracle<T: Real>(
    triple: &IntertwiningTriple<T>,
    iso: &PartialIsometry<T>,
    col: &Colligation<T>,
    p_max: usize,
    tol: T,
) -> Result<VerificationReport> {
    let f = triple.f();
    let dims = col.dims();
    let alphas = f.words();
    let adj: Vec<CMatrix<T>> = alphas
        .iter()
        .map(|a| triple.t1().word(a).map(|w| w.adjoint() * cx(f.coeff(a).sqrt())))
        .collect::<Result<_>>()?;
    let xc = x_coords(&iso.defect1, &dims);
    let (a, b, c, d) = (col.a(), col.b(), col.c(), col.d());
    let h = xc.ncols();
    let e = dims.e();

    let mut y = &c * &xc;
    let mut sum = linalg::zeros::<T>(dims.m1 * e, h);
    let mut nested = Vec::new();
    for _ in 0..=p_max {
        let mut z = linalg::zeros::<T>(dims.m1 * e, h);
        for (j, ta) in adj.iter().enumerate() {
            z.view_mut((j * e, 0), (e, h)).copy_from(&(&y * ta));
        }
        sum += &z;
        y = &d * &z;
        nested.push(z);
    }
    let rhs = &a * &xc + &b * &sum;
    let lhs = y_target(iso, &dims);
    let residual = linalg::op_norm(&(lhs - rhs));
    let id = linalg::identity::<T>(h);
    let tail = linalg::op_norm(&b) * linalg::op_norm(&apply_phi_power(f, triple.t1(), &id, p_max + 2)?).sqrt();

    let mut rep = VerificationReport::new();
    rep.set_env("series.p_max", p_max);
    rep.set_env("series.tail_bound", format!("{:.6e}", tail.as_f64()));
    rep.residual("series.identity", residual.as_f64(), (tail + tol).as_f64());

    let d_blocks: Vec<CMatrix<T>> = (0..dims.m1).map(|j| col.d_block(j)).collect();
    let cd = &c * &xc;
    let mut two_path = T::zero();
    for (p, z) in nested.iter().enumerate().take(4) {
        let mut direct = linalg::zeros::<T>(dims.m1 * e, h);
        // chains (α_1, …, α_p), each contributing D_(α_p)⋯D_(α_1) C Δ T_{α_1}*⋯T_{α_p}*
        let mut chains: Vec<(CMatrix<T>, CMatrix<T>)> = vec![(cd.clone(), id.clone())];
        for _ in 0..p {
            let mut next = Vec::with_capacity(chains.len() * dims.m1);
            for (lead, tail_adj) in &chains {
                for (j, ta) in adj.iter().enumerate() {
                    next.push((&d_blocks[j] * lead, tail_adj * ta));
                }
            }
            chains = next;
        }
        for (j, ta) in adj.iter().enumerate() {
            let mut blk = linalg::zeros::<T>(e, h);
            for (lead, tail_adj) in &chains {
                blk += lead * (tail_adj * ta);
            }
            direct.view_mut((j * e, 0), (e, h)).copy_from(&blk);
        }
        let r = linalg::op_norm(&(direct - z));
        if r > two_path {
            two_path = r;
        }
    }
    rep.residual("series.two_path", two_path.as_f64(), tol.as_f64());
    Ok(rep)
}

/// Standard colligation checks.
pub fn verify_colligation<T: Real>(iso: &PartialIsometry<T>, col: &Colligation<T>, tol: T) -> VerificationReport {
    let mut rep = VerificationReport::new();
    let dims = col.dims();
    rep.set_env("colligation.d1", dims.d1);
    rep.set_env("colligation.d1p", dims.d1p);
    rep.set_env("colligation.d2", dims.d2);
    rep.set_env("colligation.m1", dims.m1);
    rep.set_env("colligation.m2", dims.m2);
    rep.set_env("colligation.pad", format!("e{}_x{}_y{}", dims.e_pad, dims.x_pad, dims.y_pad));
    rep.set_env("colligation.pad_fallback", dims.fallback);
    rep.residual("colligation.gram", iso.gram_residual.as_f64(), tol.as_f64());
    rep.residual("colligation.unitarity", col.unitarity_residual().as_f64(), tol.as_f64());
    rep.residual("colligation.prescribed_action", col.action_residual().as_f64(), tol.as_f64());
    rep
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{from_real, max_abs};
    use crate::sample;
    use proptest::prelude::*;

    fn scalar(x: f64) -> OperatorTuple<f64> {
        OperatorTuple::new(vec![from_real(1, 1, &[x])]).unwrap()
    }

    #[test]
    fn scalar_zero_triple_completes_to_swap() {
        let z = RegularPolynomial::<f64>::linear(1);
        let tr = IntertwiningTriple::new(z.clone(), z, scalar(0.0), scalar(0.0), scalar(0.0), 1e-9).unwrap();
        let iso = build_isometry(&tr, 1e-9).unwrap();
        assert!(max_abs(&(&iso.domain - from_real(2, 1, &[1.0, 0.0]))) < 1e-15);
        assert!(max_abs(&(&iso.range - from_real(2, 1, &[0.0, 1.0]))) < 1e-15);
        let col = complete_to_unitary(&iso).unwrap();
        assert!(max_abs(&(col.u() - from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]))) < 1e-15);
        assert!(!col.dims().fallback);
        let rep = series_oracle(&tr, &iso, &col, 2, 1e-10).unwrap();
        assert!(rep.passed(), "{}", rep.to_structured());
    }

    #[test]
    fn zero_second_tuple_has_identity_defect() {
        let z = RegularPolynomial::<f64>::linear(1);
        let j2 = OperatorTuple::new(vec![from_real(2, 2, &[0.0, 1.0, 0.0, 0.0])]).unwrap();
        let tr = IntertwiningTriple::new(z.clone(), z, j2.clone(), j2, OperatorTuple::zero(1, 2, 2), 1e-9).unwrap();
        let iso = build_isometry(&tr, 1e-9).unwrap();
        assert_eq!(iso.defect2.rank(), 2);
        let d1p = iso.defect1p.rank();
        assert!(max_abs(&iso.range.rows(0, d1p).into_owned()) < 1e-15);
        let tail = iso.range.rows(d1p, 2).into_owned();
        assert!(max_abs(&(tail.adjoint() * &tail - linalg::identity::<f64>(2))) < 1e-15);
    }

    #[test]
    fn padding_policy() {
        let d = ColligationDims::solve(2, 2, 3, 1, 1);
        assert_eq!((d.e_pad, d.x_pad, d.y_pad, d.fallback), (0, 0, 0, false));
        let d = ColligationDims::solve(1, 2, 3, 1, 1);
        assert_eq!((d.x_pad, d.y_pad, d.fallback), (1, 0, true));
        // d1 + m1 d2 = d2 + m2 d1 with m1 = 3, m2 = 2, d1 = 4, d2 = 2
        let d = ColligationDims::solve(4, 4, 2, 3, 2);
        assert_eq!((d.e_pad, d.fallback), (0, false));
        let d = ColligationDims::solve(1, 3, 1, 2, 2);
        assert_eq!((d.e_pad, d.fallback), (4, false));
        for (d1, d1p, d2, m1, m2) in [(3, 1, 2, 2, 1), (1, 1, 0, 6, 2), (5, 2, 1, 3, 1)] {
            let d = ColligationDims::solve(d1, d1p, d2, m1, m2);
            assert_eq!(d.x() + m1 * d.e(), d.y() + d.e());
        }
    }

    #[test]
    fn defect_identity_on_commuting_pair() {
        let f = RegularPolynomial::<f64>::from_terms(1, &[(&[1], 1.0), (&[1, 1], 0.5)]).unwrap();
        let g = RegularPolynomial::<f64>::from_terms(1, &[(&[1], 2.0)]).unwrap();
        let mut rng = sample::rng(3);
        let s = sample::random_strict_upper::<f64, _>(&mut rng, 4);
        let t1 = sample::scale_to(&f, &OperatorTuple::new(vec![s.clone()]).unwrap(), 0.8);
        let t2 = sample::scale_to(&g, &OperatorTuple::new(vec![&s * &s + &s * cx(0.3)]).unwrap(), 0.7);
        let tr = IntertwiningTriple::new(f, g, t1.clone(), t1, t2, 1e-9).unwrap();
        assert!(defect_identity_residual(&tr, 1e-9).unwrap() < 1e-12);
    }

    fn random_triple(seed: u64, two: bool) -> IntertwiningTriple<f64> {
        let mut rng = sample::rng(seed);
        let dim = 2 + (seed % 3) as usize;
        let s = sample::random_strict_upper::<f64, _>(&mut rng, dim);
        let (f, t1) = if two {
            let f = RegularPolynomial::from_terms(2, &[(&[1], 1.0), (&[2], 0.5), (&[1, 2], 0.3)]).unwrap();
            let t = OperatorTuple::new(vec![s.clone(), &s * &s * cx(0.7) + &s * cx(-0.2)]).unwrap();
            (f, t)
        } else {
            let f = RegularPolynomial::from_terms(1, &[(&[1], 1.0), (&[1, 1], 1.0)]).unwrap();
            (f, OperatorTuple::new(vec![s.clone()]).unwrap())
        };
        let t1 = sample::scale_to(&f, &t1, 0.85);
        let g = RegularPolynomial::from_terms(1, &[(&[1], 1.0)]).unwrap();
        let t2 = OperatorTuple::new(vec![&s * &s * cx(0.5) + &s]).unwrap();
        let t2 = sample::scale_to(&g, &t2, 0.6);
        IntertwiningTriple::new(f, g, t1.clone(), t1, t2, 1e-9).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn colligations_are_unitary_and_series_terminates(seed in 0u64..5000, two in any::<bool>()) {
            let tr = random_triple(seed, two);
            let (iso, col) = colligation_of(&tr, 1e-9).unwrap();
            let rep = verify_colligation(&iso, &col, 1e-10);
            prop_assert!(rep.passed(), "{}", rep.to_structured());
            let dims = col.dims();
            prop_assert_eq!(dims.x() + dims.m1 * dims.e(), dims.y() + dims.e());
            let rep = series_oracle(&tr, &iso, &col, 5, 1e-10).unwrap();
            prop_assert!(rep.passed(), "{}", rep.to_structured());
        }
    }

    #[test]
    fn scalar_contraction_series_within_tail() {
        let z = RegularPolynomial::<f64>::linear(1);
        let tr = IntertwiningTriple::new(z.clone(), z, scalar(0.6), scalar(0.6), scalar(0.5), 1e-9).unwrap();
        let (iso, col) = colligation_of(&tr, 1e-9).unwrap();
        for p in [0, 2, 6] {
            let rep = series_oracle(&tr, &iso, &col, p, 1e-12).unwrap();
            assert!(rep.passed(), "{}", rep.to_structured());
        }
    }
}
