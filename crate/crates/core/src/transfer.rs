//! The transfer function of a colligation evaluated on truncated weighted
//! right creation operators, its Fourier coefficients and the dilation
//! identities it satisfies.

use crate::colligation::{Colligation, IntertwiningTriple};
use crate::domain::{FockModel, RegularPolynomial};
use crate::error::{invalid, Result};
use crate::linalg::{self, CMatrix};
use crate::poisson::PoissonKernel;
use crate::report::VerificationReport;
use crate::scalar::{cx, Real};
use crate::words::{Word, WordTable};

/// `φ = I⊗A* + (I⊗C*)(I − L)^{-1} Σ_α √a_α Λ_{α̃}⊗B*_(α)` with
/// `L = Σ_α √a_α Λ_{α̃}⊗D*_(α)`, as an operator `F²_N ⊗ Y → F²_N ⊗ X`.
///
/// Block `(u, s)` (output word `u`, input word `s`) sits at rows
/// `u·x..(u+1)·x`, columns `s·y..(s+1)·y`.
#[derive(Clone, Debug)]
pub struct TransferFunction<T: Real> {
    model: FockModel<T>,
    col: Colligation<T>,
    phi: CMatrix<T>,
}

/// Position of each positive-coefficient word of `f` among all words
/// `1 ≤ |α| ≤ k` (the layout of `E^{m1}`).
pub(crate) fn term_slots<T: Real>(f: &RegularPolynomial<T>) -> Vec<(Word, T, usize)> {
    let table = WordTable::new(f.n(), f.k());
    f.terms()
        .iter()
        .map(|(w, a)| (w.clone(), *a, table.index(w).expect("within degree") - 1))
        .collect()
}

/// Solves `X = R + L X` level by level. `rhs` has one block row of height
/// `e` per word of the model.
fn resolvent_solve<T: Real>(model: &FockModel<T>, col: &Colligation<T>, rhs: &CMatrix<T>) -> CMatrix<T> {
    let e = col.dims().e();
    let table = model.table();
    let b = model.b();
    let slots = term_slots(model.f());
    let d_adj: Vec<CMatrix<T>> = slots.iter().map(|(_, _, j)| col.d_block(*j).adjoint()).collect();
    let mut x = rhs.clone();
    let w = rhs.ncols();
    for (ui, u) in table.words().iter().enumerate().skip(1) {
        let mut acc = linalg::zeros::<T>(e, w);
        for (t, (alpha, a, _)) in slots.iter().enumerate() {
            if let Some(v) = u.strip_suffix(alpha) {
                let vi = table.index(&v).expect("shorter word");
                let weight = (*a * b.at(vi) / b.at(ui)).sqrt();
                acc += (&d_adj[t] * x.rows(vi * e, e)) * cx(weight);
            }
        }
        let mut rows = x.rows_mut(ui * e, e);
        rows += acc;
    }
    x
}

/// `Σ_α √a_α Λ_{α̃}⊗B*_(α)` as a matrix `F²_N⊗Y → F²_N⊗E`.
fn input_map<T: Real>(model: &FockModel<T>, col: &Colligation<T>) -> CMatrix<T> {
    let dims = col.dims();
    let (e, y) = (dims.e(), dims.y());
    let table = model.table();
    let b = model.b();
    let mut m = linalg::zeros::<T>(table.len() * e, table.len() * y);
    for (alpha, a, j) in term_slots(model.f()) {
        let bs = col.b_block(j).adjoint();
        for (si, s) in table.words().iter().enumerate() {
            if s.len() + alpha.len() > model.level() {
                break;
            }
            let ui = table.index(&s.concat(&alpha)).expect("within level");
            let weight = (a * b.at(si) / b.at(ui)).sqrt();
            m.view_mut((ui * e, si * y), (e, y)).copy_from(&(&bs * cx(weight)));
        }
    }
    m
}

pub fn eval_transfer<T: Real>(col: &Colligation<T>, f: &RegularPolynomial<T>, level: usize) -> Result<TransferFunction<T>> {
    let dims = col.dims();
    if dims.m1 != f.word_count() {
        return Err(invalid(format!(
            "colligation has {} copies of E but f has {} words of length 1..{}",
            dims.m1,
            f.word_count(),
            f.k()
        )));
    }
    let model = FockModel::new(f, level);
    let nw = model.dim();
    let (x, y) = (dims.x(), dims.y());
    let solved = resolvent_solve(&model, col, &input_map(&model, col));
    let c_adj = col.c().adjoint();
    let a_adj = col.a().adjoint();
    let e = dims.e();
    let mut phi = linalg::zeros::<T>(nw * x, nw * y);
    for u in 0..nw {
        let blk = &c_adj * solved.rows(u * e, e);
        phi.view_mut((u * x, 0), (x, nw * y)).copy_from(&blk);
        let mut diag = phi.view_mut((u * x, u * y), (x, y));
        diag += &a_adj;
    }
    Ok(TransferFunction { model, col: col.clone(), phi })
}

impl<T: Real> TransferFunction<T> {
    pub fn matrix(&self) -> &CMatrix<T> {
        &self.phi
    }

    pub fn model(&self) -> &FockModel<T> {
        &self.model
    }

    pub fn colligation(&self) -> &Colligation<T> {
        &self.col
    }

    pub fn level(&self) -> usize {
        self.model.level()
    }

    /// Column indices of `φ` belonging to the `j`-th word `β` of `g`.
    pub fn beta_columns(&self, j: usize) -> Vec<usize> {
        let dims = self.col.dims();
        let y = dims.y();
        (0..self.model.dim())
            .flat_map(|s| self.col.y_rows(j).map(move |r| s * y + r))
            .collect()
    }

    /// `φ_(β)`: `F²_N ⊗ D_{T1'} → F²_N ⊗ X`.
    pub fn phi_beta(&self, j: usize) -> CMatrix<T> {
        self.phi.select_columns(self.beta_columns(j).iter())
    }

    /// Row indices of `φ` for output words of length at most `len`.
    pub fn rows_up_to(&self, len: usize) -> Vec<usize> {
        let x = self.col.dims().x();
        (0..self.model.table().level(len.min(self.level())).end * x).collect()
    }

    /// Column indices of `φ` for input words of length at most `len`.
    pub fn cols_up_to(&self, len: usize) -> Vec<usize> {
        let y = self.col.dims().y();
        (0..self.model.table().level(len.min(self.level())).end * y).collect()
    }
}

/// Fourier coefficients `Θ_γ` (maps `Y → X`) for `|γ| ≤ max_level`,
/// computed from the colligation alone: `Θ_{g0} = A*`, `Θ_γ = C* P(γ̃)`
/// with `P(u) = [|u| ≤ k] √a_u B*_(u) + Σ_{u = vα, v ≠ g0} √a_α D*_(α) P(v)`.
pub fn fourier_series<T: Real>(col: &Colligation<T>, f: &RegularPolynomial<T>, max_level: usize) -> Vec<(Word, CMatrix<T>)> {
    let dims = col.dims();
    let table = WordTable::new(f.n(), max_level);
    let slots = term_slots(f);
    let c_adj = col.c().adjoint();
    let mut p: Vec<CMatrix<T>> = Vec::with_capacity(table.len());
    p.push(linalg::zeros(dims.e(), dims.y()));
    for u in table.words().iter().skip(1) {
        let mut acc = linalg::zeros::<T>(dims.e(), dims.y());
        for (alpha, a, j) in &slots {
            if alpha == u {
                acc += col.b_block(*j).adjoint() * cx(a.sqrt());
            } else if let Some(v) = u.strip_suffix(alpha) {
                let vi = table.index(&v).expect("shorter word");
                acc += (col.d_block(*j).adjoint() * &p[vi]) * cx(a.sqrt());
            }
        }
        p.push(acc);
    }
    table
        .words()
        .iter()
        .map(|g| {
            let theta = if g.is_empty() {
                col.a().adjoint()
            } else {
                &c_adj * &p[table.index(&g.reversed()).expect("same length")]
            };
            (g.clone(), theta)
        })
        .collect()
}

/// Extracts `Θ_γ = √b_{γ̃} · φ[γ̃, g0]` for `|γ| ≤ max_level`.
pub fn fourier_coefficients<T: Real>(tf: &TransferFunction<T>, max_level: usize) -> Result<Vec<(Word, CMatrix<T>)>> {
    let k = tf.model.f().k();
    if max_level + k > tf.level() {
        return Err(invalid(format!(
            "max level {max_level} exceeds N - k = {}",
            tf.level().saturating_sub(k)
        )));
    }
    let dims = tf.col.dims();
    let (x, y) = (dims.x(), dims.y());
    let table = tf.model.table();
    Ok(table.words()[..table.level(max_level).end]
        .iter()
        .map(|g| {
            let ui = table.index(&g.reversed()).expect("within level");
            let blk = linalg::block(&tf.phi, ui * x, 0, x, y) * cx(tf.model.b().at(ui).sqrt());
            (g.clone(), blk)
        })
        .collect())
}

/// `Σ_γ Λ_γ ⊗ Θ_γ` on the model's truncated Fock space, using
/// `Λ_γ e_s = √(b_s / b_{sγ̃}) e_{sγ̃}`.
pub fn reconstruct<T: Real>(model: &FockModel<T>, theta: &[(Word, CMatrix<T>)]) -> CMatrix<T> {
    let (x, y) = theta.first().map(|(_, m)| m.shape()).unwrap_or((0, 0));
    let table = model.table();
    let b = model.b();
    let nw = table.len();
    let mut out = linalg::zeros::<T>(nw * x, nw * y);
    for (g, th) in theta {
        let rg = g.reversed();
        for (si, s) in table.words().iter().enumerate() {
            if s.len() + g.len() > model.level() {
                break;
            }
            let ui = table.index(&s.concat(&rg)).expect("within level");
            let w = (b.at(si) / b.at(ui)).sqrt();
            out.view_mut((ui * x, si * y), (x, y)).copy_from(&(th * cx(w)));
        }
    }
    out
}

/// Contractivity, multi-analyticity, the defect identity and the Fourier
/// round trip of a transfer function.
pub fn verify_transfer<T: Real>(tf: &TransferFunction<T>, max_level: usize, tol: T) -> Result<VerificationReport> {
    let model = tf.model();
    let col = tf.colligation();
    let dims = col.dims();
    let f = model.f();
    let k = f.k();
    let level = tf.level();
    let (x, y, e) = (dims.x(), dims.y(), dims.e());
    let nw = model.dim();
    let mut rep = VerificationReport::new();
    rep.set_env("transfer.level", level);
    rep.set_env("transfer.fourier_max_level", max_level);

    let norm = linalg::op_norm(&tf.phi);
    rep.set_env("transfer.norm", format!("{:.6e}", norm.as_f64()));
    rep.residual("transfer.contractive", (norm - T::one()).as_f64().max(0.0), tol.as_f64());

    let cols = tf.cols_up_to(level.saturating_sub(k + 1));
    let mut worst = T::zero();
    for i in 0..f.n() {
        let wi = model.left().get(i);
        let lhs = &tf.phi * linalg::kron(wi, &linalg::identity(y));
        let rhs = linalg::kron(wi, &linalg::identity(x)) * &tf.phi;
        let all_rows: Vec<usize> = (0..nw * x).collect();
        let r = linalg::restricted_norm(&(lhs - rhs), &all_rows, &cols);
        if r > worst {
            worst = r;
        }
    }
    rep.residual("transfer.multi_analytic", worst.as_f64(), tol.as_f64());

    // I − φφ* = (I⊗C*)(I−L)^{-1}(I − ΓΓ*)(I−L*)^{-1}(I⊗C)
    let r = resolvent_solve(model, col, &linalg::identity(nw * e));
    let mut gg = linalg::zeros::<T>(nw, nw);
    for (alpha, a) in f.terms() {
        let lam = model.right_word(&alpha.reversed());
        gg += (&lam * lam.adjoint()) * cx(*a);
    }
    let inner = linalg::kron(&(linalg::identity::<T>(nw) - gg), &linalg::identity(e));
    let ic = linalg::kron(&linalg::identity(nw), &col.c());
    let rhs = ic.adjoint() * &r * inner * r.adjoint() * &ic;
    let lhs = linalg::identity::<T>(nw * x) - &tf.phi * tf.phi.adjoint();
    let keep = tf.rows_up_to(level.saturating_sub(k));
    rep.residual("transfer.defect_identity", linalg::restricted_norm(&(lhs - rhs), &keep, &keep).as_f64(), tol.as_f64());

    let extracted = fourier_coefficients(tf, max_level)?;
    let series = fourier_series(col, f, max_level);
    let mut agree = T::zero();
    for ((_, a), (_, b)) in extracted.iter().zip(&series) {
        let r = linalg::op_norm(&(a - b));
        if r > agree {
            agree = r;
        }
    }
    rep.residual("transfer.fourier_two_routes", agree.as_f64(), tol.as_f64());
    let rebuilt = reconstruct(model, &extracted);
    let rows = tf.rows_up_to(max_level);
    let all_cols: Vec<usize> = (0..nw * y).collect();
    rep.residual(
        "transfer.fourier_round_trip",
        linalg::restricted_norm(&(rebuilt - &tf.phi), &rows, &all_cols).as_f64(),
        tol.as_f64(),
    );
    Ok(rep)
}

/// Embeds a Poisson kernel into `F²_N ⊗ X` (zero on the padding of `X`).
pub(crate) fn pad_kernel<T: Real>(kernel: &CMatrix<T>, rank: usize, x: usize) -> CMatrix<T> {
    let words = kernel.nrows().checked_div(rank).unwrap_or(0);
    let mut out = linalg::zeros::<T>(words * x, kernel.ncols());
    for w in 0..words {
        out.view_mut((w * x, 0), (rank, kernel.ncols())).copy_from(&kernel.rows(w * rank, rank));
    }
    out
}

/// `K_{T1'} T_{2,β}* = (1/√c_β) φ_(β)* K_{T1}` for every `β`, together with
/// the creation intertwinings of both kernels.
pub fn dilation_identity_check<T: Real>(
    triple: &IntertwiningTriple<T>,
    tf: &TransferFunction<T>,
    k1: &PoissonKernel<T>,
    k1p: &PoissonKernel<T>,
    tol: T,
) -> Result<VerificationReport> {
    let dims = tf.colligation().dims();
    if k1.level() != tf.level() || k1p.level() != tf.level() {
        return Err(invalid("kernels and transfer function must share the truncation level"));
    }
    if k1.rank() != dims.d1 || k1p.rank() != dims.d1p {
        return Err(invalid("kernel defect ranks differ from the colligation"));
    }
    let g = triple.g();
    let k1x = pad_kernel(k1.matrix(), k1.rank(), dims.x());
    let mut rep = VerificationReport::new();
    rep.set_env("dilation.level", tf.level());
    let mut worst = T::zero();
    for (j, beta) in g.words().iter().enumerate() {
        let c = g.coeff(beta);
        let lhs = k1p.matrix() * triple.t2().word(beta)?.adjoint();
        let res = if c > T::zero() {
            let rhs = tf.phi_beta(j).adjoint() * &k1x * cx(T::one() / c.sqrt());
            linalg::op_norm(&(lhs - rhs))
        } else {
            linalg::op_norm(&lhs)
        };
        rep.residual(&format!("dilation.identity[{beta}]"), res.as_f64(), tol.as_f64());
        if res > worst {
            worst = res;
        }
    }
    let model = tf.model();
    for (name, kern, t) in [("dilation.kernel1", k1, triple.t1()), ("dilation.kernel1p", k1p, triple.t1p())] {
        let mut r = T::zero();
        for i in 0..t.n() {
            let lhs = kern.matrix() * t.get(i).adjoint();
            let rhs = linalg::kron(&model.left().get(i).adjoint(), &linalg::identity(kern.rank())) * kern.matrix();
            let v = linalg::op_norm(&(lhs - rhs));
            if v > r {
                r = v;
            }
        }
        rep.residual(&format!("{name}_intertwining"), r.as_f64(), tol.as_f64());
    }
    Ok(rep)
}

/// Commutant lifting for `n2 = 1`, `g = z`: the lift `φ` of `A = T2`
/// satisfies `K_{T1'} A* = φ* K_{T1}` and, when `‖A‖ = 1`, `‖φ‖ = ‖A‖`.
pub fn commutant_lifting_check<T: Real>(
    triple: &IntertwiningTriple<T>,
    tf: &TransferFunction<T>,
    k1: &PoissonKernel<T>,
    k1p: &PoissonKernel<T>,
    tol: T,
) -> Result<VerificationReport> {
    if triple.g().n() != 1 || triple.g().k() != 1 {
        return Err(invalid("commutant lifting needs a single linear second polynomial"));
    }
    let mut rep = dilation_identity_check(triple, tf, k1, k1p, tol)?;
    let a_norm = linalg::op_norm(triple.t2().get(0)) * triple.g().coeff(&Word::letter(1)).sqrt();
    let lift_norm = linalg::op_norm(&tf.phi_beta(0));
    rep.set_env("lifting.reading", "lift_norm_equals_norm_of_A");
    rep.set_env("lifting.norm_A", format!("{:.6e}", a_norm.as_f64()));
    rep.residual("lifting.norm", (lift_norm - a_norm).abs().as_f64(), tol.as_f64());
    Ok(rep)
}
