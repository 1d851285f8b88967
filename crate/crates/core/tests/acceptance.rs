use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use ando_core::ando::{self, BatteryConfig, BatteryOutcome, PairKind};
use ando_core::colligation::{colligation_of, series_oracle, verify_colligation, IntertwiningTriple};
use ando_core::domain::{apply_phi, apply_phi_power, BCoefficients, FockModel, OperatorTuple, RegularPolynomial};
use ando_core::linalg::{self, CMatrix};
use ando_core::poisson::{poisson_kernel, verify_kernel_identities};
use ando_core::report::CheckKind;
use ando_core::sample;
use ando_core::scalar::{cx, cx_f64, C};
use ando_core::transfer::{commutant_lifting_check, dilation_identity_check, eval_transfer, verify_transfer};
use ando_core::variety::{
    build_variety, commutator_ideal, constrained_poisson, kappa_eval, minimal_polynomial, minimal_polynomial_ideal,
    verify_constrained_kernel,
};
use ando_core::{Word, WordTable};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn f_battery() -> Vec<RegularPolynomial<f64>> {
    let p = |n: usize, t: &[(&[usize], f64)]| RegularPolynomial::from_terms(n, t).unwrap();
    vec![
        p(1, &[(&[1], 1.0)]),
        p(1, &[(&[1], 2.0)]),
        p(1, &[(&[1], 1.0), (&[1, 1], 1.0)]),
        p(2, &[(&[1], 1.0), (&[2], 1.0)]),
        p(2, &[(&[1], 1.0), (&[2], 1.0), (&[1, 2], 1.0)]),
    ]
}

fn three_letter() -> RegularPolynomial<f64> {
    RegularPolynomial::from_terms(3, &[(&[1], 1.0), (&[2], 0.5), (&[3], 2.0), (&[3, 1], 0.7)]).unwrap()
}

/// Sum over all factorizations of `w` into nonempty pieces of the
/// product of their coefficients.
fn b_brute(f: &RegularPolynomial<f64>, w: &[usize]) -> f64 {
    let len = w.len();
    if len == 0 {
        return 1.0;
    }
    let mut total = 0.0;
    for cuts in 0u32..(1 << (len - 1)) {
        let mut prod = 1.0;
        let mut start = 0;
        for i in 1..=len {
            if i == len || cuts & (1 << (i - 1)) != 0 {
                prod *= f.coeff(&Word::from_letters(&w[start..i]));
                start = i;
            }
        }
        total += prod;
    }
    total
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut polys = f_battery();
    polys.push(three_letter());
    for f in &polys {
        let b = BCoefficients::new(f, 6);
        for (i, w) in b.table().words().iter().enumerate() {
            worst = worst.max((b.at(i) - b_brute(f, w.letters())).abs());
        }
    }
    let fib = BCoefficients::new(&f_battery()[2], 6);
    let seq: Vec<f64> = fib.values().to_vec();
    let elapsed = start.elapsed();
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    ensure(seq == [1.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0], || format!("fibonacci sequence {seq:?}"))?;
    ensure(elapsed <= Duration::from_secs(1), || format!("took {elapsed:?}"))?;
    Ok(format!("max deviation {worst:.1e}, fibonacci ok, {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let level = 8;
    let mut worst = 0.0f64;
    for f in f_battery() {
        let m = FockModel::new(&f, level);
        let phi = apply_phi(&f, m.left(), &linalg::identity(m.dim())).map_err(|e| e.to_string())?;
        let mut resid = linalg::identity::<f64>(m.dim()) - phi;
        resid[(0, 0)] -= cx(1.0);
        let keep = m.levels_up_to(level - f.k());
        worst = worst.max(linalg::restricted_norm(&resid, &keep, &keep));
    }
    let elapsed = start.elapsed();
    ensure(worst <= 1e-10, || format!("residual {worst:e}"))?;
    ensure(elapsed <= Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("max residual {worst:.1e} at N = {level}, {elapsed:.2?}"))
}

fn criterion_3() -> Outcome {
    let polys = f_battery();
    let mut worst_int = 0.0f64;
    let mut worst_iso = 0.0f64;
    for seed in 0..20u64 {
        let f = &polys[seed as usize % polys.len()];
        let dim = 2 + (seed % 4) as usize;
        let t = sample::nilpotent_tuple::<f64>(seed, dim, f.n(), f, 0.9);
        let k = poisson_kernel(f, &t, dim, 1e-9).map_err(|e| e.to_string())?;
        let rep = verify_kernel_identities(f, &t, &k, 1e-9).map_err(|e| e.to_string())?;
        for c in rep.checks().iter().filter(|c| c.name.starts_with("kernel.intertwining")) {
            worst_int = worst_int.max(c.value);
        }
        let gram = k.matrix().adjoint() * k.matrix();
        worst_iso = worst_iso.max(linalg::op_norm(&(gram - linalg::identity::<f64>(dim))));
    }
    ensure(worst_int <= 1e-9 && worst_iso <= 1e-9, || format!("intertwining {worst_int:e}, isometry {worst_iso:e}"))?;
    let mut worst_gap = f64::NEG_INFINITY;
    for (f, point) in [
        (RegularPolynomial::<f64>::linear(1), vec![0.7]),
        (RegularPolynomial::<f64>::linear(1), vec![-0.95]),
        (RegularPolynomial::<f64>::linear(2), vec![0.5, -0.6]),
    ] {
        let t = OperatorTuple::new(point.iter().map(|&v| linalg::from_real(1, 1, &[v])).collect()).unwrap();
        for level in [3usize, 8, 15] {
            let k = poisson_kernel(&f, &t, level, 1e-12).map_err(|e| e.to_string())?;
            let gap = linalg::op_norm(&(k.matrix().adjoint() * k.matrix() - linalg::identity::<f64>(1)));
            let tail = linalg::op_norm(&apply_phi_power(&f, &t, &linalg::identity(1), level + 1).unwrap());
            ensure(gap <= tail + 1e-12, || format!("scalar gap {gap:e} above tail {tail:e} at N = {level}"))?;
            worst_gap = worst_gap.max(gap - tail);
        }
    }
    Ok(format!("intertwining {worst_int:.1e}, isometry {worst_iso:.1e}, scalar gap - tail ≤ {worst_gap:.1e}"))
}

fn block_diag(m: &CMatrix<f64>) -> CMatrix<f64> {
    let d = m.nrows();
    let mut out = linalg::zeros::<f64>(2 * d, 2 * d);
    out.view_mut((0, 0), (d, d)).copy_from(m);
    out.view_mut((d, d), (d, d)).copy_from(m);
    out
}

/// Nilpotent triple `(T1, T1', T2)`; odd seeds use `H' = H ⊕ H`.
fn nilpotent_triple(seed: u64) -> IntertwiningTriple<f64> {
    let mut rng = sample::rng(1000 + seed);
    let dim = 2 + (seed % 3) as usize;
    let s = sample::random_strict_upper::<f64, _>(&mut rng, dim);
    let f = match seed % 3 {
        0 => RegularPolynomial::from_terms(1, &[(&[1], 1.0), (&[1, 1], 1.0)]).unwrap(),
        1 => RegularPolynomial::from_terms(2, &[(&[1], 1.0), (&[2], 0.5), (&[1, 2], 0.3)]).unwrap(),
        _ => RegularPolynomial::linear(1),
    };
    let t1 = if f.n() == 2 {
        OperatorTuple::new(vec![s.clone(), &s * &s * cx(0.7) + &s * cx(-0.2)]).unwrap()
    } else {
        OperatorTuple::new(vec![s.clone()]).unwrap()
    };
    let t1 = sample::scale_to(&f, &t1, 0.85);
    let two = seed % 2 == 1;
    let g = if seed % 4 == 3 { RegularPolynomial::linear(2) } else { RegularPolynomial::linear(1) };
    let q = |a: f64, b: f64| &s * cx(a) + &s * &s * cx(b);
    let blocks: Vec<CMatrix<f64>> = (0..g.n())
        .map(|j| {
            let first = q(1.0, 0.5 - 0.3 * j as f64);
            if two {
                linalg::hstack(&[&first, &q(-0.4, 0.2)])
            } else {
                first
            }
        })
        .collect();
    let t2 = sample::scale_to(&g, &OperatorTuple::new(blocks).unwrap(), 0.6);
    let t1p = if two {
        OperatorTuple::new(t1.mats().iter().map(block_diag).collect()).unwrap()
    } else {
        t1.clone()
    };
    IntertwiningTriple::new(f, g, t1, t1p, t2, 1e-9).unwrap()
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_series = 0.0f64;
    for seed in 0..50u64 {
        let tr = nilpotent_triple(seed);
        let (iso, col) = colligation_of(&tr, 1e-9).map_err(|e| e.to_string())?;
        let rep = verify_colligation(&iso, &col, 1e-10);
        ensure(rep.passed(), || format!("seed {seed}:\n{}", rep.to_table()))?;
        worst = worst.max(col.unitarity_residual()).max(col.action_residual());
        let rep = series_oracle(&tr, &iso, &col, 3, 1e-10).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || format!("series, seed {seed}:\n{}", rep.to_table()))?;
        worst_series = worst_series.max(rep.max_residual().unwrap_or(0.0));
    }
    Ok(format!("unitarity/action {worst:.1e}, series {worst_series:.1e} over 50 triples"))
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let tr = nilpotent_triple(seed);
        let (_, col) = colligation_of(&tr, 1e-9).map_err(|e| e.to_string())?;
        let level = tr.t1().dim() + 1;
        let tf = eval_transfer(&col, tr.f(), level).map_err(|e| e.to_string())?;
        let k1 = poisson_kernel(tr.f(), tr.t1(), level, 1e-9).map_err(|e| e.to_string())?;
        let k1p = poisson_kernel(tr.f(), tr.t1p(), level, 1e-9).map_err(|e| e.to_string())?;
        let rep = dilation_identity_check(&tr, &tf, &k1, &k1p, 1e-7).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || format!("seed {seed}:\n{}", rep.to_table()))?;
        worst = worst.max(rep.max_residual().unwrap_or(0.0));
    }
    let z = RegularPolynomial::<f64>::linear(1);
    let mut lift = 0.0f64;
    for seed in 0..10u64 {
        let dim = 2 + (seed % 3) as usize;
        let mut rng = sample::rng(500 + seed);
        let s = sample::random_strict_upper::<f64, _>(&mut rng, dim);
        let t1 = sample::scale_to(&z, &OperatorTuple::new(vec![s.clone()]).unwrap(), 0.9);
        let a = &s * cx_f64(0.8, 0.1) + &s * &s * cx(0.4);
        let a = &a * cx(1.0 / linalg::op_norm(&a));
        let tr = IntertwiningTriple::new(z.clone(), z.clone(), t1.clone(), t1.clone(), OperatorTuple::new(vec![a]).unwrap(), 1e-9)
            .map_err(|e| e.to_string())?;
        let (_, col) = colligation_of(&tr, 1e-9).map_err(|e| e.to_string())?;
        let level = dim + 1;
        let tf = eval_transfer(&col, &z, level).map_err(|e| e.to_string())?;
        let k = poisson_kernel(&z, &t1, level, 1e-9).map_err(|e| e.to_string())?;
        let rep = commutant_lifting_check(&tr, &tf, &k, &k, 1e-8).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || format!("lifting seed {seed}:\n{}", rep.to_table()))?;
        lift = lift.max(rep.check("lifting.norm").map_or(f64::NAN, |c| c.value));
    }
    Ok(format!("dilation identity {worst:.1e}, | ‖lift‖ − ‖A‖ | ≤ {lift:.1e}"))
}

fn criterion_6() -> Outcome {
    let mut worst = [0.0f64; 3];
    for seed in 0..50u64 {
        let tr = nilpotent_triple(seed);
        let (_, col) = colligation_of(&tr, 1e-9).map_err(|e| e.to_string())?;
        let level = if tr.f().n() == 2 { 5 } else { 7 };
        let tf = eval_transfer(&col, tr.f(), level).map_err(|e| e.to_string())?;
        let rep = verify_transfer(&tf, level - tr.f().k(), 1e-8).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || format!("seed {seed}:\n{}", rep.to_table()))?;
        let get = |n: &str| rep.check(n).map_or(f64::NAN, |c| c.value);
        worst[0] = worst[0].max(get("transfer.fourier_round_trip"));
        worst[1] = worst[1].max(linalg::op_norm(tf.matrix()));
        worst[2] = worst[2].max(get("transfer.defect_identity"));
    }
    ensure(worst[1] <= 1.0 + 1e-8, || format!("σ_max {}", worst[1]))?;
    Ok(format!("round trip {:.1e}, σ_max {:.12}, defect identity {:.1e}", worst[0], worst[1], worst[2]))
}

fn binom(n: usize, k: usize) -> usize {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

fn battery() -> &'static (BatteryOutcome, Duration) {
    static CELL: OnceLock<(BatteryOutcome, Duration)> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let out = ando::run_battery(&BatteryConfig::default()).expect("battery runs");
        (out, start.elapsed())
    })
}

fn criterion_7() -> Outcome {
    let (out, elapsed) = battery();
    let rep = &out.report;
    ensure(out.items.len() == 100, || format!("{} items", out.items.len()))?;
    ensure(out.items.iter().all(|i| i.dim <= 6), || "dimension above 6".into())?;
    for k in PairKind::ALL {
        ensure(out.items.iter().any(|i| i.kind == k), || format!("no {k} items"))?;
    }
    ensure(ando::battery_bipolys(1, 1).iter().filter(|p| p.1.k == 1).count() == 10, || "bipolynomial count".into())?;
    ensure(ando::battery_hermitian(1, 1).iter().filter(|p| p.1.k == 1).count() == 3, || "hermitian count".into())?;
    let slack = rep
        .checks()
        .iter()
        .filter(|c| c.kind == CheckKind::Slack && c.name.ends_with(".slack"))
        .map(|c| c.value)
        .fold(f64::INFINITY, f64::min);
    ensure(slack >= -1e-6, || format!("minimum slack {slack:e}"))?;
    let mut compression = 0.0f64;
    for item in out.items.iter().filter(|i| i.nilpotent()) {
        let prefix = format!("item[{:03}].", item.index);
        for c in rep.checks().iter().filter(|c| c.name.starts_with(&prefix) && c.name.contains(".compression[")) {
            compression = compression.max(c.value);
        }
    }
    ensure(compression <= 1e-7, || format!("compression residual {compression:e}"))?;
    let grid: Vec<_> = rep.checks().iter().filter(|c| c.name.contains(".grid.")).collect();
    ensure(!grid.is_empty() && grid.iter().all(|c| c.pass), || "grid comparison failed".into())?;
    ensure(rep.passed(), || format!("{} failed checks:\n{}", rep.failed(), rep.to_table()))?;
    ensure(*elapsed <= Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{} checks, min slack {slack:.1e}, nilpotent compression {compression:.1e}, {} grid checks, {elapsed:.1?}",
        rep.checks().len(),
        grid.len()
    ))
}

fn criterion_8() -> Outcome {
    for n in [2usize, 3] {
        let v = build_variety(&RegularPolynomial::<f64>::linear(n), 6, commutator_ideal(n)).map_err(|e| e.to_string())?;
        for (m, d) in v.level_dims().into_iter().enumerate() {
            ensure(d == binom(n + m - 1, m), || format!("n = {n}, m = {m}: {d}"))?;
        }
    }
    let f = RegularPolynomial::<f64>::from_terms(1, &[(&[1], 1.0), (&[1, 1], 0.5)]).unwrap();
    let mut worst_kjk = 0.0f64;
    for seed in 0..6u64 {
        let dim = 2 + (seed % 3) as usize;
        let mut rng = sample::rng(700 + seed);
        let eig: Vec<C<f64>> = (0..dim).map(|j| cx_f64(0.4 * ((j as f64) * 1.7 + seed as f64).cos(), 0.3 * (j as f64 - 0.5))).collect();
        let upper = sample::random_strict_upper::<f64, _>(&mut rng, dim) * cx(0.3);
        let t = CMatrix::<f64>::from_fn(dim, dim, |i, j| if i == j { eig[i] } else { upper[(i, j)] });
        let t = sample::scale_to(&f, &OperatorTuple::new(vec![t]).unwrap(), 0.7);
        let m = minimal_polynomial(t.get(0), 1e-10).map_err(|e| e.to_string())?;
        ensure(m.len() - 1 == dim, || format!("minimal polynomial degree {} for dimension {dim}", m.len() - 1))?;
        let (level, _) = ando::purity_horizon(&f, &t, 200).map_err(|e| e.to_string())?;
        let v = ando::natural_variety(&f, &t, level, 200, 1e-10).map_err(|e| e.to_string())?;
        let q = minimal_polynomial_ideal(&m);
        let next = build_variety(&f, v.level() + 1, vec![q]).map_err(|e| e.to_string())?;
        ensure(v.dim() == dim && next.dim() == dim, || format!("model space dims {} and {}", v.dim(), next.dim()))?;
        let kj = constrained_poisson(&f, &v, &t, 1e-9).map_err(|e| e.to_string())?;
        let rep = verify_constrained_kernel(&v, &t, &kj, 3, 1e-9).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || format!("seed {seed}:\n{}", rep.to_table()))?;
        worst_kjk = worst_kjk.max(rep.max_residual().unwrap_or(0.0));
    }
    let two = RegularPolynomial::<f64>::linear(2);
    for seed in 0..4u64 {
        let mut rng = sample::rng(800 + seed);
        let s = sample::random_strict_upper::<f64, _>(&mut rng, 3);
        let t = sample::scale_to(&two, &OperatorTuple::new(vec![s.clone(), &s * &s + &s * cx(0.5)]).unwrap(), 0.8);
        let v = build_variety(&two, 3, commutator_ideal(2)).map_err(|e| e.to_string())?;
        let kj = constrained_poisson(&two, &v, &t, 1e-9).map_err(|e| e.to_string())?;
        let rep = verify_constrained_kernel(&v, &t, &kj, 3, 1e-9).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || format!("symmetric seed {seed}:\n{}", rep.to_table()))?;
        worst_kjk = worst_kjk.max(rep.max_residual().unwrap_or(0.0));
    }
    let (out, _) = battery();
    let ell: Vec<f64> = out.report.checks().iter().filter(|c| c.name.ends_with("dilation.ellipsoid")).map(|c| c.value).collect();
    let min_ell = ell.iter().copied().fold(f64::INFINITY, f64::min);
    ensure(!ell.is_empty() && min_ell >= -1e-9, || format!("ellipsoid eigenvalue {min_ell:e}"))?;
    Ok(format!("symmetric dims exact, model spaces stable, K_J residual {worst_kjk:.1e}, ψ ellipsoid min {min_ell:.1e} over {} dilations", ell.len()))
}

fn scale_into(f: &RegularPolynomial<f64>, p: &[C<f64>], target: f64) -> Vec<C<f64>> {
    let load = |s: f64| -> f64 {
        let q: Vec<C<f64>> = p.iter().map(|z| z * s).collect();
        f.terms().iter().map(|(w, a)| a * w.letters().iter().fold(cx(1.0), |m, &l| m * q[l - 1]).norm_sqr()).sum()
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    while load(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if load(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    p.iter().map(|z| z * lo).collect()
}

fn criterion_9() -> Outcome {
    use rand::Rng;
    let polys = f_battery();
    let mut rng = sample::rng(9);
    let mut worst = 0.0f64;
    let mut worst_words = 0.0f64;
    for i in 0..20 {
        let f = &polys[i % polys.len()];
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<C<f64>> {
            let p: Vec<C<f64>> = (0..f.n()).map(|_| cx_f64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let target = rng.gen_range(0.05..0.8);
            scale_into(f, &p, target)
        };
        let mu = draw(&mut rng);
        let la = draw(&mut rng);
        let k = kappa_eval(f, &mu, &la, 20).map_err(|e| e.to_string())?;
        let err = (k.closed - k.partial).norm();
        ensure(err <= k.tail_bound, || format!("pair {i}: error {err:e} above bound {:e}", k.tail_bound))?;
        worst = worst.max(err / k.tail_bound.max(f64::MIN_POSITIVE));
        let order = 8;
        let b = BCoefficients::new(f, order);
        let table = WordTable::new(f.n(), order);
        let direct: C<f64> = table
            .words()
            .iter()
            .enumerate()
            .map(|(idx, w)| {
                let m = w.letters().iter().fold(cx(1.0), |acc, &l| acc * mu[l - 1] * la[l - 1].conj());
                m * b.at(idx)
            })
            .sum();
        let short = kappa_eval(f, &mu, &la, order).map_err(|e| e.to_string())?;
        worst_words = worst_words.max((direct - short.partial).norm());
    }
    ensure(worst_words <= 1e-12, || format!("word expansion differs by {worst_words:e}"))?;
    Ok(format!("error / tail bound ≤ {worst:.2}, word-sum oracle {worst_words:.1e}"))
}

fn criterion_10() -> Outcome {
    let (first, _) = battery();
    let again = ando::run_battery(&BatteryConfig::default()).map_err(|e| e.to_string())?;
    let a = first.report.to_structured();
    let b = again.report.to_structured();
    ensure(a == b, || "structured reports differ".into())?;
    Ok(format!("{} bytes identical across runs", a.len()))
}

type Criterion = (u8, &'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "b-coefficient oracle", criterion_1),
        (2, "vacuum projection", criterion_2),
        (3, "Poisson kernel", criterion_3),
        (4, "colligation", criterion_4),
        (5, "dilation identity and commutant lifting", criterion_5),
        (6, "transfer function round trip", criterion_6),
        (7, "Ando inequality battery", criterion_7),
        (8, "variety structure", criterion_8),
        (9, "kernel series cross-check", criterion_9),
        (10, "determinism", criterion_10),
    ];
    let mut failed = 0;
    for (id, title, run) in criteria {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match result {
            Ok(detail) => println!("PASS criterion {id:>2} {title}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {id:>2} {title}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
